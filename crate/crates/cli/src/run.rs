//! Parallel evaluation with a single ordered writer.

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::mpsc;

use rayon::prelude::*;

use crate::sink::{Cell, Sink};
use crate::CliError;

/// Evaluates `f` on every item using `jobs` threads (0 picks the core count) and
/// writes the resulting rows in item order. Stops at the first failing item;
/// rows of all earlier items are already on disk when the error is returned.
pub fn run_ordered<I, F>(jobs: usize, items: &[I], f: F, sink: &mut Sink) -> Result<(), CliError>
where
    I: Sync,
    F: Fn(&I) -> Result<Vec<Vec<Cell>>, CliError> + Sync,
{
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| CliError::new(1, format!("cannot start worker pool: {e}")))?;
    let (tx, rx) = mpsc::channel();
    let cancel = AtomicBool::new(false);
    let (f, cancel_ref) = (&f, &cancel);
    let mut result = Ok(());
    pool.in_place_scope(|s| {
        s.spawn(move |_| {
            items.par_iter().enumerate().for_each_with(tx, |tx, (i, item)| {
                let r = if cancel_ref.load(Ordering::Relaxed) { Err(CliError::cancelled()) } else { f(item) };
                let _ = tx.send((i, r));
            });
        });
        let mut pending = BTreeMap::new();
        let mut next = 0;
        for (i, r) in rx {
            pending.insert(i, r);
            while let Some(r) = pending.remove(&next) {
                next += 1;
                if result.is_err() {
                    continue;
                }
                result = r.and_then(|rows| rows.iter().try_for_each(|row| sink.write(row)));
                if result.is_err() {
                    cancel.store(true, Ordering::Relaxed);
                }
            }
        }
    });
    result
}
