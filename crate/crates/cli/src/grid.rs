//! Parsing of numeric grids and lists given on the command line.

use crate::CliError;

/// `a:b:n` (n evenly spaced points, both ends included), `v1,v2,...` or a single value.
pub fn parse_grid(s: &str) -> Result<Vec<f64>, CliError> {
    let bad = |what: &str| CliError::parse(format!("bad grid '{s}': {what}"));
    let parts: Vec<&str> = s.split(':').collect();
    let values = match parts.as_slice() {
        [a, b, n] => {
            let a: f64 = a.trim().parse().map_err(|_| bad("start is not a number"))?;
            let b: f64 = b.trim().parse().map_err(|_| bad("end is not a number"))?;
            let n: usize = n.trim().parse().map_err(|_| bad("count is not an integer"))?;
            match n {
                0 => return Err(bad("count must be positive")),
                1 => vec![a],
                _ => (0..n).map(|k| a + (b - a) * k as f64 / (n - 1) as f64).collect(),
            }
        }
        [_] => parse_list::<f64>(s)?,
        _ => return Err(bad("expected a:b:n or a comma list")),
    };
    if values.iter().any(|v| !v.is_finite()) {
        return Err(bad("values must be finite"));
    }
    Ok(values)
}

/// Comma-separated list; empty entries are rejected.
pub fn parse_list<T: std::str::FromStr>(s: &str) -> Result<Vec<T>, CliError> {
    let items: Result<Vec<T>, _> = s.split(',').map(|t| t.trim().parse::<T>()).collect();
    match items {
        Ok(v) if !v.is_empty() => Ok(v),
        _ => Err(CliError::parse(format!("bad list '{s}'"))),
    }
}
