//! A small modelling layer for semidefinite programs over Hermitian matrix variables.
//!
//! Programs maximize a real linear objective subject to scalar equalities,
//! scalar inequalities (`≤`) and PSD membership of selected variables. They are
//! lowered to a real conic program and solved with Clarabel; every reported
//! optimum is re-checked independently before it is trusted.
//!
//! Each `n×n` variable is parametrized by real numbers: the diagonal, then the
//! strict upper triangle of the real part, then (complex variables only) the
//! strict upper triangle of the imaginary part.

use std::collections::BTreeMap;
use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use clarabel::algebra::CscMatrix;
use clarabel::solver::{
    DefaultSettingsBuilder, DefaultSolver, IPSolver, SolverStatus, SupportedConeT,
};
use nalgebra::{Complex, DMatrix};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::qmath::{self, ComplexMatrix};

/// Handle to a declared variable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct VarId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum FieldKind {
    Real,
    Complex,
}

#[derive(Debug, Clone, Serialize)]
pub struct Variable {
    pub dim: usize,
    pub field: FieldKind,
    pub psd: bool,
    /// Index of the first parameter in the global decision vector.
    pub offset: usize,
}

impl Variable {
    fn params(&self) -> usize {
        let n = self.dim;
        match self.field {
            FieldKind::Real => n * (n + 1) / 2,
            FieldKind::Complex => n * n,
        }
    }

    fn upper_index(&self, i: usize, j: usize) -> usize {
        // position of (i, j), i < j, in the row-major strict upper triangle
        let n = self.dim;
        i * n - i * (i + 1) / 2 + (j - i - 1)
    }

    fn re_param(&self, i: usize, j: usize) -> usize {
        let (i, j) = (i.min(j), i.max(j));
        if i == j {
            self.offset + i
        } else {
            self.offset + self.dim + self.upper_index(i, j)
        }
    }

    fn im_param(&self, i: usize, j: usize) -> Option<(usize, f64)> {
        if self.field == FieldKind::Real || i == j {
            return None;
        }
        let n = self.dim;
        let upper = n * (n - 1) / 2;
        let (lo, hi, sign) = if i < j { (i, j, 1.0) } else { (j, i, -1.0) };
        Some((self.offset + n + upper + self.upper_index(lo, hi), sign))
    }
}

/// Real affine expression in the decision parameters.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct LinExpr {
    pub terms: BTreeMap<usize, f64>,
    pub constant: f64,
}

impl LinExpr {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn constant(c: f64) -> Self {
        Self { terms: BTreeMap::new(), constant: c }
    }

    pub fn add_term(&mut self, param: usize, coef: f64) {
        if coef != 0.0 {
            *self.terms.entry(param).or_insert(0.0) += coef;
        }
    }

    pub fn scaled(mut self, k: f64) -> Self {
        for v in self.terms.values_mut() {
            *v *= k;
        }
        self.constant *= k;
        self
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.constant + self.terms.iter().map(|(&i, &c)| c * x[i]).sum::<f64>()
    }

    pub fn is_constant(&self) -> bool {
        self.terms.values().all(|&c| c == 0.0)
    }
}

impl AddAssign<&LinExpr> for LinExpr {
    fn add_assign(&mut self, rhs: &LinExpr) {
        for (&i, &c) in &rhs.terms {
            self.add_term(i, c);
        }
        self.constant += rhs.constant;
    }
}

impl AddAssign for LinExpr {
    fn add_assign(&mut self, rhs: LinExpr) {
        *self += &rhs;
    }
}

impl Add for LinExpr {
    type Output = LinExpr;
    fn add(mut self, rhs: LinExpr) -> LinExpr {
        self += &rhs;
        self
    }
}

impl Sub for LinExpr {
    type Output = LinExpr;
    fn sub(mut self, rhs: LinExpr) -> LinExpr {
        self += &rhs.scaled(-1.0);
        self
    }
}

impl Neg for LinExpr {
    type Output = LinExpr;
    fn neg(self) -> LinExpr {
        self.scaled(-1.0)
    }
}

impl Mul<f64> for LinExpr {
    type Output = LinExpr;
    fn mul(self, k: f64) -> LinExpr {
        self.scaled(k)
    }
}

impl std::iter::Sum for LinExpr {
    fn sum<I: Iterator<Item = LinExpr>>(iter: I) -> LinExpr {
        iter.fold(LinExpr::zero(), |acc, e| acc + e)
    }
}

/// One summand on the left of a matrix equality.
#[derive(Debug, Clone)]
pub enum MatrixTerm {
    /// `coef · X`.
    Var(VarId, f64),
    /// `t · C` for a 1×1 variable `t` and a constant matrix `C`.
    ScalarTimes(VarId, ComplexMatrix),
}

#[derive(Debug, Clone, Serialize)]
pub struct Row {
    pub expr: LinExpr,
    pub rhs: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SolveOptions {
    pub eps: f64,
    pub max_iter: u32,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self { eps: 1e-8, max_iter: 50_000 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    Inaccurate,
    Failed,
}

/// Outcome of a solve, including an independent re-check of the primal point.
#[derive(Debug, Clone, Serialize)]
pub struct SolveReport {
    pub status: SolveStatus,
    pub value: Option<f64>,
    #[serde(skip)]
    pub primal: Vec<ComplexMatrix>,
    #[serde(skip)]
    params: Vec<f64>,
    pub solver_tol: f64,
    pub iterations: u32,
    /// Largest violation of an equality or inequality row at the primal point.
    pub max_residual: f64,
    /// Smallest eigenvalue over all PSD variables at the primal point.
    pub min_psd_eigenvalue: f64,
    pub backend_status: String,
}

impl SolveReport {
    pub fn has_value(&self) -> bool {
        self.value.is_some()
    }

    pub fn matrix(&self, v: VarId) -> &ComplexMatrix {
        &self.primal[v.0]
    }

    pub fn scalar(&self, v: VarId) -> f64 {
        self.primal[v.0][(0, 0)].re
    }

    pub fn eval(&self, e: &LinExpr) -> f64 {
        e.eval(&self.params)
    }

    /// The optimum, or the error a caller should surface for a non-solution.
    pub fn require_value(&self) -> Result<f64> {
        match (self.status, self.value) {
            (SolveStatus::Optimal | SolveStatus::Inaccurate, Some(v)) => Ok(v),
            (SolveStatus::Infeasible, _) => Err(Error::InfeasibleData(format!(
                "program is infeasible (backend status {})",
                self.backend_status
            ))),
            _ => Err(Error::Solver(format!("solve failed with backend status {}", self.backend_status))),
        }
    }
}

/// A maximization problem over Hermitian (or real symmetric) matrix variables.
#[derive(Debug, Clone, Default, Serialize)]
pub struct ConicProgram {
    variables: Vec<Variable>,
    params: usize,
    equalities: Vec<Row>,
    inequalities: Vec<Row>,
    objective: LinExpr,
}

impl ConicProgram {
    pub fn new() -> Self {
        Self::default()
    }

    fn add_variable(&mut self, dim: usize, field: FieldKind, psd: bool) -> VarId {
        let v = Variable { dim, field, psd, offset: self.params };
        self.params += v.params();
        self.variables.push(v);
        VarId(self.variables.len() - 1)
    }

    pub fn add_hermitian(&mut self, dim: usize, psd: bool) -> VarId {
        self.add_variable(dim, FieldKind::Complex, psd)
    }

    pub fn add_symmetric(&mut self, dim: usize, psd: bool) -> VarId {
        self.add_variable(dim, FieldKind::Real, psd)
    }

    /// A real scalar; `nonneg` makes it a 1×1 PSD variable.
    pub fn add_scalar(&mut self, nonneg: bool) -> VarId {
        self.add_variable(1, FieldKind::Real, nonneg)
    }

    pub fn variable(&self, v: VarId) -> &Variable {
        &self.variables[v.0]
    }

    pub fn num_variables(&self) -> usize {
        self.variables.len()
    }

    pub fn num_params(&self) -> usize {
        self.params
    }

    pub fn num_equalities(&self) -> usize {
        self.equalities.len()
    }

    /// `Re X_ij`.
    pub fn re(&self, v: VarId, i: usize, j: usize) -> LinExpr {
        let mut e = LinExpr::zero();
        e.add_term(self.variables[v.0].re_param(i, j), 1.0);
        e
    }

    /// `Im X_ij`.
    pub fn im(&self, v: VarId, i: usize, j: usize) -> LinExpr {
        let mut e = LinExpr::zero();
        if let Some((k, s)) = self.variables[v.0].im_param(i, j) {
            e.add_term(k, s);
        }
        e
    }

    pub fn scalar(&self, v: VarId) -> LinExpr {
        self.re(v, 0, 0)
    }

    pub fn trace(&self, v: VarId) -> LinExpr {
        (0..self.variables[v.0].dim).map(|i| self.re(v, i, i)).sum()
    }

    /// `Re Tr(C X)`.
    pub fn trace_with(&self, v: VarId, c: &ComplexMatrix) -> LinExpr {
        let n = self.variables[v.0].dim;
        let mut e = LinExpr::zero();
        for i in 0..n {
            for j in 0..n {
                let cij = c[(i, j)];
                // Re(C_ij X_ji) = Re C_ij Re X_ji - Im C_ij Im X_ji
                if cij.re != 0.0 {
                    e += &self.re(v, j, i).scaled(cij.re);
                }
                if cij.im != 0.0 {
                    e += &self.im(v, j, i).scaled(-cij.im);
                }
            }
        }
        e
    }

    pub fn add_eq(&mut self, expr: LinExpr, rhs: f64) {
        let rhs = rhs - expr.constant;
        let expr = LinExpr { constant: 0.0, ..expr };
        if expr.is_constant() && rhs == 0.0 {
            return;
        }
        self.equalities.push(Row { expr, rhs });
    }

    /// `expr ≤ rhs`.
    pub fn add_le(&mut self, expr: LinExpr, rhs: f64) {
        let rhs = rhs - expr.constant;
        let expr = LinExpr { constant: 0.0, ..expr };
        self.inequalities.push(Row { expr, rhs });
    }

    /// `Σ terms = rhs` as an equality of Hermitian matrices, expanded entrywise
    /// over the upper triangle.
    pub fn add_matrix_eq(&mut self, terms: &[MatrixTerm], rhs: &ComplexMatrix) -> Result<()> {
        let n = rhs.nrows();
        if rhs.ncols() != n {
            return Err(Error::DimensionMismatch("matrix equality needs a square right-hand side".into()));
        }
        for t in terms {
            let dim = match t {
                MatrixTerm::Var(v, _) => self.variables[v.0].dim,
                MatrixTerm::ScalarTimes(v, c) => {
                    if self.variables[v.0].dim != 1 {
                        return Err(Error::DimensionMismatch("ScalarTimes needs a 1×1 variable".into()));
                    }
                    c.nrows()
                }
            };
            if dim != n {
                return Err(Error::DimensionMismatch(format!("matrix term of size {dim} in an equality of size {n}")));
            }
        }
        let complex = qmath::max_abs(&rhs.map(|z| Complex::new(0.0, z.im))) > 0.0
            || terms.iter().any(|t| match t {
                MatrixTerm::Var(v, _) => self.variables[v.0].field == FieldKind::Complex,
                MatrixTerm::ScalarTimes(_, c) => c.iter().any(|z| z.im != 0.0),
            });
        for i in 0..n {
            for j in i..n {
                let mut re = LinExpr::zero();
                let mut im = LinExpr::zero();
                for t in terms {
                    match t {
                        MatrixTerm::Var(v, k) => {
                            re += &self.re(*v, i, j).scaled(*k);
                            im += &self.im(*v, i, j).scaled(*k);
                        }
                        MatrixTerm::ScalarTimes(v, c) => {
                            let s = self.scalar(*v);
                            re += &s.clone().scaled(c[(i, j)].re);
                            im += &s.scaled(c[(i, j)].im);
                        }
                    }
                }
                self.add_eq(re, rhs[(i, j)].re);
                if complex && i != j {
                    self.add_eq(im, rhs[(i, j)].im);
                }
            }
        }
        Ok(())
    }

    /// Sets the objective to `maximize expr`.
    pub fn maximize(&mut self, expr: LinExpr) {
        self.objective = expr;
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Rows of the real symmetric embedding of PSD variable `v`: `(row, col, param, coef)` contributions.
    fn embedding_entry(&self, v: &Variable, r: usize, c: usize) -> Vec<(usize, f64)> {
        let n = v.dim;
        match v.field {
            FieldKind::Real => vec![(v.re_param(r, c), 1.0)],
            FieldKind::Complex => {
                let (br, bc, i, j) = (r / n, c / n, r % n, c % n);
                match (br, bc) {
                    (0, 0) | (1, 1) => vec![(v.re_param(i, j), 1.0)],
                    (0, 1) => v.im_param(i, j).map(|(k, s)| vec![(k, -s)]).unwrap_or_default(),
                    _ => v.im_param(i, j).map(|(k, s)| vec![(k, s)]).unwrap_or_default(),
                }
            }
        }
    }

    pub fn solve(&self, opts: SolveOptions) -> SolveReport {
        let n = self.params;
        let mut rows_i = Vec::new();
        let mut cols_j = Vec::new();
        let mut vals = Vec::new();
        let mut b = Vec::new();
        let mut cones = Vec::new();
        let mut row = 0usize;

        let mut push_rows = |rows: &[Row], b: &mut Vec<f64>, row: &mut usize| {
            for r in rows {
                for (&k, &c) in &r.expr.terms {
                    rows_i.push(*row);
                    cols_j.push(k);
                    vals.push(c);
                }
                b.push(r.rhs);
                *row += 1;
            }
        };
        if !self.equalities.is_empty() {
            push_rows(&self.equalities, &mut b, &mut row);
            cones.push(SupportedConeT::ZeroConeT(self.equalities.len()));
        }
        if !self.inequalities.is_empty() {
            push_rows(&self.inequalities, &mut b, &mut row);
            cones.push(SupportedConeT::NonnegativeConeT(self.inequalities.len()));
        }
        let sqrt2 = std::f64::consts::SQRT_2;
        for v in self.variables.iter().filter(|v| v.psd) {
            let big = match v.field {
                FieldKind::Real => v.dim,
                FieldKind::Complex => 2 * v.dim,
            };
            if big == 1 {
                rows_i.push(row);
                cols_j.push(v.re_param(0, 0));
                vals.push(-1.0);
                b.push(0.0);
                row += 1;
                cones.push(SupportedConeT::NonnegativeConeT(1));
                continue;
            }
            for c in 0..big {
                for r in 0..=c {
                    let scale = if r == c { 1.0 } else { sqrt2 };
                    for (k, coef) in self.embedding_entry(v, r, c) {
                        rows_i.push(row);
                        cols_j.push(k);
                        vals.push(-scale * coef);
                    }
                    b.push(0.0);
                    row += 1;
                }
            }
            cones.push(SupportedConeT::PSDTriangleConeT(big));
        }

        let a = CscMatrix::new_from_triplets(row, n, rows_i, cols_j, vals);
        let p = CscMatrix::<f64>::zeros((n, n));
        let mut q = vec![0.0; n];
        for (&k, &c) in &self.objective.terms {
            q[k] -= c;
        }
        let settings = DefaultSettingsBuilder::default()
            .verbose(false)
            .max_iter(opts.max_iter)
            .tol_gap_abs(opts.eps)
            .tol_gap_rel(opts.eps)
            .tol_feas(opts.eps)
            .build()
            .expect("valid solver settings");

        let failed = |status: String| SolveReport {
            status: SolveStatus::Failed,
            value: None,
            primal: Vec::new(),
            params: Vec::new(),
            solver_tol: opts.eps,
            iterations: 0,
            max_residual: f64::INFINITY,
            min_psd_eigenvalue: f64::NEG_INFINITY,
            backend_status: status,
        };
        let mut solver = match DefaultSolver::new(&p, &q, &a, &b, &cones, settings) {
            Ok(s) => s,
            Err(e) => return failed(format!("setup error: {e:?}")),
        };
        solver.solve();
        let sol = &solver.solution;
        let backend_status = format!("{:?}", sol.status);
        let mut status = match sol.status {
            SolverStatus::Solved => SolveStatus::Optimal,
            SolverStatus::AlmostSolved => SolveStatus::Inaccurate,
            SolverStatus::PrimalInfeasible | SolverStatus::AlmostPrimalInfeasible => SolveStatus::Infeasible,
            _ => SolveStatus::Failed,
        };
        let params = sol.x.clone();
        let primal: Vec<ComplexMatrix> = self.variables.iter().map(|v| self.reconstruct(v, &params)).collect();
        let (max_residual, min_psd_eigenvalue) = self.recheck(&params, &primal);
        if status == SolveStatus::Optimal
            && (max_residual > 10.0 * opts.eps || min_psd_eigenvalue < -10.0 * opts.eps)
        {
            status = SolveStatus::Inaccurate;
        }
        let value = match status {
            SolveStatus::Optimal | SolveStatus::Inaccurate => Some(self.objective.eval(&params)),
            _ => None,
        };
        SolveReport {
            status,
            value,
            primal,
            params,
            solver_tol: opts.eps,
            iterations: sol.iterations,
            max_residual,
            min_psd_eigenvalue,
            backend_status,
        }
    }

    fn reconstruct(&self, v: &Variable, x: &[f64]) -> ComplexMatrix {
        DMatrix::from_fn(v.dim, v.dim, |i, j| {
            let re = x[v.re_param(i, j)];
            let im = v.im_param(i, j).map_or(0.0, |(k, s)| s * x[k]);
            Complex::new(re, im)
        })
    }

    /// Residuals computed from the primal point alone, without trusting the backend.
    fn recheck(&self, x: &[f64], primal: &[ComplexMatrix]) -> (f64, f64) {
        if x.len() != self.params {
            return (f64::INFINITY, f64::NEG_INFINITY);
        }
        let eq = self.equalities.iter().map(|r| (r.expr.eval(x) - r.rhs).abs());
        let le = self.inequalities.iter().map(|r| (r.expr.eval(x) - r.rhs).max(0.0));
        let residual = eq.chain(le).fold(0.0, f64::max);
        let floor = self
            .variables
            .iter()
            .zip(primal)
            .filter(|(v, _)| v.psd)
            .map(|(_, m)| qmath::min_eigenvalue(m))
            .fold(f64::INFINITY, f64::min);
        (residual, if floor.is_finite() { floor } else { 0.0 })
    }
}
