//! Dense complex linear algebra and the state/measurement primitives built on it.
//!
//! Matrices are plain [`nalgebra::DMatrix`] values over [`Complex<T>`]; the
//! wrappers in this module ([`DensityMatrix`], [`Povm`], [`MeasurementSet`])
//! only add the physical invariants on top.

use nalgebra::{Complex, ComplexField, DMatrix, RealField};

use crate::error::{Error, Result};

/// Dense complex matrix (row/column counts from the underlying storage).
pub type ComplexMatrix<T = f64> = DMatrix<Complex<T>>;

/// Numerical tolerances used when validating physical objects.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    pub herm: f64,
    pub psd: f64,
    pub id: f64,
    pub tr: f64,
}

impl Tolerances {
    pub const fn uniform(tol: f64) -> Self {
        Self { herm: tol, psd: tol, id: tol, tr: tol }
    }
}

impl Default for Tolerances {
    fn default() -> Self {
        Self::uniform(1e-9)
    }
}

pub(crate) fn real<T: RealField>(x: f64) -> T {
    nalgebra::convert(x)
}

pub(crate) fn c<T: RealField>(re: f64, im: f64) -> Complex<T> {
    Complex::new(real(re), real(im))
}

pub fn identity<T: RealField>(n: usize) -> ComplexMatrix<T> {
    ComplexMatrix::identity(n, n)
}

pub fn is_finite<T: RealField>(m: &ComplexMatrix<T>) -> bool {
    m.iter().all(|z| z.re.clone().is_finite() && z.im.clone().is_finite())
}

/// Largest entrywise modulus of `m - m†`.
pub fn hermiticity_defect<T: RealField>(m: &ComplexMatrix<T>) -> f64 {
    if !m.is_square() {
        return f64::INFINITY;
    }
    max_abs(&(m - m.adjoint()))
}

pub fn max_abs<T: RealField>(m: &ComplexMatrix<T>) -> f64 {
    m.iter().map(|z| to_f64(z.clone().modulus())).fold(0.0, f64::max)
}

pub(crate) fn to_f64<T: RealField>(x: T) -> f64 {
    // RealField values are at least as wide as f32; go through the subset trait.
    nalgebra::try_convert::<T, f64>(x).unwrap_or(f64::NAN)
}

/// `(m + m†)/2`.
pub fn hermitian_part<T: RealField>(m: &ComplexMatrix<T>) -> ComplexMatrix<T> {
    (m + m.adjoint()).scale(real(0.5))
}

/// Eigenvalues of the Hermitian part of `m`, ascending.
pub fn eigenvalues<T: RealField>(m: &ComplexMatrix<T>) -> Vec<f64> {
    let mut ev: Vec<f64> = hermitian_part(m)
        .symmetric_eigenvalues()
        .iter()
        .map(|x| to_f64(x.clone()))
        .collect();
    ev.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    ev
}

/// Smallest eigenvalue of the Hermitian part of `m`.
pub fn min_eigenvalue<T: RealField>(m: &ComplexMatrix<T>) -> f64 {
    eigenvalues(m).first().copied().unwrap_or(0.0)
}

pub fn is_psd<T: RealField>(m: &ComplexMatrix<T>, tol: f64) -> bool {
    m.is_square() && hermiticity_defect(m) <= tol && min_eigenvalue(m) >= -tol
}

pub fn trace<T: RealField>(m: &ComplexMatrix<T>) -> Complex<T> {
    m.trace()
}

pub fn trace_re<T: RealField>(m: &ComplexMatrix<T>) -> f64 {
    to_f64(m.trace().re)
}

/// Real part of `Tr(a b)`.
pub fn trace_product_re<T: RealField>(a: &ComplexMatrix<T>, b: &ComplexMatrix<T>) -> f64 {
    to_f64((a * b).trace().re)
}

/// Kronecker product `a ⊗ b`.
pub fn kron<T: RealField>(a: &ComplexMatrix<T>, b: &ComplexMatrix<T>) -> ComplexMatrix<T> {
    a.kronecker(b)
}

/// Which factor of a bipartite space survives a partial trace.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Subsystem {
    A,
    B,
}

/// Partial trace of an operator on `C^dA ⊗ C^dB`, keeping `keep`.
pub fn partial_trace<T: RealField>(
    m: &ComplexMatrix<T>,
    dims: (usize, usize),
    keep: Subsystem,
) -> Result<ComplexMatrix<T>> {
    let (da, db) = dims;
    let n = da * db;
    if m.nrows() != n || m.ncols() != n {
        return Err(Error::DimensionMismatch(format!(
            "partial trace expects a {n}x{n} matrix for dims ({da}, {db}), got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    let out = match keep {
        Subsystem::B => ComplexMatrix::from_fn(db, db, |j, l| {
            (0..da).fold(Complex::new(T::zero(), T::zero()), |acc, i| {
                acc + m[(i * db + j, i * db + l)].clone()
            })
        }),
        Subsystem::A => ComplexMatrix::from_fn(da, da, |i, k| {
            (0..db).fold(Complex::new(T::zero(), T::zero()), |acc, j| {
                acc + m[(i * db + j, k * db + j)].clone()
            })
        }),
    };
    Ok(out)
}

/// Principal square root of a PSD matrix (negative eigenvalues clipped).
pub fn sqrt_psd<T: RealField>(m: &ComplexMatrix<T>) -> ComplexMatrix<T> {
    spectral_map(m, |x| if x > 0.0 { x.sqrt() } else { 0.0 })
}

/// Moore-Penrose inverse square root of a PSD matrix; eigenvalues below `floor` map to zero.
pub fn inv_sqrt_psd<T: RealField>(m: &ComplexMatrix<T>, floor: f64) -> ComplexMatrix<T> {
    spectral_map(m, |x| if x > floor { 1.0 / x.sqrt() } else { 0.0 })
}

fn spectral_map<T: RealField>(m: &ComplexMatrix<T>, f: impl Fn(f64) -> f64) -> ComplexMatrix<T> {
    let eig = hermitian_part(m).symmetric_eigen();
    let n = m.nrows();
    let mut out = ComplexMatrix::<T>::zeros(n, n);
    for (k, lambda) in eig.eigenvalues.iter().enumerate() {
        let v = eig.eigenvectors.column(k);
        let w: T = real(f(to_f64(lambda.clone())));
        out += (&v * v.adjoint()).scale(w);
    }
    out
}

/// A normalized quantum state.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix<T: RealField = f64> {
    matrix: ComplexMatrix<T>,
}

impl<T: RealField> DensityMatrix<T> {
    /// Wraps `matrix` after checking hermiticity, positivity and unit trace.
    pub fn new(matrix: ComplexMatrix<T>, tol: Tolerances) -> Result<Self> {
        let rho = Self { matrix };
        rho.validate(tol)?;
        Ok(rho)
    }

    pub fn new_unchecked(matrix: ComplexMatrix<T>) -> Self {
        Self { matrix }
    }

    pub fn from_pure(psi: &[Complex<T>]) -> Self {
        let v = nalgebra::DVector::from_column_slice(psi);
        let norm2 = v.norm_squared();
        Self { matrix: (&v * v.adjoint()).unscale(norm2) }
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        Self { matrix: identity::<T>(dim).unscale(real(dim as f64)) }
    }

    pub fn validate(&self, tol: Tolerances) -> Result<()> {
        let m = &self.matrix;
        if !m.is_square() || !is_finite(m) {
            return Err(Error::InvalidInput("density matrix must be square and finite".into()));
        }
        let herm = hermiticity_defect(m);
        if herm > tol.herm {
            return Err(Error::InvalidInput(format!("density matrix not Hermitian (defect {herm:.3e})")));
        }
        let lo = min_eigenvalue(m);
        if lo < -tol.psd {
            return Err(Error::InvalidInput(format!("density matrix not PSD (min eigenvalue {lo:.3e})")));
        }
        let tr = trace_re(m);
        if (tr - 1.0).abs() > tol.tr {
            return Err(Error::InvalidInput(format!("density matrix trace {tr} != 1")));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &ComplexMatrix<T> {
        &self.matrix
    }

    pub fn into_matrix(self) -> ComplexMatrix<T> {
        self.matrix
    }

    pub fn tensor(&self, other: &Self) -> Self {
        Self { matrix: kron(&self.matrix, &other.matrix) }
    }
}

/// A positive operator-valued measure, one effect per outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct Povm<T: RealField = f64> {
    effects: Vec<ComplexMatrix<T>>,
}

impl<T: RealField> Povm<T> {
    pub fn new(effects: Vec<ComplexMatrix<T>>) -> Result<Self> {
        Self::with_tolerances(effects, Tolerances::default())
    }

    pub fn with_tolerances(effects: Vec<ComplexMatrix<T>>, tol: Tolerances) -> Result<Self> {
        let povm = Self { effects };
        povm.validate(tol)?;
        Ok(povm)
    }

    pub fn new_unchecked(effects: Vec<ComplexMatrix<T>>) -> Self {
        Self { effects }
    }

    pub fn validate(&self, tol: Tolerances) -> Result<()> {
        let Some(first) = self.effects.first() else {
            return Err(Error::InvalidInput("POVM needs at least one effect".into()));
        };
        let dim = first.nrows();
        let mut total = ComplexMatrix::<T>::zeros(dim, dim);
        for (a, e) in self.effects.iter().enumerate() {
            if e.nrows() != dim || e.ncols() != dim {
                return Err(Error::DimensionMismatch(format!("effect {a} is not {dim}x{dim}")));
            }
            if !is_finite(e) || hermiticity_defect(e) > tol.herm || min_eigenvalue(e) < -tol.psd {
                return Err(Error::InvalidInput(format!("effect {a} is not PSD")));
            }
            total += e;
        }
        let defect = max_abs(&(total - identity::<T>(dim)));
        if defect > tol.id {
            return Err(Error::InvalidInput(format!("effects sum to identity only within {defect:.3e}")));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.effects[0].nrows()
    }

    pub fn outcomes(&self) -> usize {
        self.effects.len()
    }

    pub fn effect(&self, a: usize) -> &ComplexMatrix<T> {
        &self.effects[a]
    }

    pub fn effects(&self) -> &[ComplexMatrix<T>] {
        &self.effects
    }

    /// `η·M_a + (1-η)·Tr(M_a)·I/dim`, the POVM mixed with white noise.
    pub fn with_visibility(&self, eta: f64) -> Self {
        let dim = self.dim();
        let effects = self
            .effects
            .iter()
            .map(|e| {
                let tr: T = real(trace_re(e) / dim as f64);
                e.scale(real(eta)) + identity::<T>(dim).scale(tr * real(1.0 - eta))
            })
            .collect();
        Self { effects }
    }
}

/// `m` measurements on a common space, each with the same outcome count.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementSet<T: RealField = f64> {
    povms: Vec<Povm<T>>,
}

impl<T: RealField> MeasurementSet<T> {
    pub fn new(povms: Vec<Povm<T>>) -> Result<Self> {
        let Some(first) = povms.first() else {
            return Err(Error::InvalidInput("measurement set is empty".into()));
        };
        let (dim, d) = (first.dim(), first.outcomes());
        if let Some(x) = povms.iter().position(|p| p.dim() != dim || p.outcomes() != d) {
            return Err(Error::DimensionMismatch(format!(
                "measurement {} differs in dimension or outcome count",
                x + 1
            )));
        }
        Ok(Self { povms })
    }

    /// Number of inputs `m`.
    pub fn inputs(&self) -> usize {
        self.povms.len()
    }

    pub fn outcomes(&self) -> usize {
        self.povms[0].outcomes()
    }

    pub fn dim(&self) -> usize {
        self.povms[0].dim()
    }

    /// Measurement for input `x` (1-based).
    pub fn povm(&self, x: usize) -> &Povm<T> {
        &self.povms[x - 1]
    }

    pub fn povms(&self) -> &[Povm<T>] {
        &self.povms
    }

    /// Sub-collection for the given 1-based inputs, in the given order.
    pub fn select(&self, inputs: &[usize]) -> Result<Self> {
        let povms = inputs
            .iter()
            .map(|&x| {
                if x == 0 || x > self.inputs() {
                    Err(Error::InvalidInput(format!("input {x} out of range 1..={}", self.inputs())))
                } else {
                    Ok(self.povms[x - 1].clone())
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(povms)
    }
}

/// Pauli observable axes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PauliAxis {
    X,
    Y,
    Z,
}

impl PauliAxis {
    pub fn from_char(ch: char) -> Option<Self> {
        match ch.to_ascii_uppercase() {
            'X' => Some(Self::X),
            'Y' => Some(Self::Y),
            'Z' => Some(Self::Z),
            _ => None,
        }
    }

    pub fn as_char(self) -> char {
        match self {
            Self::X => 'X',
            Self::Y => 'Y',
            Self::Z => 'Z',
        }
    }
}

/// Projectors onto the `+1` and `-1` eigenvectors of a Pauli operator, in that order.
pub fn pauli_projectors<T: RealField>(axis: PauliAxis) -> Povm<T> {
    let h = 0.5;
    let (plus, minus) = match axis {
        PauliAxis::Z => (
            [[c(1.0, 0.0), c(0.0, 0.0)], [c(0.0, 0.0), c(0.0, 0.0)]],
            [[c(0.0, 0.0), c(0.0, 0.0)], [c(0.0, 0.0), c(1.0, 0.0)]],
        ),
        PauliAxis::X => (
            [[c(h, 0.0), c(h, 0.0)], [c(h, 0.0), c(h, 0.0)]],
            [[c(h, 0.0), c(-h, 0.0)], [c(-h, 0.0), c(h, 0.0)]],
        ),
        PauliAxis::Y => (
            [[c(h, 0.0), c(0.0, -h)], [c(0.0, h), c(h, 0.0)]],
            [[c(h, 0.0), c(0.0, h)], [c(0.0, -h), c(h, 0.0)]],
        ),
    };
    let to_mat = |e: [[Complex<T>; 2]; 2]| ComplexMatrix::from_fn(2, 2, |i, j| e[i][j].clone());
    Povm::new_unchecked(vec![to_mat(plus), to_mat(minus)])
}

/// Projective qubit measurement along the Bloch direction `n` (normalized internally).
pub fn qubit_projective<T: RealField>(n: [f64; 3]) -> Povm<T> {
    let norm = (n[0] * n[0] + n[1] * n[1] + n[2] * n[2]).sqrt();
    let (x, y, z) = (n[0] / norm, n[1] / norm, n[2] / norm);
    let effect = |s: f64| {
        ComplexMatrix::from_row_slice(
            2,
            2,
            &[
                c(0.5 * (1.0 + s * z), 0.0),
                c(0.5 * s * x, -0.5 * s * y),
                c(0.5 * s * x, 0.5 * s * y),
                c(0.5 * (1.0 - s * z), 0.0),
            ],
        )
    };
    Povm::new_unchecked(vec![effect(1.0), effect(-1.0)])
}

/// `p|Ψ_θ⟩⟨Ψ_θ| + (1-p)·I/2 ⊗ ρ_B^θ` with `|Ψ_θ⟩ = cos θ|00⟩ + sin θ|11⟩`.
pub fn rho_p_theta<T: RealField>(p: f64, theta: f64) -> Result<DensityMatrix<T>> {
    if !(0.0..=1.0).contains(&p) || !theta.is_finite() {
        return Err(Error::InvalidInput(format!("rho_p_theta needs p in [0,1], got p={p}, theta={theta}")));
    }
    let (ct, st) = (theta.cos(), theta.sin());
    let psi = DensityMatrix::<T>::from_pure(&[c(ct, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(st, 0.0)]);
    let rho_b = ComplexMatrix::<T>::from_diagonal(&nalgebra::DVector::from_vec(vec![
        c(ct * ct, 0.0),
        c(st * st, 0.0),
    ]));
    let noise = kron(&identity::<T>(2).scale(real(0.5)), &rho_b);
    let m = psi.into_matrix().scale(real(p)) + noise.scale(real(1.0 - p));
    Ok(DensityMatrix::new_unchecked(hermitian_part(&m)))
}

/// `cos θ|00⟩ + sin θ|11⟩` as a density matrix.
pub fn psi_theta<T: RealField>(theta: f64) -> DensityMatrix<T> {
    DensityMatrix::from_pure(&[c(theta.cos(), 0.0), c(0.0, 0.0), c(0.0, 0.0), c(theta.sin(), 0.0)])
}

/// `|Φ⁺⟩ = (|00⟩ + |11⟩)/√2`.
pub fn phi_plus<T: RealField>() -> DensityMatrix<T> {
    psi_theta(std::f64::consts::FRAC_PI_4)
}
