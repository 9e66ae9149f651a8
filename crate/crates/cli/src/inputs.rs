//! Measurement, state and file inputs.

use std::path::Path;

use randcert::qmath::{self, DensityMatrix, MeasurementSet, PauliAxis};
use randcert::scenario::{Assemblage, Behavior};
use randcert::io;

use crate::CliError;

/// Accepts π/4 rounded to four decimals.
const THETA_SLACK: f64 = 1e-4;

/// A path to a measurement file, or Pauli axes such as `XYZ` or `X@0.5,Z@0.5`
/// where `@η` sets the visibility of the axes before it.
pub fn measurements(spec: &str) -> Result<MeasurementSet, CliError> {
    if Path::new(spec).is_file() {
        return Ok(io::read_measurements(spec)?);
    }
    let mut povms = Vec::new();
    for token in spec.split(',') {
        let (axes, eta) = match token.split_once('@') {
            Some((axes, eta)) => {
                let eta: f64 = eta.trim().parse().map_err(|_| CliError::parse(format!("bad visibility in '{token}'")))?;
                if !(0.0..=1.0).contains(&eta) {
                    return Err(CliError::parse(format!("visibility {eta} outside [0, 1]")));
                }
                (axes.trim(), eta)
            }
            None => (token.trim(), 1.0),
        };
        if axes.is_empty() {
            return Err(CliError::parse(format!("no measurement axes in '{spec}'")));
        }
        for ch in axes.chars() {
            let axis = PauliAxis::from_char(ch.to_ascii_uppercase())
                .ok_or_else(|| CliError::parse(format!("'{spec}' is neither a file nor Pauli axes (X, Y, Z)")))?;
            povms.push(qmath::pauli_projectors::<f64>(axis).with_visibility(eta));
        }
    }
    Ok(MeasurementSet::new(povms)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
#[value(rename_all = "snake_case")]
pub enum StateFamily {
    /// `p|Ψ_θ⟩⟨Ψ_θ| + (1-p)·I/2 ⊗ ρ_B^θ`; uses `--p` and `--theta`.
    RhoPTheta,
    /// `cos θ|00⟩ + sin θ|11⟩`; uses `--theta`.
    PsiTheta,
    /// Maximally entangled two-qubit state.
    PhiPlus,
}

impl StateFamily {
    pub fn name(self) -> &'static str {
        match self {
            StateFamily::RhoPTheta => "rho_p_theta",
            StateFamily::PsiTheta => "psi_theta",
            StateFamily::PhiPlus => "phi_plus",
        }
    }

    pub fn uses_p(self) -> bool {
        self == StateFamily::RhoPTheta
    }

    pub fn uses_theta(self) -> bool {
        self != StateFamily::PhiPlus
    }

    pub fn state(self, p: f64, theta: f64) -> Result<DensityMatrix, CliError> {
        if self.uses_theta() && !(theta > 0.0 && theta <= std::f64::consts::FRAC_PI_4 + THETA_SLACK) {
            return Err(CliError::parse(format!("theta must lie in (0, π/4], got {theta}")));
        }
        Ok(match self {
            StateFamily::RhoPTheta => qmath::rho_p_theta(p, theta)?,
            StateFamily::PsiTheta => qmath::psi_theta(theta),
            StateFamily::PhiPlus => qmath::phi_plus(),
        })
    }
}

pub fn assemblage_file(path: &Path) -> Result<Assemblage, CliError> {
    check_exists(path)?;
    Ok(io::read_assemblage(path)?)
}

pub fn behavior_file(path: &Path) -> Result<Behavior, CliError> {
    check_exists(path)?;
    Ok(io::read_behavior(path)?)
}

fn check_exists(path: &Path) -> Result<(), CliError> {
    if path.is_file() {
        Ok(())
    } else {
        Err(CliError::parse(format!("{}: no such file", path.display())))
    }
}
