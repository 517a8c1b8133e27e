//! Entropy densities `f`, their derivatives, and the associated mobilities
//! `eta = 1 / f''`.
//!
//! | model              | f                                   | eta              | interval |
//! |--------------------|-------------------------------------|------------------|----------|
//! | classical          | `r (ln r - 1)`                      | `r`              | `(0, inf)` |
//! | bounded mobility   | `r (ln r - 1) + kappa r^2 / 2`      | `r / (kappa r + 1)` | `(0, inf)` |
//! | saturation         | `r ln r + (M - r) ln(1 - r / M)`    | `r (1 - r / M)`  | `(0, M)` |
//!
//! The bounded and saturation variants use the same modified Crank-Nicolson
//! template as the classical one, with their own derivatives.

use std::fmt;
use std::str::FromStr;

use crate::error::EntropyError;
use crate::grid::CellField;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EntropyModel {
    Classical,
    BoundedMobility { kappa: f64 },
    Saturation { max_density: f64 },
}

impl fmt::Display for EntropyModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EntropyModel::Classical => write!(f, "classical"),
            EntropyModel::BoundedMobility { kappa } => write!(f, "bounded({kappa})"),
            EntropyModel::Saturation { max_density } => write!(f, "saturation({max_density})"),
        }
    }
}

impl FromStr for EntropyModel {
    type Err = String;

    /// Accepts `classical`, `bounded(kappa)` and `saturation(M)`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if s == "classical" {
            return Ok(EntropyModel::Classical);
        }
        let arg = |prefix: &str| -> Option<Result<f64, String>> {
            let rest = s.strip_prefix(prefix)?.trim();
            let inner = rest.strip_prefix('(')?.strip_suffix(')')?;
            Some(inner.trim().parse::<f64>().map_err(|e| format!("bad parameter in `{s}`: {e}")))
        };
        if let Some(k) = arg("bounded") {
            let kappa = k?;
            if !(kappa > 0.0 && kappa.is_finite()) {
                return Err(format!("kappa must be positive, got {kappa}"));
            }
            return Ok(EntropyModel::BoundedMobility { kappa });
        }
        if let Some(m) = arg("saturation") {
            let max_density = m?;
            if !(max_density > 0.0 && max_density.is_finite()) {
                return Err(format!("saturation density must be positive, got {max_density}"));
            }
            return Ok(EntropyModel::Saturation { max_density });
        }
        Err(format!("unknown entropy `{s}` (expected classical | bounded(kappa) | saturation(M))"))
    }
}

impl EntropyModel {
    /// Upper end of the admissible interval, if finite.
    pub fn upper_bound(&self) -> Option<f64> {
        match self {
            EntropyModel::Saturation { max_density } => Some(*max_density),
            _ => None,
        }
    }

    pub fn is_admissible(&self, rho: f64) -> bool {
        rho > 0.0 && self.upper_bound().is_none_or(|m| rho < m) && rho.is_finite()
    }

    fn check(&self, rho: f64) -> Result<(), EntropyError> {
        if self.is_admissible(rho) {
            Ok(())
        } else {
            Err(self.domain_error(rho, None))
        }
    }

    pub(crate) fn domain_error(&self, value: f64, index: Option<usize>) -> EntropyError {
        EntropyError { model: self.to_string(), value, index }
    }

    /// First offending cell of a field, if any.
    pub fn check_field(&self, rho: &CellField) -> Result<(), EntropyError> {
        match rho.values().iter().position(|&r| !self.is_admissible(r)) {
            Some(i) => Err(self.domain_error(rho.values()[i], Some(i))),
            None => Ok(()),
        }
    }

    pub fn f(&self, rho: f64) -> Result<f64, EntropyError> {
        self.check(rho)?;
        Ok(self.f_unchecked(rho))
    }

    pub fn f1(&self, rho: f64) -> Result<f64, EntropyError> {
        self.check(rho)?;
        Ok(self.f1_unchecked(rho))
    }

    pub fn f2(&self, rho: f64) -> Result<f64, EntropyError> {
        self.check(rho)?;
        Ok(self.f2_unchecked(rho))
    }

    pub fn f3(&self, rho: f64) -> Result<f64, EntropyError> {
        self.check(rho)?;
        Ok(self.f3_unchecked(rho))
    }

    pub fn f4(&self, rho: f64) -> Result<f64, EntropyError> {
        self.check(rho)?;
        Ok(self.f4_unchecked(rho))
    }

    /// `eta(rho) = 1 / f''(rho)` in closed form.
    pub fn mobility(&self, rho: f64) -> Result<f64, EntropyError> {
        self.check(rho)?;
        Ok(match *self {
            EntropyModel::Classical => rho,
            EntropyModel::BoundedMobility { kappa } => rho / (kappa * rho + 1.0),
            EntropyModel::Saturation { max_density: m } => rho * (1.0 - rho / m),
        })
    }

    pub(crate) fn f_unchecked(&self, r: f64) -> f64 {
        match *self {
            EntropyModel::Classical => r * (r.ln() - 1.0),
            EntropyModel::BoundedMobility { kappa } => r * (r.ln() - 1.0) + 0.5 * kappa * r * r,
            EntropyModel::Saturation { max_density: m } => r * r.ln() + (m - r) * (-r / m).ln_1p(),
        }
    }

    pub(crate) fn f1_unchecked(&self, r: f64) -> f64 {
        match *self {
            EntropyModel::Classical => r.ln(),
            EntropyModel::BoundedMobility { kappa } => r.ln() + kappa * r,
            EntropyModel::Saturation { max_density: m } => r.ln() - (-r / m).ln_1p(),
        }
    }

    pub(crate) fn f2_unchecked(&self, r: f64) -> f64 {
        match *self {
            EntropyModel::Classical => 1.0 / r,
            EntropyModel::BoundedMobility { kappa } => 1.0 / r + kappa,
            EntropyModel::Saturation { max_density: m } => 1.0 / r + 1.0 / (m - r),
        }
    }

    pub(crate) fn f3_unchecked(&self, r: f64) -> f64 {
        match *self {
            EntropyModel::Classical | EntropyModel::BoundedMobility { .. } => -1.0 / (r * r),
            EntropyModel::Saturation { max_density: m } => -1.0 / (r * r) + 1.0 / ((m - r) * (m - r)),
        }
    }

    pub(crate) fn f4_unchecked(&self, r: f64) -> f64 {
        match *self {
            EntropyModel::Classical | EntropyModel::BoundedMobility { .. } => 2.0 / (r * r * r),
            EntropyModel::Saturation { max_density: m } => {
                2.0 / (r * r * r) + 2.0 / ((m - r) * (m - r) * (m - r))
            }
        }
    }

    /// Modified Crank-Nicolson chemical potential at one point:
    /// `f'(new) - f''(new) d / 2 + f'''(new) d^2 / 6` with `d = new - old`.
    pub fn s_half_point(&self, new: f64, old: f64) -> Result<f64, EntropyError> {
        self.check(new)?;
        self.check(old)?;
        Ok(self.s_half_unchecked(new, old))
    }

    pub(crate) fn s_half_unchecked(&self, new: f64, old: f64) -> f64 {
        let d = new - old;
        self.f1_unchecked(new) - 0.5 * self.f2_unchecked(new) * d
            + self.f3_unchecked(new) * d * d / 6.0
    }

    /// Partial derivative of [`Self::s_half_point`] with respect to `new`:
    /// `f''/2 - f''' d / 6 + f'''' d^2 / 6`.
    pub fn s_half_derivative(&self, new: f64, old: f64) -> Result<f64, EntropyError> {
        self.check(new)?;
        self.check(old)?;
        Ok(self.s_half_derivative_unchecked(new, old))
    }

    pub(crate) fn s_half_derivative_unchecked(&self, new: f64, old: f64) -> f64 {
        let d = new - old;
        0.5 * self.f2_unchecked(new) - self.f3_unchecked(new) * d / 6.0
            + self.f4_unchecked(new) * d * d / 6.0
    }

    /// An antiderivative in `new` of [`Self::s_half_point`]:
    /// `11 f / 6 - 5 f' d / 6 + f'' d^2 / 6`. This is the entropy part of the
    /// per-step convex functional.
    pub fn s_half_antiderivative(&self, new: f64, old: f64) -> Result<f64, EntropyError> {
        self.check(new)?;
        self.check(old)?;
        Ok(self.s_half_antiderivative_unchecked(new, old))
    }

    pub(crate) fn s_half_antiderivative_unchecked(&self, new: f64, old: f64) -> f64 {
        let d = new - old;
        11.0 / 6.0 * self.f_unchecked(new) - 5.0 / 6.0 * self.f1_unchecked(new) * d
            + self.f2_unchecked(new) * d * d / 6.0
    }
}

/// Pointwise modified Crank-Nicolson potential `S^{n+1/2}` for a whole field.
pub fn s_half(
    rho_new: &CellField,
    rho_old: &CellField,
    model: &EntropyModel,
) -> Result<CellField, EntropyError> {
    model.check_field(rho_new)?;
    model.check_field(rho_old)?;
    Ok(rho_new.zip_map(rho_old, |n, o| model.s_half_unchecked(n, o)))
}

/// Pointwise `eta` of a field.
pub fn mobility_field(rho: &CellField, model: &EntropyModel) -> Result<CellField, EntropyError> {
    model.check_field(rho)?;
    Ok(rho.map(|r| model.mobility(r).expect("checked")))
}
