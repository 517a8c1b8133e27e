use crate::error::StepError;

/// Coefficient of the `(rho^{n+1} - rho^n)` stabilization term.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Stabilization {
    /// `chi^2 dt / (4 theta)`.
    #[default]
    Standard,
    /// `chi^2 dt / (4 theta + 2 alpha dt)`, gentler for small `theta`.
    Damped,
}

impl std::str::FromStr for Stabilization {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "standard" => Ok(Stabilization::Standard),
            "damped" => Ok(Stabilization::Damped),
            other => Err(format!("unknown stabilization `{other}` (expected standard | damped)")),
        }
    }
}

/// Model constants, time step and solver controls.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SchemeParams {
    pub gamma: f64,
    pub chi: f64,
    pub theta: f64,
    pub mu: f64,
    pub alpha: f64,
    pub dt: f64,
    pub stabilization: Stabilization,
    /// Nonlinear residual tolerance, relative to `max(1, ||rho^n||_2)`.
    pub newton_tol: f64,
    pub newton_max_iters: usize,
    /// Fraction of the distance to the admissible boundary a step may cover.
    pub safeguard_sigma: f64,
    /// Relative tolerance of variable-coefficient elliptic solves.
    pub elliptic_tol: f64,
    pub elliptic_max_iters: usize,
    /// Iteration budget of the functional-descent fallback.
    pub descent_max_iters: usize,
}

impl Default for SchemeParams {
    fn default() -> Self {
        Self {
            gamma: 1.0,
            chi: 1.0,
            theta: 1.0,
            mu: 1.0,
            alpha: 1.0,
            dt: 1e-3,
            stabilization: Stabilization::Standard,
            newton_tol: 1e-11,
            newton_max_iters: 50,
            safeguard_sigma: 0.9,
            elliptic_tol: 1e-10,
            elliptic_max_iters: 1000,
            descent_max_iters: 5000,
        }
    }
}

impl SchemeParams {
    pub fn validate(&self) -> Result<(), StepError> {
        let bad = |m: String| Err(StepError::InvalidParams(m));
        let finite = [self.gamma, self.chi, self.theta, self.mu, self.alpha, self.dt];
        if finite.iter().any(|v| !v.is_finite()) {
            return bad(format!("non-finite model constant in {self:?}"));
        }
        if !(self.theta > 0.0) {
            return bad(format!("theta must be > 0, got {}", self.theta));
        }
        if !(self.dt > 0.0) {
            return bad(format!("dt must be > 0, got {}", self.dt));
        }
        if !(self.gamma > 0.0) || !(self.mu > 0.0) {
            return bad(format!("gamma and mu must be > 0, got {} and {}", self.gamma, self.mu));
        }
        if !(self.alpha >= 0.0) {
            return bad(format!("alpha must be >= 0, got {}", self.alpha));
        }
        if !(self.newton_tol > 0.0) || !(self.elliptic_tol > 0.0) {
            return bad("solver tolerances must be > 0".into());
        }
        if !(self.safeguard_sigma > 0.0 && self.safeguard_sigma < 1.0) {
            return bad(format!("safeguard sigma must lie in (0, 1), got {}", self.safeguard_sigma));
        }
        if self.newton_max_iters == 0 || self.elliptic_max_iters == 0 {
            return bad("iteration limits must be positive".into());
        }
        Ok(())
    }

    pub fn stabilization_coefficient(&self) -> f64 {
        let chi2 = self.chi * self.chi;
        match self.stabilization {
            Stabilization::Standard => chi2 * self.dt / (4.0 * self.theta),
            Stabilization::Damped => chi2 * self.dt / (4.0 * self.theta + 2.0 * self.alpha * self.dt),
        }
    }

    pub fn with_dt(&self, dt: f64) -> Self {
        Self { dt, ..*self }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stabilization_coefficients() {
        let p = SchemeParams { chi: 2.0, theta: 0.5, alpha: 3.0, dt: 0.1, ..Default::default() };
        assert!((p.stabilization_coefficient() - 0.2).abs() < 1e-15);
        let d = SchemeParams { stabilization: Stabilization::Damped, ..p };
        assert!((d.stabilization_coefficient() - 0.4 / 2.6).abs() < 1e-15);
    }

    #[test]
    fn validation() {
        assert!(SchemeParams::default().validate().is_ok());
        assert!(SchemeParams { theta: 0.0, ..Default::default() }.validate().is_err());
        assert!(SchemeParams { dt: -1.0, ..Default::default() }.validate().is_err());
        assert!(SchemeParams { safeguard_sigma: 1.0, ..Default::default() }.validate().is_err());
        assert!(SchemeParams { newton_tol: 0.0, ..Default::default() }.validate().is_err());
    }
}
