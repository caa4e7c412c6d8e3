use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Material parameters of the impermeable, quasi-static linear Biot model.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MaterialParams<T> {
    /// Shear modulus μ (Pa).
    pub mu: T,
    /// Lamé λ (Pa).
    pub lambda: T,
    /// Biot–Willis coupling coefficient α.
    pub alpha: T,
    /// Storage compressibility 1/M (1/Pa).
    pub inv_m: T,
    /// Permeability; must be zero.
    pub kappa: T,
    /// Spatial dimension.
    pub dim: usize,
}

impl<T: Scalar> MaterialParams<T> {
    /// Validates and builds the parameter set in two dimensions.
    pub fn new(mu: T, lambda: T, alpha: T, inv_m: T, kappa: T) -> Result<Self> {
        let p = Self {
            mu,
            lambda,
            alpha,
            inv_m,
            kappa,
            dim: 2,
        };
        p.validate()?;
        Ok(p)
    }

    /// Shear and Lamé moduli 41.667 GPa and 27.778 GPa, α = 1, 1/M = 0, κ = 0.
    pub fn reference() -> Self {
        Self {
            mu: T::lit(41.667e9),
            lambda: T::lit(27.778e9),
            alpha: T::one(),
            inv_m: T::zero(),
            kappa: T::zero(),
            dim: 2,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        if !(self.mu > T::zero()) || !self.mu.is_finite() {
            return bad(format!("mu must be positive and finite, got {}", self.mu));
        }
        if !(self.lambda >= T::zero()) || !self.lambda.is_finite() {
            return bad(format!("lambda must be non-negative, got {}", self.lambda));
        }
        if !(self.alpha > T::zero() && self.alpha <= T::one()) {
            return bad(format!("alpha must lie in (0, 1], got {}", self.alpha));
        }
        if !(self.inv_m >= T::zero()) || !self.inv_m.is_finite() {
            return bad(format!("inv_M must be non-negative, got {}", self.inv_m));
        }
        if self.kappa != T::zero() {
            return bad(format!(
                "only impermeable media are supported (kappa = 0), got kappa = {}",
                self.kappa
            ));
        }
        if self.dim != 2 {
            return bad(format!("only two-dimensional problems are supported, got d = {}", self.dim));
        }
        Ok(())
    }

    /// Physical drained bulk modulus `K_dr = 2μ/d + λ`.
    pub fn drained_bulk_modulus(&self) -> T {
        T::lit(2.0) * self.mu / T::from_usize_lossy(self.dim) + self.lambda
    }

    /// Same material with both Lamé moduli multiplied by `c`.
    pub fn with_scaled_moduli(&self, c: T) -> Self {
        Self {
            mu: self.mu * c,
            lambda: self.lambda * c,
            ..*self
        }
    }
}

/// Uniform implicit Euler time grid `t0, t0 + τ, …, T`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TimeGrid<T> {
    pub t0: T,
    pub tau: T,
    pub t_end: T,
}

impl<T: Scalar> TimeGrid<T> {
    pub fn new(t0: T, tau: T, t_end: T) -> Result<Self> {
        let g = Self { t0, tau, t_end };
        g.num_steps()?;
        Ok(g)
    }

    /// Number of steps `(T − t0)/τ`, which must be a positive integer up to rounding.
    pub fn num_steps(&self) -> Result<usize> {
        if !(self.tau > T::zero()) {
            return Err(Error::InvalidArgument(format!("tau must be positive, got {}", self.tau)));
        }
        let ratio = (self.t_end - self.t0) / self.tau;
        let steps = ratio.round();
        if !(steps >= T::one()) || (ratio - steps).abs() > T::lit(1e-6) * steps {
            return Err(Error::InvalidArgument(format!(
                "(T - t0)/tau = {ratio} is not a positive integer"
            )));
        }
        Ok(steps.to_usize().unwrap())
    }

    /// Times `t_1, …, t_N` at which the implicit Euler steps are evaluated.
    pub fn step_times(&self) -> Result<Vec<T>> {
        let n = self.num_steps()?;
        Ok((1..=n)
            .map(|k| self.t0 + self.tau * T::from_usize_lossy(k))
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_drained_bulk_modulus() {
        let p = MaterialParams::<f64>::reference();
        assert!((p.drained_bulk_modulus() - 6.9445e10).abs() < 1.0);
        p.validate().unwrap();
    }

    #[test]
    fn permeable_media_rejected() {
        let err = MaterialParams::new(1.0, 1.0, 1.0, 0.0, 1e-12).unwrap_err();
        assert!(err.to_string().contains("kappa"));
    }

    #[test]
    fn parameter_ranges() {
        assert!(MaterialParams::new(0.0, 1.0, 1.0, 0.0, 0.0).is_err());
        assert!(MaterialParams::new(1.0, -1.0, 1.0, 0.0, 0.0).is_err());
        assert!(MaterialParams::new(1.0, 1.0, 0.0, 0.0, 0.0).is_err());
        assert!(MaterialParams::new(1.0, 1.0, 1.5, 0.0, 0.0).is_err());
        assert!(MaterialParams::new(1.0, 1.0, 1.0, -1.0, 0.0).is_err());
        assert!(MaterialParams::new(1.0, 0.0, 0.5, 1e-3, 0.0).is_ok());
    }

    #[test]
    fn reference_time_grid_has_ten_steps() {
        let g = TimeGrid::new(0.0f64, 0.1, 1.0).unwrap();
        assert_eq!(g.num_steps().unwrap(), 10);
        let t = g.step_times().unwrap();
        assert!((t[9] - 1.0).abs() < 1e-12);
        assert_eq!(TimeGrid::new(0.0, 0.1, 0.1).unwrap().num_steps().unwrap(), 1);
    }

    #[test]
    fn bad_time_grids() {
        assert!(TimeGrid::new(0.0, 0.0, 1.0).is_err());
        assert!(TimeGrid::new(0.0, 0.3, 1.0).is_err());
        assert!(TimeGrid::new(1.0, 0.1, 1.0).is_err());
    }
}
