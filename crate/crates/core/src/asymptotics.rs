//! The asymptotic constants: the product-tail (Breiman-type) constant
//! κ = `E[Y^α]` + θ d₁ `E[φ₂(Y) Y^α]`, the finite-horizon factor
//! (1 - `E[Y^α]`^n)/(1 - `E[Y^α]`) · κ, the infinite-horizon factor
//! κ/(1 - `E[Y^α]`), and the per-term predictions H̄_i(x) ≈ `E[Y^α]`^{i-1} κ F̄(x).

use serde::Serialize;

use crate::error::{Error, Result};
use crate::marginals::DiscountLaw;
use crate::sarmanov::SarmanovModel;

/// Relative width of the `E[Y^α] = 1` branch of the finite-horizon factor.
/// Quadrature noise must not flip a geometric factor into the linear-n one.
const UNIT_MOMENT_TOL: f64 = 1e-12;

/// Everything on the right-hand side of the product/ruin asymptotics.
#[derive(Debug, Clone, Serialize)]
pub struct AsymptoticConstants {
    pub alpha: f64,
    pub theta: f64,
    pub d1: f64,
    /// `E[Y^α]`.
    pub e_y_alpha: f64,
    /// `E[φ₂(Y) Y^α]`.
    pub kernel_moment: f64,
    /// κ = `E[Y^α]` + θ d₁ `E[φ₂(Y) Y^α]`.
    pub kappa: f64,
}

impl AsymptoticConstants {
    /// (1 - `E[Y^α]`^n)/(1 - `E[Y^α]`) · κ, with the value n·κ on the
    /// `E[Y^α] = 1` branch.
    pub fn finite_horizon_factor(&self, n: u32) -> Result<f64> {
        if n == 0 {
            return Err(Error::Domain("horizon n must be >= 1".into()));
        }
        Ok(self.geometric_sum(n) * self.kappa)
    }

    /// Σ_{i=1..n} `E[Y^α]`^{i-1}, with the stated convention at `E[Y^α] = 1`.
    fn geometric_sum(&self, n: u32) -> f64 {
        let rho = self.e_y_alpha;
        if (rho - 1.0).abs() <= UNIT_MOMENT_TOL {
            n as f64
        } else {
            (1.0 - rho.powi(n as i32)) / (1.0 - rho)
        }
    }

    /// κ/(1 - `E[Y^α]`); requires the theorem's standing hypothesis `E[Y^α]` < 1.
    pub fn infinite_horizon_factor(&self) -> Result<f64> {
        if self.e_y_alpha >= 1.0 {
            return Err(Error::Hypothesis(format!(
                "E[Y^α] < 1 fails: E[Y^α] = {}",
                self.e_y_alpha
            )));
        }
        Ok(self.kappa / (1.0 - self.e_y_alpha))
    }
}

/// Compute the constants for a validated model, with the twisted-law
/// cross-check E_{G_θ}[Y^α] = κ.
pub fn breiman_constant(model: &SarmanovModel) -> Result<AsymptoticConstants> {
    let alpha = model.f().alpha();
    let theta = model.theta();
    let d1 = model.d1();
    let e_y_alpha = model.g().power_moment(alpha)?;
    let kernel_moment = kernel_alpha_moment(model, alpha)?;
    let kappa = e_y_alpha + theta * d1 * kernel_moment;
    if kappa <= 0.0 {
        return Err(Error::InvalidModel(format!(
            "κ = E[Y^α] + θ d₁ E[φ₂(Y) Y^α] = {kappa} is not positive; \
             the product-tail asymptotic is degenerate"
        )));
    }
    let twisted = model.twisted_law()?.power_moment(alpha)?;
    if (twisted - kappa).abs() > 1e-8 * kappa.max(1.0) {
        return Err(Error::Numerical(format!(
            "κ cross-check failed: direct {kappa} vs twisted moment {twisted}"
        )));
    }
    Ok(AsymptoticConstants {
        alpha,
        theta,
        d1,
        e_y_alpha,
        kernel_moment,
        kappa,
    })
}

/// `E[φ₂(Y) Y^p]`: closed form for FGM over a uniform discount law,
/// quadrature otherwise.
fn kernel_alpha_moment(model: &SarmanovModel, p: f64) -> Result<f64> {
    if model.is_fgm() {
        if let DiscountLaw::Uniform { b } = *model.g() {
            // E[(1 - 2Y/b) Y^p] = -p b^p / ((p+1)(p+2)).
            return Ok(-p * b.powf(p) / ((p + 1.0) * (p + 2.0)));
        }
    }
    model.g().expect_poly(p, |y| model.phi2(y), 1e-11)
}

/// Predicted per-term tail `E[Y^α]`^{i-1} κ F̄(x) of H̄_i(x) = `P[X_i Π_{j≤i} Y_j > x]`.
pub fn predicted_tail_h_i(model: &SarmanovModel, i: u32, x: f64) -> Result<f64> {
    if i == 0 {
        return Err(Error::Domain("term index i must be >= 1".into()));
    }
    if x < model.f().x_m() {
        return Err(Error::Domain(format!(
            "predicted tail requires x >= x_m = {}, got {x}",
            model.f().x_m()
        )));
    }
    let consts = breiman_constant(model)?;
    Ok(consts.e_y_alpha.powi(i as i32 - 1) * consts.kappa * model.f().tail(x))
}
