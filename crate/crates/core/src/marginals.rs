//! Marginal laws: the regularly varying insurance-risk law F (with the four
//! slowly-varying forms) and the discount law G from a fixed catalog with
//! exact tails, quantiles, and power moments.

use rand::Rng;

use crate::error::{Error, Result};
use crate::quad::{self, QuadConfig};
use crate::rng::substream;
use crate::special;

/// Long-tailed laws available as the U/V components of a slowly varying
/// function. Weibull shape is restricted below 1, which keeps the law
/// long-tailed and is the catalog's S* representative.
#[derive(Debug, Clone, PartialEq)]
pub enum LongTailedLaw {
    Pareto { index: f64, scale: f64 },
    Weibull { shape: f64, rate: f64 },
    Lognormal { mu: f64, sigma: f64 },
}

impl LongTailedLaw {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            LongTailedLaw::Pareto { index, scale } => {
                index > 0.0 && index.is_finite() && scale > 0.0 && scale.is_finite()
            }
            LongTailedLaw::Weibull { shape, rate } => {
                shape > 0.0 && shape < 1.0 && rate > 0.0 && rate.is_finite()
            }
            LongTailedLaw::Lognormal { mu, sigma } => {
                mu.is_finite() && sigma > 0.0 && sigma.is_finite()
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Domain(format!("invalid long-tailed law {self:?}")))
        }
    }

    /// `P[W > t]`; equals 1 for t at or below the support's left end.
    pub fn tail(&self, t: f64) -> f64 {
        match *self {
            LongTailedLaw::Pareto { index, scale } => {
                if t <= scale {
                    1.0
                } else {
                    (scale / t).powf(index)
                }
            }
            LongTailedLaw::Weibull { shape, rate } => {
                if t <= 0.0 {
                    1.0
                } else {
                    (-(rate * t).powf(shape)).exp()
                }
            }
            LongTailedLaw::Lognormal { mu, sigma } => {
                if t <= 0.0 {
                    1.0
                } else {
                    special::std_normal_tail((t.ln() - mu) / sigma)
                }
            }
        }
    }

    /// Whether `E[W]` is finite (Pareto needs index > 1; the others always).
    pub fn mean_is_finite(&self) -> bool {
        match *self {
            LongTailedLaw::Pareto { index, .. } => index > 1.0,
            _ => true,
        }
    }

    /// Literature membership in the S* class (subexponential density of the
    /// integrated tail). Catalog members with finite mean are in S*; a
    /// Pareto with index <= 1 has infinite mean and is not.
    pub fn in_s_star(&self) -> bool {
        self.mean_is_finite()
    }
}

/// Which of the four slowly-varying forms L takes. U and V are long-tailed;
/// they are present exactly when the form requires them.
#[derive(Debug, Clone, PartialEq)]
pub enum SlowlyVaryingForm {
    /// L(x) = c
    TypeI,
    /// L(x) = c / `P[V > log x]`
    TypeII { v: LongTailedLaw },
    /// L(x) = c · `P[U > log x]`
    TypeIII { u: LongTailedLaw },
    /// L(x) = c · `P[U > log x]` / `P[V > log x]`
    TypeIV { u: LongTailedLaw, v: LongTailedLaw },
}

/// A slowly varying function from the four-form taxonomy, with the limit
/// constant c (implemented as c(x) ≡ c).
#[derive(Debug, Clone, PartialEq)]
pub struct SlowlyVaryingSpec {
    pub c: f64,
    pub form: SlowlyVaryingForm,
}

impl SlowlyVaryingSpec {
    pub fn type_i(c: f64) -> Self {
        SlowlyVaryingSpec {
            c,
            form: SlowlyVaryingForm::TypeI,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.c > 0.0 && self.c.is_finite()) {
            return Err(Error::Domain(format!(
                "slowly varying constant c must be positive and finite, got {}",
                self.c
            )));
        }
        if let Some(u) = self.u_law() {
            u.validate()?;
        }
        if let Some(v) = self.v_law() {
            v.validate()?;
        }
        Ok(())
    }

    pub fn u_law(&self) -> Option<&LongTailedLaw> {
        match &self.form {
            SlowlyVaryingForm::TypeIII { u } | SlowlyVaryingForm::TypeIV { u, .. } => Some(u),
            _ => None,
        }
    }

    pub fn v_law(&self) -> Option<&LongTailedLaw> {
        match &self.form {
            SlowlyVaryingForm::TypeII { v } | SlowlyVaryingForm::TypeIV { v, .. } => Some(v),
            _ => None,
        }
    }

    /// L(x), unnormalized.
    pub fn eval(&self, x: f64) -> f64 {
        let t = x.ln();
        match &self.form {
            SlowlyVaryingForm::TypeI => self.c,
            SlowlyVaryingForm::TypeII { v } => self.c / v.tail(t),
            SlowlyVaryingForm::TypeIII { u } => self.c * u.tail(t),
            SlowlyVaryingForm::TypeIV { u, v } => self.c * u.tail(t) / v.tail(t),
        }
    }

    pub fn is_type_i(&self) -> bool {
        matches!(self.form, SlowlyVaryingForm::TypeI)
    }
}

/// The insurance-risk marginal: tail(x) = x^{-α} L(x) for x >= x_m,
/// renormalized so tail(x_m) = 1 exactly, and tail = 1 below x_m.
#[derive(Debug, Clone)]
pub struct RegularlyVaryingLaw {
    alpha: f64,
    x_m: f64,
    sv: SlowlyVaryingSpec,
    /// Raw x^{-α} L(x) at x_m, divided out so the CDF starts at 0 at x_m.
    norm: f64,
}

impl RegularlyVaryingLaw {
    pub fn new(alpha: f64, x_m: f64, sv: SlowlyVaryingSpec) -> Result<Self> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::Domain(format!(
                "tail index alpha must be positive and finite, got {alpha}"
            )));
        }
        if !(x_m > 0.0 && x_m.is_finite()) {
            return Err(Error::Domain(format!(
                "left endpoint x_m must be positive and finite, got {x_m}"
            )));
        }
        sv.validate()?;
        let raw = |x: f64| x.powf(-alpha) * sv.eval(x);
        let norm = raw(x_m);
        if !(norm.is_finite() && norm > 0.0) {
            return Err(Error::Domain(
                "tail normalization at x_m is not positive and finite".into(),
            ));
        }
        // The four L-forms with a growing factor (TypeII/TypeIV) can make
        // x^{-α} L(x) hump; such parameters do not define a distribution.
        let mut prev = 1.0_f64;
        let n_grid = 4096;
        for k in 1..=n_grid {
            let x = x_m * 10f64.powf(10.0 * k as f64 / n_grid as f64);
            let t = raw(x) / norm;
            if t > prev * (1.0 + 1e-9) {
                return Err(Error::Domain(format!(
                    "x^(-alpha) L(x) is increasing near x = {x:.6e}; \
                     these parameters do not define a valid tail"
                )));
            }
            prev = t;
        }
        Ok(RegularlyVaryingLaw {
            alpha,
            x_m,
            sv,
            norm,
        })
    }

    /// The Pareto-type law: TypeI with c = 1.
    pub fn pareto_type(alpha: f64, x_m: f64) -> Result<Self> {
        Self::new(alpha, x_m, SlowlyVaryingSpec::type_i(1.0))
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn x_m(&self) -> f64 {
        self.x_m
    }

    pub fn sv(&self) -> &SlowlyVaryingSpec {
        &self.sv
    }

    /// `P[X > x]`.
    pub fn tail(&self, x: f64) -> f64 {
        if x <= self.x_m || x.is_nan() {
            return 1.0;
        }
        (x.powf(-self.alpha) * self.sv.eval(x) / self.norm).min(1.0)
    }

    /// `P[X <= x]`.
    pub fn cdf(&self, x: f64) -> f64 {
        1.0 - self.tail(x)
    }

    /// The normalized slowly varying part, L(x) = x^α `P[X > x]` for x >= x_m.
    pub fn slowly_varying(&self, x: f64) -> f64 {
        self.tail(x) * x.powf(self.alpha)
    }

    /// inf{x : CDF(x) >= u} for u in (0,1).
    pub fn quantile(&self, u: f64) -> Result<f64> {
        if !(u > 0.0 && u < 1.0) {
            return Err(Error::Domain(format!(
                "quantile requires u in (0,1), got {u}"
            )));
        }
        Ok(self.quantile_inner(u))
    }

    /// Total inverse CDF on [0,1); u = 0 maps to x_m.
    pub(crate) fn quantile_inner(&self, u: f64) -> f64 {
        if u <= 0.0 {
            return self.x_m;
        }
        let target = 1.0 - u;
        if self.sv.is_type_i() {
            return self.x_m * target.powf(-1.0 / self.alpha);
        }
        // Bracket then bisect on the (nonincreasing) tail.
        let mut hi = 2.0 * self.x_m;
        let mut guard = 0;
        while self.tail(hi) > target {
            hi *= 2.0;
            guard += 1;
            assert!(guard < 4000, "tail bracket failed to close");
        }
        let mut lo = self.x_m.max(hi / 2.0);
        if self.tail(lo) <= target {
            lo = self.x_m;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if self.tail(mid) > target {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= 1e-13 * hi {
                break;
            }
        }
        0.5 * (lo + hi)
    }

    /// n i.i.d. draws by inverse CDF, fully determined by (law, n, seed).
    pub fn sample_iid(&self, n: usize, seed: u64) -> Vec<f64> {
        let mut rng = substream(seed, 0);
        (0..n)
            .map(|_| self.quantile_inner(rng.random::<f64>()))
            .collect()
    }

    /// m(x) = ∫_0^x v^α F(dv); closed form for TypeI, quadrature otherwise.
    pub fn truncated_alpha_moment(&self, x: f64) -> Result<f64> {
        if x < self.x_m {
            return Err(Error::Domain(format!(
                "truncated alpha-moment requires x >= x_m = {}, got {x}",
                self.x_m
            )));
        }
        if self.sv.is_type_i() {
            return Ok(self.alpha * self.x_m.powf(self.alpha) * (x / self.x_m).ln());
        }
        // m(x) = x_m^α - x^α tail(x) + α ∫ v^{α-1} tail(v) dv, on a log grid.
        let s_max = (x / self.x_m).ln();
        let integral = quad::integrate(
            |t| {
                let v = self.x_m * t.exp();
                v.powf(self.alpha) * self.tail(v)
            },
            0.0,
            s_max,
            QuadConfig::with_abs_tol(1e-10),
        )?;
        Ok(self.x_m.powf(self.alpha) - x.powf(self.alpha) * self.tail(x) + self.alpha * integral)
    }

    /// `E[X^p]` for 0 <= p < α (infinite otherwise).
    pub fn power_moment(&self, p: f64) -> Result<f64> {
        if !(0.0..self.alpha).contains(&p) {
            return Err(Error::Domain(format!(
                "E[X^p] requires 0 <= p < alpha = {}, got p = {p}",
                self.alpha
            )));
        }
        if self.sv.is_type_i() {
            return Ok(self.alpha * self.x_m.powf(p) / (self.alpha - p));
        }
        // E[X^p] = x_m^p + p ∫_{x_m}^∞ t^{p-1} tail(t) dt, chunked on a log grid.
        let mut total = self.x_m.powf(p);
        let mut lo = 0.0_f64;
        for k in 0..100 {
            let hi = lo + 8.0;
            let chunk = quad::integrate(
                |s| {
                    let t = self.x_m * s.exp();
                    t.powf(p) * self.tail(t)
                },
                lo,
                hi,
                QuadConfig::with_abs_tol(1e-11),
            )?;
            total += p * chunk;
            if chunk.abs() < 1e-12 && k >= 2 {
                return Ok(total);
            }
            lo = hi;
        }
        Err(Error::Numerical(
            "E[X^p] tail integral did not decay within budget".into(),
        ))
    }
}

/// Discount-factor marginal: positive support, all power moments finite,
/// exact tails, quantiles, and moments for every member.
#[derive(Debug, Clone, PartialEq)]
pub enum DiscountLaw {
    /// Uniform on (0, b].
    Uniform { b: f64 },
    /// scale · Beta(a, b).
    ScaledBeta { a: f64, b: f64, scale: f64 },
    /// Pareto(index) truncated to [lo, hi].
    BoundedPareto { index: f64, lo: f64, hi: f64 },
    Lognormal { mu: f64, sigma: f64 },
    PointMass { y0: f64 },
}

impl DiscountLaw {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            DiscountLaw::Uniform { b } => b > 0.0 && b.is_finite(),
            DiscountLaw::ScaledBeta { a, b, scale } => {
                a > 0.0 && b > 0.0 && scale > 0.0 && a.is_finite() && b.is_finite() && scale.is_finite()
            }
            DiscountLaw::BoundedPareto { index, lo, hi } => {
                index > 0.0 && lo > 0.0 && hi > lo && hi.is_finite()
            }
            DiscountLaw::Lognormal { mu, sigma } => mu.is_finite() && sigma > 0.0 && sigma.is_finite(),
            DiscountLaw::PointMass { y0 } => y0 > 0.0 && y0.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Domain(format!("invalid discount law {self:?}")))
        }
    }

    /// (inf, sup) of the support; sup is +∞ for the lognormal.
    pub fn support(&self) -> (f64, f64) {
        match *self {
            DiscountLaw::Uniform { b } => (0.0, b),
            DiscountLaw::ScaledBeta { scale, .. } => (0.0, scale),
            DiscountLaw::BoundedPareto { lo, hi, .. } => (lo, hi),
            DiscountLaw::Lognormal { .. } => (0.0, f64::INFINITY),
            DiscountLaw::PointMass { y0 } => (y0, y0),
        }
    }

    /// `P[Y > y]`.
    pub fn tail(&self, y: f64) -> f64 {
        match *self {
            DiscountLaw::Uniform { b } => (1.0 - y / b).clamp(0.0, 1.0),
            DiscountLaw::ScaledBeta { a, b, scale } => {
                if y <= 0.0 {
                    1.0
                } else if y >= scale {
                    0.0
                } else {
                    1.0 - special::betainc_reg(a, b, y / scale)
                }
            }
            DiscountLaw::BoundedPareto { index, lo, hi } => {
                if y <= lo {
                    1.0
                } else if y >= hi {
                    0.0
                } else {
                    let r = (lo / hi).powf(index);
                    (((lo / y).powf(index) - r) / (1.0 - r)).clamp(0.0, 1.0)
                }
            }
            DiscountLaw::Lognormal { mu, sigma } => {
                if y <= 0.0 {
                    1.0
                } else {
                    special::std_normal_tail((y.ln() - mu) / sigma)
                }
            }
            DiscountLaw::PointMass { y0 } => {
                if y < y0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    /// `P[Y <= y]`.
    pub fn cdf(&self, y: f64) -> f64 {
        1.0 - self.tail(y)
    }

    /// Midpoint distribution function (`P[Y < y]` + `P[Y <= y]`) / 2. This is
    /// the CDF for every continuous member; for a point mass it takes the
    /// value 1/2 at the atom, which is what keeps the FGM kernel centered.
    pub fn cdf_mid(&self, y: f64) -> f64 {
        match *self {
            DiscountLaw::PointMass { y0 } => {
                if y < y0 {
                    0.0
                } else if y > y0 {
                    1.0
                } else {
                    0.5
                }
            }
            _ => self.cdf(y),
        }
    }

    /// inf{y : CDF(y) >= u} for u in (0,1), in closed form (bisection on the
    /// regularized incomplete beta for the scaled beta).
    pub fn quantile(&self, u: f64) -> Result<f64> {
        if !(u > 0.0 && u < 1.0) {
            return Err(Error::Domain(format!(
                "quantile requires u in (0,1), got {u}"
            )));
        }
        Ok(self.quantile_inner(u))
    }

    pub(crate) fn quantile_inner(&self, u: f64) -> f64 {
        let u = u.max(f64::MIN_POSITIVE);
        match *self {
            DiscountLaw::Uniform { b } => u * b,
            DiscountLaw::ScaledBeta { a, b, scale } => scale * special::betainc_inv(a, b, u),
            DiscountLaw::BoundedPareto { index, lo, hi } => {
                let r = (lo / hi).powf(index);
                lo * (1.0 - u * (1.0 - r)).powf(-1.0 / index)
            }
            DiscountLaw::Lognormal { mu, sigma } => {
                (mu + sigma * special::std_normal_quantile(u).expect("u in (0,1)")).exp()
            }
            DiscountLaw::PointMass { y0 } => y0,
        }
    }

    pub fn sample_iid(&self, n: usize, seed: u64) -> Vec<f64> {
        let mut rng = substream(seed, 0);
        (0..n)
            .map(|_| self.quantile_inner(rng.random::<f64>()))
            .collect()
    }

    /// `E[Y^p]` for p >= 0, exact for every catalog member.
    pub fn power_moment(&self, p: f64) -> Result<f64> {
        if !(p >= 0.0 && p.is_finite()) {
            return Err(Error::Domain(format!(
                "power moment requires p >= 0, got {p}"
            )));
        }
        Ok(match *self {
            DiscountLaw::Uniform { b } => b.powf(p) / (p + 1.0),
            DiscountLaw::ScaledBeta { a, b, scale } => {
                scale.powf(p)
                    * (special::ln_gamma(a + p) + special::ln_gamma(a + b)
                        - special::ln_gamma(a)
                        - special::ln_gamma(a + b + p))
                        .exp()
            }
            DiscountLaw::BoundedPareto { index, lo, hi } => {
                let r = (lo / hi).powf(index);
                if (p - index).abs() < 1e-12 {
                    index * lo.powf(index) * (hi / lo).ln() / (1.0 - r)
                } else {
                    index * lo.powf(index) * (hi.powf(p - index) - lo.powf(p - index))
                        / ((p - index) * (1.0 - r))
                }
            }
            DiscountLaw::Lognormal { mu, sigma } => (p * mu + 0.5 * p * p * sigma * sigma).exp(),
            DiscountLaw::PointMass { y0 } => y0.powf(p),
        })
    }

    /// (`E[log Y]`, Var[log Y]); closed form except for the scaled beta,
    /// which integrates in quantile space.
    pub fn log_moments(&self) -> Result<(f64, f64)> {
        Ok(match *self {
            DiscountLaw::Uniform { b } => (b.ln() - 1.0, 1.0),
            DiscountLaw::BoundedPareto { index, lo, hi } => {
                let t_max = (hi / lo).ln();
                let r = (-index * t_max).exp();
                let denom = 1.0 - r;
                let et = (1.0 - r * (1.0 + index * t_max)) / (index * denom);
                let et2 = 2.0
                    * (1.0 - r * (1.0 + index * t_max + 0.5 * index * index * t_max * t_max))
                    / (index * index * denom);
                (lo.ln() + et, et2 - et * et)
            }
            DiscountLaw::Lognormal { mu, sigma } => (mu, sigma * sigma),
            DiscountLaw::PointMass { y0 } => (y0.ln(), 0.0),
            DiscountLaw::ScaledBeta { .. } => {
                let mean = self.expect(|y| y.ln(), 1e-9)?;
                let second = self.expect(|y| y.ln().powi(2), 1e-9)?;
                (mean, second - mean * mean)
            }
        })
    }

    /// `E[log Y]`.
    pub fn log_mean(&self) -> Result<f64> {
        Ok(self.log_moments()?.0)
    }

    /// `E[h(Y)]` by quadrature in quantile space (or z-space for the
    /// lognormal). Exact-enough for bounded or log-growth h.
    pub fn expect<H: Fn(f64) -> f64>(&self, h: H, abs_tol: f64) -> Result<f64> {
        self.expect_poly(0.0, h, abs_tol)
    }

    /// `E[h(Y) · Y^p]` for bounded h.
    pub fn expect_poly<H: Fn(f64) -> f64>(&self, p: f64, h: H, abs_tol: f64) -> Result<f64> {
        let cfg = QuadConfig {
            abs_tol,
            rel_tol: 1e-9,
            max_subdivisions: 10_000,
        };
        match *self {
            DiscountLaw::PointMass { y0 } => Ok(h(y0) * y0.powf(p)),
            DiscountLaw::Lognormal { mu, sigma } => {
                let z_lo = (p * sigma).min(0.0) - 14.0;
                let z_hi = (p * sigma).max(0.0) + 14.0;
                quad::integrate(
                    |z| {
                        let y = (mu + sigma * z).exp();
                        h(y) * y.powf(p) * (-0.5 * z * z).exp()
                            / (2.0 * std::f64::consts::PI).sqrt()
                    },
                    z_lo,
                    z_hi,
                    cfg,
                )
            }
            _ => quad::integrate(
                |u| {
                    let y = self.quantile_inner(u);
                    h(y) * y.powf(p)
                },
                0.0,
                1.0,
                cfg,
            ),
        }
    }
}
