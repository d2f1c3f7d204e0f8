//! Monte Carlo engines for the product tail `P[XY > x]`, the per-term tails
//! H̄_i(x) = `P[X_i Π_{j≤i} Y_j > x]`, and the ruin probabilities Ψ(x, n) and
//! Ψ(x), plus the exact product-tail quadrature used as their oracle.
//!
//! The conditional estimators integrate X out against its conditional law
//! given Y, which is exact under the Sarmanov density and collapses the
//! variance in the rare-event regime where an indicator almost never fires.
//!
//! Randomness layout: every estimator call derives ChaCha8 substreams from
//! (seed, stream id); stream ids are assigned per batch (conditional and
//! crude product estimators) or per path (crude ruin paths, so that common
//! random numbers couple estimates across x and n). Reductions fold in
//! stream order, making results bit-identical for any worker count.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::asymptotics::{self, AsymptoticConstants};
use crate::error::{Error, Result};
use crate::quad::{self, QuadConfig};
use crate::rng::{batch_sizes, stream_id, substream};
use crate::sarmanov::SarmanovModel;

/// Stream base for crude product-tail batches.
const BASE_CRUDE_PRODUCT: u64 = 0x2_0000;
/// Stream base for crude ruin paths (per-path streams).
const BASE_CRUDE_PATHS: u64 = 0x1_0000;
/// Conditional term i uses stream base i (i < 2^16).
const MAX_TERM_INDEX: u32 = 0xFFFF;

/// Estimator family tag.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum McMethod {
    Crude,
    Conditional,
}

/// Running state of one discounted-loss path: the accumulated discount
/// Π_{j≤k} Y_j, the partial sum S_k, and max_{j≤k} S_j.
#[derive(Debug, Clone)]
pub struct PathState {
    discount: f64,
    sum: f64,
    running_max: f64,
}

impl PathState {
    pub fn new() -> Self {
        PathState {
            discount: 1.0,
            sum: 0.0,
            running_max: f64::NEG_INFINITY,
        }
    }

    /// Fold in one (X_k, Y_k) pair: S_k = S_{k-1} + X_k Π_{j≤k} Y_j.
    pub fn step(&mut self, x: f64, y: f64) {
        self.discount *= y;
        self.sum += x * self.discount;
        self.running_max = self.running_max.max(self.sum);
    }

    pub fn discount(&self) -> f64 {
        self.discount
    }

    pub fn sum(&self) -> f64 {
        self.sum
    }

    /// max_k S_k over the steps taken so far (−∞ before the first step).
    pub fn running_max(&self) -> f64 {
        self.running_max
    }
}

impl Default for PathState {
    fn default() -> Self {
        Self::new()
    }
}

/// The unit of all simulation output.
#[derive(Debug, Clone, Serialize)]
pub struct MCEstimate {
    pub value: f64,
    pub stderr: f64,
    pub n_samples: u64,
    pub method: McMethod,
    pub seed: u64,
    /// Truncation horizon N, present only for the infinite-horizon estimator.
    pub truncation_index: Option<u32>,
    /// Conservative bound on the truncated mass, present with `truncation_index`.
    pub remainder_bound: Option<f64>,
}

/// Mean and batch-mean standard error of `eval` over `n` draws, batched and
/// reduced in fixed order.
fn run_batched<E>(n: u64, seed: u64, base: u64, eval: E) -> Result<(f64, f64)>
where
    E: Fn(&mut ChaCha8Rng, u64) -> Result<f64> + Sync,
{
    if n == 0 {
        return Err(Error::Domain("n_samples must be >= 1".into()));
    }
    let sizes = batch_sizes(n);
    let means: Vec<Result<f64>> = sizes
        .par_iter()
        .enumerate()
        .map(|(b, &size)| {
            let mut rng = substream(seed, stream_id(base, b as u64));
            eval(&mut rng, size)
        })
        .collect();
    let mut acc = Vec::with_capacity(means.len());
    for m in means {
        acc.push(m?);
    }
    Ok(combine_batches(&sizes, &acc, n))
}

fn combine_batches(sizes: &[u64], means: &[f64], n: u64) -> (f64, f64) {
    let value = sizes
        .iter()
        .zip(means)
        .map(|(&s, &m)| s as f64 * m)
        .sum::<f64>()
        / n as f64;
    let b = means.len();
    if b < 2 {
        return (value, 0.0);
    }
    let var = means.iter().map(|&m| (m - value).powi(2)).sum::<f64>() / (b as f64 - 1.0);
    (value, (var / b as f64).sqrt())
}

/// `P[XY > x]` by adaptive quadrature of the conditional tail against G.
/// For Pareto-type F with FGM kernels and a bounded G entirely below
/// x / x_m, the closed form x_m^α x^{-α} κ + θ (x_m/x)^{2α} `E[φ₂(Y) Y^{2α}]`
/// is evaluated as well and must agree to 1e-10.
pub fn exact_product_tail(model: &SarmanovModel, x: f64) -> Result<f64> {
    if !x.is_finite() {
        return Err(Error::Domain(format!("x must be finite, got {x}")));
    }
    if x <= 0.0 {
        return Ok(1.0);
    }
    let g = model.g();
    let x_m = model.f().x_m();
    // Above u* the discount factor exceeds x / x_m, the conditional tail is
    // exactly 1, and the integrand needs no quadrature.
    let u_star = g.cdf(x / x_m).clamp(0.0, 1.0);
    let mut value = 1.0 - u_star;
    if u_star > 0.0 {
        value += match g {
            crate::marginals::DiscountLaw::Lognormal { mu, sigma } => {
                let z_star = (((x / x_m).ln() - mu) / sigma).min(14.0);
                quad::integrate(
                    |z| {
                        let y = (mu + sigma * z).exp();
                        model
                            .conditional_tail_x_given_y(y, x / y)
                            .unwrap_or(f64::NAN)
                            * (-0.5 * z * z).exp()
                            / (2.0 * std::f64::consts::PI).sqrt()
                    },
                    -14.0,
                    z_star,
                    QuadConfig::with_abs_tol(1e-11),
                )?
            }
            _ => quad::integrate(
                |u| {
                    let y = g.quantile_inner(u);
                    model
                        .conditional_tail_x_given_y(y, x / y)
                        .unwrap_or(f64::NAN)
                },
                0.0,
                u_star,
                QuadConfig::with_abs_tol(1e-11),
            )?,
        };
    }
    if !value.is_finite() {
        return Err(Error::Numerical(
            "product-tail quadrature hit an inconsistent conditional tail".into(),
        ));
    }
    let value = value.clamp(0.0, 1.0);

    let g_hi = g.support().1;
    if model.is_fgm() && model.f().sv().is_type_i() && g_hi.is_finite() && x >= x_m * g_hi {
        let alpha = model.f().alpha();
        let theta = model.theta();
        let e_y_alpha = g.power_moment(alpha)?;
        let km = g.expect_poly(alpha, |y| model.phi2(y), 1e-12)?;
        let kappa = e_y_alpha - theta * km;
        let e2 = g.expect_poly(2.0 * alpha, |y| model.phi2(y), 1e-12)?;
        let t = (x / x_m).powf(-alpha);
        let closed = t * kappa + theta * t * t * e2;
        if (closed - value).abs() > 1e-10f64.max(1e-8 * value) {
            return Err(Error::Numerical(format!(
                "product tail closed form {closed:.15e} disagrees with quadrature {value:.15e}"
            )));
        }
    }
    Ok(value)
}

/// Monte Carlo estimate of `P[XY > x]`: indicator mean over joint draws
/// (crude) or mean of the conditional tail over discount draws
/// (conditional, unbiased and variance-reduced).
pub fn product_tail_mc(
    model: &SarmanovModel,
    x: f64,
    method: McMethod,
    n_samples: u64,
    seed: u64,
) -> Result<MCEstimate> {
    match method {
        McMethod::Conditional => estimate_h_i(model, 1, x, n_samples, seed),
        McMethod::Crude => {
            let (value, stderr) = run_batched(n_samples, seed, BASE_CRUDE_PRODUCT, |rng, size| {
                let mut hits = 0u64;
                for _ in 0..size {
                    let (xv, yv) = model.draw_joint(rng)?;
                    if xv * yv > x {
                        hits += 1;
                    }
                }
                Ok(hits as f64 / size as f64)
            })?;
            Ok(MCEstimate {
                value,
                stderr,
                n_samples,
                method,
                seed,
                truncation_index: None,
                remainder_bound: None,
            })
        }
    }
}

/// Unbiased conditional estimator of H̄_i(x) = `P[X_i Π_{j≤i} Y_j > x]`:
/// draw (Y_1, ..., Y_i) i.i.d. from G and average
/// `P[X > x / (Y_1 ⋯ Y_i) | Y = Y_i]`.
pub fn estimate_h_i(
    model: &SarmanovModel,
    i: u32,
    x: f64,
    n_samples: u64,
    seed: u64,
) -> Result<MCEstimate> {
    if i == 0 || i > MAX_TERM_INDEX {
        return Err(Error::Domain(format!(
            "term index must be in [1, {MAX_TERM_INDEX}], got {i}"
        )));
    }
    let g = model.g();
    let (value, stderr) = run_batched(n_samples, seed, u64::from(i), |rng, size| {
        let mut sum = 0.0;
        for _ in 0..size {
            let mut prod = 1.0_f64;
            let mut y_last = 1.0_f64;
            for _ in 0..i {
                y_last = g.quantile_inner(rng.random());
                prod *= y_last;
            }
            sum += model.conditional_tail_x_given_y(y_last, x / prod)?;
        }
        Ok(sum / size as f64)
    })?;
    Ok(MCEstimate {
        value,
        stderr,
        n_samples,
        method: McMethod::Conditional,
        seed,
        truncation_index: None,
        remainder_bound: None,
    })
}

/// Ψ(x, n) = `P[max_{1≤k≤n} S_k > x]`. The crude method simulates paths with
/// joint Sarmanov draws per step; the conditional method returns
/// Σ_{i≤n} Ĥ_i(x), which estimates Ψ only in the asymptotic regime and is
/// tagged accordingly.
pub fn estimate_finite_ruin(
    model: &SarmanovModel,
    x: f64,
    n: u32,
    method: McMethod,
    n_samples: u64,
    seed: u64,
) -> Result<MCEstimate> {
    if n == 0 {
        return Err(Error::Domain("horizon n must be >= 1".into()));
    }
    match method {
        McMethod::Crude => crude_ruin(model, x, n, n_samples, seed),
        McMethod::Conditional => {
            let mut value = 0.0;
            let mut var = 0.0;
            for i in 1..=n {
                let est = estimate_h_i(model, i, x, n_samples, seed)?;
                value += est.value;
                var += est.stderr * est.stderr;
            }
            Ok(MCEstimate {
                value: value.min(1.0),
                stderr: var.sqrt(),
                n_samples,
                method,
                seed,
                truncation_index: None,
                remainder_bound: None,
            })
        }
    }
}

fn crude_ruin(
    model: &SarmanovModel,
    x: f64,
    n: u32,
    n_samples: u64,
    seed: u64,
) -> Result<MCEstimate> {
    if n_samples == 0 {
        return Err(Error::Domain("n_samples must be >= 1".into()));
    }
    if n_samples > u64::from(u32::MAX) {
        return Err(Error::Domain(
            "crude path count is limited to 2^32 - 1".into(),
        ));
    }
    let sizes = batch_sizes(n_samples);
    let mut starts = Vec::with_capacity(sizes.len());
    let mut acc = 0u64;
    for &s in &sizes {
        starts.push(acc);
        acc += s;
    }
    // Per-path substreams: the same path index re-reads the same draws for
    // any (x, n), so estimates driven by a common seed are coupled
    // pathwise and monotone in x and n.
    let proto = substream(seed, 0);
    let means: Vec<Result<f64>> = sizes
        .par_iter()
        .zip(&starts)
        .map(|(&size, &start)| {
            let mut hits = 0u64;
            for p in 0..size {
                let mut rng = proto.clone();
                rng.set_stream(stream_id(BASE_CRUDE_PATHS, start + p));
                let mut path = PathState::new();
                for _ in 0..n {
                    let (xv, yv) = model.draw_joint(&mut rng)?;
                    path.step(xv, yv);
                }
                if path.running_max() > x {
                    hits += 1;
                }
            }
            Ok(hits as f64 / size as f64)
        })
        .collect();
    let mut batch_means = Vec::with_capacity(means.len());
    for m in means {
        batch_means.push(m?);
    }
    let (value, stderr) = combine_batches(&sizes, &batch_means, n_samples);
    Ok(MCEstimate {
        value,
        stderr,
        n_samples,
        method: McMethod::Crude,
        seed,
        truncation_index: None,
        remainder_bound: None,
    })
}

/// Ψ(x) = `P[sup_n S_n > x]` by the truncated conditional estimator.
///
/// The horizon N comes from the explicit remainder bound
/// `P[Σ_{i>N} Z_i ζ_i > x]` ≤ x^{-p} `E[(XY)^p]` ρ_p^N / (1 - ρ_p) with
/// ρ_p = `E[Y^p]` and p = min(α, 1)/2 (valid by subadditivity of t ↦ t^p),
/// pushed below `tail_tol · κ · F̄(x)`.
pub fn estimate_infinite_ruin(
    model: &SarmanovModel,
    x: f64,
    n_samples: u64,
    tail_tol: f64,
    seed: u64,
) -> Result<MCEstimate> {
    if !(tail_tol > 0.0 && tail_tol.is_finite()) {
        return Err(Error::Domain(format!(
            "tail_tol must be positive, got {tail_tol}"
        )));
    }
    let consts = asymptotics::breiman_constant(model)?;
    if consts.e_y_alpha >= 1.0 {
        return Err(Error::Hypothesis(format!(
            "E[Y^α] < 1 fails: E[Y^α] = {}",
            consts.e_y_alpha
        )));
    }
    let log_mean = model.g().log_mean()?;
    if log_mean >= 0.0 {
        return Err(Error::Hypothesis(format!(
            "E[log Y] < 0 fails: E[log Y] = {log_mean}; sup_n S_n need not be finite"
        )));
    }

    let (n_trunc, bound) = truncation_horizon(model, &consts, x, tail_tol)?;
    let mut value = 0.0;
    let mut var = 0.0;
    for i in 1..=n_trunc {
        let est = estimate_h_i(model, i, x, n_samples, seed)?;
        value += est.value;
        var += est.stderr * est.stderr;
    }
    Ok(MCEstimate {
        value: value.min(1.0),
        stderr: var.sqrt(),
        n_samples,
        method: McMethod::Conditional,
        seed,
        truncation_index: Some(n_trunc),
        remainder_bound: Some(bound),
    })
}

/// Smallest N with the geometric remainder bound below tail_tol · κ · F̄(x);
/// returns (N, bound(N)).
fn truncation_horizon(
    model: &SarmanovModel,
    consts: &AsymptoticConstants,
    x: f64,
    tail_tol: f64,
) -> Result<(u32, f64)> {
    let p = 0.5 * consts.alpha.min(1.0);
    let rho_p = model.g().power_moment(p)?;
    if rho_p >= 1.0 {
        // Cannot happen when E[Y^α] < 1 (Lyapunov), kept as a guard.
        return Err(Error::Numerical(format!("E[Y^p] = {rho_p} >= 1 at p = {p}")));
    }
    let e_xy_p = product_power_moment(model, p)?;
    let target = tail_tol * consts.kappa * model.f().tail(x);
    let prefactor = x.powf(-p) * e_xy_p / (1.0 - rho_p);
    let bound = |n: u32| prefactor * rho_p.powi(n as i32);
    let n_real = ((target / prefactor).ln() / rho_p.ln()).ceil();
    let n_trunc = if n_real.is_finite() && n_real > 1.0 {
        n_real as u32
    } else {
        1
    };
    if n_trunc > 10_000 {
        return Err(Error::Numerical(format!(
            "truncation horizon N = {n_trunc} exceeds budget; tail_tol too small"
        )));
    }
    Ok((n_trunc, bound(n_trunc)))
}

/// `E[(XY)^p]` under the joint law:
/// `E[X^p]` `E[Y^p]` + θ `E[φ₁(X) X^p]` `E[φ₂(Y) Y^p]`.
fn product_power_moment(model: &SarmanovModel, p: f64) -> Result<f64> {
    let f = model.f();
    let e_x_p = f.power_moment(p)?;
    let e_y_p = model.g().power_moment(p)?;
    let cfg = QuadConfig {
        abs_tol: 1e-9,
        rel_tol: 1e-8,
        max_subdivisions: 10_000,
    };
    let e_phi1_xp = quad::integrate(
        |u| {
            let xv = f.quantile_inner(u);
            model.phi1(xv) * xv.powf(p)
        },
        0.0,
        1.0,
        cfg,
    )?;
    let e_phi2_yp = model.g().expect_poly(p, |y| model.phi2(y), 1e-10)?;
    Ok(e_x_p * e_y_p + model.theta() * e_phi1_xp * e_phi2_yp)
}

/// Which quantity a ratio curve tracks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum CurveTarget {
    ProductTail,
    FiniteRuin { n: u32 },
    InfiniteRuin { tail_tol: f64 },
}

/// Estimator used for the curve rows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CurveMethod {
    /// Quadrature (product tail only): stderr column is 0.
    Exact,
    Crude,
    Conditional,
}

/// One row of the convergence-evidence table.
#[derive(Debug, Clone, Serialize)]
pub struct CurveRow {
    pub x: f64,
    pub estimate: f64,
    pub stderr: f64,
    pub tail_f: f64,
    pub ratio: f64,
    pub predicted: f64,
    pub rel_err: f64,
}

/// Evaluate estimate/F̄(x) against the predicted constant along an
/// increasing x-grid. Row k uses seed + k so rows are independent.
pub fn ratio_curve(
    model: &SarmanovModel,
    grid: &[f64],
    target: CurveTarget,
    method: CurveMethod,
    n_samples: u64,
    seed: u64,
) -> Result<Vec<CurveRow>> {
    if grid.is_empty() || grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Domain(
            "x-grid must be nonempty and strictly increasing".into(),
        ));
    }
    let consts = asymptotics::breiman_constant(model)?;
    let predicted = match target {
        CurveTarget::ProductTail => consts.kappa,
        CurveTarget::FiniteRuin { n } => consts.finite_horizon_factor(n)?,
        CurveTarget::InfiniteRuin { .. } => consts.infinite_horizon_factor()?,
    };
    let mut rows = Vec::with_capacity(grid.len());
    for (k, &x) in grid.iter().enumerate() {
        let row_seed = seed.wrapping_add(k as u64);
        let (estimate, stderr) = match (target, method) {
            (CurveTarget::ProductTail, CurveMethod::Exact) => (exact_product_tail(model, x)?, 0.0),
            (CurveTarget::ProductTail, CurveMethod::Crude) => {
                let e = product_tail_mc(model, x, McMethod::Crude, n_samples, row_seed)?;
                (e.value, e.stderr)
            }
            (CurveTarget::ProductTail, CurveMethod::Conditional) => {
                let e = product_tail_mc(model, x, McMethod::Conditional, n_samples, row_seed)?;
                (e.value, e.stderr)
            }
            (CurveTarget::FiniteRuin { n }, CurveMethod::Crude) => {
                let e = estimate_finite_ruin(model, x, n, McMethod::Crude, n_samples, row_seed)?;
                (e.value, e.stderr)
            }
            (CurveTarget::FiniteRuin { n }, CurveMethod::Conditional) => {
                let e =
                    estimate_finite_ruin(model, x, n, McMethod::Conditional, n_samples, row_seed)?;
                (e.value, e.stderr)
            }
            (CurveTarget::InfiniteRuin { tail_tol }, CurveMethod::Conditional) => {
                let e = estimate_infinite_ruin(model, x, n_samples, tail_tol, row_seed)?;
                (e.value, e.stderr)
            }
            (t, m) => {
                return Err(Error::Domain(format!(
                    "method {m:?} is not available for target {t:?}"
                )))
            }
        };
        let tail_f = model.f().tail(x);
        let ratio = estimate / tail_f;
        rows.push(CurveRow {
            x,
            estimate,
            stderr,
            tail_f,
            ratio,
            predicted,
            rel_err: (ratio - predicted).abs() / predicted,
        });
    }
    Ok(rows)
}
