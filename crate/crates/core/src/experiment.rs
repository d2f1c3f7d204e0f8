//! Declarative experiment runner: parse a TOML experiment file, construct
//! and validate the model, dispatch to constants/estimators/diagnostics,
//! and write machine-readable results (curve.csv + summary.json).
//!
//! Seeds and worker counts are explicit in the file (never drawn from the
//! environment), so reruns of the same spec are byte-identical on the CSV.

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::asymptotics;
use crate::conditions::{self, SummabilityVariant};
use crate::error::{Error, Result};
use crate::marginals::{
    DiscountLaw, LongTailedLaw, RegularlyVaryingLaw, SlowlyVaryingForm, SlowlyVaryingSpec,
};
use crate::sarmanov::{self, KernelSpec, SarmanovModel};
use crate::simulate::{self, CurveMethod, CurveRow, CurveTarget};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum LongTailedConfig {
    Pareto { index: f64, scale: f64 },
    Weibull { shape: f64, rate: f64 },
    Lognormal { mu: f64, sigma: f64 },
}

impl LongTailedConfig {
    fn build(&self) -> LongTailedLaw {
        match *self {
            LongTailedConfig::Pareto { index, scale } => LongTailedLaw::Pareto { index, scale },
            LongTailedConfig::Weibull { shape, rate } => LongTailedLaw::Weibull { shape, rate },
            LongTailedConfig::Lognormal { mu, sigma } => LongTailedLaw::Lognormal { mu, sigma },
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "snake_case", deny_unknown_fields)]
pub enum SvConfig {
    TypeI {
        c: f64,
    },
    TypeIi {
        c: f64,
        v: LongTailedConfig,
    },
    TypeIii {
        c: f64,
        u: LongTailedConfig,
    },
    TypeIv {
        c: f64,
        u: LongTailedConfig,
        v: LongTailedConfig,
    },
}

impl Default for SvConfig {
    fn default() -> Self {
        SvConfig::TypeI { c: 1.0 }
    }
}

impl SvConfig {
    fn build(&self) -> SlowlyVaryingSpec {
        match self {
            SvConfig::TypeI { c } => SlowlyVaryingSpec {
                c: *c,
                form: SlowlyVaryingForm::TypeI,
            },
            SvConfig::TypeIi { c, v } => SlowlyVaryingSpec {
                c: *c,
                form: SlowlyVaryingForm::TypeII { v: v.build() },
            },
            SvConfig::TypeIii { c, u } => SlowlyVaryingSpec {
                c: *c,
                form: SlowlyVaryingForm::TypeIII { u: u.build() },
            },
            SvConfig::TypeIv { c, u, v } => SlowlyVaryingSpec {
                c: *c,
                form: SlowlyVaryingForm::TypeIV {
                    u: u.build(),
                    v: v.build(),
                },
            },
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FConfig {
    pub alpha: f64,
    pub x_m: f64,
    #[serde(default)]
    pub sv: SvConfig,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum GConfig {
    Uniform { b: f64 },
    ScaledBeta { a: f64, b: f64, scale: f64 },
    BoundedPareto { index: f64, lo: f64, hi: f64 },
    Lognormal { mu: f64, sigma: f64 },
    PointMass { y0: f64 },
}

impl GConfig {
    fn build(&self) -> DiscountLaw {
        match *self {
            GConfig::Uniform { b } => DiscountLaw::Uniform { b },
            GConfig::ScaledBeta { a, b, scale } => DiscountLaw::ScaledBeta { a, b, scale },
            GConfig::BoundedPareto { index, lo, hi } => DiscountLaw::BoundedPareto { index, lo, hi },
            GConfig::Lognormal { mu, sigma } => DiscountLaw::Lognormal { mu, sigma },
            GConfig::PointMass { y0 } => DiscountLaw::PointMass { y0 },
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum KernelConfig {
    #[default]
    Fgm,
    CdfPower {
        k1: u32,
        k2: u32,
    },
}

impl KernelConfig {
    fn to_spec(&self) -> KernelSpec {
        match *self {
            KernelConfig::Fgm => KernelSpec::Fgm,
            KernelConfig::CdfPower { k1, k2 } => KernelSpec::CdfPower { k1, k2 },
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub f: FConfig,
    pub g: GConfig,
    pub theta: f64,
    #[serde(default)]
    pub kernel: KernelConfig,
}

impl ModelConfig {
    pub fn build(&self) -> Result<SarmanovModel> {
        let f = RegularlyVaryingLaw::new(self.f.alpha, self.f.x_m, self.f.sv.build())?;
        SarmanovModel::new(f, self.g.build(), self.theta, self.kernel.to_spec())
    }

    /// Validation report without requiring a valid model.
    pub fn validate(&self) -> Result<sarmanov::ValidationReport> {
        let f = RegularlyVaryingLaw::new(self.f.alpha, self.f.x_m, self.f.sv.build())?;
        let g = self.g.build();
        g.validate()?;
        sarmanov::validate(&f, &g, self.theta, &self.kernel.to_spec())
    }
}

/// Either an explicit list of x values or a geometric grid description.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GridConfig {
    Explicit(Vec<f64>),
    Geometric { min: f64, max: f64, points: usize },
}

impl GridConfig {
    pub fn build(&self) -> Result<Vec<f64>> {
        match self {
            GridConfig::Explicit(v) => Ok(v.clone()),
            GridConfig::Geometric { min, max, points } => {
                conditions::geometric_grid(*min, *max, *points)
            }
        }
    }
}

fn default_diag_grid() -> GridConfig {
    GridConfig::Geometric {
        min: 1.0,
        max: 1e6,
        points: 200,
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum MethodConfig {
    Exact,
    Crude,
    Conditional,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum VariantConfig {
    Dz1,
    Dz2,
    Dz3,
    Dz4,
}

impl VariantConfig {
    fn to_variant(self) -> SummabilityVariant {
        match self {
            VariantConfig::Dz1 => SummabilityVariant::Dz1,
            VariantConfig::Dz2 => SummabilityVariant::Dz2,
            VariantConfig::Dz3 => SummabilityVariant::Dz3,
            VariantConfig::Dz4 => SummabilityVariant::Dz4,
        }
    }
}

fn default_epsilon() -> f64 {
    0.5
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum TaskConfig {
    /// κ, E[Y^α], horizon factors.
    Constants {
        #[serde(default)]
        n: Option<u32>,
    },
    ProductTail {
        x_grid: GridConfig,
        method: MethodConfig,
        #[serde(default)]
        n_samples: u64,
    },
    RuinFinite {
        x_grid: GridConfig,
        n: u32,
        method: MethodConfig,
        n_samples: u64,
    },
    RuinInfinite {
        x_grid: GridConfig,
        n_samples: u64,
        tail_tol: f64,
    },
    DzCheck {
        #[serde(default = "default_diag_grid")]
        x_grid: GridConfig,
    },
    Summability {
        variant: VariantConfig,
        i_max: u32,
        #[serde(default = "default_epsilon")]
        epsilon: f64,
        #[serde(default)]
        mc_n: u64,
        #[serde(default = "default_diag_grid")]
        x_grid: GridConfig,
    },
    Sample {
        n_samples: u64,
    },
}

impl TaskConfig {
    fn kind(&self) -> &'static str {
        match self {
            TaskConfig::Constants { .. } => "constants",
            TaskConfig::ProductTail { .. } => "product-tail",
            TaskConfig::RuinFinite { .. } => "ruin-finite",
            TaskConfig::RuinInfinite { .. } => "ruin-infinite",
            TaskConfig::DzCheck { .. } => "dz-check",
            TaskConfig::Summability { .. } => "summability",
            TaskConfig::Sample { .. } => "sample",
        }
    }
}

/// A full experiment: one model, one task, explicit seed and worker count.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub model: ModelConfig,
    pub task: TaskConfig,
    pub seed: u64,
    pub workers: usize,
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
}

impl ExperimentSpec {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Domain(format!("experiment file: {e}")))
    }
}

/// Files produced by a run.
#[derive(Debug, Clone, Serialize)]
pub struct RunOutput {
    pub summary_path: PathBuf,
    pub curve_path: Option<PathBuf>,
    pub samples_path: Option<PathBuf>,
}

fn method_to_curve(m: MethodConfig) -> CurveMethod {
    match m {
        MethodConfig::Exact => CurveMethod::Exact,
        MethodConfig::Crude => CurveMethod::Crude,
        MethodConfig::Conditional => CurveMethod::Conditional,
    }
}

/// Shortest round-trip decimal formatting, so equal runs write equal bytes.
fn fmt_f64(v: f64) -> String {
    format!("{v}")
}

fn write_curve_csv(path: &Path, rows: &[CurveRow]) -> Result<()> {
    let mut out = String::from("x,estimate,stderr,tail_F,ratio,predicted,rel_err\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            fmt_f64(r.x),
            fmt_f64(r.estimate),
            fmt_f64(r.stderr),
            fmt_f64(r.tail_f),
            fmt_f64(r.ratio),
            fmt_f64(r.predicted),
            fmt_f64(r.rel_err)
        ));
    }
    std::fs::write(path, out).map_err(|e| Error::Numerical(format!("write {path:?}: {e}")))
}

/// Run the experiment, writing `curve.csv` (curve tasks), `samples.csv`
/// (sample task), and `summary.json` into `out_dir`.
pub fn run(spec: &ExperimentSpec, out_dir: &Path) -> Result<RunOutput> {
    let start = Instant::now();
    std::fs::create_dir_all(out_dir)
        .map_err(|e| Error::Numerical(format!("create {out_dir:?}: {e}")))?;
    let model = spec.model.build()?;

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(spec.workers.max(1))
        .build()
        .map_err(|e| Error::Numerical(format!("worker pool: {e}")))?;

    let mut curve_path = None;
    let mut samples_path = None;
    let result: serde_json::Value = pool.install(|| -> Result<serde_json::Value> {
        match &spec.task {
            TaskConfig::Constants { n } => {
                let consts = asymptotics::breiman_constant(&model)?;
                let finite = n.map(|n| consts.finite_horizon_factor(n)).transpose()?;
                let (infinite, note) = match consts.infinite_horizon_factor() {
                    Ok(v) => (Some(v), None),
                    Err(e) => (None, Some(e.to_string())),
                };
                Ok(json!({
                    "kappa": consts.kappa,
                    "e_y_alpha": consts.e_y_alpha,
                    "kernel_moment": consts.kernel_moment,
                    "d1": consts.d1,
                    "theta": consts.theta,
                    "alpha": consts.alpha,
                    "finite_factor": finite,
                    "finite_factor_n": n,
                    "infinite_factor": infinite,
                    "infinite_factor_note": note,
                }))
            }
            TaskConfig::ProductTail {
                x_grid,
                method,
                n_samples,
            } => {
                let grid = x_grid.build()?;
                let rows = simulate::ratio_curve(
                    &model,
                    &grid,
                    CurveTarget::ProductTail,
                    method_to_curve(*method),
                    *n_samples,
                    spec.seed,
                )?;
                let path = out_dir.join("curve.csv");
                write_curve_csv(&path, &rows)?;
                curve_path = Some(path);
                Ok(json!({
                    "rows": rows.len(),
                    "predicted": rows[0].predicted,
                    "last_ratio": rows[rows.len() - 1].ratio,
                    "last_rel_err": rows[rows.len() - 1].rel_err,
                }))
            }
            TaskConfig::RuinFinite {
                x_grid,
                n,
                method,
                n_samples,
            } => {
                let grid = x_grid.build()?;
                let rows = simulate::ratio_curve(
                    &model,
                    &grid,
                    CurveTarget::FiniteRuin { n: *n },
                    method_to_curve(*method),
                    *n_samples,
                    spec.seed,
                )?;
                let path = out_dir.join("curve.csv");
                write_curve_csv(&path, &rows)?;
                curve_path = Some(path);
                Ok(json!({
                    "rows": rows.len(),
                    "horizon": n,
                    "predicted": rows[0].predicted,
                    "last_ratio": rows[rows.len() - 1].ratio,
                    "last_rel_err": rows[rows.len() - 1].rel_err,
                }))
            }
            TaskConfig::RuinInfinite {
                x_grid,
                n_samples,
                tail_tol,
            } => {
                let grid = x_grid.build()?;
                if grid.is_empty() || grid.windows(2).any(|w| w[1] <= w[0]) {
                    return Err(Error::Domain(
                        "x-grid must be nonempty and strictly increasing".into(),
                    ));
                }
                let consts = asymptotics::breiman_constant(&model)?;
                let predicted = consts.infinite_horizon_factor()?;
                let mut rows = Vec::with_capacity(grid.len());
                let mut estimates = Vec::with_capacity(grid.len());
                for (k, &x) in grid.iter().enumerate() {
                    let est = simulate::estimate_infinite_ruin(
                        &model,
                        x,
                        *n_samples,
                        *tail_tol,
                        spec.seed.wrapping_add(k as u64),
                    )?;
                    let tail_f = model.f().tail(x);
                    let ratio = est.value / tail_f;
                    rows.push(CurveRow {
                        x,
                        estimate: est.value,
                        stderr: est.stderr,
                        tail_f,
                        ratio,
                        predicted,
                        rel_err: (ratio - predicted).abs() / predicted,
                    });
                    estimates.push(est);
                }
                let path = out_dir.join("curve.csv");
                write_curve_csv(&path, &rows)?;
                curve_path = Some(path);
                Ok(json!({
                    "rows": rows.len(),
                    "predicted": predicted,
                    "tail_tol": tail_tol,
                    "estimates": estimates,
                    "last_ratio": rows[rows.len() - 1].ratio,
                }))
            }
            TaskConfig::DzCheck { x_grid } => {
                let grid = x_grid.build()?;
                let report = conditions::dz_report(&model, &grid)?;
                Ok(json!({ "report": report }))
            }
            TaskConfig::Summability {
                variant,
                i_max,
                epsilon,
                mc_n,
                x_grid,
            } => {
                let grid = x_grid.build()?;
                let report = conditions::summability_report(
                    &model,
                    variant.to_variant(),
                    *i_max,
                    *epsilon,
                    &grid,
                    *mc_n,
                    spec.seed,
                )?;
                Ok(json!({ "report": report }))
            }
            TaskConfig::Sample { n_samples } => {
                let draws = model.sample_joint(*n_samples as usize, spec.seed)?;
                let mut out = String::from("x,y\n");
                for (x, y) in &draws {
                    out.push_str(&format!("{},{}\n", fmt_f64(*x), fmt_f64(*y)));
                }
                let path = out_dir.join("samples.csv");
                std::fs::write(&path, out)
                    .map_err(|e| Error::Numerical(format!("write {path:?}: {e}")))?;
                samples_path = Some(path);
                Ok(json!({ "n_samples": n_samples }))
            }
        }
    })?;

    let summary = json!({
        "spec": spec,
        "seed": spec.seed,
        "workers": spec.workers,
        "library_version": env!("CARGO_PKG_VERSION"),
        "wall_time_s": start.elapsed().as_secs_f64(),
        "task_kind": spec.task.kind(),
        "result": result,
    });
    let summary_path = out_dir.join("summary.json");
    let text = serde_json::to_string_pretty(&summary)
        .map_err(|e| Error::Numerical(format!("serialize summary: {e}")))?;
    std::fs::write(&summary_path, text)
        .map_err(|e| Error::Numerical(format!("write {summary_path:?}: {e}")))?;

    Ok(RunOutput {
        summary_path,
        curve_path,
        samples_path,
    })
}
