//! TOML experiment configuration: problem, filter, schedule, source, run
//! matrix, optional rescaling, and verification settings.

use serde::Deserialize;

use regnewt::error::{Error, Result};
use regnewt::filters::FilterFamily;
use regnewt::problems::{SourceKind, SourceSpec};
use regnewt::schedule::AlphaSchedule;
use regnewt::space::{unit_weights, weights_from, Vector, Weights};

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub problem: ProblemConfig,
    pub filter: FilterConfig,
    pub schedule: ScheduleConfig,
    #[serde(default)]
    pub source: Option<SourceConfig>,
    pub run: RunConfig,
    #[serde(default)]
    pub scaling: Option<ScalingConfig>,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default)]
    pub verify: Option<VerifyConfig>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ProblemConfig {
    /// Linear diagonal operator sigma_i = sigma_scale * i^(-sigma_decay).
    Diagonal {
        dim: usize,
        sigma_scale: f64,
        #[serde(default = "one")]
        sigma_decay: f64,
        rho: f64,
        x_true: Profile,
    },
    /// 1-D elliptic coefficient identification on `grid_size` interior nodes.
    Elliptic {
        grid_size: usize,
        #[serde(default)]
        g0: f64,
        #[serde(default)]
        g1: f64,
        rho: f64,
        forcing: Profile,
        coefficient: Profile,
    },
}

fn one() -> f64 {
    1.0
}

/// Grid-function profiles used for exact solutions, forcings and source
/// representers. The grid coordinate is x_i = i*h (elliptic interior nodes)
/// or i/(n+1) (diagonal index coordinate).
#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Profile {
    Zeros,
    Constant { value: f64 },
    /// offset + amplitude * sin(2 pi frequency x)
    Sine {
        offset: f64,
        amplitude: f64,
        frequency: f64,
    },
    /// 1 + x, rescaled to `norm` when given.
    Affine {
        #[serde(default)]
        norm: Option<f64>,
    },
    /// entries i^(-exponent), rescaled to `norm`.
    PowerDecay { exponent: f64, norm: f64 },
    /// all-ones rescaled to `norm`.
    Uniform { norm: f64 },
    /// a single coordinate carrying the whole norm.
    SingleMode { index: usize, norm: f64 },
}

impl Profile {
    pub fn build(&self, n: usize, weights: &Weights) -> Result<Vector> {
        let h = 1.0 / (n as f64 + 1.0);
        let xs: Vec<f64> = (1..=n).map(|i| i as f64 * h).collect();
        let raw: Vec<f64> = match self {
            Profile::Zeros => vec![0.0; n],
            Profile::Constant { value } => vec![*value; n],
            Profile::Sine {
                offset,
                amplitude,
                frequency,
            } => xs
                .iter()
                .map(|x| offset + amplitude * (2.0 * std::f64::consts::PI * frequency * x).sin())
                .collect(),
            Profile::Affine { .. } => xs.iter().map(|x| 1.0 + x).collect(),
            Profile::PowerDecay { exponent, .. } => {
                (1..=n).map(|i| (i as f64).powf(-exponent)).collect()
            }
            Profile::Uniform { .. } => vec![1.0; n],
            Profile::SingleMode { index, norm: _ } => {
                if *index >= n {
                    return Err(Error::Configuration(format!(
                        "single-mode index {index} out of range for dimension {n}"
                    )));
                }
                let mut v = vec![0.0; n];
                v[*index] = 1.0;
                v
            }
        };
        let v = Vector::new(raw, weights.clone())?;
        let target = match self {
            Profile::Affine { norm } => *norm,
            Profile::PowerDecay { norm, .. }
            | Profile::Uniform { norm }
            | Profile::SingleMode { norm, .. } => Some(*norm),
            _ => None,
        };
        match target {
            Some(t) => {
                let n0 = v.norm();
                if n0 == 0.0 {
                    return Err(Error::Configuration("cannot normalize a zero profile".into()));
                }
                Ok(v.scale(t / n0))
            }
            None => Ok(v),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum FilterConfig {
    IteratedTikhonov { order: u32 },
    Landweber,
    Lardy,
    Exponential,
}

impl FilterConfig {
    pub fn family(&self) -> Result<FilterFamily> {
        Ok(match self {
            FilterConfig::IteratedTikhonov { order } => FilterFamily::iterated_tikhonov(*order)?,
            FilterConfig::Landweber => FilterFamily::Landweber,
            FilterConfig::Lardy => FilterFamily::Lardy,
            FilterConfig::Exponential => FilterFamily::Exponential,
        })
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ScheduleConfig {
    Geometric { alpha0: f64, ratio: f64 },
    ReciprocalInt { n0: u64, q: u64 },
    ReciprocalReal { t0: f64, theta0: f64 },
}

impl ScheduleConfig {
    pub fn schedule(&self) -> Result<AlphaSchedule> {
        match self {
            ScheduleConfig::Geometric { alpha0, ratio } => AlphaSchedule::geometric(*alpha0, *ratio),
            ScheduleConfig::ReciprocalInt { n0, q } => AlphaSchedule::reciprocal_int(*n0, *q),
            ScheduleConfig::ReciprocalReal { t0, theta0 } => {
                AlphaSchedule::reciprocal_real(*t0, *theta0)
            }
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum SourceConfig {
    Holder { nu: f64, omega: Profile },
    Logarithmic { mu: f64, omega: Profile },
}

impl SourceConfig {
    pub fn spec(&self, n: usize, weights: &Weights) -> Result<SourceSpec> {
        Ok(match self {
            SourceConfig::Holder { nu, omega } => SourceSpec {
                kind: SourceKind::Holder { nu: *nu },
                omega: omega.build(n, weights)?,
            },
            SourceConfig::Logarithmic { mu, omega } => SourceSpec {
                kind: SourceKind::Logarithmic { mu: *mu },
                omega: omega.build(n, weights)?,
            },
        })
    }

    pub fn omega_norm(&self, n: usize, weights: &Weights) -> Result<f64> {
        Ok(self.spec(n, weights)?.omega.norm())
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub tau: f64,
    pub delta_list: Vec<f64>,
    pub seeds: Vec<u64>,
    #[serde(default = "default_kmax")]
    pub kmax: usize,
    #[serde(default = "yes")]
    pub record_errors: bool,
}

fn default_kmax() -> usize {
    regnewt::solver::SolverConfig::DEFAULT_KMAX
}

fn yes() -> bool {
    true
}

impl RunConfig {
    // Negated comparisons reject NaN fields, which `<=` would accept.
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 1.0) {
            return Err(Error::Configuration(format!("tau must exceed 1, got {}", self.tau)));
        }
        if self.delta_list.is_empty() {
            return Err(Error::Configuration("delta_list must not be empty".into()));
        }
        for w in self.delta_list.windows(2) {
            if !(w[1] < w[0]) {
                return Err(Error::Configuration(
                    "delta_list must be strictly decreasing".into(),
                ));
            }
        }
        if self.delta_list.iter().any(|d| !(*d > 0.0)) {
            return Err(Error::Configuration("all noise levels must be positive".into()));
        }
        if self.seeds.is_empty() {
            return Err(Error::Configuration("at least one seed is required".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScalingConfig {
    #[serde(default = "yes")]
    pub apply: bool,
    pub alpha0: f64,
    #[serde(default = "default_scaling_samples")]
    pub samples: usize,
}

fn default_scaling_samples() -> usize {
    4
}

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default)]
    pub dir: Option<String>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyConfig {
    #[serde(default)]
    pub families: Option<Vec<FilterConfig>>,
    #[serde(default = "default_nus")]
    pub nus: Vec<f64>,
    #[serde(default = "default_mus")]
    pub mus: Vec<f64>,
    #[serde(default = "default_lemma_trials")]
    pub lemma_trials: usize,
    #[serde(default = "default_commutator_pairs")]
    pub commutator_pairs: usize,
    #[serde(default)]
    pub commutator_families: Option<Vec<FilterConfig>>,
    #[serde(default = "default_verify_kmax")]
    pub kmax: usize,
    #[serde(default = "default_nonlinearity_samples")]
    pub nonlinearity_samples: usize,
    #[serde(default = "default_seed")]
    pub seed: u64,
}

fn default_nus() -> Vec<f64> {
    vec![0.5, 1.0, 2.0]
}

fn default_mus() -> Vec<f64> {
    vec![1.0]
}

fn default_lemma_trials() -> usize {
    400
}

fn default_commutator_pairs() -> usize {
    200
}

fn default_verify_kmax() -> usize {
    50
}

fn default_nonlinearity_samples() -> usize {
    10
}

fn default_seed() -> u64 {
    0x5EED
}

impl ProblemConfig {
    pub fn dim(&self) -> usize {
        match self {
            ProblemConfig::Diagonal { dim, .. } => *dim,
            ProblemConfig::Elliptic { grid_size, .. } => *grid_size,
        }
    }

    pub fn weights_x(&self) -> Result<Weights> {
        match self {
            ProblemConfig::Diagonal { dim, .. } => Ok(unit_weights(*dim)),
            ProblemConfig::Elliptic { grid_size, .. } => {
                let h = 1.0 / (*grid_size as f64 + 1.0);
                weights_from(vec![h; *grid_size])
            }
        }
    }
}

/// Parses a config file; parse and validation errors carry the reason.
pub fn load_config(path: &std::path::Path) -> anyhow::Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| anyhow::anyhow!("cannot read config {}: {e}", path.display()))?;
    let cfg: ExperimentConfig =
        toml::from_str(&text).map_err(|e| anyhow::anyhow!("config parse error: {e}"))?;
    cfg.run.validate()?;
    Ok(cfg)
}
