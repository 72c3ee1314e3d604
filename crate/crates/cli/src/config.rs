//! TOML run configuration. Physical quantities carry their unit in the key.
//!
//! ```toml
//! seed = 7
//! trials = 200
//!
//! [scheme]
//! growth = "10/9"
//! steps_per_level = 1
//! plateau = 40
//! iterations = 85
//! t_max_ms = 20.0
//!
//! [signal]
//! r = 1540.0
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use bfe_core::adaptive::{BfeConfig, Enhancement, LoSelection};
use bfe_core::locking::{LoModel, PidGains};
use bfe_core::schedule::{build_schedule, Scheme};
use bfe_core::signal::{ShiftModel, SignalModel};
use serde::Deserialize;

use crate::error::{CliError, CliResult};

pub const DEFAULT_NOMINAL_FREQUENCY_HZ: f64 = 6.834_682_611e9;

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: Option<u64>,
    pub trials: Option<u64>,
    pub scheme: Option<SchemeSection>,
    #[serde(default)]
    pub signal: SignalSection,
    #[serde(default)]
    pub estimate: EstimateSection,
    #[serde(default)]
    pub lock: LockSection,
    pub scaling: Option<ScalingSection>,
    #[serde(default)]
    pub analyze: AnalyzeSection,
    /// Directory of the config file; relative paths inside resolve against it.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

/// A number, or a ratio written as `"p/q"`.
#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(try_from = "RatioRepr")]
pub struct Ratio(pub f64);

#[derive(Deserialize)]
#[serde(untagged)]
enum RatioRepr {
    Int(i64),
    Float(f64),
    Text(String),
}

impl TryFrom<RatioRepr> for Ratio {
    type Error = String;

    fn try_from(r: RatioRepr) -> Result<Self, String> {
        match r {
            RatioRepr::Int(v) => Ok(Ratio(v as f64)),
            RatioRepr::Float(v) => Ok(Ratio(v)),
            RatioRepr::Text(s) => {
                let bad = || format!("expected a number or \"p/q\", got {s:?}");
                let (p, q) = s.split_once('/').ok_or_else(bad)?;
                let p: f64 = p.trim().parse().map_err(|_| bad())?;
                let q: f64 = q.trim().parse().map_err(|_| bad())?;
                Ok(Ratio(p / q))
            }
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchemeSection {
    pub growth: Ratio,
    #[serde(default = "one")]
    pub steps_per_level: u32,
    #[serde(default)]
    pub plateau: u32,
    pub iterations: u32,
    pub t_max_ms: f64,
    pub t_min_ms: Option<f64>,
}

fn one() -> u32 {
    1
}

impl SchemeSection {
    pub fn to_scheme(&self, key: &str) -> CliResult<Scheme<f64>> {
        let scheme = Scheme::new(
            self.growth.0,
            self.steps_per_level,
            self.plateau,
            self.iterations,
            self.t_max_ms * 1e-3,
        )
        .map_err(|e| CliError::Config(format!("{key}: {e}")))?;
        match self.t_min_ms {
            Some(t) => scheme
                .with_t_min(t * 1e-3)
                .map_err(|e| CliError::Config(format!("{key}.t_min_ms: {e}"))),
            None => Ok(scheme),
        }
    }

    /// Label such as `a=1.25 g=1 plateau=44 iterations=66`.
    pub fn label(&self) -> String {
        format!(
            "a={} g={} plateau={} iterations={}",
            self.growth.0, self.steps_per_level, self.plateau, self.iterations
        )
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SignalSection {
    #[serde(default = "default_r")]
    pub r: f64,
    #[serde(default = "unit")]
    pub contrast: f64,
    /// Constant shift `f_s` (Hz).
    pub shift_hz: Option<f64>,
    /// Two-column text table: Ramsey time (s), shift (Hz).
    pub shift_table: Option<PathBuf>,
}

fn default_r() -> f64 {
    1540.0
}

fn unit() -> f64 {
    1.0
}

impl Default for SignalSection {
    fn default() -> Self {
        Self {
            r: default_r(),
            contrast: 1.0,
            shift_hz: None,
            shift_table: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnhancementMode {
    Plateau,
    Literal,
    Disabled,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionMode {
    Utility,
    MidFringe,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimateSection {
    /// Centre of the initial interval (Hz).
    #[serde(default)]
    pub center_hz: f64,
    /// True transition at a fixed offset from the centre.
    pub truth_offset_hz: Option<f64>,
    /// True transition uniform within this half width; default a quarter of the interval.
    pub truth_half_width_hz: Option<f64>,
    pub grid_size: Option<usize>,
    pub quadrature_points: Option<usize>,
    pub lo_candidates: Option<usize>,
    pub enhancement: Option<EnhancementMode>,
    pub selection: Option<SelectionMode>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Pid,
    Bfe,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Pid => "pid",
            Method::Bfe => "bfe",
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LockSection {
    #[serde(default = "both_methods")]
    pub methods: Vec<Method>,
    #[serde(default = "default_cycles")]
    pub cycles: u32,
    /// PID Ramsey time.
    #[serde(default = "default_ramsey_ms")]
    pub ramsey_time_ms: f64,
    /// Dead time added to every measurement.
    #[serde(default)]
    pub dead_time_ms: f64,
    pub k_p: Option<f64>,
    pub k_i: Option<f64>,
    pub k_d: Option<f64>,
    #[serde(default = "default_nominal")]
    pub nominal_frequency_hz: f64,
    /// Fractional Allan deviation of the free-running LO at 1 s.
    #[serde(default)]
    pub white_fm_sigma: f64,
    #[serde(default)]
    pub drift_hz_per_s: f64,
    #[serde(default)]
    pub offset_hz: f64,
    /// Largest averaging factor (exclusive) in the stability fit; default a quarter of the cycles.
    pub fit_max_factor: Option<usize>,
}

fn both_methods() -> Vec<Method> {
    vec![Method::Pid, Method::Bfe]
}

fn default_cycles() -> u32 {
    64
}

fn default_ramsey_ms() -> f64 {
    20.0
}

fn default_nominal() -> f64 {
    DEFAULT_NOMINAL_FREQUENCY_HZ
}

impl Default for LockSection {
    fn default() -> Self {
        Self {
            methods: both_methods(),
            cycles: default_cycles(),
            ramsey_time_ms: default_ramsey_ms(),
            dead_time_ms: 0.0,
            k_p: None,
            k_i: None,
            k_d: None,
            nominal_frequency_hz: DEFAULT_NOMINAL_FREQUENCY_HZ,
            white_fm_sigma: 0.0,
            drift_hz_per_s: 0.0,
            offset_hz: 0.0,
            fit_max_factor: None,
        }
    }
}

impl LockSection {
    pub fn gains(&self) -> PidGains<f64> {
        let d = PidGains::default();
        PidGains {
            k_p: self.k_p.unwrap_or(d.k_p),
            k_i: self.k_i.unwrap_or(d.k_i),
            k_d: self.k_d.unwrap_or(d.k_d),
        }
    }

    pub fn lo(&self) -> CliResult<LoModel<f64>> {
        LoModel::new(self.offset_hz, self.white_fm_sigma, self.drift_hz_per_s, self.nominal_frequency_hz)
            .map_err(|e| CliError::Config(format!("lock: {e}")))
    }

    pub fn max_factor(&self) -> usize {
        self.fit_max_factor.unwrap_or(self.cycles as usize / 4)
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScalingSection {
    pub schemes: Vec<SchemeSection>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalyzeSection {
    #[serde(default = "default_nominal")]
    pub nominal_frequency_hz: f64,
    /// Largest averaging factor (exclusive) in the fits; default a quarter of the record.
    pub fit_max_factor: Option<usize>,
}

impl Default for AnalyzeSection {
    fn default() -> Self {
        Self {
            nominal_frequency_hz: DEFAULT_NOMINAL_FREQUENCY_HZ,
            fit_max_factor: None,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text =
            fs::read_to_string(path).map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg = Self::parse(&text).map_err(|e| match e {
            CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
            other => other,
        })?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(cfg)
    }

    pub fn parse(text: &str) -> CliResult<Self> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string().trim_end().to_string()))
    }

    pub fn scheme(&self) -> CliResult<Scheme<f64>> {
        self.scheme
            .as_ref()
            .ok_or_else(|| CliError::Config("missing section [scheme]".into()))?
            .to_scheme("scheme")
    }

    pub fn shift(&self) -> CliResult<ShiftModel<f64>> {
        match (&self.signal.shift_hz, &self.signal.shift_table) {
            (Some(_), Some(_)) => Err(CliError::Config(
                "signal.shift_hz and signal.shift_table are mutually exclusive".into(),
            )),
            (Some(v), None) => Ok(ShiftModel::Constant(*v)),
            (None, Some(p)) => load_shift_table(&self.base_dir.join(p)),
            (None, None) => Ok(ShiftModel::Zero),
        }
    }

    pub fn signal_model(&self, f_c_true: f64) -> CliResult<SignalModel<f64>> {
        let model = SignalModel::new(f_c_true, self.signal.r)
            .and_then(|m| m.with_contrast(self.signal.contrast))
            .map_err(|e| CliError::Config(format!("signal: {e}")))?;
        Ok(model.with_shift(self.shift()?))
    }

    /// Estimator configuration for `scheme`, interval of width `1/T_1` around `center`.
    pub fn bfe_config(&self, scheme: Scheme<f64>, center: f64) -> CliResult<BfeConfig<f64>> {
        let est = &self.estimate;
        let mut config =
            BfeConfig::centered(scheme, self.signal.r, center).map_err(|e| CliError::Config(format!("scheme: {e}")))?;
        if let Some(n) = est.grid_size {
            config.grid_size = n;
        }
        if let Some(n) = est.quadrature_points {
            config.utility_quadrature_points = n;
        }
        if let Some(n) = est.lo_candidates {
            config.lo_candidate_count = n;
        }
        if let Some(m) = est.enhancement {
            config.enhancement = match m {
                EnhancementMode::Plateau => Enhancement::Plateau,
                EnhancementMode::Literal => Enhancement::Literal,
                EnhancementMode::Disabled => Enhancement::Disabled,
            };
        }
        if let Some(m) = est.selection {
            config.selection = match m {
                SelectionMode::Utility => LoSelection::Utility,
                SelectionMode::MidFringe => LoSelection::MidFringe,
            };
        }
        config.shift = self.shift()?;
        config.validated().map_err(|e| CliError::Config(format!("estimate: {e}")))
    }

    /// Half width of the truth distribution for `scheme`.
    pub fn truth_half_width(&self, scheme: &Scheme<f64>) -> f64 {
        self.estimate
            .truth_half_width_hz
            .unwrap_or_else(|| 0.25 / build_schedule(scheme).t_first())
    }
}

/// Parses `T_R (s), f_s (Hz)` rows separated by whitespace or a comma.
/// Blank lines and lines starting with `#` are skipped.
pub fn parse_shift_table(text: &str) -> Result<Vec<(f64, f64)>, String> {
    let mut rows = Vec::new();
    for (k, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|s| !s.is_empty())
            .collect();
        let parsed: Vec<f64> = fields.iter().filter_map(|f| f.parse().ok()).collect();
        if fields.len() != 2 || parsed.len() != 2 {
            return Err(format!("line {}: expected two numbers, got {line:?}", k + 1));
        }
        rows.push((parsed[0], parsed[1]));
    }
    Ok(rows)
}

fn load_shift_table(path: &Path) -> CliResult<ShiftModel<f64>> {
    let fail = |m: String| CliError::Config(format!("signal.shift_table {}: {m}", path.display()));
    let text = fs::read_to_string(path).map_err(|e| fail(e.to_string()))?;
    let rows = parse_shift_table(&text).map_err(fail)?;
    ShiftModel::table(rows).map_err(|e| fail(e.to_string()))
}
