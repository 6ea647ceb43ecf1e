//! Sweep configuration: flag definitions, config-file parsing, and the
//! flags-over-file-over-defaults merge.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use cavjar_core::states::{DriveProtocol, BETA_OMEGA_MAX, BETA_OMEGA_MIN};

/// Flags shared by every subcommand. Every option is optional here;
/// unset values fall back to the config file and then to defaults.
#[derive(Debug, clap::Args)]
pub struct CommonArgs {
    /// Key=value config file supplying defaults for any flag
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Inverse temperatures in oscillator units, comma separated
    #[arg(long, value_delimiter = ',')]
    pub beta_omega0: Option<Vec<f64>>,
    /// Displacement magnitudes |alpha|, comma separated
    #[arg(long, value_delimiter = ',')]
    pub alpha: Option<Vec<f64>>,
    /// Accumulated dispersive phases, comma separated
    #[arg(long, value_delimiter = ',')]
    pub omega_dt: Option<Vec<f64>>,
    /// Analysis phases per fringe scan (at least 8)
    #[arg(long)]
    pub phi_points: Option<usize>,
    /// Drive protocol: `quench` or `ramp:T` with duration T
    #[arg(long)]
    pub protocol: Option<String>,
    /// Truncation dimension override (default: certified auto size)
    #[arg(long)]
    pub dim: Option<usize>,
    /// Accept a --dim below the certified auto size
    #[arg(long)]
    pub allow_undersized: bool,
    /// Monte-Carlo shots for work averages (0 disables sampling)
    #[arg(long)]
    pub n_shots: Option<u64>,
    /// Seed for all stochastic sampling
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads (0 uses all available cores)
    #[arg(long)]
    pub threads: Option<usize>,
    /// Output format: `csv` or `json`
    #[arg(long)]
    pub format: Option<String>,
    /// Output path (default: stdout)
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Free-energy inversion: `small-beta` or `exact-inversion`
    #[arg(long)]
    pub mode: Option<String>,
    /// Independent identical modes; identity sides are raised to this power
    #[arg(long)]
    pub n_oscillators: Option<u32>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Csv,
    Json,
}

impl OutputFormat {
    fn parse(s: &str) -> Result<Self, String> {
        match s {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            other => Err(format!("format must be `csv` or `json`, got `{other}`")),
        }
    }

    fn label(&self) -> &'static str {
        match self {
            OutputFormat::Csv => "csv",
            OutputFormat::Json => "json",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModeSpec {
    SmallBeta,
    ExactInversion,
}

impl ModeSpec {
    fn parse(s: &str) -> Result<Self, String> {
        match s {
            "small-beta" => Ok(ModeSpec::SmallBeta),
            "exact-inversion" => Ok(ModeSpec::ExactInversion),
            other => Err(format!(
                "mode must be `small-beta` or `exact-inversion`, got `{other}`"
            )),
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            ModeSpec::SmallBeta => "small-beta",
            ModeSpec::ExactInversion => "exact-inversion",
        }
    }

    pub fn to_core(self) -> cavjar_core::estimator::InversionMode {
        match self {
            ModeSpec::SmallBeta => cavjar_core::estimator::InversionMode::SmallBeta,
            ModeSpec::ExactInversion => cavjar_core::estimator::InversionMode::ExactInversion,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ProtocolSpec {
    Quench,
    Ramp { duration: f64 },
}

impl ProtocolSpec {
    fn parse(s: &str) -> Result<Self, String> {
        if s == "quench" {
            return Ok(ProtocolSpec::Quench);
        }
        if let Some(t) = s.strip_prefix("ramp:") {
            let duration: f64 = t
                .parse()
                .map_err(|_| format!("ramp duration `{t}` is not a number"))?;
            if !duration.is_finite() || duration <= 0.0 {
                return Err(format!("ramp duration must be positive, got {duration}"));
            }
            return Ok(ProtocolSpec::Ramp { duration });
        }
        Err(format!("protocol must be `quench` or `ramp:T`, got `{s}`"))
    }

    pub fn label(&self) -> String {
        match self {
            ProtocolSpec::Quench => "quench".into(),
            ProtocolSpec::Ramp { duration } => format!("ramp:{duration}"),
        }
    }

    /// Switch-on protocol reaching final displacement `alpha` (with the
    /// internal convention omega0 = 1, the final drive equals alpha).
    pub fn build(&self, alpha: f64) -> DriveProtocol {
        match self {
            ProtocolSpec::Quench => DriveProtocol::quench(0.0, alpha),
            ProtocolSpec::Ramp { duration } => {
                DriveProtocol::linear_ramp(0.0, alpha, *duration)
                    .expect("duration validated at parse time")
            }
        }
    }
}

/// Fully merged and validated sweep settings.
#[derive(Debug, Clone)]
pub struct Settings {
    pub beta_omega0: Vec<f64>,
    pub alpha: Vec<f64>,
    pub omega_dt: Vec<f64>,
    pub phi_points: usize,
    pub protocol: ProtocolSpec,
    pub dim: Option<usize>,
    pub allow_undersized: bool,
    pub n_shots: u64,
    pub seed: u64,
    pub threads: usize,
    pub format: OutputFormat,
    pub out: Option<PathBuf>,
    pub mode: ModeSpec,
    pub n_oscillators: u32,
}

const KNOWN_KEYS: &[&str] = &[
    "beta_omega0",
    "alpha",
    "omega_dt",
    "phi_points",
    "protocol",
    "dim",
    "allow_undersized",
    "n_shots",
    "seed",
    "threads",
    "format",
    "out",
    "mode",
    "n_oscillators",
];

fn parse_config_file(path: &Path) -> Result<BTreeMap<String, String>, String> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
    let mut map = BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or(format!(
            "config line {} is not key=value: `{line}`",
            lineno + 1
        ))?;
        let key = key.trim();
        if !KNOWN_KEYS.contains(&key) {
            return Err(format!("unknown config key `{key}` on line {}", lineno + 1));
        }
        map.insert(key.to_string(), value.trim().to_string());
    }
    Ok(map)
}

fn parse_list(value: &str, key: &str) -> Result<Vec<f64>, String> {
    value
        .split(',')
        .map(|tok| {
            tok.trim()
                .parse::<f64>()
                .map_err(|_| format!("config {key} entry `{tok}` is not a number"))
        })
        .collect()
}

fn parse_scalar<T: std::str::FromStr>(value: &str, key: &str) -> Result<T, String> {
    value
        .trim()
        .parse()
        .map_err(|_| format!("config {key} value `{value}` is invalid"))
}

impl Settings {
    /// Merges flags over config-file values over defaults, then
    /// validates every grid and window.
    pub fn from_args(args: &CommonArgs) -> Result<Self, String> {
        let file = match &args.config {
            Some(path) => parse_config_file(path)?,
            None => BTreeMap::new(),
        };
        let get = |key: &str| file.get(key).map(String::as_str);

        let beta_omega0 = match (&args.beta_omega0, get("beta_omega0")) {
            (Some(v), _) => v.clone(),
            (None, Some(s)) => parse_list(s, "beta_omega0")?,
            (None, None) => vec![1.0],
        };
        let alpha = match (&args.alpha, get("alpha")) {
            (Some(v), _) => v.clone(),
            (None, Some(s)) => parse_list(s, "alpha")?,
            (None, None) => vec![1.0],
        };
        let omega_dt = match (&args.omega_dt, get("omega_dt")) {
            (Some(v), _) => v.clone(),
            (None, Some(s)) => parse_list(s, "omega_dt")?,
            (None, None) => vec![std::f64::consts::PI],
        };
        let phi_points = match (args.phi_points, get("phi_points")) {
            (Some(v), _) => v,
            (None, Some(s)) => parse_scalar(s, "phi_points")?,
            (None, None) => 16,
        };
        let protocol = match (&args.protocol, get("protocol")) {
            (Some(s), _) => ProtocolSpec::parse(s)?,
            (None, Some(s)) => ProtocolSpec::parse(s)?,
            (None, None) => ProtocolSpec::Quench,
        };
        let dim = match (args.dim, get("dim")) {
            (Some(v), _) => Some(v),
            (None, Some(s)) => Some(parse_scalar(s, "dim")?),
            (None, None) => None,
        };
        let allow_undersized = args.allow_undersized
            || match get("allow_undersized") {
                Some(s) => parse_scalar::<bool>(s, "allow_undersized")?,
                None => false,
            };
        let n_shots = match (args.n_shots, get("n_shots")) {
            (Some(v), _) => v,
            (None, Some(s)) => parse_scalar(s, "n_shots")?,
            (None, None) => 0,
        };
        let seed = match (args.seed, get("seed")) {
            (Some(v), _) => v,
            (None, Some(s)) => parse_scalar(s, "seed")?,
            (None, None) => 1,
        };
        let threads = match (args.threads, get("threads")) {
            (Some(v), _) => v,
            (None, Some(s)) => parse_scalar(s, "threads")?,
            (None, None) => 0,
        };
        let format = match (&args.format, get("format")) {
            (Some(s), _) => OutputFormat::parse(s)?,
            (None, Some(s)) => OutputFormat::parse(s)?,
            (None, None) => OutputFormat::Csv,
        };
        let out = match (&args.out, get("out")) {
            (Some(p), _) => Some(p.clone()),
            (None, Some(s)) => Some(PathBuf::from(s)),
            (None, None) => None,
        };
        let mode = match (&args.mode, get("mode")) {
            (Some(s), _) => ModeSpec::parse(s)?,
            (None, Some(s)) => ModeSpec::parse(s)?,
            (None, None) => ModeSpec::SmallBeta,
        };
        let n_oscillators = match (args.n_oscillators, get("n_oscillators")) {
            (Some(v), _) => v,
            (None, Some(s)) => parse_scalar(s, "n_oscillators")?,
            (None, None) => 1,
        };

        let settings = Settings {
            beta_omega0,
            alpha,
            omega_dt,
            phi_points,
            protocol,
            dim,
            allow_undersized,
            n_shots,
            seed,
            threads,
            format,
            out,
            mode,
            n_oscillators,
        };
        settings.validate()?;
        Ok(settings)
    }

    fn validate(&self) -> Result<(), String> {
        if self.beta_omega0.is_empty() {
            return Err("beta_omega0 grid is empty".into());
        }
        for &x in &self.beta_omega0 {
            if !x.is_finite() || x <= BETA_OMEGA_MIN || x >= BETA_OMEGA_MAX {
                return Err(format!(
                    "beta_omega0 = {x} outside the certified window \
                     ({BETA_OMEGA_MIN}, {BETA_OMEGA_MAX})"
                ));
            }
        }
        if self.alpha.is_empty() {
            return Err("alpha grid is empty".into());
        }
        for &a in &self.alpha {
            if !a.is_finite() || a < 0.0 {
                return Err(format!(
                    "alpha = {a} must be a nonnegative displacement magnitude"
                ));
            }
        }
        if self.omega_dt.is_empty() {
            return Err("omega_dt grid is empty".into());
        }
        for &t in &self.omega_dt {
            if !t.is_finite() {
                return Err(format!("omega_dt = {t} must be finite"));
            }
        }
        if self.phi_points < 8 {
            return Err(format!(
                "phi_points = {} is too sparse for a fringe fit; need at least 8",
                self.phi_points
            ));
        }
        if let Some(d) = self.dim {
            if d < 2 {
                return Err(format!("dim = {d} cannot hold an oscillator; need at least 2"));
            }
        }
        if self.n_oscillators == 0 {
            return Err("n_oscillators must be at least 1".into());
        }
        Ok(())
    }

    /// Dimension for one grid point: the override when given and
    /// acceptable, otherwise the certified automatic size.
    pub fn resolve_dim(&self, auto: usize) -> Result<usize, String> {
        match self.dim {
            None => Ok(auto),
            Some(d) if d >= auto || self.allow_undersized => Ok(d),
            Some(d) => Err(format!(
                "requested dim {d} is below the certified size {auto} for this \
                 grid point; pass --allow-undersized to accept the truncation risk"
            )),
        }
    }

    /// Reproducibility echo for output metadata. Execution plumbing
    /// (threads, out, config path) is excluded so outputs stay
    /// byte-identical across worker counts and destinations.
    pub fn echo(&self) -> BTreeMap<String, String> {
        let join = |v: &[f64]| {
            v.iter()
                .map(|x| x.to_string())
                .collect::<Vec<_>>()
                .join(",")
        };
        let mut map = BTreeMap::new();
        map.insert("beta_omega0".into(), join(&self.beta_omega0));
        map.insert("alpha".into(), join(&self.alpha));
        map.insert("omega_dt".into(), join(&self.omega_dt));
        map.insert("phi_points".into(), self.phi_points.to_string());
        map.insert("protocol".into(), self.protocol.label());
        map.insert(
            "dim".into(),
            self.dim.map_or("auto".into(), |d| d.to_string()),
        );
        map.insert(
            "allow_undersized".into(),
            self.allow_undersized.to_string(),
        );
        map.insert("n_shots".into(), self.n_shots.to_string());
        map.insert("seed".into(), self.seed.to_string());
        map.insert("format".into(), self.format.label().into());
        map.insert("mode".into(), self.mode.label().into());
        map.insert("n_oscillators".into(), self.n_oscillators.to_string());
        map
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bare_args() -> CommonArgs {
        CommonArgs {
            config: None,
            beta_omega0: None,
            alpha: None,
            omega_dt: None,
            phi_points: None,
            protocol: None,
            dim: None,
            allow_undersized: false,
            n_shots: None,
            seed: None,
            threads: None,
            format: None,
            out: None,
            mode: None,
            n_oscillators: None,
        }
    }

    #[test]
    fn defaults_fill_everything() {
        let s = Settings::from_args(&bare_args()).unwrap();
        assert_eq!(s.beta_omega0, vec![1.0]);
        assert_eq!(s.alpha, vec![1.0]);
        assert_eq!(s.omega_dt, vec![std::f64::consts::PI]);
        assert_eq!(s.phi_points, 16);
        assert_eq!(s.protocol, ProtocolSpec::Quench);
        assert_eq!(s.n_shots, 0);
        assert_eq!(s.seed, 1);
        assert_eq!(s.format, OutputFormat::Csv);
        assert_eq!(s.mode, ModeSpec::SmallBeta);
        assert_eq!(s.n_oscillators, 1);
    }

    #[test]
    fn flags_override_config_file() {
        let dir = std::env::temp_dir().join("cavjar-config-test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("precedence.conf");
        std::fs::write(&path, "alpha=2.0\nseed=9\n# comment\n\nmode=exact-inversion\n")
            .unwrap();
        let mut args = bare_args();
        args.config = Some(path);
        args.alpha = Some(vec![1.0]);
        let s = Settings::from_args(&args).unwrap();
        assert_eq!(s.alpha, vec![1.0]);
        assert_eq!(s.seed, 9);
        assert_eq!(s.mode, ModeSpec::ExactInversion);
    }

    #[test]
    fn window_and_grid_violations_are_rejected() {
        let mut args = bare_args();
        args.beta_omega0 = Some(vec![60.0]);
        assert!(Settings::from_args(&args).is_err());

        let mut args = bare_args();
        args.alpha = Some(vec![-1.0]);
        assert!(Settings::from_args(&args).is_err());

        let mut args = bare_args();
        args.phi_points = Some(4);
        assert!(Settings::from_args(&args).is_err());

        let mut args = bare_args();
        args.protocol = Some("ramp:-3".into());
        assert!(Settings::from_args(&args).is_err());

        let mut args = bare_args();
        args.n_oscillators = Some(0);
        assert!(Settings::from_args(&args).is_err());
    }

    #[test]
    fn dim_resolution_respects_the_certified_floor() {
        let mut args = bare_args();
        args.dim = Some(32);
        let s = Settings::from_args(&args).unwrap();
        assert_eq!(s.resolve_dim(20).unwrap(), 32);
        assert!(s.resolve_dim(64).unwrap_err().contains("--allow-undersized"));

        let mut args = bare_args();
        args.dim = Some(32);
        args.allow_undersized = true;
        let s = Settings::from_args(&args).unwrap();
        assert_eq!(s.resolve_dim(64).unwrap(), 32);
    }

    #[test]
    fn unknown_config_keys_are_rejected() {
        let dir = std::env::temp_dir().join("cavjar-config-test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("unknown.conf");
        std::fs::write(&path, "betas=1\n").unwrap();
        let mut args = bare_args();
        args.config = Some(path);
        assert!(Settings::from_args(&args).unwrap_err().contains("unknown config key"));
    }
}
