//! Run configuration: JSON file, then `DUALCTL_SEED`, then flags.

use std::path::{Path, PathBuf};

use dualctl_core::vi::GridConfig;
use dualctl_core::{Certificate, DisturbanceSpec, SearchSettings};
use serde::Deserialize;

/// Invalid configuration, reported with the offending key.
#[derive(Debug)]
pub struct ConfigError {
    pub key: String,
    pub msg: String,
}

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "invalid config key `{}`: {}", self.key, self.msg)
    }
}

impl std::error::Error for ConfigError {}

pub fn bad(key: &str, msg: impl Into<String>) -> ConfigError {
    ConfigError { key: key.to_string(), msg: msg.into() }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub gamma: Option<f64>,
    pub certificate: Option<CertificateConfig>,
    pub system: Option<String>,
    pub policy: Option<PolicyConfig>,
    pub horizon: Option<usize>,
    pub x0: Option<f64>,
    pub disturbance: Option<DisturbanceConfig>,
    pub vi: Option<ViConfig>,
    pub search: Option<SearchConfig>,
    pub certify: Option<CertifyConfig>,
    pub oracle: Option<OracleConfig>,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
}

#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CertificateConfig {
    pub p: Option<f64>,
    pub q: Option<f64>,
    pub k: Option<f64>,
}

#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicyConfig {
    pub kind: Option<String>,
    pub gain: Option<f64>,
}

#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DisturbanceConfig {
    pub kind: Option<String>,
    pub amplitude: Option<f64>,
    pub period: Option<f64>,
    pub value: Option<f64>,
    pub bound: Option<f64>,
    pub path: Option<PathBuf>,
}

#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ViConfig {
    pub max_iters: Option<usize>,
    pub tol: Option<f64>,
    pub y_max: Option<f64>,
    pub y_points: Option<usize>,
    pub delta_max: Option<f64>,
    pub delta_points: Option<usize>,
    pub u_points: Option<usize>,
    pub v_points: Option<usize>,
    pub refine_u: Option<bool>,
    pub cap_by_certificate: Option<bool>,
}

#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SearchConfig {
    pub budget: Option<usize>,
    pub amplitude_max: Option<f64>,
}

#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CertifyConfig {
    pub samples: Option<usize>,
}

#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleConfig {
    pub cases: Option<usize>,
    pub max_horizon: Option<usize>,
}

pub fn read_file(path: &Path) -> Result<FileConfig, ConfigError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| bad("config", format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| {
        let msg = e.to_string();
        // serde names the field for unknown and mistyped keys
        let key = msg
            .split('`')
            .nth(1)
            .filter(|_| msg.starts_with("unknown field") || msg.contains("field `"))
            .unwrap_or("config")
            .to_string();
        ConfigError { key, msg }
    })
}

/// Flag values; `None` means "not given on the command line".
#[derive(Debug, Default, Clone)]
pub struct Overrides {
    pub gamma: Option<f64>,
    pub p: Option<f64>,
    pub q: Option<f64>,
    pub k: Option<f64>,
    pub system: Option<String>,
    pub policy: Option<String>,
    pub gain: Option<f64>,
    pub horizon: Option<usize>,
    pub x0: Option<f64>,
    pub disturbance: Option<String>,
    pub amplitude: Option<f64>,
    pub period: Option<f64>,
    pub value: Option<f64>,
    pub bound: Option<f64>,
    pub disturbance_file: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub max_iters: Option<usize>,
    pub tol: Option<f64>,
    pub y_points: Option<usize>,
    pub delta_points: Option<usize>,
    pub u_points: Option<usize>,
    pub v_points: Option<usize>,
    pub refine_u: Option<bool>,
    pub cap_by_certificate: Option<bool>,
    pub budget: Option<usize>,
    pub amplitude_max: Option<f64>,
    pub samples: Option<usize>,
    pub cases: Option<usize>,
    pub max_horizon: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum PolicyChoice {
    CeSign { k: f64 },
    Myopic,
    MyopicLiteral,
    Alternating,
    Proportional { gain: f64 },
}

/// Fully resolved configuration.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub gamma: f64,
    pub p: f64,
    pub q: f64,
    pub k: f64,
    pub policy: PolicyChoice,
    pub horizon: usize,
    pub x0: f64,
    pub disturbance: DisturbanceSpec,
    pub grid: GridConfig,
    pub max_iters: usize,
    pub search: SearchSettings,
    pub samples: usize,
    pub oracle_cases: usize,
    pub oracle_max_horizon: usize,
    pub out: Option<PathBuf>,
    pub seed: u64,
}

impl RunConfig {
    /// The configured `(γ, p, q, k)`, validated.
    pub fn certificate(&self) -> Result<Certificate, ConfigError> {
        Certificate::new(self.gamma, self.p, self.q, self.k)
            .map_err(|e| bad("certificate", e.to_string()))
    }
}

fn positive(key: &str, v: f64) -> Result<f64, ConfigError> {
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(bad(key, format!("must be a positive number, got {v}")))
    }
}

fn finite(key: &str, v: f64) -> Result<f64, ConfigError> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(bad(key, format!("must be finite, got {v}")))
    }
}

fn at_least(key: &str, v: usize, min: usize) -> Result<usize, ConfigError> {
    if v >= min {
        Ok(v)
    } else {
        Err(bad(key, format!("must be at least {min}, got {v}")))
    }
}

/// Merges file values, `env_seed` and flags (flags win) and validates.
pub fn resolve(file: FileConfig, env_seed: Option<&str>, o: &Overrides) -> Result<RunConfig, ConfigError> {
    let cert = file.certificate.unwrap_or_default();
    let pol = file.policy.unwrap_or_default();
    let dist = file.disturbance.unwrap_or_default();
    let vi = file.vi.unwrap_or_default();
    let search = file.search.unwrap_or_default();

    let gamma = positive("gamma", o.gamma.or(file.gamma).unwrap_or(4.0))?;
    let p = positive("certificate.p", o.p.or(cert.p).unwrap_or(1.7))?;
    let q = positive("certificate.q", o.q.or(cert.q).unwrap_or(7.0))?;
    let k = finite("certificate.k", o.k.or(cert.k).unwrap_or(0.7))?;

    let system = o.system.clone().or(file.system).unwrap_or_else(|| "integrator".into());
    if system != "integrator" {
        return Err(bad("system", format!("only `integrator` can be simulated, got `{system}`")));
    }

    let env_seed = match env_seed {
        Some(s) => Some(
            s.trim()
                .parse::<u64>()
                .map_err(|_| bad("DUALCTL_SEED", format!("expected an unsigned integer, got `{s}`")))?,
        ),
        None => None,
    };
    let seed = o.seed.or(env_seed).or(file.seed).unwrap_or(0);

    let gain = finite("policy.gain", o.gain.or(pol.gain).unwrap_or(0.0))?;
    let policy = match o.policy.clone().or(pol.kind).as_deref().unwrap_or("ce-sign") {
        "ce-sign" => PolicyChoice::CeSign { k },
        "myopic" => PolicyChoice::Myopic,
        "myopic-literal" => PolicyChoice::MyopicLiteral,
        "alternating" => PolicyChoice::Alternating,
        "zero" => PolicyChoice::Proportional { gain: 0.0 },
        "proportional" => PolicyChoice::Proportional { gain },
        other => {
            return Err(bad(
                "policy.kind",
                format!("unknown policy `{other}` (ce-sign, myopic, myopic-literal, alternating, zero, proportional)"),
            ))
        }
    };

    let horizon = o.horizon.or(file.horizon).unwrap_or(200);
    let x0 = finite("x0", o.x0.or(file.x0).unwrap_or(0.0))?;

    let budget = at_least("search.budget", o.budget.or(search.budget).unwrap_or(10_000), 1)?;
    let amplitude_max = positive("search.amplitude_max", o.amplitude_max.or(search.amplitude_max).unwrap_or(5.0))?;
    let search = SearchSettings { budget, seed, amplitude_max, ..SearchSettings::default() };

    let disturbance = match o.disturbance.clone().or(dist.kind).as_deref().unwrap_or("sinusoid") {
        "sinusoid" => DisturbanceSpec::Sinusoid {
            amplitude: finite("disturbance.amplitude", o.amplitude.or(dist.amplitude).unwrap_or(1.0))?,
            period: positive("disturbance.period", o.period.or(dist.period).unwrap_or(20.0))?,
        },
        "constant" => DisturbanceSpec::Constant {
            value: finite("disturbance.value", o.value.or(dist.value).unwrap_or(1.0))?,
        },
        "random" => DisturbanceSpec::RandomUniform {
            bound: positive("disturbance.bound", o.bound.or(dist.bound).unwrap_or(1.0))?,
            seed,
        },
        "file" => DisturbanceSpec::File {
            path: o
                .disturbance_file
                .clone()
                .or(dist.path)
                .ok_or_else(|| bad("disturbance.path", "required for the file disturbance"))?,
        },
        "adversarial" => DisturbanceSpec::Adversarial(search.clone()),
        other => {
            return Err(bad(
                "disturbance.kind",
                format!("unknown disturbance `{other}` (sinusoid, constant, random, file, adversarial)"),
            ))
        }
    };

    let mut grid = GridConfig::new(gamma);
    if let Some(v) = vi.y_max {
        grid.y_max = positive("vi.y_max", v)?;
        grid.u_max = 1.5 * grid.y_max;
        grid.v_max = 2.0 * (grid.y_max + grid.u_max);
    }
    grid.value_cap = 1e3 * q * grid.y_max * grid.y_max;
    if let Some(v) = vi.delta_max {
        grid.delta_max = positive("vi.delta_max", v)?;
    }
    grid.y_points = at_least("vi.y_points", o.y_points.or(vi.y_points).unwrap_or(grid.y_points), 2)?;
    grid.delta_points = at_least("vi.delta_points", o.delta_points.or(vi.delta_points).unwrap_or(grid.delta_points), 2)?;
    grid.u_points = at_least("vi.u_points", o.u_points.or(vi.u_points).unwrap_or(grid.u_points), 2)?;
    grid.v_points = at_least("vi.v_points", o.v_points.or(vi.v_points).unwrap_or(grid.v_points), 2)?;
    grid.refine_u = o.refine_u.or(vi.refine_u).unwrap_or(grid.refine_u);
    grid.tol = positive("vi.tol", o.tol.or(vi.tol).unwrap_or(grid.tol))?;
    let cap = o.cap_by_certificate.or(vi.cap_by_certificate);
    let max_iters = o.max_iters.or(vi.max_iters).unwrap_or(500);

    let samples = at_least(
        "certify.samples",
        o.samples.or(file.certify.and_then(|c| c.samples)).unwrap_or(10_000),
        1,
    )?;
    let oracle = file.oracle.unwrap_or_default();
    let oracle_cases = at_least("oracle.cases", o.cases.or(oracle.cases).unwrap_or(1000), 1)?;
    let oracle_max_horizon = at_least("oracle.max_horizon", o.max_horizon.or(oracle.max_horizon).unwrap_or(10), 1)?;

    let mut cfg = RunConfig {
        gamma,
        p,
        q,
        k,
        policy,
        horizon,
        x0,
        disturbance,
        grid,
        max_iters,
        search,
        samples,
        oracle_cases,
        oracle_max_horizon,
        out: o.out.clone().or(file.out),
        seed,
    };
    // cap VI interpolation by the certificate when it is valid, unless told otherwise
    let valid_cert = cfg
        .certificate()
        .ok()
        .and_then(|c| dualctl_core::certify::check_inequalities(&c).ok().map(|r| (c, r.satisfied)));
    match (cap, valid_cert) {
        (Some(true), Some((c, _))) => cfg.grid.reference = Some(c),
        (Some(true), None) => {
            return Err(bad("vi.cap_by_certificate", "the configured certificate is not valid for gamma"))
        }
        (None, Some((c, true))) => cfg.grid.reference = Some(c),
        _ => {}
    }
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_mirror_the_reference_run() {
        let cfg = resolve(FileConfig::default(), None, &Overrides::default()).unwrap();
        assert_eq!((cfg.gamma, cfg.p, cfg.q, cfg.k), (4.0, 1.7, 7.0, 0.7));
        assert_eq!(cfg.horizon, 200);
        assert_eq!(cfg.disturbance, DisturbanceSpec::sinusoid());
        assert_eq!(cfg.policy, PolicyChoice::CeSign { k: 0.7 });
        assert!(cfg.grid.reference.is_some());
    }

    #[test]
    fn flags_beat_env_beats_file() {
        let file: FileConfig = serde_json::from_str(r#"{"seed": 1, "gamma": 3.0}"#).unwrap();
        let cfg = resolve(file, Some("2"), &Overrides::default()).unwrap();
        assert_eq!((cfg.seed, cfg.gamma), (2, 3.0));
        let file: FileConfig = serde_json::from_str(r#"{"seed": 1, "gamma": 3.0}"#).unwrap();
        let o = Overrides { seed: Some(3), gamma: Some(5.0), ..Overrides::default() };
        let cfg = resolve(file, Some("2"), &o).unwrap();
        assert_eq!((cfg.seed, cfg.gamma), (3, 5.0));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(serde_json::from_str::<FileConfig>(r#"{"gama": 4}"#).is_err());
        assert!(serde_json::from_str::<FileConfig>(r#"{"vi": {"sweeps": 4}}"#).is_err());
    }

    #[test]
    fn errors_name_the_key() {
        let o = Overrides { gamma: Some(-1.0), ..Overrides::default() };
        assert_eq!(resolve(FileConfig::default(), None, &o).unwrap_err().key, "gamma");
        let o = Overrides { policy: Some("pid".into()), ..Overrides::default() };
        assert_eq!(resolve(FileConfig::default(), None, &o).unwrap_err().key, "policy.kind");
        assert_eq!(resolve(FileConfig::default(), Some("x"), &Overrides::default()).unwrap_err().key, "DUALCTL_SEED");
    }
}
