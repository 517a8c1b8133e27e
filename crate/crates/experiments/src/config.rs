//! Run configuration, read from a TOML file.
//!
//! ```toml
//! dt = 1e-5
//! T = 0.05
//! theta = 1.0          # gamma, chi, mu, alpha likewise (default 1)
//! stabilization = "standard"   # or "damped"
//! entropy = "classical"        # "bounded(kappa)", "saturation(M)"
//! newton.tol = 1e-11
//! newton.max_iters = 50
//! safeguard.sigma = 0.9
//! elliptic.tol = 1e-10
//! elliptic.max_iters = 1000
//!
//! [grid]
//! dim = 2
//! N = 100
//! origin = [0.0, 0.0]
//! length = 1.0
//!
//! [ic]
//! kind = "gaussian"    # or "manufactured"
//! amplitude_rho = 1000.0
//! amplitude_phi = 1.0
//! center = [0.5, 0.5]
//! width = 100.0
//!
//! [sources]
//! enabled = false      # manufactured source terms; f1/f2 switch each one
//!
//! [output]
//! dir = "out/symmetric"
//! snapshot_times = [0.0, 0.05]
//! diagnostics_every = 1
//!
//! [sweep]              # optional; dt = h/10 for every entry
//! N = [16, 32, 64, 128]
//! ```

use std::path::{Path, PathBuf};

use pks_core::{EntropyModel, SchemeParams, Stabilization};
use serde::Deserialize;
use thiserror::Error;

use crate::ic::InitialCondition;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

fn one() -> f64 {
    1.0
}

fn two() -> usize {
    2
}

fn yes() -> bool {
    true
}

fn every() -> usize {
    1
}

fn dot() -> PathBuf {
    PathBuf::from(".")
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    dt: Option<f64>,
    #[serde(rename = "T")]
    t_final: f64,
    #[serde(default = "one")]
    theta: f64,
    #[serde(default = "one")]
    gamma: f64,
    #[serde(default = "one")]
    chi: f64,
    #[serde(default = "one")]
    mu: f64,
    #[serde(default = "one")]
    alpha: f64,
    #[serde(default)]
    stabilization: Option<String>,
    #[serde(default)]
    entropy: Option<String>,
    #[serde(default)]
    newton: NewtonSection,
    #[serde(default)]
    safeguard: SafeguardSection,
    #[serde(default)]
    elliptic: EllipticSection,
    grid: GridSection,
    ic: IcSection,
    #[serde(default)]
    sources: SourcesSection,
    #[serde(default)]
    output: OutputSection,
    sweep: Option<SweepSection>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct NewtonSection {
    tol: Option<f64>,
    max_iters: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct SafeguardSection {
    sigma: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct EllipticSection {
    tol: Option<f64>,
    max_iters: Option<usize>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct GridSection {
    #[serde(default = "two")]
    dim: usize,
    #[serde(rename = "N")]
    n: usize,
    origin: Option<Vec<f64>>,
    #[serde(default = "one")]
    length: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct IcSection {
    kind: String,
    amplitude_rho: Option<f64>,
    amplitude_phi: Option<f64>,
    center: Option<Vec<f64>>,
    width: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SourcesSection {
    #[serde(default)]
    enabled: bool,
    #[serde(default = "yes")]
    f1: bool,
    #[serde(default = "yes")]
    f2: bool,
}

impl Default for SourcesSection {
    fn default() -> Self {
        Self { enabled: false, f1: true, f2: true }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct OutputSection {
    #[serde(default = "dot")]
    dir: PathBuf,
    #[serde(default)]
    snapshot_times: Vec<f64>,
    #[serde(default = "every")]
    diagnostics_every: usize,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self { dir: dot(), snapshot_times: Vec::new(), diagnostics_every: 1 }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SweepSection {
    #[serde(rename = "N")]
    n: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub dim: usize,
    pub n: usize,
    pub origin: [f64; 3],
    pub length: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SourceSpec {
    pub enabled: bool,
    pub f1: bool,
    pub f2: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputSpec {
    pub dir: PathBuf,
    pub snapshot_times: Vec<f64>,
    pub diagnostics_every: usize,
}

/// Validated configuration. `params.dt` holds the configured step, or `h/10`
/// when only a sweep is configured.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub params: SchemeParams,
    pub t_final: f64,
    pub grid: GridSpec,
    pub model: EntropyModel,
    pub ic: InitialCondition,
    pub sources: SourceSpec,
    pub output: OutputSpec,
    pub sweep: Option<Vec<usize>>,
}

fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.len() - before.rfind('\n').map_or(0, |i| i + 1) + 1;
    (line, column)
}

fn invalid<T>(msg: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError::Invalid(msg.into()))
}

fn point(v: &[f64], dim: usize, key: &str) -> Result<[f64; 3], ConfigError> {
    if v.len() != dim {
        return invalid(format!("{key} needs {dim} components, got {}", v.len()));
    }
    let mut out = [0.0; 3];
    out[..dim].copy_from_slice(v);
    Ok(out)
}

impl RunConfig {
    pub fn from_path(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.to_path_buf(), source })?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| {
            let (line, column) = e.span().map_or((0, 0), |s| line_col(text, s.start));
            ConfigError::Parse { line, column, message: e.message().to_string() }
        })?;
        Self::from_raw(raw)
    }

    fn from_raw(raw: RawConfig) -> Result<Self, ConfigError> {
        let g = &raw.grid;
        if !(g.dim == 2 || g.dim == 3) {
            return invalid(format!("grid.dim must be 2 or 3, got {}", g.dim));
        }
        if g.n < 4 {
            return invalid(format!("grid.N must be at least 4, got {}", g.n));
        }
        if !(g.length > 0.0 && g.length.is_finite()) {
            return invalid(format!("grid.length must be positive, got {}", g.length));
        }
        let origin = match &g.origin {
            Some(o) => point(o, g.dim, "grid.origin")?,
            None => [0.0; 3],
        };
        let grid = GridSpec { dim: g.dim, n: g.n, origin, length: g.length };

        if !(raw.t_final > 0.0 && raw.t_final.is_finite()) {
            return invalid(format!("T must be positive, got {}", raw.t_final));
        }
        let sweep = match raw.sweep {
            Some(s) if s.n.is_empty() => return invalid("sweep.N must list at least one resolution"),
            Some(s) => {
                if let Some(&n) = s.n.iter().find(|&&n| n < 4) {
                    return invalid(format!("sweep.N entries must be at least 4, got {n}"));
                }
                Some(s.n)
            }
            None => None,
        };
        let dt = match (raw.dt, &sweep) {
            (Some(dt), _) => dt,
            (None, Some(_)) => g.length / g.n as f64 / 10.0,
            (None, None) => return invalid("dt is required unless a sweep is configured"),
        };
        let stabilization = match &raw.stabilization {
            Some(s) => s.parse::<Stabilization>().map_err(ConfigError::Invalid)?,
            None => Stabilization::Standard,
        };
        let model = match &raw.entropy {
            Some(s) => s.parse::<EntropyModel>().map_err(ConfigError::Invalid)?,
            None => EntropyModel::Classical,
        };
        let defaults = SchemeParams::default();
        let params = SchemeParams {
            gamma: raw.gamma,
            chi: raw.chi,
            theta: raw.theta,
            mu: raw.mu,
            alpha: raw.alpha,
            dt,
            stabilization,
            newton_tol: raw.newton.tol.unwrap_or(defaults.newton_tol),
            newton_max_iters: raw.newton.max_iters.unwrap_or(defaults.newton_max_iters),
            safeguard_sigma: raw.safeguard.sigma.unwrap_or(defaults.safeguard_sigma),
            elliptic_tol: raw.elliptic.tol.unwrap_or(defaults.elliptic_tol),
            elliptic_max_iters: raw.elliptic.max_iters.unwrap_or(defaults.elliptic_max_iters),
            descent_max_iters: defaults.descent_max_iters,
        };
        params.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;

        let ic = match raw.ic.kind.as_str() {
            "manufactured" => InitialCondition::Manufactured,
            "gaussian" => {
                let need = |v: Option<f64>, key: &str| {
                    v.ok_or_else(|| ConfigError::Invalid(format!("ic.{key} is required for a gaussian")))
                };
                let center = raw
                    .ic
                    .center
                    .as_deref()
                    .ok_or_else(|| ConfigError::Invalid("ic.center is required for a gaussian".into()))?;
                InitialCondition::Gaussian {
                    amplitude_rho: need(raw.ic.amplitude_rho, "amplitude_rho")?,
                    amplitude_phi: need(raw.ic.amplitude_phi, "amplitude_phi")?,
                    center: point(center, g.dim, "ic.center")?,
                    width: need(raw.ic.width, "width")?,
                }
            }
            other => return invalid(format!("ic.kind must be manufactured or gaussian, got `{other}`")),
        };
        if sweep.is_some() && ic != InitialCondition::Manufactured {
            return invalid("a sweep measures errors against the exact solution and needs ic.kind = \"manufactured\"");
        }
        if raw.sources.enabled && ic != InitialCondition::Manufactured {
            return invalid("sources.enabled requires ic.kind = \"manufactured\"");
        }

        let out = raw.output;
        if out.diagnostics_every == 0 {
            return invalid("output.diagnostics_every must be at least 1");
        }
        if let Some(t) = out.snapshot_times.iter().find(|&&t| !(0.0..=raw.t_final).contains(&t)) {
            return invalid(format!("snapshot time {t} lies outside [0, T = {}]", raw.t_final));
        }

        Ok(RunConfig {
            params,
            t_final: raw.t_final,
            grid,
            model,
            ic,
            sources: SourceSpec { enabled: raw.sources.enabled, f1: raw.sources.f1, f2: raw.sources.f2 },
            output: OutputSpec {
                dir: out.dir,
                snapshot_times: out.snapshot_times,
                diagnostics_every: out.diagnostics_every,
            },
            sweep,
        })
    }

    /// Copy for one sweep resolution: `N = n`, `dt = h/10`.
    pub fn for_resolution(&self, n: usize) -> RunConfig {
        let mut c = self.clone();
        c.grid.n = n;
        c.params.dt = self.grid.length / n as f64 / 10.0;
        c.output.dir = self.output.dir.join(format!("N{n}"));
        c.sweep = None;
        c
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BLOWUP: &str = r#"
dt = 1e-5
T = 0.05
newton.tol = 1e-11
safeguard.sigma = 0.9

[grid]
N = 100

[ic]
kind = "gaussian"
amplitude_rho = 1000.0
amplitude_phi = 1.0
center = [0.5, 0.5]
width = 100.0

[output]
dir = "out"
snapshot_times = [0.0, 0.05]
"#;

    #[test]
    fn parses_blowup_config() {
        let c = RunConfig::parse(BLOWUP).unwrap();
        assert_eq!(c.grid.n, 100);
        assert_eq!(c.params.dt, 1e-5);
        assert_eq!(c.params.gamma, 1.0);
        assert_eq!(c.ic, InitialCondition::symmetric_blowup());
        assert_eq!(c.model, EntropyModel::Classical);
        assert_eq!(c.output.diagnostics_every, 1);
        assert!(c.sweep.is_none());
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let text = "dt = 1e-5\nT = 0.05\ntheta = \"one\"\n[grid]\nN = 8\n[ic]\nkind = \"manufactured\"\n";
        match RunConfig::parse(text) {
            Err(ConfigError::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        let typo = "dt = 1e-5\nT = 0.05\n[grid]\nN = 8\nsize = 3\n[ic]\nkind = \"manufactured\"\n";
        match RunConfig::parse(typo) {
            Err(ConfigError::Parse { line, message, .. }) => {
                assert_eq!(line, 5);
                assert!(message.contains("size"), "{message}");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn sweep_uses_mesh_ratio() {
        let text = "T = 0.1\n[grid]\nN = 16\n[ic]\nkind = \"manufactured\"\n[sources]\nenabled = true\n[sweep]\nN = [16, 32]\n";
        let c = RunConfig::parse(text).unwrap();
        assert_eq!(c.sweep, Some(vec![16, 32]));
        let r = c.for_resolution(32);
        assert_eq!(r.params.dt, 1.0 / 320.0);
        assert!(r.output.dir.ends_with("N32"));
    }

    #[test]
    fn rejects_bad_values() {
        let base = "T = 0.1\n[grid]\nN = 16\n[ic]\nkind = \"manufactured\"\n";
        let cases = [
            format!("{base}[sweep]\nN = []\n"),
            format!("dt = 0.01\n{}", base.replace("N = 16", "N = 3")),
            format!("dt = 0.01\ntheta = 0.0\n{base}"),
            base.to_string(),
            format!("dt = 0.01\nentropy = \"weird\"\n{base}"),
            format!("dt = 0.01\n{base}[output]\nsnapshot_times = [0.2]\n"),
            format!("dt = 0.01\n{}", base.replace("manufactured", "gaussian")),
        ];
        for text in cases {
            assert!(matches!(RunConfig::parse(&text), Err(ConfigError::Invalid(_))), "{text}");
        }
    }
}
