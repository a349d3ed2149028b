//! Strict `key = value` config files with `[section]` headers.
//!
//! Every key has a default; unknown keys, duplicates and malformed lines are
//! rejected with their line number. `--set section.key=value` overrides are
//! applied on top of the file with the same checks.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use fraclimit_core::kinetic::{GridSpec, InitialProfile};
use fraclimit_core::ops::OperatorId;
use fraclimit_core::ModelParams;

use crate::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    SimulateKinetic,
    EvalOperators,
    Converge,
    SolveLimit,
    Compare,
    FullPipeline,
}

impl Mode {
    pub const ALL: [Mode; 6] = [
        Mode::SimulateKinetic,
        Mode::EvalOperators,
        Mode::Converge,
        Mode::SolveLimit,
        Mode::Compare,
        Mode::FullPipeline,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Mode::SimulateKinetic => "simulate-kinetic",
            Mode::EvalOperators => "eval-operators",
            Mode::Converge => "converge",
            Mode::SolveLimit => "solve-limit",
            Mode::Compare => "compare",
            Mode::FullPipeline => "full-pipeline",
        }
    }
}

/// (section, key, default). The empty section holds top-level keys.
const SCHEMA: &[(&str, &str, &str)] = &[
    ("", "mode", ""),
    ("", "seed", "1"),
    ("", "workers", "0"),
    ("", "kernel_cache", ""),
    ("model", "d", "1"),
    ("model", "s", "0.75"),
    ("model", "nu0", "1"),
    ("model", "gamma", ""),
    ("model", "alpha", "0"),
    ("model", "eps", "0.1"),
    ("kinetic", "particles", "100000"),
    ("kinetic", "t_end", "0.5"),
    ("kinetic", "snapshots", ""),
    ("kinetic", "initial", "gaussian"),
    ("kinetic", "center", "2"),
    ("kinetic", "sigma", "1"),
    ("kinetic", "lo", "1"),
    ("kinetic", "hi", "3"),
    ("kinetic", "position", "2"),
    ("kinetic", "grid_lo", "0"),
    ("kinetic", "grid_hi", "8"),
    ("kinetic", "bins", "80"),
    ("kinetic", "far_mirror", ""),
    ("operators", "eps_list", "0.2, 0.1, 0.05, 0.025"),
    ("operators", "psi", "ds"),
    ("operators", "ops", "Lsr, Leps, kappa, LM, phi, boundary_flux"),
    ("operators", "points", "0.25, 0.5, 1, 2, 4"),
    ("operators", "max_ratio", "0.8"),
    ("solver", "length", "32"),
    ("solver", "nodes", "200"),
    ("solver", "grading", "1.15"),
    ("solver", "dt", "0.005"),
    ("solver", "export_matrices", "false"),
    ("compare", "a", ""),
    ("compare", "b", ""),
];

fn full_key(section: &str, key: &str) -> String {
    if section.is_empty() {
        key.to_string()
    } else {
        format!("{section}.{key}")
    }
}

fn known(full: &str) -> bool {
    SCHEMA.iter().any(|(s, k, _)| full_key(s, k) == full)
}

/// Where a value came from, for error messages.
#[derive(Clone, Debug, PartialEq)]
pub enum Origin {
    Default,
    Line(usize),
    Override,
}

/// Raw key/value table after parsing and overrides.
#[derive(Clone, Debug)]
pub struct RawConfig {
    values: BTreeMap<String, (String, Origin)>,
}

impl RawConfig {
    fn defaults() -> Self {
        RawConfig {
            values: SCHEMA
                .iter()
                .map(|(s, k, d)| (full_key(s, k), (d.to_string(), Origin::Default)))
                .collect(),
        }
    }

    pub fn parse_str(text: &str) -> Result<Self, CliError> {
        let mut cfg = RawConfig::defaults();
        let mut section = String::new();
        let mut seen = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.split('#').next().unwrap_or("").split(';').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('[') {
                let name = rest
                    .strip_suffix(']')
                    .ok_or_else(|| CliError::config(Some(line_no), format!("malformed section header `{line}`")))?
                    .trim();
                if !SCHEMA.iter().any(|(s, _, _)| !s.is_empty() && *s == name) {
                    return Err(CliError::config(Some(line_no), format!("unknown section [{name}]")));
                }
                section = name.to_string();
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| CliError::config(Some(line_no), format!("expected `key = value`, found `{line}`")))?;
            let full = full_key(&section, k.trim());
            if !known(&full) {
                return Err(CliError::config(Some(line_no), format!("unknown key `{}`", full)));
            }
            if let Some(prev) = seen.insert(full.clone(), line_no) {
                return Err(CliError::config(Some(line_no), format!("key `{full}` already set on line {prev}")));
            }
            cfg.values.insert(full, (v.trim().to_string(), Origin::Line(line_no)));
        }
        Ok(cfg)
    }

    pub fn parse_file(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("cannot read {}: {e}", path.display())))?;
        RawConfig::parse_str(&text)
    }

    /// Applies `key=value`, where `key` is `section.key` or a top-level key.
    pub fn set(&mut self, assignment: &str) -> Result<(), CliError> {
        let (k, v) = assignment
            .split_once('=')
            .ok_or_else(|| CliError::config(None, format!("--set expects key=value, got `{assignment}`")))?;
        let k = k.trim();
        if !known(k) {
            return Err(CliError::config(None, format!("unknown key `{k}` in --set")));
        }
        self.values.insert(k.to_string(), (v.trim().to_string(), Origin::Override));
        Ok(())
    }

    fn get(&self, key: &str) -> (&str, Origin) {
        let (v, o) = self.values.get(key).expect("schema key");
        (v.as_str(), o.clone())
    }

    fn fail(&self, key: &str, msg: String) -> CliError {
        let (_, origin) = self.get(key);
        let line = match origin {
            Origin::Line(n) => Some(n),
            _ => None,
        };
        CliError::config(line, format!("`{key}`: {msg}"))
    }

    fn num<T: std::str::FromStr>(&self, key: &str) -> Result<T, CliError> {
        let (v, _) = self.get(key);
        v.parse().map_err(|_| self.fail(key, format!("cannot parse `{v}` as a number")))
    }

    fn opt_num(&self, key: &str) -> Result<Option<f64>, CliError> {
        if self.get(key).0.is_empty() {
            Ok(None)
        } else {
            self.num(key).map(Some)
        }
    }

    fn list(&self, key: &str) -> Vec<String> {
        self.get(key).0.split(',').map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect()
    }

    fn num_list(&self, key: &str) -> Result<Vec<f64>, CliError> {
        self.list(key)
            .iter()
            .map(|v| v.parse().map_err(|_| self.fail(key, format!("cannot parse `{v}` as a number"))))
            .collect()
    }

    fn path(&self, key: &str) -> Option<PathBuf> {
        let v = self.get(key).0;
        (!v.is_empty()).then(|| PathBuf::from(v))
    }

    /// Resolved values in INI form; feeding this back reproduces the run.
    pub fn to_ini(&self) -> String {
        let mut out = String::new();
        let mut current = None;
        for (s, k, _) in SCHEMA {
            if current != Some(*s) {
                if !s.is_empty() {
                    let _ = writeln!(out, "\n[{s}]");
                }
                current = Some(*s);
            }
            let _ = writeln!(out, "{k} = {}", self.get(&full_key(s, k)).0);
        }
        out
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::Value::Object(
            self.values
                .iter()
                .map(|(k, (v, _))| (k.clone(), serde_json::Value::String(v.clone())))
                .collect(),
        )
    }
}

#[derive(Clone, Debug)]
pub struct KineticConfig {
    pub particles: usize,
    pub t_end: f64,
    pub snapshots: Vec<f64>,
    pub initial: InitialProfile,
    pub grid: GridSpec,
    pub far_mirror: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct OperatorsConfig {
    pub eps_list: Vec<f64>,
    pub psi: Vec<String>,
    pub ops: Vec<OperatorId>,
    pub points: Vec<f64>,
    pub max_ratio: f64,
}

#[derive(Clone, Debug)]
pub struct SolverConfig {
    pub length: f64,
    pub nodes: usize,
    pub grading: f64,
    pub dt: f64,
    pub export_matrices: bool,
}

#[derive(Clone, Debug)]
pub struct RunConfig {
    pub mode: Mode,
    pub seed: u64,
    /// 0 means one worker per core.
    pub workers: usize,
    pub kernel_cache: Option<PathBuf>,
    pub params: ModelParams,
    pub kinetic: KineticConfig,
    pub operators: OperatorsConfig,
    pub solver: SolverConfig,
    pub compare: (Option<PathBuf>, Option<PathBuf>),
    pub raw: RawConfig,
}

impl RunConfig {
    pub fn from_raw(raw: RawConfig) -> Result<RunConfig, CliError> {
        let mode_s = raw.get("mode").0;
        let mode = Mode::ALL.iter().copied().find(|m| m.name() == mode_s).ok_or_else(|| {
            let names: Vec<&str> = Mode::ALL.iter().map(|m| m.name()).collect();
            raw.fail("mode", format!("expected one of {}, got `{mode_s}`", names.join(", ")))
        })?;
        let gamma = raw.opt_num("model.gamma")?;
        let params = ModelParams {
            d: raw.num("model.d")?,
            s: raw.num("model.s")?,
            nu0: raw.num("model.nu0")?,
            gamma,
            alpha: raw.num("model.alpha")?,
            eps: raw.num("model.eps")?,
        };
        params.validate().map_err(|e| CliError::config(None, e.to_string()))?;

        let t_end: f64 = raw.num("kinetic.t_end")?;
        if !(t_end > 0.0 && t_end.is_finite()) {
            return Err(raw.fail("kinetic.t_end", format!("must be positive, got {t_end}")));
        }
        let mut snapshots = raw.num_list("kinetic.snapshots")?;
        if snapshots.is_empty() {
            snapshots.push(t_end);
        }
        if snapshots.windows(2).any(|w| w[1] <= w[0]) || snapshots.iter().any(|t| *t < 0.0 || *t > t_end) {
            return Err(raw.fail("kinetic.snapshots", "must be increasing and within [0, t_end]".into()));
        }
        let initial = match raw.get("kinetic.initial").0 {
            "gaussian" => InitialProfile::Gaussian {
                center: raw.num("kinetic.center")?,
                sigma: raw.num("kinetic.sigma")?,
            },
            "uniform" => InitialProfile::Uniform {
                lo: raw.num("kinetic.lo")?,
                hi: raw.num("kinetic.hi")?,
            },
            "point" => InitialProfile::PointMass(raw.num("kinetic.position")?),
            other => return Err(raw.fail("kinetic.initial", format!("expected gaussian, uniform or point, got `{other}`"))),
        };
        let grid = GridSpec {
            lo: raw.num("kinetic.grid_lo")?,
            hi: raw.num("kinetic.grid_hi")?,
            bins: raw.num("kinetic.bins")?,
        };
        if !(grid.hi > grid.lo && grid.bins > 0 && grid.lo >= 0.0) {
            return Err(raw.fail("kinetic.grid_hi", "grid needs 0 ≤ grid_lo < grid_hi and bins > 0".into()));
        }
        let particles: usize = raw.num("kinetic.particles")?;
        if particles == 0 {
            return Err(raw.fail("kinetic.particles", "must be at least 1".into()));
        }
        let kinetic = KineticConfig {
            particles,
            t_end,
            snapshots,
            initial,
            grid,
            far_mirror: raw.opt_num("kinetic.far_mirror")?,
        };

        let eps_list = raw.num_list("operators.eps_list")?;
        if eps_list.is_empty() || eps_list.iter().any(|e| !(*e > 0.0 && *e <= 1.0)) {
            return Err(raw.fail("operators.eps_list", "needs at least one value in (0, 1]".into()));
        }
        if eps_list.windows(2).any(|w| w[1] >= w[0]) {
            return Err(raw.fail("operators.eps_list", "must be strictly decreasing".into()));
        }
        let ops = raw
            .list("operators.ops")
            .iter()
            .map(|o| OperatorId::parse(o).ok_or_else(|| raw.fail("operators.ops", format!("unknown operator `{o}`"))))
            .collect::<Result<Vec<_>, _>>()?;
        let operators = OperatorsConfig {
            eps_list,
            psi: raw.list("operators.psi"),
            ops,
            points: raw.num_list("operators.points")?,
            max_ratio: raw.num("operators.max_ratio")?,
        };

        let solver = SolverConfig {
            length: raw.num("solver.length")?,
            nodes: raw.num("solver.nodes")?,
            grading: raw.num("solver.grading")?,
            dt: raw.num("solver.dt")?,
            export_matrices: match raw.get("solver.export_matrices").0 {
                "true" => true,
                "false" => false,
                v => return Err(raw.fail("solver.export_matrices", format!("expected true or false, got `{v}`"))),
            },
        };
        if !(solver.dt > 0.0) {
            return Err(raw.fail("solver.dt", "must be positive".into()));
        }

        let compare = (raw.path("compare.a"), raw.path("compare.b"));
        if mode == Mode::Compare && (compare.0.is_none() || compare.1.is_none()) {
            return Err(CliError::config(None, "compare mode needs both `compare.a` and `compare.b`".into()));
        }
        if matches!(mode, Mode::SolveLimit | Mode::FullPipeline) && params.d != 1 {
            return Err(CliError::config(None, format!("{} runs in d = 1 only (got d = {})", mode.name(), params.d)));
        }
        Ok(RunConfig {
            mode,
            seed: raw.num("seed")?,
            workers: raw.num("workers")?,
            kernel_cache: raw.path("kernel_cache"),
            params,
            kinetic,
            operators,
            solver,
            compare,
            raw,
        })
    }
}

/// Reads `path`, applies overrides and validates.
pub fn parse_config(path: &Path, overrides: &[String]) -> Result<RunConfig, CliError> {
    let mut raw = RawConfig::parse_file(path)?;
    for o in overrides {
        raw.set(o)?;
    }
    RunConfig::from_raw(raw)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<RunConfig, CliError> {
        RunConfig::from_raw(RawConfig::parse_str(text)?)
    }

    const MINIMAL: &str = "mode = converge\n[model]\nd = 1\ns = 0.6\nnu0 = 2\nalpha = 0\neps = 0.05\n";

    #[test]
    fn minimal_config() {
        let c = parse(MINIMAL).unwrap();
        assert_eq!(c.mode, Mode::Converge);
        assert_eq!(c.params.s, 0.6);
        assert_eq!(c.params.nu0, 2.0);
        assert_eq!(c.operators.eps_list, vec![0.2, 0.1, 0.05, 0.025]);
        assert_eq!(c.kinetic.snapshots, vec![0.5]);
        assert_eq!(c.seed, 1);
    }

    #[test]
    fn diffuse_needs_s_above_half() {
        let e = parse("mode = converge\n[model]\ns = 0.4\nalpha = 0.5\n").unwrap_err();
        assert_eq!(e.exit_code(), 2);
        assert!(e.to_string().contains("s > 1/2"), "{e}");
    }

    #[test]
    fn unknown_key_is_named_with_line() {
        let e = parse("mode = converge\n[model]\nfoo=1\n").unwrap_err();
        let msg = e.to_string();
        assert!(msg.contains("model.foo") && msg.contains("line 3"), "{msg}");
    }

    #[test]
    fn malformed_lines() {
        for (text, line) in [("mode converge\n", 1), ("mode = converge\n[model\n", 2), ("mode=converge\nmode=compare\n", 2), ("[nope]\n", 1)] {
            let msg = parse(text).unwrap_err().to_string();
            assert!(msg.contains(&format!("line {line}")), "{text:?}: {msg}");
        }
    }

    #[test]
    fn bad_values() {
        for text in [
            "mode = walk\n",
            "mode = converge\n[operators]\neps_list = 0.1, 0.2\n",
            "mode = converge\n[model]\ns = abc\n",
            "mode = compare\n",
            "mode = solve-limit\n[model]\nd = 2\n",
        ] {
            assert_eq!(parse(text).unwrap_err().exit_code(), 2, "{text:?}");
        }
    }

    #[test]
    fn overrides_and_roundtrip() {
        let mut raw = RawConfig::parse_str(MINIMAL).unwrap();
        raw.set("model.s=0.7").unwrap();
        raw.set("seed = 9").unwrap();
        assert!(raw.set("model.bogus=1").is_err());
        let c = RunConfig::from_raw(raw).unwrap();
        assert_eq!((c.params.s, c.seed), (0.7, 9));
        let again = RunConfig::from_raw(RawConfig::parse_str(&c.raw.to_ini()).unwrap()).unwrap();
        assert_eq!(again.raw.to_ini(), c.raw.to_ini());
    }
}
