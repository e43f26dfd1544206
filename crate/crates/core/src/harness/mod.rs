//! Experiment configuration, orchestration and report files.
//!
//! A config is a flat TOML file (`key = value`, no tables). The keys are
//! documented on [`ExperimentConfig`]; unknown keys are rejected.

pub mod suite;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::estimators::{
    cover_dimension_bound, dyadic_grid, inequality_study, slope_rows, InequalityParams, InequalityStudy,
    SCHEMA_VERSION, SLOPE_CSV_HEADER,
};
use crate::exec::Exec;
use crate::hitting::{batch_hitting_stream, profile_rows, HitMode, RadiusSchedule, PROFILE_CSV_HEADER};
use crate::numerics::ContinuedFraction;
use crate::orbit::{orbit_stream, DEFAULT_MAX_STORED};
use crate::systems::{noninvariant_counterexample, Arithmetic, Point, Space, SystemSpec};

/// Bundled configs, one per acceptance experiment.
pub const BUNDLED: &[(&str, &str)] = &[
    ("golden_rotation.cfg", include_str!("../../configs/golden_rotation.cfg")),
    ("type2_rotation.cfg", include_str!("../../configs/type2_rotation.cfg")),
    ("doubling.cfg", include_str!("../../configs/doubling.cfg")),
    ("cat_map.cfg", include_str!("../../configs/cat_map.cfg")),
    ("cantor.cfg", include_str!("../../configs/cantor.cfg")),
    ("counterexample.cfg", include_str!("../../configs/counterexample.cfg")),
    ("rational_third.cfg", include_str!("../../configs/rational_third.cfg")),
];

/// Column documentation for the CSV outputs.
pub const LOGISTIC_BURN_IN: u64 = 10_000;

pub const CSV_SCHEMA: &str = include_str!("../../configs/csv_schema.md");

fn default_tail_fraction() -> f64 {
    0.5
}
fn default_cover_h() -> f64 {
    0.5
}
fn default_cover_epsilon() -> f64 {
    0.1
}
fn default_cover_d() -> f64 {
    0.8
}

/// One experiment.
///
/// | key | meaning |
/// |-----|---------|
/// | `system` | `rotation`, `doubling`, `logistic`, `cat_map`, `cantor_shift`, `constant`, `square` |
/// | `angle` | rotations only: `golden`, `silver`, `power:<nu>` or `terms:<a1>,<a2>,...` |
/// | `arithmetic` | `fixed_point` (default) or `double` |
/// | `n` | orbit length |
/// | `burn_in` | points discarded before each orbit (default 10^4 for `logistic`, else 0) |
/// | `k_min`, `k_max` | radii `2^-k` |
/// | `sources`, `targets` | number of points drawn from the declared measure |
/// | `extra_sources`, `extra_targets` | explicit points, `"x"` or `"x;y"` on the torus |
/// | `seed` | master seed |
/// | `tolerance` | slack in the inequality checks |
/// | `tail_fraction` | share of scales in the tail window (default 0.5) |
/// | `cover_h`, `cover_epsilon`, `cover_d`, `cover_k0`, `cover_grid` | cover check (defaults 0.5, 0.1, 0.8, `k_min`, automatic) |
/// | `output` | output directory |
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub system: String,
    #[serde(default)]
    pub angle: Option<String>,
    #[serde(default)]
    pub arithmetic: Option<Arithmetic>,
    pub n: usize,
    #[serde(default)]
    pub burn_in: Option<u64>,
    pub k_min: u32,
    pub k_max: u32,
    pub sources: usize,
    pub targets: usize,
    #[serde(default)]
    pub extra_sources: Vec<String>,
    #[serde(default)]
    pub extra_targets: Vec<String>,
    pub seed: u64,
    pub tolerance: f64,
    #[serde(default = "default_tail_fraction")]
    pub tail_fraction: f64,
    #[serde(default = "default_cover_h")]
    pub cover_h: f64,
    #[serde(default = "default_cover_epsilon")]
    pub cover_epsilon: f64,
    #[serde(default = "default_cover_d")]
    pub cover_d: f64,
    #[serde(default)]
    pub cover_k0: Option<u32>,
    #[serde(default)]
    pub cover_grid: Option<u32>,
    pub output: PathBuf,
}

/// A config after validation, with everything parsed.
#[derive(Clone, Debug)]
pub struct Validated {
    pub system: SystemSpec,
    pub schedule: RadiusSchedule,
    pub extra_sources: Vec<Point>,
    pub extra_targets: Vec<Point>,
    pub cover_grid: u32,
}

impl ExperimentConfig {
    pub fn parse(text: &str, path: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config {
            path: path.into(),
            message: e.to_string(),
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::Config {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn bundled(name: &str) -> Result<Self> {
        let (_, text) = BUNDLED
            .iter()
            .find(|(n, _)| *n == name)
            .ok_or_else(|| Error::InvalidParameter(format!("no bundled config `{name}`")))?;
        Self::parse(text, name)
    }

    /// Checks every field against the preconditions of the operations it
    /// feeds.
    pub fn validate(&self) -> Result<Validated> {
        let system = parse_system(&self.system, self.angle.as_deref(), self.arithmetic)?;
        let schedule = RadiusSchedule::new(self.k_min, self.k_max)?;
        if self.n < 2 {
            return Err(Error::InvalidParameter(format!("n = {} must be >= 2", self.n)));
        }
        if self.n > DEFAULT_MAX_STORED {
            return Err(Error::OrbitTooLarge {
                requested: self.n,
                cap: DEFAULT_MAX_STORED,
            });
        }
        if !(self.tolerance >= 0.0 && self.tolerance.is_finite()) {
            return Err(Error::InvalidParameter(format!("tolerance = {} must be >= 0", self.tolerance)));
        }
        if !(self.tail_fraction > 0.0 && self.tail_fraction <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "tail_fraction = {} must be in (0, 1]",
                self.tail_fraction
            )));
        }
        let extra_sources = self
            .extra_sources
            .iter()
            .map(|s| parse_point(&system, s))
            .collect::<Result<Vec<_>>>()?;
        for x in &extra_sources {
            system.check_domain(x)?;
        }
        let extra_targets = self
            .extra_targets
            .iter()
            .map(|s| parse_point(&system, s))
            .collect::<Result<Vec<_>>>()?;
        if self.sources + extra_sources.len() == 0 {
            return Err(Error::InvalidParameter("no sources".into()));
        }
        if self.targets + extra_targets.len() == 0 {
            return Err(Error::InvalidParameter("no targets".into()));
        }
        if !(self.cover_epsilon > 0.0) || self.cover_d <= self.cover_h + self.cover_epsilon {
            return Err(Error::DivergentCover {
                d: self.cover_d,
                h_eps: self.cover_h + self.cover_epsilon,
            });
        }
        let cover_grid = self.cover_grid.unwrap_or(if system.dim() == 2 {
            self.k_max.min(6)
        } else {
            self.k_max.min(12)
        });
        if cover_grid == 0 || cover_grid * system.dim() as u32 > 16 {
            return Err(Error::InvalidParameter(format!(
                "cover_grid = {cover_grid} gives more than 2^16 grid points"
            )));
        }
        Ok(Validated {
            system,
            schedule,
            extra_sources,
            extra_targets,
            cover_grid,
        })
    }

    pub fn params(&self, v: &Validated, exec: Exec) -> InequalityParams {
        InequalityParams {
            n_sources: self.sources,
            n_targets: self.targets,
            schedule: v.schedule,
            orbit_len: self.n,
            burn_in: self.burn_in(),
            tolerance: self.tolerance,
            tail_fraction: self.tail_fraction,
            seed: self.seed,
            extra_sources: v.extra_sources.clone(),
            extra_targets: v.extra_targets.clone(),
            exec,
        }
    }

    /// Explicit burn-in, or the default for the system: the logistic
    /// orbit's empirical measure needs time to settle, the others start on
    /// their measure.
    pub fn burn_in(&self) -> u64 {
        self.burn_in
            .unwrap_or(if self.system == "logistic" { LOGISTIC_BURN_IN } else { 0 })
    }

    /// SHA-256 of the canonical JSON form, so formatting does not matter.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(serde_json::to_vec(self).expect("config serializes")))
    }
}

/// Builds a system from its config name.
pub fn parse_system(name: &str, angle: Option<&str>, arithmetic: Option<Arithmetic>) -> Result<SystemSpec> {
    let sys = match name {
        "rotation" => {
            let a = angle.ok_or_else(|| Error::InvalidParameter("rotation needs `angle`".into()))?;
            SystemSpec::rotation(parse_angle(a)?.angle()?)
        }
        "doubling" => SystemSpec::doubling(),
        "logistic" => SystemSpec::logistic(),
        "cat_map" => SystemSpec::cat_map(),
        "cantor_shift" => SystemSpec::cantor_shift(),
        "constant" => noninvariant_counterexample(),
        "square" => SystemSpec::square(),
        other => return Err(Error::InvalidParameter(format!("unknown system `{other}`"))),
    };
    if name != "rotation" && angle.is_some() {
        return Err(Error::InvalidParameter(format!("`angle` does not apply to `{name}`")));
    }
    match arithmetic {
        Some(a) => sys.with_arithmetic(a),
        None => Ok(sys),
    }
}

/// `golden`, `silver`, `power:<nu>` or `terms:<a1>,<a2>,...`.
pub fn parse_angle(s: &str) -> Result<ContinuedFraction> {
    let bad = || Error::InvalidParameter(format!("cannot parse angle `{s}`"));
    match s.split_once(':') {
        None if s == "golden" => Ok(ContinuedFraction::golden()),
        None if s == "silver" => Ok(ContinuedFraction::silver()),
        Some(("power", v)) => {
            let nu: f64 = v.trim().parse().map_err(|_| bad())?;
            if !(nu >= 1.0 && nu.is_finite()) {
                return Err(bad());
            }
            Ok(ContinuedFraction::power(nu))
        }
        Some(("terms", v)) => {
            let terms = v
                .split(',')
                .map(|t| t.trim().parse::<u64>().map_err(|_| bad()))
                .collect::<Result<Vec<_>>>()?;
            ContinuedFraction::explicit(terms)
        }
        _ => Err(bad()),
    }
}

/// `"x"` or `"x;y"` as a point of the system's space. Targets in the ternary
/// Cantor space may be any point of `[0, 1]`.
pub fn parse_point(sys: &SystemSpec, s: &str) -> Result<Point> {
    let nums = s
        .split([';', ','])
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| Error::InvalidParameter(format!("cannot parse point `{s}`")))
        })
        .collect::<Result<Vec<_>>>()?;
    match (sys.space(), nums.as_slice()) {
        (Space::Circle, [x]) => Point::circle(*x),
        (Space::Torus, [x, y]) => Point::torus(*x, *y),
        (Space::Interval | Space::Cantor, [x]) => Point::interval(*x),
        _ => Err(Error::InvalidParameter(format!(
            "point `{s}` does not fit the space of `{}`",
            sys.name()
        ))),
    }
}

/// Record of one run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub schema_version: u32,
    pub config_hash: String,
    pub version: String,
    pub started_unix: u64,
    pub finished_unix: u64,
    /// File name to SHA-256 of its contents.
    pub files: BTreeMap<String, String>,
}

fn unix_now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

/// Every output of one experiment, rendered but not yet written.
#[derive(Clone, Debug)]
pub struct Outputs {
    pub files: Vec<(&'static str, String)>,
    pub study: InequalityStudy,
}

/// Hitting rows for every (source, target) pair followed by the return-time
/// rows of each source, in source order.
pub fn hitting_csv(sys: &SystemSpec, study: &InequalityStudy) -> String {
    let mut out = String::from(PROFILE_CSV_HEADER);
    out.push('\n');
    for ps in &study.profiles {
        for p in ps {
            for row in profile_rows(sys.name(), p) {
                out.push_str(&row);
                out.push('\n');
            }
        }
    }
    out
}

/// Per-scale slopes: `R` per pair (target `self` for return times), then `d`
/// per target and per source.
pub fn slopes_csv(study: &InequalityStudy) -> String {
    let mut out = String::from(SLOPE_CSV_HEADER);
    out.push('\n');
    let mut push = |rows: Vec<String>| {
        for r in rows {
            out.push_str(&r);
            out.push('\n');
        }
    };
    let n_targets = study.targets.len();
    for (s, ests) in study.pair_estimates.iter().enumerate() {
        for (t, e) in ests.iter().enumerate() {
            if let Ok(e) = e {
                let tname = if t == n_targets { "self".to_string() } else { t.to_string() };
                push(slope_rows(e, &s.to_string(), &tname));
            }
        }
    }
    for (t, e) in study.target_estimates.iter().enumerate() {
        if let Ok(e) = e {
            push(slope_rows(e, "", &t.to_string()));
        }
    }
    for (s, e) in study.source_estimates.iter().enumerate() {
        if let Ok(e) = e {
            push(slope_rows(e, &s.to_string(), "self"));
        }
    }
    out
}

/// Runs the experiment in memory.
pub fn compute_outputs(cfg: &ExperimentConfig, v: &Validated, exec: Exec) -> Result<Outputs> {
    let study = inequality_study(&v.system, &cfg.params(v, exec))?;
    let grid = dyadic_grid(&v.system, v.cover_grid)?;
    let x0 = study.sources[0];
    let mode = if v.system.is_map() { HitMode::Dynamical } else { HitMode::Sequence };
    let it = orbit_stream(&v.system, &x0, 0)?;
    let profiles = batch_hitting_stream(it, cfg.n, &x0, &grid, &v.schedule, mode);
    let cover = cover_dimension_bound(
        &profiles,
        cfg.cover_h,
        cfg.cover_epsilon,
        cfg.cover_d,
        cfg.cover_k0.unwrap_or(cfg.k_min),
        cfg.tail_fraction,
    )?;
    let files = vec![
        ("hitting.csv", hitting_csv(&v.system, &study)),
        ("slopes.csv", slopes_csv(&study)),
        ("inequality.json", study.report.to_json()),
        ("inequality.txt", study.report.to_text()),
        ("cover.json", cover.to_json()),
    ];
    Ok(Outputs { files, study })
}

/// Validates `cfg`, runs it and writes the outputs and `manifest.json` into
/// `cfg.output`. Errors name `cfg_path`.
pub fn run_experiment(cfg: &ExperimentConfig, cfg_path: &str, exec: Exec) -> Result<RunManifest> {
    let wrap = |e: Error| Error::Config {
        path: cfg_path.into(),
        message: e.to_string(),
    };
    let v = cfg.validate().map_err(wrap)?;
    let started_unix = unix_now();
    let out = compute_outputs(cfg, &v, exec).map_err(wrap)?;
    fs::create_dir_all(&cfg.output).map_err(|e| wrap(e.into()))?;
    let mut files = BTreeMap::new();
    for (name, body) in &out.files {
        fs::write(cfg.output.join(name), body).map_err(|e| wrap(e.into()))?;
        files.insert(name.to_string(), hex::encode(Sha256::digest(body.as_bytes())));
    }
    let manifest = RunManifest {
        schema_version: SCHEMA_VERSION,
        config_hash: cfg.hash(),
        version: env!("CARGO_PKG_VERSION").into(),
        started_unix,
        finished_unix: unix_now(),
        files,
    };
    let body = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    fs::write(cfg.output.join("manifest.json"), body).map_err(|e| wrap(e.into()))?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn logistic_burn_in_default() {
        let base = "n = 10\nk_min = 1\nk_max = 4\nsources = 1\ntargets = 1\nseed = 0\ntolerance = 0.1\noutput = \"o\"\n";
        let cfg = ExperimentConfig::parse(&format!("system = \"logistic\"\n{base}"), "l.cfg").unwrap();
        assert_eq!(cfg.burn_in(), LOGISTIC_BURN_IN);
        let cfg = ExperimentConfig::parse(&format!("system = \"doubling\"\n{base}"), "d.cfg").unwrap();
        assert_eq!(cfg.burn_in(), 0);
        let cfg = ExperimentConfig::parse(&format!("system = \"logistic\"\nburn_in = 3\n{base}"), "l.cfg").unwrap();
        assert_eq!(cfg.burn_in(), 3);
    }

    #[test]
    fn bundled_configs_validate() {
        for (name, _) in BUNDLED {
            let cfg = ExperimentConfig::bundled(name).unwrap();
            cfg.validate().unwrap_or_else(|e| panic!("{name}: {e}"));
        }
    }

    #[test]
    fn unknown_keys_and_bad_values_fail() {
        let base = "system = \"doubling\"\nn = 1000\nk_min = 4\nk_max = 10\nsources = 1\ntargets = 2\nseed = 1\ntolerance = 0.1\noutput = \"x\"\n";
        assert!(ExperimentConfig::parse(base, "t").unwrap().validate().is_ok());
        assert!(matches!(
            ExperimentConfig::parse(&format!("{base}bogus = 1\n"), "t"),
            Err(Error::Config { .. })
        ));
        let bad = base.replace("k_max = 10", "k_max = 4");
        assert!(ExperimentConfig::parse(&bad, "t").unwrap().validate().is_err());
        let bad = base.replace("doubling", "rotation");
        assert!(ExperimentConfig::parse(&bad, "t").unwrap().validate().is_err());
    }

    #[test]
    fn angles() {
        assert_eq!(parse_angle("golden").unwrap(), ContinuedFraction::golden());
        assert_eq!(
            parse_angle("terms:3").unwrap(),
            ContinuedFraction::explicit(vec![3]).unwrap()
        );
        assert!(parse_angle("power:0.5").is_err());
        assert!(parse_angle("pi").is_err());
    }

    #[test]
    fn points() {
        let t = SystemSpec::cat_map();
        assert_eq!(parse_point(&t, "0.5;0.25").unwrap(), Point::torus(0.5, 0.25).unwrap());
        assert!(parse_point(&t, "0.5").is_err());
        assert!(parse_point(&SystemSpec::doubling(), "1.5").is_err());
    }
}
