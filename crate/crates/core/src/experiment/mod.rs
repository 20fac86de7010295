//! Experiment configuration, builtin scene presets, and the suite runner
//! that writes `report.csv`, `summary.txt` and per-suite data files.

mod suites;

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::foliation::FoliationModel;
use crate::manifold::{Scene, SceneSpec, Template, WindSpec};
use crate::numkit::Tolerances;
use crate::report::{num, Table};

/// The fixed list of suites.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    NormAudit,
    Convert,
    GeodesicCompare,
    FoliationCheck,
    Equifocal,
    SubmersionCheck,
    Blowup,
}

pub const SUITES: [&str; 7] = [
    "norm-audit",
    "convert",
    "geodesic-compare",
    "foliation-check",
    "equifocal",
    "submersion-check",
    "blowup",
];

impl FromStr for Suite {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "norm-audit" => Suite::NormAudit,
            "convert" => Suite::Convert,
            "geodesic-compare" => Suite::GeodesicCompare,
            "foliation-check" => Suite::FoliationCheck,
            "equifocal" => Suite::Equifocal,
            "submersion-check" => Suite::SubmersionCheck,
            "blowup" => Suite::Blowup,
            other => return Err(Error::UnknownSuite(other.to_string())),
        })
    }
}

impl Suite {
    pub fn name(self) -> &'static str {
        SUITES[self as usize]
    }
}

/// A scene file: a builtin template, its wind and an optional foliation.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneFile {
    pub name: String,
    #[serde(default)]
    pub foliation: Option<String>,
    pub template: Template,
    #[serde(default = "zero_wind")]
    pub wind: WindSpec,
}

fn zero_wind() -> WindSpec {
    WindSpec::Zero
}

impl SceneFile {
    pub fn parse(text: &str, origin: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(format!("{origin}: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn build(&self) -> Result<(Scene, Option<FoliationModel>)> {
        let mut scene = SceneSpec::new(self.template, self.wind.clone()).build()?;
        scene.name = self.name.clone();
        let fol = self
            .foliation
            .as_deref()
            .map(|f| FoliationModel::builtin(f, &self.template))
            .transpose()?;
        Ok((scene, fol))
    }
}

/// Builtin presets with a one-line description each.
pub fn presets() -> Vec<(SceneFile, &'static str)> {
    let plane = Template::EuclideanBall { dim: 2, radius: 4.0 };
    let entry = |name: &str, fol: Option<&str>, template, wind, doc| {
        (
            SceneFile {
                name: name.into(),
                foliation: fol.map(str::to_string),
                template,
                wind,
            },
            doc,
        )
    };
    vec![
        entry(
            "plane-constwind",
            None,
            plane,
            WindSpec::Constant { w: vec![0.5, 0.0] },
            "R^2 ball (radius 4), Euclidean h, constant wind W=(1/2,0): the Randers-Minkowski plane",
        ),
        entry(
            "plane-circles-rotwind",
            Some("circles"),
            plane,
            WindSpec::Rotational { epsilon: 0.5 },
            "R^2 ball, concentric circles, rotational wind eps*(-y,x)/(1+r^2) with eps=0.5 (tangent to leaves)",
        ),
        entry(
            "plane-circles-constwind",
            Some("circles"),
            plane,
            WindSpec::Constant { w: vec![0.5, 0.0] },
            "R^2 ball, concentric circles, constant wind (1/2,0): not a Finsler foliation (negative control)",
        ),
        entry(
            "plane-lines-constwind",
            Some("lines"),
            plane,
            WindSpec::Constant { w: vec![0.5, 0.0] },
            "R^2 ball, horizontal lines y=c, constant wind (1/2,0)",
        ),
        entry(
            "euclid-ball-radialwind",
            Some("circles"),
            plane,
            WindSpec::Radial { c: 0.2 },
            "R^2 ball, concentric circles, radial wind W=c*x with c=0.2 (homothety, sigma=-2c)",
        ),
        entry(
            "sphere2-latitudes",
            Some("latitudes"),
            Template::Sphere2 { radius: 1.0 },
            WindSpec::Killing { epsilon: 0.2 },
            "unit S^2, latitude circles, Killing wind eps*(-y,x,0) with eps=0.2 (poles are point leaves)",
        ),
        entry(
            "sphere3-hopf",
            Some("hopf"),
            Template::Sphere3Hopf { radius: 1.0 },
            WindSpec::HopfBasic { epsilon: 0.3 },
            "unit S^3, Hopf fibers, basic Killing wind eps*(i z1, 0) with eps=0.3; base S^2(1/2)",
        ),
        entry(
            "cylinder-r3",
            Some("cylinder"),
            Template::CylinderR3 { radius: 2.0 },
            WindSpec::Constant { w: vec![0.0, 0.0, 0.4] },
            "R^3 ball, circles about the z-axis (circles x line), constant axial wind (0,0,0.4)",
        ),
    ]
}

pub fn preset(name: &str) -> Result<SceneFile> {
    presets()
        .into_iter()
        .find(|(s, _)| s.name == name)
        .map(|(s, _)| s)
        .ok_or_else(|| Error::Config(format!("unknown scene preset `{name}`")))
}

/// The catalog printed by `list-scenes`.
pub fn list_scenes() -> String {
    let mut out = String::new();
    out.push_str("Presets:\n");
    for (s, doc) in presets() {
        let _ = writeln!(out, "  {:<26} {doc}", s.name);
    }
    out.push_str(
        "\nTemplates ([template] kind = ...):\n\
         \x20 euclidean-ball   dim, radius    ball in R^dim, identity chart\n\
         \x20 sphere2          radius         S^2, two stereographic charts\n\
         \x20 sphere3-hopf     radius         S^3, two stereographic charts\n\
         \x20 cylinder-r3      radius         ball in R^3\n\
         \nWinds ([wind] type = ...):\n\
         \x20 zero\n\
         \x20 constant         w = [..]       flat templates\n\
         \x20 rotational       epsilon        eps*(-x2,x1,0..)/(1+x1^2+x2^2), flat\n\
         \x20 radial           c              c*x, flat (homothety, sigma = -2c)\n\
         \x20 killing          epsilon        eps*(-x2,x1,0..)\n\
         \x20 shear            epsilon        eps*(x2,0,..), flat\n\
         \x20 hopf-vertical    epsilon        eps*i*z, sphere3-hopf\n\
         \x20 hopf-basic       epsilon        eps*(i*z1,0), sphere3-hopf\n\
         \x20 hopf-horizontal  epsilon        horizontal part of hopf-basic\n\
         \nFoliations (foliation = ...):\n\
         \x20 circles (euclidean-ball dim 2), lines (euclidean-ball dim 2), latitudes (sphere2),\n\
         \x20 cylinder (cylinder-r3), hopf (sphere3-hopf)\n",
    );
    out
}

/// Optional per-suite parameters. Unused keys for a suite are ignored;
/// unknown keys are errors.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SuiteParams {
    pub samples: Option<usize>,
    pub trials: Option<usize>,
    pub t_end: Option<f64>,
    pub path_samples: Option<usize>,
    pub sample_fraction: Option<f64>,
    pub min_generator: Option<f64>,
    pub leaves: Option<usize>,
    pub source: Option<Vec<f64>>,
    pub source_half_width: Option<f64>,
    pub target: Option<Vec<f64>>,
    pub target_half_width: Option<f64>,
    pub targets: Option<usize>,
    pub leaf: Option<Vec<f64>>,
    pub leaf_half_width: Option<f64>,
    pub regular_t: Option<Vec<f64>>,
    pub focal_t: Option<Vec<f64>>,
    pub focal_margin: Option<f64>,
    pub rank_cutoff: Option<f64>,
    pub normal_sign: Option<f64>,
    pub lambdas: Option<Vec<f64>>,
    pub probe_radius: Option<f64>,
    pub q: Option<Vec<f64>>,
    pub directions: Option<usize>,
    pub threshold: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub suite: String,
    #[serde(default)]
    pub seed: u64,
    /// Scene file, relative to the config file.
    #[serde(default)]
    pub scene: Option<PathBuf>,
    #[serde(default)]
    pub preset: Option<String>,
    #[serde(default)]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub tolerances: BTreeMap<String, f64>,
    #[serde(default)]
    pub params: SuiteParams,
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl ExperimentConfig {
    pub fn parse(text: &str, origin: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(format!("{origin}: {e}")))?;
        if cfg.scene.is_some() == cfg.preset.is_some() {
            return Err(Error::Config(format!(
                "{origin}: set exactly one of `scene` and `preset`"
            )));
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::parse(&text, &path.display().to_string())?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(cfg)
    }

    pub fn suite(&self) -> Result<Suite> {
        self.suite.parse()
    }

    pub fn tolerances(&self) -> Result<Tolerances> {
        let mut tol = Tolerances::default();
        for (k, v) in &self.tolerances {
            tol.set(k, *v)?;
        }
        tol.validate()?;
        Ok(tol)
    }

    pub fn scene_file(&self) -> Result<SceneFile> {
        match (&self.preset, &self.scene) {
            (Some(p), _) => preset(p),
            (None, Some(path)) => SceneFile::load(&self.base_dir.join(path)),
            (None, None) => Err(Error::Config("no scene given".into())),
        }
    }
}

/// One line of `report.csv`.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckRow {
    pub check: String,
    pub item: String,
    pub value: f64,
    pub threshold: f64,
    pub status: Status,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Pass,
    Fail,
    /// Not applicable (e.g. a gated check whose precondition failed).
    Skip,
}

impl Status {
    pub fn from_pass(pass: bool) -> Self {
        if pass {
            Status::Pass
        } else {
            Status::Fail
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Status::Pass => "PASS",
            Status::Fail => "FAIL",
            Status::Skip => "SKIP",
        }
    }
}

impl CheckRow {
    /// A row passing iff `value ≤ threshold`.
    pub fn at_most(check: &str, item: impl Into<String>, value: f64, threshold: f64) -> Self {
        Self {
            check: check.into(),
            item: item.into(),
            value,
            threshold,
            status: Status::from_pass(value <= threshold),
        }
    }

    pub fn with_status(check: &str, item: impl Into<String>, value: f64, threshold: f64, status: Status) -> Self {
        Self {
            check: check.into(),
            item: item.into(),
            value,
            threshold,
            status,
        }
    }
}

/// Everything a suite produced.
#[derive(Debug, Clone, PartialEq)]
pub struct SuiteOutcome {
    pub suite: Suite,
    pub scene: String,
    pub seed: u64,
    pub checks: Vec<CheckRow>,
    pub notes: Vec<String>,
    pub files: Vec<(String, Table)>,
}

impl SuiteOutcome {
    pub fn passed(&self) -> bool {
        !self.checks.is_empty() && self.checks.iter().all(|c| c.status != Status::Fail)
    }

    pub fn failures(&self) -> impl Iterator<Item = &CheckRow> {
        self.checks.iter().filter(|c| c.status == Status::Fail)
    }

    pub fn report(&self) -> Table {
        let mut t = Table::new(&["check", "item", "value", "threshold", "status"]);
        for c in &self.checks {
            t.push(vec![
                c.check.clone(),
                c.item.clone(),
                num(c.value),
                num(c.threshold),
                c.status.label().into(),
            ]);
        }
        t
    }

    pub fn summary(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "suite: {}", self.suite.name());
        let _ = writeln!(s, "scene: {}", self.scene);
        let _ = writeln!(s, "seed: {}", self.seed);
        let mut groups: Vec<(&str, usize, usize, usize, f64, f64)> = Vec::new();
        for c in &self.checks {
            let g = match groups.iter_mut().find(|g| g.0 == c.check) {
                Some(g) => g,
                None => {
                    groups.push((&c.check, 0, 0, 0, f64::NEG_INFINITY, c.threshold));
                    groups.last_mut().expect("just pushed")
                }
            };
            match c.status {
                Status::Pass => g.1 += 1,
                Status::Fail => g.2 += 1,
                Status::Skip => g.3 += 1,
            }
            if c.value.is_finite() {
                g.4 = g.4.max(c.value);
            }
        }
        s.push_str("checks:\n");
        for (name, pass, fail, skip, max, thr) in &groups {
            let _ = writeln!(
                s,
                "  {name:<28} pass {pass:>3}  fail {fail:>3}  skip {skip:>3}  max {}  threshold {}",
                if max.is_finite() { num(*max) } else { "-".into() },
                num(*thr)
            );
        }
        for n in &self.notes {
            let _ = writeln!(s, "{n}");
        }
        let fails: Vec<_> = self.failures().collect();
        if !fails.is_empty() {
            s.push_str("failing:\n");
            for c in fails {
                let _ = writeln!(s, "  {} [{}]: {} > {}", c.check, c.item, num(c.value), num(c.threshold));
            }
        }
        let _ = writeln!(s, "result: {}", if self.passed() { "PASS" } else { "FAIL" });
        s
    }

    /// Writes `report.csv`, `summary.txt` and the data files into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::Io(format!("{}: {e}", dir.display())))?;
        let open = |name: &str| {
            let p = dir.join(name);
            fs::File::create(&p).map_err(|e| Error::Io(format!("{}: {e}", p.display())))
        };
        self.report().write_csv(open("report.csv")?)?;
        fs::write(dir.join("summary.txt"), self.summary())?;
        for (name, table) in &self.files {
            table.write_csv(open(name)?)?;
        }
        Ok(())
    }
}

/// Runs the configured suite.
pub fn run(cfg: &ExperimentConfig) -> Result<SuiteOutcome> {
    let suite = cfg.suite()?;
    let tol = cfg.tolerances()?;
    let file = cfg.scene_file()?;
    let (scene, fol) = file.build()?;
    let ctx = suites::Context {
        file: &file,
        scene: &scene,
        foliation: fol.as_ref(),
        params: &cfg.params,
        seed: cfg.seed,
        tol: &tol,
    };
    let mut out = SuiteOutcome {
        suite,
        scene: file.name.clone(),
        seed: cfg.seed,
        checks: Vec::new(),
        notes: Vec::new(),
        files: Vec::new(),
    };
    match suite {
        Suite::NormAudit => suites::norm_audit(&ctx, &mut out)?,
        Suite::Convert => suites::convert(&ctx, &mut out)?,
        Suite::GeodesicCompare => suites::geodesic_compare(&ctx, &mut out)?,
        Suite::FoliationCheck => suites::foliation_check(&ctx, &mut out)?,
        Suite::Equifocal => suites::equifocal(&ctx, &mut out)?,
        Suite::SubmersionCheck => suites::submersion_check(&ctx, &mut out)?,
        Suite::Blowup => suites::blowup(&ctx, &mut out)?,
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_parsing() {
        let cfg = ExperimentConfig::parse(
            "suite = \"convert\"\nseed = 3\npreset = \"plane-constwind\"\n[tolerances]\nfd_step = 1e-6\n[params]\nsamples = 5\n",
            "cfg",
        )
        .unwrap();
        assert_eq!(cfg.suite().unwrap(), Suite::Convert);
        assert_eq!(cfg.tolerances().unwrap().fd_step, 1e-6);
        assert_eq!(cfg.params.samples, Some(5));
        let err = ExperimentConfig::parse("suite = \"convert\"\npreset = \"x\"\nbogus = 1\n", "cfg").unwrap_err();
        assert!(err.to_string().contains("line 3"), "{err}");
        let bad = ExperimentConfig::parse("suite = \"nope\"\npreset = \"plane-constwind\"\n", "cfg").unwrap();
        assert!(matches!(bad.suite(), Err(Error::UnknownSuite(_))));
        assert!(ExperimentConfig::parse("suite = \"convert\"\n", "cfg").is_err());
    }

    #[test]
    fn scene_file_parsing() {
        let text = "name = \"demo\"\nfoliation = \"circles\"\n[template]\nkind = \"euclidean-ball\"\ndim = 2\nradius = 3.0\n[wind]\ntype = \"rotational\"\nepsilon = 0.4\n";
        let f = SceneFile::parse(text, "demo.toml").unwrap();
        let (scene, fol) = f.build().unwrap();
        assert_eq!(scene.name, "demo");
        assert_eq!(fol.unwrap().name, "circles");
        assert!(SceneFile::parse("name = \"x\"\n[template]\nkind = \"torus\"\n", "t").is_err());
    }

    #[test]
    fn catalog_lists_presets() {
        let c = list_scenes();
        for name in ["sphere2-latitudes", "cylinder-r3", "euclid-ball-radialwind"] {
            assert!(c.contains(name));
        }
        assert_eq!(c, list_scenes());
        for (p, _) in presets() {
            p.build().unwrap();
        }
    }
}
