//! Plain `key = value` experiment files.
//!
//! One entry per line. Blank lines and lines starting with `#` are ignored.
//! Keys are case-sensitive. Every key may appear at most once.

use std::collections::HashMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use uzawa_core::driver::unit_domain;
use uzawa_core::{Activation, ExactSolution, GridField, NetworkSpec, ProblemSpec, TargetSpec, UzawaConfig, Variant};

use crate::error::{CliError, Result};
use crate::pgm::load_pgm_target;

/// Experiment families selectable with the `tag` key.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentTag {
    Sine1D,
    BoundaryLayer,
    Sine2D,
    AcSine,
    AcStep,
    AcImage,
    FdOracle,
    GradCheck,
}

impl ExperimentTag {
    pub const ALL: [ExperimentTag; 8] = [
        ExperimentTag::Sine1D,
        ExperimentTag::BoundaryLayer,
        ExperimentTag::Sine2D,
        ExperimentTag::AcSine,
        ExperimentTag::AcStep,
        ExperimentTag::AcImage,
        ExperimentTag::FdOracle,
        ExperimentTag::GradCheck,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentTag::Sine1D => "sine1d",
            ExperimentTag::BoundaryLayer => "boundary_layer",
            ExperimentTag::Sine2D => "sine2d",
            ExperimentTag::AcSine => "ac_sine",
            ExperimentTag::AcStep => "ac_step",
            ExperimentTag::AcImage => "ac_image",
            ExperimentTag::FdOracle => "fd_oracle",
            ExperimentTag::GradCheck => "grad_check",
        }
    }

    pub fn dim(self) -> usize {
        match self {
            ExperimentTag::Sine2D | ExperimentTag::AcImage => 2,
            _ => 1,
        }
    }

    pub fn is_allen_cahn(self) -> bool {
        matches!(self, ExperimentTag::AcSine | ExperimentTag::AcStep | ExperimentTag::AcImage)
    }
}

impl fmt::Display for ExperimentTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ExperimentTag {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|t| t.name() == s)
            .ok_or_else(|| {
                let names: Vec<_> = Self::ALL.iter().map(|t| t.name()).collect();
                format!("unknown tag `{s}`, expected one of {}", names.join(", "))
            })
    }
}

/// Which finite-difference iterations the `oracle` command runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OracleScheme {
    All,
    Uzawa,
    Projected,
    GaussSeidel,
    Direct,
}

impl FromStr for OracleScheme {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "all" => Ok(OracleScheme::All),
            "uzawa" => Ok(OracleScheme::Uzawa),
            "projected" => Ok(OracleScheme::Projected),
            "gauss_seidel" => Ok(OracleScheme::GaussSeidel),
            "direct" => Ok(OracleScheme::Direct),
            _ => Err(format!(
                "unknown scheme `{s}`, expected all, uzawa, projected, gauss_seidel or direct"
            )),
        }
    }
}

/// A validated experiment: the solver configuration plus I/O settings.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub tag: ExperimentTag,
    pub uzawa: UzawaConfig,
    pub output: PathBuf,
    pub image: Option<PathBuf>,
    pub oracle_iters: usize,
    pub oracle_scheme: OracleScheme,
    /// The file contents the config was parsed from, in canonical form.
    pub entries: Vec<(String, String)>,
}

const KEYS: [&str; 20] = [
    "tag",
    "alpha",
    "epsilon",
    "n_uz",
    "n_sgd",
    "lr",
    "rho",
    "variant",
    "beta",
    "seed",
    "grid_n",
    "hidden",
    "activation",
    "batch_size",
    "refined_eval",
    "output",
    "image",
    "oracle_iters",
    "oracle_scheme",
    "target_value",
];

struct Entry {
    value: String,
    line: usize,
}

struct Entries {
    map: HashMap<String, Entry>,
}

impl Entries {
    fn parse<T: FromStr>(&self, key: &'static str) -> Result<Option<T>>
    where
        T::Err: fmt::Display,
    {
        match self.map.get(key) {
            None => Ok(None),
            Some(entry) => entry.value.parse().map(Some).map_err(|e: T::Err| CliError::Config {
                key: key.into(),
                line: Some(entry.line),
                reason: e.to_string(),
            }),
        }
    }

    fn get<T: FromStr>(&self, key: &'static str, default: T) -> Result<T>
    where
        T::Err: fmt::Display,
    {
        Ok(self.parse(key)?.unwrap_or(default))
    }

    fn line(&self, key: &str) -> Option<usize> {
        self.map.get(key).map(|e| e.line)
    }

    fn fail<T>(&self, key: &str, reason: impl Into<String>) -> Result<T> {
        Err(CliError::Config {
            key: key.into(),
            line: self.line(key),
            reason: reason.into(),
        })
    }

    fn positive(&self, key: &'static str, value: f64) -> Result<f64> {
        if value > 0.0 && value.is_finite() {
            Ok(value)
        } else {
            self.fail(key, format!("must be positive and finite, got {value}"))
        }
    }
}

struct Hidden(Vec<usize>);

impl FromStr for Hidden {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        let widths = s
            .split(',')
            .map(|w| w.trim().parse::<usize>().map_err(|e| format!("bad width `{}`: {e}", w.trim())))
            .collect::<std::result::Result<Vec<_>, _>>()?;
        if widths.contains(&0) {
            return Err("layer widths must be positive".into());
        }
        Ok(Hidden(widths))
    }
}

struct ActivationName(Activation);

impl FromStr for ActivationName {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Activation::from_name(s)
            .map(ActivationName)
            .ok_or_else(|| format!("unknown activation `{s}`, expected tanh, sin or identity"))
    }
}

fn split_lines(text: &str) -> Result<(Entries, Vec<(String, String)>)> {
    let mut map = HashMap::new();
    let mut ordered = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.trim();
        if content.is_empty() || content.starts_with('#') {
            continue;
        }
        let Some((key, value)) = content.split_once('=') else {
            return Err(CliError::Config {
                key: content.into(),
                line: Some(line),
                reason: "expected `key = value`".into(),
            });
        };
        let (key, value) = (key.trim(), value.trim());
        if key.is_empty() {
            return Err(CliError::Config {
                key: content.into(),
                line: Some(line),
                reason: "missing key".into(),
            });
        }
        if !KEYS.contains(&key) {
            return Err(CliError::Config {
                key: key.into(),
                line: Some(line),
                reason: "unknown key".into(),
            });
        }
        if value.is_empty() {
            return Err(CliError::Config {
                key: key.into(),
                line: Some(line),
                reason: "missing value".into(),
            });
        }
        if let Some(first) = map.get(key).map(|e: &Entry| e.line) {
            return Err(CliError::Config {
                key: key.into(),
                line: Some(line),
                reason: format!("duplicate key, first set on line {first}"),
            });
        }
        map.insert(
            key.to_string(),
            Entry {
                value: value.to_string(),
                line,
            },
        );
        ordered.push((key.to_string(), value.to_string()));
    }
    Ok((Entries { map }, ordered))
}

/// Parses and validates the text of a config file. Relative image paths are
/// resolved against `base_dir`.
pub fn parse_config_str(text: &str, base_dir: &Path) -> Result<ExperimentConfig> {
    let (entries, ordered) = split_lines(text)?;
    let tag: ExperimentTag = match entries.parse("tag")? {
        Some(tag) => tag,
        None => return entries.fail("tag", "required key is missing"),
    };
    let alpha = match entries.parse::<f64>("alpha")? {
        Some(a) => entries.positive("alpha", a)?,
        None if tag == ExperimentTag::GradCheck => 1e-2,
        None => return entries.fail("alpha", "required key is missing"),
    };
    let epsilon = match entries.parse::<f64>("epsilon")? {
        Some(e) => Some(entries.positive("epsilon", e)?),
        None => None,
    };
    if tag.is_allen_cahn() && epsilon.is_none() {
        return entries.fail("epsilon", format!("required for tag {tag}"));
    }
    if !tag.is_allen_cahn() && epsilon.is_some() {
        return entries.fail("epsilon", format!("only valid for Allen-Cahn tags, not {tag}"));
    }
    let image = entries.parse::<PathBuf>("image")?.map(|p| base_dir.join(p));
    if tag == ExperimentTag::AcImage && image.is_none() {
        return entries.fail("image", "required for tag ac_image");
    }
    if tag != ExperimentTag::AcImage && image.is_some() {
        return entries.fail("image", format!("only valid for tag ac_image, not {tag}"));
    }
    let target_value = entries.parse::<f64>("target_value")?;
    if target_value.is_some() && tag != ExperimentTag::BoundaryLayer {
        return entries.fail("target_value", "only valid for tag boundary_layer");
    }

    let domain = unit_domain(tag.dim());
    let grid_n: usize = entries.get("grid_n", 201)?;
    if grid_n < 3 {
        return entries.fail("grid_n", "need at least 3 nodes per axis");
    }
    let (target, exact) = match tag {
        ExperimentTag::Sine1D | ExperimentTag::FdOracle | ExperimentTag::GradCheck => {
            (TargetSpec::Sine1D, Some(ExactSolution::Sine1D))
        }
        ExperimentTag::BoundaryLayer => match target_value {
            Some(v) if v != 1.0 => (TargetSpec::Constant(v), None),
            _ => (TargetSpec::Constant(1.0), Some(ExactSolution::BoundaryLayer { alpha })),
        },
        ExperimentTag::Sine2D => (TargetSpec::Sine2D, Some(ExactSolution::Sine2D)),
        ExperimentTag::AcSine => (TargetSpec::AcSine, epsilon.map(|epsilon| ExactSolution::AcSine { epsilon })),
        ExperimentTag::AcStep => (TargetSpec::Step, None),
        ExperimentTag::AcImage => {
            let path = image.as_deref().expect("checked above");
            let picture = load_pgm_target(path)?;
            let set = uzawa_core::build_grid(&domain, grid_n)?;
            let field: GridField = set.sample(|p| picture.sample(p[0], p[1]));
            (TargetSpec::SampledGrid(field), None)
        }
    };
    let problem = match epsilon {
        Some(eps) => ProblemSpec::allen_cahn(alpha, eps, target),
        None => ProblemSpec::poisson(alpha, target),
    };

    let mut uzawa = UzawaConfig::new(domain, problem, exact);
    uzawa.grid_n = grid_n;
    uzawa.n_uz = entries.get("n_uz", uzawa.n_uz)?;
    uzawa.n_sgd = entries.get("n_sgd", uzawa.n_sgd)?;
    uzawa.lr = entries.get("lr", uzawa.lr)?;
    uzawa.seed = entries.get("seed", uzawa.seed)?;
    uzawa.refined_eval = entries.get("refined_eval", false)?;
    uzawa.batch_size = entries.parse("batch_size")?;
    if let Some(rho) = entries.parse::<f64>("rho")? {
        uzawa.rho = entries.positive("rho", rho)?;
    }
    let beta = entries.parse::<f64>("beta")?;
    let variant: String = entries.get("variant", if beta.is_some() { "augmented" } else { "plain" }.to_string())?;
    uzawa.variant = match variant.as_str() {
        "plain" if beta.is_some() => return entries.fail("beta", "only valid with variant = augmented"),
        "plain" => Variant::Plain,
        "augmented" => Variant::Augmented {
            beta: entries.positive("beta", beta.unwrap_or(alpha))?,
        },
        other => return entries.fail("variant", format!("unknown variant `{other}`, expected plain or augmented")),
    };
    let defaults = NetworkSpec::default_for(tag.dim());
    uzawa.network = NetworkSpec {
        hidden: entries.parse::<Hidden>("hidden")?.map_or(defaults.hidden.clone(), |h| h.0),
        activation: entries.parse::<ActivationName>("activation")?.map_or(defaults.activation, |a| a.0),
        ..defaults
    };

    let oracle_iters = entries.get("oracle_iters", 200)?;
    let oracle_scheme = entries.get("oracle_scheme", OracleScheme::All)?;
    if tag == ExperimentTag::FdOracle && grid_n < 5 {
        return entries.fail("grid_n", "the finite-difference oracle needs at least 5 nodes");
    }
    let output = entries.get("output", PathBuf::from("out").join(tag.name()))?;

    uzawa.validate().map_err(|e| {
        let key = match &e {
            uzawa_core::Error::InvalidParameter { name, .. } => name.to_string(),
            _ => "config".to_string(),
        };
        CliError::Config {
            line: entries.line(&key),
            key,
            reason: e.to_string(),
        }
    })?;

    Ok(ExperimentConfig {
        tag,
        uzawa,
        output,
        image,
        oracle_iters,
        oracle_scheme,
        entries: ordered,
    })
}

/// Reads and validates a config file.
pub fn parse_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_config_str(&text, path.parent().unwrap_or(Path::new(".")))
}
