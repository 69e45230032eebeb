//! JSON run configuration: a versioned schema shared by every subcommand,
//! plus construction of map systems from their declarative descriptions.
//!
//! Unknown fields are reported with their full path; `--strict` turns the
//! report into a validation failure.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use fracq::geom::BoxRegion;
use fracq::ifs::{builtins, ContractionMap, IFSystem, MapKind, Separation};

use crate::fail::{CliError, CliResult};

pub const SCHEMA_VERSION: u32 = 1;

/// One flat bag of parameters; each subcommand validates the subset it
/// needs and names the missing field in its error.
#[derive(Debug, Deserialize)]
pub struct RunConfig {
    pub schema_version: u32,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
    #[serde(default)]
    pub system: Option<SystemConfig>,
    #[serde(default)]
    pub second_system: Option<SystemConfig>,
    /// Contraction ratios for the Moran and exponent solvers.
    #[serde(default)]
    pub ratios: Option<Vec<f64>>,
    /// Probabilities for the exponent solver (systems carry their own).
    #[serde(default)]
    pub probs: Option<Vec<f64>>,
    /// Quantization order r.
    #[serde(default)]
    pub r: Option<f64>,
    /// Strictly increasing cluster counts for dimension sweeps.
    #[serde(default)]
    pub n_grid: Option<Vec<usize>>,
    /// Chaos-game sample count.
    #[serde(default)]
    pub samples: Option<usize>,
    #[serde(default)]
    pub burn_in: Option<usize>,
    /// Composition depth for attractor enumeration.
    #[serde(default)]
    pub depth: Option<usize>,
    /// Truncation depth for greedy address codes.
    #[serde(default)]
    pub tops_depth: Option<usize>,
    #[serde(default)]
    pub tops_tolerance: Option<f64>,
    /// Box side lengths for box-counting fits.
    #[serde(default)]
    pub scales: Option<Vec<f64>>,
    #[serde(default)]
    pub n_centers: Option<usize>,
    #[serde(default)]
    pub max_iters: Option<usize>,
    #[serde(default)]
    pub rel_tol: Option<f64>,
    /// Quantizer backend: "lloyd" (default) or "exact-1d".
    #[serde(default)]
    pub backend: Option<String>,
    /// Input points for address computations.
    #[serde(default)]
    pub points: Option<Vec<Vec<f64>>>,
    /// Atom count for the countable benchmark measure.
    #[serde(default)]
    pub atom_count: Option<usize>,
    /// Whether the dimension fit discards the smallest cluster count.
    #[serde(default)]
    pub drop_smallest: Option<bool>,
}

#[derive(Debug, Deserialize)]
pub struct SystemConfig {
    /// Named system: binary, cantor3, thirds, bilip, or overlapping3.
    /// The name countable-example selects the atomic benchmark measure in
    /// subcommands that consume a measure rather than a map system.
    #[serde(default)]
    pub builtin: Option<String>,
    #[serde(default)]
    pub maps: Option<Vec<MapConfig>>,
    #[serde(default)]
    pub probs: Option<Vec<f64>>,
    /// Asserted separation: none, osc, sosc, or ssc.
    #[serde(default)]
    pub separation: Option<String>,
    #[serde(default)]
    pub hull: Option<HullConfig>,
}

/// Affine map description. Either `scale` (1-D shorthand, a similarity)
/// or a row-major `matrix` with caller-certified Lipschitz constants.
#[derive(Debug, Deserialize)]
pub struct MapConfig {
    #[serde(default)]
    pub scale: Option<f64>,
    #[serde(default)]
    pub matrix: Option<Vec<f64>>,
    pub offset: Vec<f64>,
    #[serde(default)]
    pub lower_lip: Option<f64>,
    #[serde(default)]
    pub upper_lip: Option<f64>,
    /// "similarity" or "affine" (default).
    #[serde(default)]
    pub kind: Option<String>,
}

#[derive(Debug, Deserialize)]
pub struct HullConfig {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

pub fn load(path: &Path, strict: bool) -> CliResult<RunConfig> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Validation(format!("reading {}: {}", path.display(), e)))?;
    parse(&text, strict).map_err(|e| match e {
        CliError::Validation(msg) => CliError::Validation(format!("{}: {}", path.display(), msg)),
        other => other,
    })
}

pub fn parse(text: &str, strict: bool) -> CliResult<RunConfig> {
    let mut unknown: Vec<String> = Vec::new();
    let de = &mut serde_json::Deserializer::from_str(text);
    let cfg: RunConfig = serde_ignored::deserialize(de, |path| unknown.push(clean_path(&path)))
        .map_err(|e| CliError::Validation(e.to_string()))?;
    if !unknown.is_empty() {
        if strict {
            return Err(CliError::Validation(format!(
                "unknown field{}: {}",
                if unknown.len() > 1 { "s" } else { "" },
                unknown.join(", ")
            )));
        }
        eprintln!("warning: ignoring unknown field(s): {}", unknown.join(", "));
    }
    if cfg.schema_version != SCHEMA_VERSION {
        return Err(CliError::Validation(format!(
            "schema_version: expected {}, got {}",
            SCHEMA_VERSION, cfg.schema_version
        )));
    }
    Ok(cfg)
}

/// Field path of an ignored value. Optional nesting shows up as a bare
/// "?" segment, which means nothing to a configuration author; drop it.
fn clean_path(path: &serde_ignored::Path) -> String {
    path.to_string()
        .split('.')
        .filter(|seg| *seg != "?")
        .collect::<Vec<_>>()
        .join(".")
}

/// Builds the configured map system. `field` is the configuration path
/// used in error messages ("system" or "second_system").
pub fn build_system(sys: &SystemConfig, field: &str) -> CliResult<IFSystem> {
    let mut system = match (&sys.builtin, &sys.maps) {
        (Some(_), Some(_)) => {
            return Err(CliError::Validation(format!(
                "{}: builtin and maps are mutually exclusive",
                field
            )))
        }
        (None, None) => {
            return Err(CliError::Validation(format!(
                "{}: provide either builtin or maps",
                field
            )))
        }
        (Some(name), None) => builtin_system(name, field)?,
        (None, Some(maps)) => {
            let built = maps
                .iter()
                .enumerate()
                .map(|(i, m)| build_map(m, &format!("{}.maps[{}]", field, i)))
                .collect::<CliResult<Vec<_>>>()?;
            IFSystem::new(built).map_err(|e| CliError::Validation(format!("{}: {}", field, e)))?
        }
    };
    if let Some(h) = &sys.hull {
        let hull = BoxRegion::new(h.lower.clone(), h.upper.clone())
            .map_err(|e| CliError::Validation(format!("{}.hull: {}", field, e)))?;
        system = system
            .with_hull(hull)
            .map_err(|e| CliError::Validation(format!("{}.hull: {}", field, e)))?;
    }
    if let Some(p) = &sys.probs {
        system = system
            .with_probs(p.clone())
            .map_err(|e| CliError::Validation(format!("{}.probs: {}", field, e)))?;
    }
    if let Some(s) = &sys.separation {
        system = system.with_separation(parse_separation(s, field)?);
    }
    Ok(system)
}

fn builtin_system(name: &str, field: &str) -> CliResult<IFSystem> {
    match name {
        "binary" => Ok(builtins::binary()),
        "cantor3" => Ok(builtins::cantor3()),
        "thirds" => Ok(builtins::thirds()),
        "bilip" => Ok(builtins::bilip()),
        "overlapping3" => Ok(builtins::overlapping3()),
        "countable-example" => Err(CliError::Validation(format!(
            "{}.builtin: countable-example is a measure, not a map system; \
             it applies only to subcommands that quantize a measure",
            field
        ))),
        other => Err(CliError::Validation(format!(
            "{}.builtin: unknown name '{}' \
             (expected binary, cantor3, thirds, bilip, or overlapping3)",
            field, other
        ))),
    }
}

fn build_map(m: &MapConfig, field: &str) -> CliResult<ContractionMap> {
    match (&m.scale, &m.matrix) {
        (Some(_), Some(_)) => Err(CliError::Validation(format!(
            "{}: scale and matrix are mutually exclusive",
            field
        ))),
        (None, None) => Err(CliError::Validation(format!(
            "{}: provide scale (1-D) or matrix",
            field
        ))),
        (Some(s), None) => {
            if m.offset.len() != 1 {
                return Err(CliError::Validation(format!(
                    "{}.offset: a scale map is 1-D, expected 1 entry",
                    field
                )));
            }
            ContractionMap::affine_1d(*s, m.offset[0])
                .map_err(|e| CliError::Validation(format!("{}: {}", field, e)))
        }
        (None, Some(matrix)) => {
            let kind = match m.kind.as_deref() {
                None => MapKind::Affine,
                Some(k) => match k.to_ascii_lowercase().as_str() {
                    "similarity" => MapKind::Similarity,
                    "affine" => MapKind::Affine,
                    other => {
                        return Err(CliError::Validation(format!(
                            "{}.kind: unknown kind '{}' (expected similarity or affine)",
                            field, other
                        )))
                    }
                },
            };
            let (lo, hi) = match (m.lower_lip, m.upper_lip) {
                (Some(lo), Some(hi)) => (lo, hi),
                _ => {
                    return Err(CliError::Validation(format!(
                        "{}: matrix maps need lower_lip and upper_lip",
                        field
                    )))
                }
            };
            ContractionMap::affine(matrix.clone(), m.offset.clone(), lo, hi, kind)
                .map_err(|e| CliError::Validation(format!("{}: {}", field, e)))
        }
    }
}

fn parse_separation(text: &str, field: &str) -> CliResult<Separation> {
    match text.to_ascii_lowercase().as_str() {
        "none" => Ok(Separation::None),
        "osc" => Ok(Separation::Osc),
        "sosc" => Ok(Separation::Sosc),
        "ssc" => Ok(Separation::Ssc),
        other => Err(CliError::Validation(format!(
            "{}.separation: unknown condition '{}' (expected none, osc, sosc, or ssc)",
            field, other
        ))),
    }
}
