//! Run configuration: TOML files, named presets, `key=value` overrides and
//! a single optional sweep axis.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use toml::{Table, Value};

use darklattice::analytics::Scheme;
use darklattice::geometry::LatticeSpec;

use crate::error::CliError;

pub const PRESETS: &[(&str, &str)] = &[
    ("fig1d", include_str!("../../../presets/fig1d.toml")),
    ("fig2a", include_str!("../../../presets/fig2a.toml")),
    ("fig2c", include_str!("../../../presets/fig2c.toml")),
    ("fig3b", include_str!("../../../presets/fig3b.toml")),
    ("fig3c", include_str!("../../../presets/fig3c.toml")),
    ("fig4b", include_str!("../../../presets/fig4b.toml")),
    ("defects", include_str!("../../../presets/defects.toml")),
    ("nonmarkov", include_str!("../../../presets/nonmarkov.toml")),
    ("field", include_str!("../../../presets/field.toml")),
    ("analytic", include_str!("../../../presets/analytic.toml")),
];

pub fn preset(name: &str) -> Result<&'static str, CliError> {
    PRESETS.iter().find(|(n, _)| *n == name).map(|(_, s)| *s).ok_or_else(|| {
        let known: Vec<&str> = PRESETS.iter().map(|(n, _)| *n).collect();
        CliError::Config(format!("unknown preset '{name}' (known: {})", known.join(", ")))
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Subcommand a preset was written for.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub command: Option<String>,
    #[serde(default)]
    pub seed: u64,
    /// Worker threads; 0 picks the number of cores.
    #[serde(default)]
    pub jobs: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<Sweep>,
    #[serde(default)]
    pub lattice: LatticeConfig,
    #[serde(default)]
    pub spectrum: SpectrumConfig,
    #[serde(default)]
    pub transfer: TransferConfig,
    #[serde(default)]
    pub probe: ProbeSection,
    #[serde(default)]
    pub analytic: AnalyticConfig,
    #[serde(default)]
    pub field: FieldConfig,
    #[serde(default)]
    pub defects: DefectsConfig,
    #[serde(default)]
    pub nonmarkov: NonmarkovConfig,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sweep {
    /// Dotted parameter path, e.g. `lattice.n_perp`.
    pub key: String,
    pub values: Vec<Value>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CurvatureChoice {
    Flat,
    Fixed,
    Optimize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LatticeConfig {
    pub n_perp: usize,
    pub spacing: f64,
    pub separation: f64,
    pub curvature: CurvatureChoice,
    /// Used when `curvature = "fixed"`.
    pub waist: f64,
    /// Search interval for `curvature = "optimize"`; empty means the default.
    pub waist_bounds: Vec<f64>,
}

impl Default for LatticeConfig {
    fn default() -> Self {
        Self {
            n_perp: 8,
            spacing: 0.5,
            separation: 2.0,
            curvature: CurvatureChoice::Optimize,
            waist: 1.0,
            waist_bounds: Vec::new(),
        }
    }
}

impl LatticeConfig {
    /// Lattice with a placeholder waist when the curvature is optimized.
    pub fn template(&self) -> LatticeSpec {
        match self.curvature {
            CurvatureChoice::Flat => LatticeSpec::flat(self.n_perp, self.spacing, self.separation),
            _ => LatticeSpec::curved(self.n_perp, self.spacing, self.separation, self.waist),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DipoleModel {
    Scalar,
    Vector,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SpectrumConfig {
    pub model: DipoleModel,
    /// Also write every eigenmode (single-point runs only).
    pub modes: bool,
    pub two_excitation: bool,
}

impl Default for SpectrumConfig {
    fn default() -> Self {
        Self { model: DipoleModel::Scalar, modes: true, two_excitation: false }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransferModel {
    Full,
    FourMode,
    Release,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OmegaChoice {
    Optimal,
    Fixed,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TransferConfig {
    pub model: TransferModel,
    pub omega_mode: OmegaChoice,
    pub omega: f64,
    /// Four-mode rates; the full model extracts them from the spectrum.
    pub gamma_d: f64,
    pub gamma_b: f64,
    /// Run length in units of π/Ω (or 1/γ̃ for release).
    pub duration: f64,
    pub samples: usize,
    /// Extra separation for the release run, in λ₀; 0.25 gives cos k₀L = 0.
    pub release_offset: f64,
    /// Release drive in units of Γ.
    pub release_omega: f64,
}

impl Default for TransferConfig {
    fn default() -> Self {
        Self {
            model: TransferModel::FourMode,
            omega_mode: OmegaChoice::Optimal,
            omega: 0.0,
            gamma_d: 1e-3,
            gamma_b: 1.0,
            duration: 1.6,
            samples: 801,
            release_offset: 0.25,
            release_omega: 0.01,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchemeChoice {
    Symmetric,
    Opposite,
    Both,
}

impl SchemeChoice {
    pub fn schemes(self) -> Vec<Scheme> {
        match self {
            SchemeChoice::Symmetric => vec![Scheme::Symmetric],
            SchemeChoice::Opposite => vec![Scheme::Opposite],
            SchemeChoice::Both => vec![Scheme::Symmetric, Scheme::Opposite],
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProbeSection {
    pub scheme: SchemeChoice,
    pub points: usize,
    /// Half-range of the detuning grid in analytic half widths.
    pub span: f64,
}

impl Default for ProbeSection {
    fn default() -> Self {
        Self { scheme: SchemeChoice::Both, points: 201, span: 4.0 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnalyticKind {
    /// Infinite-array symmetric/antisymmetric rates against k₀L.
    Infinite,
    /// Optimal transfer fidelity against γ_d/γ_b.
    Fidelity,
    /// Memory release rate and photon fluxes against k₀L.
    Release,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnalyticConfig {
    pub kind: AnalyticKind,
    /// Grid start, end and number of points; separations in λ₀ or rate ratios.
    pub from: f64,
    pub to: f64,
    pub points: usize,
    pub log: bool,
    /// Release drive in units of Γ and dark rate in units of Γ.
    pub omega: f64,
    pub gamma_d: f64,
}

impl Default for AnalyticConfig {
    fn default() -> Self {
        Self {
            kind: AnalyticKind::Infinite,
            from: 1.0,
            to: 3.0,
            points: 201,
            log: false,
            omega: 0.01,
            gamma_d: 0.0,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FieldConfig {
    /// Transverse half-extent of the x–z grid, in λ₀.
    pub x_extent: f64,
    /// Axial half-extent; 0 means 0.6 L.
    pub z_extent: f64,
    pub nx: usize,
    pub nz: usize,
    pub y: f64,
}

impl Default for FieldConfig {
    fn default() -> Self {
        Self { x_extent: 8.0, z_extent: 0.0, nx: 81, nz: 121, y: 0.0 }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DefectsConfig {
    pub probability: f64,
    pub realizations: usize,
}

impl Default for DefectsConfig {
    fn default() -> Self {
        Self { probability: 0.01, realizations: 100 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NonmarkovKind {
    /// Optimal drive, fidelity and transfer time.
    Optimize,
    /// Retarded dark/bright decay against the first-order formula.
    Amplitude,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NonmarkovConfig {
    pub kind: NonmarkovKind,
    /// Rates in units of Γ.
    pub gamma_d: f64,
    pub gamma_tau: f64,
    pub kappa_l: f64,
    /// Amplitude traces run to `duration`/Γ.
    pub duration: f64,
    pub samples: usize,
}

impl Default for NonmarkovConfig {
    fn default() -> Self {
        Self {
            kind: NonmarkovKind::Optimize,
            gamma_d: 5e-5,
            gamma_tau: 1.0,
            kappa_l: 0.0,
            duration: 10.0,
            samples: 201,
        }
    }
}

/// Configuration tree before deserialization, so overrides and sweep
/// values can be applied by path.
#[derive(Clone, Debug)]
pub struct ConfigTree(Table);

impl ConfigTree {
    pub fn parse(source: &str, origin: &str) -> Result<Self, CliError> {
        let table: Table = source.parse().map_err(|e| CliError::Config(format!("{origin}: {e}")))?;
        Ok(Self(table))
    }

    /// Recursively overlays `other` on top of `self`.
    pub fn merge(&mut self, other: ConfigTree) {
        fn go(dst: &mut Table, src: Table) {
            for (k, v) in src {
                match (dst.get_mut(&k), v) {
                    (Some(Value::Table(d)), Value::Table(s)) => go(d, s),
                    (_, v) => {
                        dst.insert(k, v);
                    }
                }
            }
        }
        go(&mut self.0, other.0);
    }

    /// Applies `key=value`; the value is read as a TOML literal and falls
    /// back to a bare string.
    pub fn set_str(&mut self, assignment: &str) -> Result<(), CliError> {
        let (key, raw) = assignment
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("--set expects key=value, got '{assignment}'")))?;
        let raw = raw.trim();
        let value = match format!("v = {raw}").parse::<Table>() {
            Ok(mut t) => t.remove("v").expect("parsed key"),
            Err(_) => Value::String(raw.to_string()),
        };
        self.set(key.trim(), value, false)
    }

    /// Sets a dotted path. With `must_exist`, the path has to name a
    /// parameter of the resolved configuration.
    pub fn set(&mut self, key: &str, value: Value, must_exist: bool) -> Result<(), CliError> {
        let parts: Vec<&str> = key.split('.').collect();
        if parts.iter().any(|p| p.is_empty()) {
            return Err(CliError::Config(format!("malformed parameter path '{key}'")));
        }
        let mut node = &mut self.0;
        for p in &parts[..parts.len() - 1] {
            let entry = node.entry(p.to_string()).or_insert_with(|| Value::Table(Table::new()));
            node = entry
                .as_table_mut()
                .ok_or_else(|| CliError::Config(format!("'{p}' in '{key}' is not a section")))?;
        }
        let leaf = parts[parts.len() - 1];
        if must_exist && !node.contains_key(leaf) {
            return Err(CliError::Config(format!("sweep axis references unknown parameter '{key}'")));
        }
        node.insert(leaf.to_string(), value);
        Ok(())
    }

    pub fn resolve(&self) -> Result<RunConfig, CliError> {
        let text = toml::to_string(&self.0).map_err(|e| CliError::Config(e.to_string()))?;
        toml::from_str(&text).map_err(|e| CliError::Config(format!("configuration: {e}")))
    }

    /// Effective configuration with every default filled in.
    pub fn normalized(&self) -> Result<ConfigTree, CliError> {
        let cfg = self.resolve()?;
        let text = toml::to_string(&cfg).map_err(|e| CliError::Config(e.to_string()))?;
        Self::parse(&text, "normalized configuration")
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(&self.0).expect("tables always serialize")
    }
}

/// Configuration of each sweep point, in grid order.
pub fn sweep_points(tree: &ConfigTree) -> Result<Vec<(Option<Value>, RunConfig)>, CliError> {
    let base = tree.normalized()?;
    let cfg = base.resolve()?;
    let Some(sweep) = cfg.sweep.clone() else {
        return Ok(vec![(None, cfg)]);
    };
    if sweep.values.is_empty() {
        let mut single = cfg;
        single.sweep = None;
        return Ok(vec![(None, single)]);
    }
    sweep
        .values
        .iter()
        .map(|v| {
            let mut t = base.clone();
            t.set(&sweep.key, v.clone(), true)?;
            Ok((Some(v.clone()), t.resolve()?))
        })
        .collect()
}

/// SHA-256 over the command name and the normalized configuration,
/// leaving out the thread count.
pub fn digest(command: &str, tree: &ConfigTree) -> String {
    let mut t = tree.clone();
    t.0.remove("jobs");
    let mut h = Sha256::new();
    h.update(command.as_bytes());
    h.update([0]);
    h.update(t.to_toml().as_bytes());
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}
