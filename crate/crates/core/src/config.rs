//! Scenario configuration: presets, TOML parsing and validation.
//!
//! A configuration file names a preset with the top-level `scenario` key and
//! overrides any subset of its fields. Tables that select an enum variant
//! (`kind = ...` or `preset = ...`) replace the preset table wholesale when
//! the variant changes; every other table is merged key by key.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::cell::CellShape;
use crate::error::{Error, Result};
use crate::fem::Tensor2;
use crate::macroscale::{BoundarySpec, DirichletRegion, InitialSpec};
use crate::mesh::Point;
use crate::micro::{ReactionSpec, Source};

pub const DEFAULT_SCENARIO: &str = "bio-ellipse";
pub const SCENARIOS: [&str; 2] = ["bio-ellipse", "bio-dziuk"];

/// Scalar or full tensor diffusion coefficient.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Coefficient {
    Scalar(f64),
    Tensor(Tensor2),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometryConfig {
    pub macro_lower: Point,
    pub macro_upper: Point,
    pub macro_divisions: usize,
    #[serde(default)]
    pub macro_level: u32,
    pub cell: CellShape,
    pub cell_lower: Point,
    pub cell_upper: Point,
    pub interior_level: u32,
    pub exterior_level: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeConfig {
    pub tau: f64,
    pub t_end: f64,
    /// Sampling interval in steps; defaults to `ceil(steps / 200)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cadence: Option<usize>,
}

impl TimeConfig {
    /// Number of steps: `t_end / tau`, rounded up unless it is an integer to
    /// within round-off.
    pub fn steps(&self) -> usize {
        let r = self.t_end / self.tau;
        let n = r.round();
        if (r - n).abs() <= 1e-9 * r.max(1.0) {
            n as usize
        } else {
            r.ceil() as usize
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiffusionConfig {
    /// Extracellular diffusivity in the cell exterior.
    pub d_e: Coefficient,
    /// Homogenised tensor; computed from the cell problems when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d_hom: Option<Tensor2>,
    /// Porosity; computed from the exterior mesh when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta_e: Option<f64>,
    pub d_i: f64,
    pub d_f: f64,
    pub d_b: f64,
    pub d_d: f64,
    pub d_a: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default)]
    pub probes: Vec<Point>,
    /// Keep the full micro state at each probe in every sample.
    #[serde(default)]
    pub micro_snapshots: bool,
}

/// Reference scales of the dimensional model. Informational only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NondimRecord {
    pub time: f64,
    pub length: f64,
    pub receptor: f64,
    pub ligand: f64,
    pub epsilon: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub scenario: String,
    pub geometry: GeometryConfig,
    pub time: TimeConfig,
    pub reactions: ReactionSpec,
    pub diffusion: DiffusionConfig,
    pub bc: BoundarySpec,
    pub initial: InitialSpec,
    pub output: OutputConfig,
    pub nondim: NondimRecord,
}

/// Mesh resolution of a scenario.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Resolution {
    pub macro_divisions: usize,
    pub macro_level: u32,
    pub interior_level: u32,
    pub exterior_level: u32,
}

impl Resolution {
    /// Small enough for a laptop: 289 macroscopic nodes, 129 interior and 32
    /// membrane nodes per cell.
    pub fn desk() -> Self {
        Resolution {
            macro_divisions: 16,
            macro_level: 0,
            interior_level: 2,
            exterior_level: 2,
        }
    }
}

/// The receptor signalling model on `[0, 0.1]^2` with cells in `[-2, 2]^2`,
/// ligand supplied through the south-west corner of the boundary.
pub fn bio_scenario(cell: CellShape, resolution: Resolution, tau: f64, t_end: f64) -> ScenarioConfig {
    let scenario = match cell {
        CellShape::Dziuk => "bio-dziuk",
        _ => "bio-ellipse",
    };
    ScenarioConfig {
        scenario: scenario.into(),
        geometry: GeometryConfig {
            macro_lower: [0.0, 0.0],
            macro_upper: [0.1, 0.1],
            macro_divisions: resolution.macro_divisions,
            macro_level: resolution.macro_level,
            cell,
            cell_lower: [-2.0, -2.0],
            cell_upper: [2.0, 2.0],
            interior_level: resolution.interior_level,
            exterior_level: resolution.exterior_level,
        },
        time: TimeConfig {
            tau,
            t_end,
            cadence: None,
        },
        reactions: ReactionSpec {
            a_e: 100.0,
            b_e: 5.0,
            a_i: 6e3,
            b_i: 10.0,
            gamma_i: 2.0,
            kappa_i: 1.0,
            d_f: 0.0,
            d_b: 0.0,
            d_d: 0.0,
            d_a: 0.0,
            f_e: Source::Zero,
            f_i: Source::Zero,
            f_f: Source::Zero,
            f_d: Source::Zero,
        },
        diffusion: DiffusionConfig {
            d_e: Coefficient::Scalar(1e-2),
            d_hom: None,
            theta_e: None,
            d_i: 10.0,
            d_f: 1e-2,
            d_b: 1e-2,
            d_d: 1e-2,
            d_a: 1e-2,
        },
        bc: BoundarySpec {
            dirichlet: DirichletRegion::MaxBelow { threshold: 0.05 },
            value: 1.0,
        },
        initial: InitialSpec::Perturbed { amplitude: 0.95 },
        output: OutputConfig {
            probes: vec![[0.1, 0.1]],
            micro_snapshots: false,
        },
        nondim: NondimRecord {
            time: 1e3,
            length: 1e-2,
            receptor: 1e-9,
            ligand: 1e-4,
            epsilon: 1e-3,
        },
    }
}

/// Named preset at desk resolution.
pub fn preset(name: &str) -> Result<ScenarioConfig> {
    let cell = match name {
        "bio-ellipse" => CellShape::Ellipse {
            coeffs: [0.26, 5.0],
        },
        "bio-dziuk" => CellShape::Dziuk,
        other => {
            return Err(Error::invalid(
                "scenario",
                format!("unknown scenario `{other}` (expected one of {})", SCENARIOS.join(", ")),
            ))
        }
    };
    Ok(bio_scenario(cell, Resolution::desk(), 5e-4, 50.0))
}

fn key_error(key: &str, message: impl Into<String>) -> Error {
    Error::invalid(key, message)
}

impl ScenarioConfig {
    /// Check every cross-field invariant; errors name the offending key.
    pub fn validate(&self) -> Result<()> {
        let g = &self.geometry;
        for (key, lo, hi) in [
            ("geometry.macro_upper", g.macro_lower, g.macro_upper),
            ("geometry.cell_upper", g.cell_lower, g.cell_upper),
        ] {
            if !(lo.iter().chain(&hi).all(|v| v.is_finite()) && hi[0] > lo[0] && hi[1] > lo[1]) {
                return Err(key_error(key, "upper corner must exceed the lower corner"));
            }
        }
        if g.macro_divisions == 0 {
            return Err(key_error("geometry.macro_divisions", "must be at least 1"));
        }
        if g.macro_level > 8 || g.interior_level > 8 || g.exterior_level > 8 {
            return Err(key_error("geometry", "refinement levels above 8 are not supported"));
        }
        g.cell
            .check_fits(g.cell_lower, g.cell_upper)
            .map_err(|e| key_error("geometry.cell", e.to_string()))?;
        let t = &self.time;
        if !(t.tau.is_finite() && t.tau > 0.0) {
            return Err(key_error("time.tau", format!("must be positive, got {}", t.tau)));
        }
        if !(t.t_end.is_finite() && t.t_end > 0.0) {
            return Err(key_error("time.t_end", format!("must be positive, got {}", t.t_end)));
        }
        if t.t_end < t.tau {
            return Err(key_error("time.t_end", "must be at least one time step"));
        }
        if t.cadence == Some(0) {
            return Err(key_error("time.cadence", "must be at least 1"));
        }
        self.reactions.validate()?;
        let d = &self.diffusion;
        match d.d_e {
            Coefficient::Scalar(c) if !(c.is_finite() && c > 0.0) => {
                return Err(key_error("diffusion.d_e", "must be positive"))
            }
            Coefficient::Tensor(t) if !(t.is_finite() && t.is_symmetric() && t.eigenvalues()[0] > 0.0) => {
                return Err(key_error("diffusion.d_e", "must be symmetric positive definite"))
            }
            _ => {}
        }
        if let Some(t) = d.d_hom {
            if !(t.is_finite() && t.is_symmetric() && t.eigenvalues()[0] > 0.0) {
                return Err(key_error("diffusion.d_hom", "must be symmetric positive definite"));
            }
        }
        if let Some(th) = d.theta_e {
            if !(th > 0.0 && th <= 1.0) {
                return Err(key_error("diffusion.theta_e", "must lie in (0, 1]"));
            }
        }
        for (key, v) in [
            ("diffusion.d_i", d.d_i),
            ("diffusion.d_f", d.d_f),
            ("diffusion.d_b", d.d_b),
            ("diffusion.d_d", d.d_d),
            ("diffusion.d_a", d.d_a),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(key_error(key, format!("must be non-negative, got {v}")));
            }
        }
        if !self.bc.value.is_finite() {
            return Err(key_error("bc.value", "must be finite"));
        }
        for (i, p) in self.output.probes.iter().enumerate() {
            let inside = (0..2).all(|a| p[a] >= g.macro_lower[a] && p[a] <= g.macro_upper[a]);
            if !inside {
                return Err(key_error(
                    &format!("output.probes[{i}]"),
                    "probe lies outside the macroscopic domain",
                ));
            }
        }
        Ok(())
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(format!("cannot serialise configuration: {e}")))
    }

    /// Parse a configuration from TOML text; `path` is used in messages.
    pub fn from_toml_str(text: &str, path: &str) -> Result<Self> {
        let user: toml::Table = text.parse().map_err(|e: toml::de::Error| {
            let line = e
                .span()
                .map(|s| text[..s.start.min(text.len())].matches('\n').count() + 1)
                .unwrap_or(0);
            Error::Parse {
                path: path.into(),
                line,
                message: e.message().trim().to_string(),
            }
        })?;
        let name = match user.get("scenario") {
            None => DEFAULT_SCENARIO.to_string(),
            Some(toml::Value::String(s)) => s.clone(),
            Some(_) => return Err(key_error("scenario", "must be a string")),
        };
        let base = preset(&name)?;
        let mut merged = toml::Value::try_from(&base)
            .map_err(|e| Error::Config(format!("cannot serialise preset: {e}")))?;
        merge(&mut merged, toml::Value::Table(user));
        let config: ScenarioConfig = serde_path_to_error::deserialize(merged).map_err(|e| {
            let key = e.path().to_string();
            let inner = e.into_inner();
            Error::invalid(if key == "." { "" } else { &key }, inner.to_string())
        })?;
        config.validate()?;
        Ok(config)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text, &path.display().to_string())
    }
}

fn variant_of(t: &toml::Table) -> Option<&toml::Value> {
    t.get("kind").or_else(|| t.get("preset"))
}

fn merge(base: &mut toml::Value, over: toml::Value) {
    match (base, over) {
        (toml::Value::Table(b), toml::Value::Table(o)) => {
            for (k, v) in o {
                match b.get_mut(&k) {
                    Some(slot @ toml::Value::Table(_)) if v.is_table() => {
                        let replace = match (slot.as_table().and_then(variant_of), v.as_table().and_then(variant_of)) {
                            (Some(a), Some(c)) => a != c,
                            _ => false,
                        };
                        if replace {
                            *slot = v;
                        } else {
                            merge(slot, v);
                        }
                    }
                    _ => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (b, o) => *b = o,
    }
}
