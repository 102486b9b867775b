//! Experiment configuration. Unknown keys are rejected at every level; the matching
//! JSON schema ships as `docs/config.schema.json`.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use hsb_core::comparison::KSource;
use hsb_core::ModelSpec;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentId {
    Identities,
    Thm11,
    Thm12,
    Myers,
    Synge,
    Laplacian,
    Volume,
    FullSuite,
}

impl ExperimentId {
    pub const ALL: [ExperimentId; 8] = [
        ExperimentId::Identities,
        ExperimentId::Thm11,
        ExperimentId::Thm12,
        ExperimentId::Myers,
        ExperimentId::Synge,
        ExperimentId::Laplacian,
        ExperimentId::Volume,
        ExperimentId::FullSuite,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentId::Identities => "identities",
            ExperimentId::Thm11 => "thm11",
            ExperimentId::Thm12 => "thm12",
            ExperimentId::Myers => "myers",
            ExperimentId::Synge => "synge",
            ExperimentId::Laplacian => "laplacian",
            ExperimentId::Volume => "volume",
            ExperimentId::FullSuite => "full-suite",
        }
    }
}

impl fmt::Display for ExperimentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ExperimentId {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, CliError> {
        ExperimentId::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or_else(|| CliError::Config(format!("unknown experiment '{s}'")))
    }
}

/// A curvature constant, given or estimated from sampled curvature minima.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum KSetting {
    Value(f64),
    Auto(AutoK),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AutoK {
    Auto,
}

impl Default for KSetting {
    fn default() -> Self {
        KSetting::Auto(AutoK::Auto)
    }
}

impl FromStr for KSetting {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, CliError> {
        if s == "auto" {
            return Ok(KSetting::Auto(AutoK::Auto));
        }
        s.parse::<f64>()
            .map(KSetting::Value)
            .map_err(|_| CliError::Config(format!("K must be a number or 'auto', got '{s}'")))
    }
}

/// `start:end:count`, inclusive, uniformly spaced.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RhoGrid {
    pub start: f64,
    pub end: f64,
    pub count: usize,
}

impl RhoGrid {
    pub fn values(&self) -> Vec<f64> {
        if self.count <= 1 {
            return vec![self.start];
        }
        let h = (self.end - self.start) / (self.count - 1) as f64;
        (0..self.count).map(|i| self.start + i as f64 * h).collect()
    }
}

impl FromStr for RhoGrid {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, CliError> {
        let bad = || CliError::Config(format!("rho grid must be start:end:count, got '{s}'"));
        let parts: Vec<&str> = s.split(':').collect();
        let [a, b, n] = parts.as_slice() else { return Err(bad()) };
        Ok(RhoGrid {
            start: a.parse().map_err(|_| bad())?,
            end: b.parse().map_err(|_| bad())?,
            count: n.parse().map_err(|_| bad())?,
        })
    }
}

/// Grid, sampling and geometry parameters. Every field has a default.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentParams {
    /// Seeded cases for `thm11`, `thm12`, `myers` and `synge`.
    pub cases: usize,
    /// Seeded points for `identities`.
    pub points: usize,
    /// Length of the base geodesics of `thm11` and `thm12`.
    pub geodesic_length: f64,
    pub geodesic_steps: usize,
    /// Number of sine (and cosine) modes of random trig-polynomial fields.
    pub degree: usize,
    pub amplitude: f64,
    pub fd_delta: f64,
    #[serde(rename = "K")]
    pub k: KSetting,
    /// Points sampled when `K` is `auto`.
    pub k_samples: usize,
    /// Curvature minimum that `auto` reads `K` from.
    pub k_source: KSource,
    /// Geodesic starts for `myers` and `synge`.
    pub starts: usize,
    pub rho_grid: RhoGrid,
    /// Directions per comparison point; 0 picks 32 (n = 1) or 128 (n ≥ 2).
    pub directions: usize,
    /// Comparison base point as real coordinates; defaults to the first seeded point with `|z| ≤ 0.6`.
    pub point: Option<Vec<f64>>,
    pub length_factor: f64,
    /// Shooting-based diameter estimate in `myers`; defaults to on for Fubini-Study.
    pub estimate_diameter: Option<bool>,
    /// Also run the comparison with `K` inflated by 10% and expect it to fail.
    pub negative_control: bool,
    /// Expect equality in the comparison (model space); defaults to on for flat and Fubini-Study.
    pub expect_saturation: Option<bool>,
}

impl Default for ExperimentParams {
    fn default() -> Self {
        Self {
            cases: 20,
            points: 50,
            geodesic_length: 0.5,
            geodesic_steps: 400,
            degree: 2,
            amplitude: 0.3,
            fd_delta: 1e-3,
            k: KSetting::default(),
            k_samples: 20,
            k_source: KSource::HolomorphicRicci,
            starts: 3,
            rho_grid: RhoGrid { start: 0.1, end: 1.0, count: 10 },
            directions: 0,
            point: None,
            length_factor: 1.05,
            estimate_diameter: None,
            negative_control: true,
            expect_saturation: None,
        }
    }
}

/// Pass thresholds. Reports always print the tolerance next to each residual.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    pub skew: f64,
    pub type_vanishing: f64,
    pub defining_relation: f64,
    pub torsion_d_omega: f64,
    pub connection_difference: f64,
    pub kahler: f64,
    pub trace_torsion: f64,
    pub holomorphic_trace: f64,
    pub hermitian_ricci: f64,
    pub witness: f64,
    pub coincidence: f64,
    pub isometry_drift: f64,
    pub j_commutation: f64,
    /// Smallest accepted observed order of the geodesic integrator.
    pub rk4_order: f64,
    pub thm11_relative: f64,
    pub thm11_absolute: f64,
    pub thm12: f64,
    pub boundary_zero: f64,
    pub symmetry: f64,
    pub myers: f64,
    pub transport: f64,
    pub torsion_term: f64,
    pub synge_closed_form: f64,
    pub laplacian_margin: f64,
    pub saturation: f64,
    pub flat_saturation: f64,
    pub monotone_slack: f64,
    pub limit_one: f64,
    pub diameter_relative: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            skew: 1e-8,
            type_vanishing: 1e-8,
            defining_relation: 1e-7,
            torsion_d_omega: 1e-7,
            connection_difference: 1e-8,
            kahler: 1e-7,
            trace_torsion: 1e-8,
            holomorphic_trace: 1e-7,
            hermitian_ricci: 1e-7,
            witness: 1e-3,
            coincidence: 1e-6,
            isometry_drift: 1e-8,
            j_commutation: 1e-8,
            rk4_order: 3.8,
            thm11_relative: 1e-3,
            thm11_absolute: 1e-5,
            thm12: 1e-6,
            boundary_zero: 1e-8,
            symmetry: 1e-8,
            myers: 1e-5,
            transport: 1e-7,
            torsion_term: 1e-7,
            synge_closed_form: 1e-6,
            laplacian_margin: 1e-4,
            saturation: 1e-4,
            flat_saturation: 1e-6,
            monotone_slack: 1e-5,
            limit_one: 1e-3,
            diameter_relative: 5e-3,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputPaths {
    pub report: Option<PathBuf>,
    /// Plot-ready sample table (comparison experiments) or the case table.
    pub csv: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelSpec,
    pub experiment: ExperimentId,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub params: ExperimentParams,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub output: OutputPaths,
}

impl ExperimentConfig {
    pub fn new(model: ModelSpec, experiment: ExperimentId) -> Self {
        Self {
            model,
            experiment,
            seed: 0,
            params: ExperimentParams::default(),
            tolerances: Tolerances::default(),
            output: OutputPaths::default(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let p = &self.params;
        let bad = |what: &str| Err(CliError::Config(what.to_string()));
        if p.geodesic_steps < 8 {
            return bad("geodesic_steps must be at least 8");
        }
        if !(p.geodesic_length > 0.0) {
            return bad("geodesic_length must be positive");
        }
        if !(p.fd_delta > 0.0 && p.fd_delta < 0.1) {
            return bad("fd_delta must lie in (0, 0.1)");
        }
        if p.degree == 0 {
            return bad("degree must be at least 1");
        }
        if p.rho_grid.count == 0 || !(p.rho_grid.start > 0.0) || p.rho_grid.end < p.rho_grid.start {
            return bad("rho_grid needs 0 < start <= end and count >= 1");
        }
        if let KSetting::Value(k) = p.k {
            if !k.is_finite() {
                return bad("K must be finite");
            }
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON form, excluding output paths.
    pub fn hash(&self) -> String {
        let mut canonical = self.clone();
        canonical.output = OutputPaths::default();
        let text = serde_json::to_string(&canonical).expect("config serializes");
        hex::encode(Sha256::digest(text.as_bytes()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_takes_defaults() {
        let cfg = ExperimentConfig::from_json(r#"{"model":{"name":"hopf","params":[2]},"experiment":"thm11","seed":7}"#).unwrap();
        assert_eq!(cfg.params.cases, 20);
        assert_eq!(cfg.params.k, KSetting::Auto(AutoK::Auto));
        assert_eq!(cfg.seed, 7);
    }

    #[test]
    fn unknown_keys_are_rejected_at_every_level() {
        for text in [
            r#"{"model":{"name":"flat","params":[1]},"experiment":"thm11","colour":1}"#,
            r#"{"model":{"name":"flat","params":[1],"eps":1},"experiment":"thm11"}"#,
            r#"{"model":{"name":"flat","params":[1]},"experiment":"thm11","params":{"casez":3}}"#,
            r#"{"model":{"name":"flat","params":[1]},"experiment":"thm11","tolerances":{"skw":1}}"#,
        ] {
            assert!(matches!(ExperimentConfig::from_json(text), Err(CliError::Config(_))), "{text}");
        }
    }

    #[test]
    fn k_accepts_number_or_auto() {
        let cfg = ExperimentConfig::from_json(
            r#"{"model":{"name":"flat","params":[1]},"experiment":"laplacian","params":{"K":2.5}}"#,
        )
        .unwrap();
        assert_eq!(cfg.params.k, KSetting::Value(2.5));
        assert_eq!("auto".parse::<KSetting>().unwrap(), KSetting::Auto(AutoK::Auto));
        assert!("warm".parse::<KSetting>().is_err());
    }

    #[test]
    fn rho_grid_parses_and_spans() {
        let g: RhoGrid = "0.1:0.5:5".parse().unwrap();
        let v = g.values();
        assert_eq!(v.len(), 5);
        assert!((v[4] - 0.5).abs() < 1e-15);
        assert!("0.1:0.5".parse::<RhoGrid>().is_err());
    }

    #[test]
    fn hash_ignores_output_paths() {
        let mut a = ExperimentConfig::new("flat(1)".parse().unwrap(), ExperimentId::Thm11);
        let h = a.hash();
        a.output.report = Some("x.json".into());
        assert_eq!(a.hash(), h);
        a.seed = 1;
        assert_ne!(a.hash(), h);
    }
}
