//! Experiment configuration: TOML with dotted sections, unknown keys rejected.

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::floer::{HomoclinicModel, LinearModel, PerturbedModel, SharedModel};
use crate::gluing::{GluingProfile, SEAM_MARGIN};
use crate::grid::CylinderGrid;
use crate::scale::WeightSequence;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelId {
    Linear,
    Perturbed,
    Homoclinic,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub id: ModelId,
    /// Rotation rate of the linear part (linear, perturbed).
    pub a: f64,
    /// Strength of the quadratic perturbation (perturbed).
    pub eps: f64,
    /// Complex dimension (linear, perturbed).
    pub n: usize,
    /// Decay rate of the homoclinic orbit.
    pub mu: f64,
    /// Strength of the non-constant J (homoclinic).
    pub kappa: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub s_max: f64,
    pub n_s: usize,
    pub n_t: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightsConfig {
    pub deltas: Vec<f64>,
    pub cap: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GluingConfig {
    /// Neck lengths R (each > 42); snapped to the grid.
    pub neck_lengths: Vec<f64>,
    /// Also evaluate the broken configuration r = 0.
    pub include_unglued: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub levels: Vec<usize>,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TolConfig {
    pub identity: f64,
    pub reassembly: f64,
    pub newton: f64,
    pub picard_step: f64,
    pub picard_residual: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScalesConfig {
    pub tail_lengths: Vec<f64>,
    pub probe_margin: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContractionConfig {
    /// Largest radius; the sweep halves it three times.
    pub radius: f64,
    pub samples: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PicardConfig {
    pub v_norm: f64,
    pub max_iter: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelConfig,
    pub grid: GridConfig,
    pub weights: WeightsConfig,
    pub gluing: GluingConfig,
    pub run: RunConfig,
    pub tol: TolConfig,
    pub scales: ScalesConfig,
    pub contraction: ContractionConfig,
    pub picard: PicardConfig,
    pub output: OutputConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            model: ModelConfig { id: ModelId::Homoclinic, a: 1.0, eps: 0.05, n: 1, mu: 0.5, kappa: 0.0 },
            grid: GridConfig { s_max: 60.0, n_s: 481, n_t: 4 },
            weights: WeightsConfig { deltas: vec![0.1, 0.2, 0.3, 0.35], cap: 0.45 },
            gluing: GluingConfig { neck_lengths: vec![45.0, 50.0], include_unglued: true },
            run: RunConfig { levels: vec![1, 2], seed: 7 },
            tol: TolConfig { identity: 1e-10, reassembly: 1e-10, newton: 1e-10, picard_step: 1e-13, picard_residual: 1e-8 },
            scales: ScalesConfig { tail_lengths: vec![2.0, 4.0, 6.0], probe_margin: 2.0 },
            contraction: ContractionConfig { radius: 0.1, samples: 8 },
            picard: PicardConfig { v_norm: 1e-3, max_iter: 50 },
            output: OutputConfig { dir: "out".into() },
        }
    }
}

fn field_err(field: &str, msg: impl std::fmt::Display) -> Error {
    Error::Config(format!("{field}: {msg}"))
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| field_err(&path.display().to_string(), e))?;
        Self::from_toml(&text)
    }

    /// SHA-256 of the canonical serialization.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_toml().as_bytes()))
    }

    /// Checks every field that the constituent types would reject, reporting the first offending key.
    pub fn validate(&self) -> Result<()> {
        let m = &self.model;
        for (k, v) in [("model.a", m.a), ("model.eps", m.eps), ("model.mu", m.mu), ("model.kappa", m.kappa)] {
            if !v.is_finite() {
                return Err(field_err(k, "must be finite"));
            }
        }
        match m.id {
            ModelId::Linear | ModelId::Perturbed => {
                if !(m.a > 0.0 && m.a < 2.0 * std::f64::consts::PI) {
                    return Err(field_err("model.a", format!("must lie in (0, 2 pi), got {}", m.a)));
                }
                if m.n == 0 {
                    return Err(field_err("model.n", "must be at least 1"));
                }
            }
            ModelId::Homoclinic => {
                if !(m.mu > 0.0) {
                    return Err(field_err("model.mu", format!("must be positive, got {}", m.mu)));
                }
                if m.n != 1 {
                    return Err(field_err("model.n", "the homoclinic model has dimension 1"));
                }
            }
        }
        let g = &self.grid;
        if !(g.s_max > 0.0 && g.s_max.is_finite()) {
            return Err(field_err("grid.s_max", format!("must be positive, got {}", g.s_max)));
        }
        if g.n_s < 3 || g.n_s % 2 == 0 {
            return Err(field_err("grid.n_s", format!("must be odd and at least 3, got {}", g.n_s)));
        }
        if g.n_t < 4 {
            return Err(field_err("grid.n_t", format!("must be at least 4, got {}", g.n_t)));
        }
        WeightSequence::new(self.weights.deltas.clone(), self.weights.cap).map_err(|e| field_err("weights.deltas", e))?;
        for &r in &self.gluing.neck_lengths {
            GluingProfile::from_length(r).map_err(|e| field_err("gluing.neck_lengths", e))?;
            if r + SEAM_MARGIN > g.s_max {
                return Err(field_err("gluing.neck_lengths", format!("R = {r} needs s_max >= {}", r + SEAM_MARGIN)));
            }
        }
        if self.gluing.neck_lengths.is_empty() && !self.gluing.include_unglued {
            return Err(field_err("gluing.neck_lengths", "no gluing parameter selected"));
        }
        if self.run.levels.is_empty() {
            return Err(field_err("run.levels", "at least one level is required"));
        }
        if let Some(&m) = self.run.levels.iter().find(|&&m| m + 1 >= self.weights.deltas.len()) {
            return Err(field_err("run.levels", format!("level {m} needs weights up to index {}", m + 1)));
        }
        let t = &self.tol;
        for (k, v) in [
            ("tol.identity", t.identity),
            ("tol.reassembly", t.reassembly),
            ("tol.newton", t.newton),
            ("tol.picard_step", t.picard_step),
            ("tol.picard_residual", t.picard_residual),
        ] {
            if !(v > 0.0) {
                return Err(field_err(k, "must be positive"));
            }
        }
        if self.scales.tail_lengths.len() < 2 || self.scales.tail_lengths.iter().any(|&r| !(r > 0.0)) {
            return Err(field_err("scales.tail_lengths", "need at least two positive lengths"));
        }
        if !(self.scales.probe_margin >= 0.0) {
            return Err(field_err("scales.probe_margin", "must be non-negative"));
        }
        if !(self.contraction.radius > 0.0) {
            return Err(field_err("contraction.radius", "must be positive"));
        }
        if self.contraction.samples == 0 {
            return Err(field_err("contraction.samples", "must be at least 1"));
        }
        if !(self.picard.v_norm >= 0.0) {
            return Err(field_err("picard.v_norm", "must be non-negative"));
        }
        if self.picard.max_iter == 0 {
            return Err(field_err("picard.max_iter", "must be at least 1"));
        }
        if self.output.dir.is_empty() {
            return Err(field_err("output.dir", "must not be empty"));
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<CylinderGrid> {
        CylinderGrid::new(self.grid.s_max, self.grid.n_s, self.grid.n_t)
    }

    pub fn weights(&self) -> Result<WeightSequence> {
        WeightSequence::new(self.weights.deltas.clone(), self.weights.cap)
    }

    /// The configured model; fails when the weights reach its spectral gap.
    pub fn model(&self) -> Result<SharedModel> {
        let m = &self.model;
        let model: SharedModel = match m.id {
            ModelId::Linear => Arc::new(LinearModel::new(m.a, m.n)?),
            ModelId::Perturbed => Arc::new(PerturbedModel::new(m.a, m.eps, m.n)?),
            ModelId::Homoclinic => Arc::new(HomoclinicModel::new(m.mu, m.kappa)?),
        };
        if self.weights.cap >= model.gap() {
            return Err(field_err("weights.cap", format!("must stay below the spectral gap {} of {}", model.gap(), model.id())));
        }
        Ok(model)
    }

    pub fn profiles(&self) -> Result<Vec<GluingProfile>> {
        let mut out = Vec::new();
        if self.gluing.include_unglued {
            out.push(GluingProfile::unglued());
        }
        for &r in &self.gluing.neck_lengths {
            out.push(GluingProfile::from_length(r)?);
        }
        Ok(out)
    }

    pub fn glued_profiles(&self) -> Result<Vec<GluingProfile>> {
        Ok(self.profiles()?.into_iter().filter(|p| p.is_glued()).collect())
    }
}

/// Margin audit line: neck length, required s_max and whether the grid provides it.
#[derive(Clone, Debug, Serialize)]
pub struct MarginAudit {
    pub big_r: f64,
    pub required_s_max: f64,
    pub s_max: f64,
    pub ok: bool,
}

pub fn margin_audit(cfg: &ExperimentConfig) -> Vec<MarginAudit> {
    cfg.gluing
        .neck_lengths
        .iter()
        .map(|&r| MarginAudit { big_r: r, required_s_max: r + SEAM_MARGIN, s_max: cfg.grid.s_max, ok: r + SEAM_MARGIN <= cfg.grid.s_max })
        .collect()
}

/// Configuration reproducing acceptance criterion `n` (1 to 10).
pub fn preset(n: u8) -> Result<ExperimentConfig> {
    let mut c = ExperimentConfig::default();
    let set_grid = |c: &mut ExperimentConfig, s_max: f64, n_s: usize, n_t: usize| c.grid = GridConfig { s_max, n_s, n_t };
    let linear = ModelConfig { id: ModelId::Linear, a: 1.0, eps: 0.05, n: 1, mu: 0.5, kappa: 0.0 };
    match n {
        1 => {
            c.model = linear;
            set_grid(&mut c, 80.0, 3201, 32);
            c.gluing = GluingConfig { neck_lengths: vec![45.0, 55.0, 70.0], include_unglued: false };
        }
        2 => {
            set_grid(&mut c, 60.0, 481, 8);
            c.gluing = GluingConfig { neck_lengths: vec![45.0, 50.0], include_unglued: false };
        }
        3 | 4 => {
            if n == 3 {
                c.model = linear;
            }
            set_grid(&mut c, 104.0, 833, 8);
            c.weights = WeightsConfig { deltas: vec![0.1, 0.2, 0.3], cap: 0.45 };
            c.gluing = GluingConfig { neck_lengths: vec![45.0, 60.0, 100.0], include_unglued: true };
            c.run.levels = vec![0, 1];
        }
        5 => {
            // Only the scale spaces are exercised; a = 3.1 keeps the weights below the gap.
            c.model = ModelConfig { a: 3.1, ..linear };
            set_grid(&mut c, 14.0, 561, 8);
            c.weights = WeightsConfig { deltas: vec![0.5, 1.5, 2.5], cap: 3.0 };
            c.gluing = GluingConfig { neck_lengths: vec![], include_unglued: true };
            c.run.levels = vec![0, 1];
        }
        6 => {
            c.model = ModelConfig { id: ModelId::Perturbed, ..linear };
            set_grid(&mut c, 60.0, 481, 4);
            c.gluing = GluingConfig { neck_lengths: vec![45.0], include_unglued: true };
            c.run.levels = vec![1];
        }
        7 => {
            set_grid(&mut c, 80.0, 641, 4);
            c.gluing = GluingConfig { neck_lengths: vec![45.0, 50.0, 55.0, 60.0, 65.0, 70.0, 75.0], include_unglued: false };
        }
        8 | 9 => {
            set_grid(&mut c, 80.0, 641, 4);
            c.gluing = GluingConfig { neck_lengths: vec![45.0], include_unglued: false };
            if n == 9 {
                c.run.levels = vec![1];
            }
        }
        10 => {
            c.model = linear;
            set_grid(&mut c, 4.0, 33, 64);
            c.gluing = GluingConfig { neck_lengths: vec![], include_unglued: true };
            c.run.levels = vec![0, 1];
        }
        _ => return Err(Error::InvalidParameter(format!("there is no criterion {n}"))),
    }
    c.output.dir = format!("out/criterion-{n:02}");
    c.validate()?;
    Ok(c)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_and_hash() {
        for n in 1..=10 {
            let c = preset(n).unwrap();
            let back = ExperimentConfig::from_toml(&c.to_toml()).unwrap();
            assert_eq!(back, c);
            assert_eq!(back.hash(), c.hash());
        }
        assert_ne!(preset(1).unwrap().hash(), preset(2).unwrap().hash());
        assert!(preset(11).is_err());
    }

    #[test]
    fn dotted_keys_parse() {
        let mut text = ExperimentConfig::default().to_toml();
        text = text.replace("[grid]\n", "").replace("s_max = 60.0\n", "").replace("n_s = 481\n", "").replace("n_t = 4\n", "");
        text = format!("grid.s_max = 60.0\ngrid.n_s = 481\ngrid.n_t = 4\n{text}");
        assert_eq!(ExperimentConfig::from_toml(&text).unwrap(), ExperimentConfig::default());
    }

    #[test]
    fn rejections_name_the_field() {
        let base = ExperimentConfig::default().to_toml();
        let cases = [
            (base.replace("n_s = 481", "n_s = 480"), "grid.n_s"),
            (base.replace("[output]", "[output]\nextra = 1"), "unknown field"),
            (base.replace("neck_lengths = [45.0, 50.0]", "neck_lengths = [45.0, 58.0]"), "gluing.neck_lengths"),
            (base.replace("levels = [1, 2]", "levels = [3]"), "run.levels"),
            (base.replace("deltas = [0.1, 0.2, 0.3, 0.35]", "deltas = [0.2, 0.1, 0.3, 0.35]"), "weights.deltas"),
        ];
        for (text, field) in cases {
            let e = ExperimentConfig::from_toml(&text).unwrap_err().to_string();
            assert!(e.contains(field), "{e}");
        }
        let mut c = ExperimentConfig::default();
        c.weights.cap = 0.6;
        c.weights.deltas = vec![0.1, 0.2, 0.3, 0.55];
        assert!(c.model().err().unwrap().to_string().contains("weights.cap"));
    }
}
