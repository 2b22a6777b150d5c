use serde::{Deserialize, Serialize};

use super::{
    local_scaling, principal_projection, CouplingProfile, FiniteDifference, GeometryError,
    LatentPoint, NeighborhoodSpec, Probe, SpectralFlags,
};
use crate::generators::Generator;
use crate::imaging::{self, EnergyMode};

/// Top-k percentages reported for the generated image.
pub const TOP_HF_PERCENTS: [f64; 4] = [5.0, 10.0, 15.0, 20.0];

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TopHf {
    pub top5: f64,
    pub top10: f64,
    pub top15: f64,
    pub top20: f64,
}

impl TopHf {
    pub fn of(img: &imaging::ImageTensor) -> Self {
        let m = imaging::hf_magnitude_map(img);
        let share = |k| imaging::topk_share(&m, k, imaging::TOPK_FLOOR);
        Self {
            top5: share(TOP_HF_PERCENTS[0]),
            top10: share(TOP_HF_PERCENTS[1]),
            top15: share(TOP_HF_PERCENTS[2]),
            top20: share(TOP_HF_PERCENTS[3]),
        }
    }

    pub fn get(&self, percent: u32) -> Option<f64> {
        match percent {
            5 => Some(self.top5),
            10 => Some(self.top10),
            15 => Some(self.top15),
            20 => Some(self.top20),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecordFlag {
    /// No eigenvalue cleared the rank tolerance; `ls` is null.
    LsRankZero,
    DegenerateSpectrum,
    EigenCrossing,
}

/// Numerical knobs for a full pointwise diagnosis.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticSettings {
    pub fd: FiniteDifference,
    pub neighbor_radius: f64,
    pub neighbor_count: usize,
    pub rank_tolerance: f64,
    pub sis_floor: f64,
    pub degeneracy_tolerance: f64,
    pub phfe_mode: EnergyMode,
}

impl Default for DiagnosticSettings {
    fn default() -> Self {
        Self {
            fd: FiniteDifference::default(),
            neighbor_radius: 1e-2,
            neighbor_count: 8,
            rank_tolerance: 1e-12,
            sis_floor: 1e-8,
            degeneracy_tolerance: Probe::DEFAULT_DEGENERACY_TOLERANCE,
            phfe_mode: EnergyMode::Variance,
        }
    }
}

/// Every pointwise descriptor at one latent point.
#[derive(Clone, Debug, PartialEq)]
pub struct PointDiagnosis {
    /// `None` when the spectrum has no rank above tolerance.
    pub ls: Option<f64>,
    pub lc: f64,
    pub phfe: f64,
    pub phfe_mav: f64,
    pub hfe: f64,
    pub coupling: CouplingProfile,
    pub top_hf: TopHf,
    pub spectral: SpectralFlags,
}

impl PointDiagnosis {
    pub fn flags(&self) -> Vec<RecordFlag> {
        let mut flags = Vec::new();
        if self.ls.is_none() {
            flags.push(RecordFlag::LsRankZero);
        }
        if self.spectral.degenerate {
            flags.push(RecordFlag::DegenerateSpectrum);
        }
        if self.spectral.crossing {
            flags.push(RecordFlag::EigenCrossing);
        }
        flags
    }

    pub fn into_record(self, seed: u64, condition: impl Into<String>) -> GeometricRecord {
        GeometricRecord {
            seed,
            condition: condition.into(),
            flags: self.flags(),
            ls: self.ls,
            lc: self.lc,
            phfe: self.phfe,
            hfe: self.hfe,
            sis: self.coupling.sis,
            coupling: self.coupling,
            top_hf: self.top_hf,
            phfe_mav: self.phfe_mav,
        }
    }
}

/// Runs the full pointwise battery at `z`: spectrum, LS, LC, SIS and
/// coupling (sharing one neighbourhood), PHFE in both modes, HFE and Top-k
/// concentration of `G(z)`.
pub fn diagnose_point(
    generator: &dyn Generator,
    basis: &super::SubspaceBasis,
    z: &LatentPoint,
    neighbor_seed: u64,
    settings: &DiagnosticSettings,
) -> Result<PointDiagnosis, GeometryError> {
    let probe = Probe::new(generator, basis)
        .with_fd(settings.fd)
        .with_degeneracy_tolerance(settings.degeneracy_tolerance);
    diagnose_with_probe(&probe, z, neighbor_seed, settings)
}

pub(crate) fn diagnose_with_probe(
    probe: &Probe<'_>,
    z: &LatentPoint,
    neighbor_seed: u64,
    settings: &DiagnosticSettings,
) -> Result<PointDiagnosis, GeometryError> {
    let image = probe
        .generator()
        .evaluate(z)
        .map_err(|source| GeometryError::Evaluation { column: None, source })?;
    let (j, base) = probe.spectrum(z)?;
    let ls = local_scaling(&base, settings.rank_tolerance);
    let p1 = principal_projection(&j, &base)?;
    let spec = NeighborhoodSpec {
        radius: settings.neighbor_radius,
        count: settings.neighbor_count,
        seed: neighbor_seed,
    };
    let hood = probe.neighborhood(z, &base, &spec)?;
    let lc = hood.local_complexity();
    let diagnosis = PointDiagnosis {
        ls: ls.is_finite().then_some(ls),
        lc: lc.value,
        phfe: imaging::phfe(&p1, settings.phfe_mode),
        phfe_mav: imaging::phfe(&p1, EnergyMode::Mav),
        hfe: imaging::hfe(&image),
        coupling: hood.coupling(settings.sis_floor),
        top_hf: TopHf::of(&image),
        spectral: lc.flags,
    };
    Ok(diagnosis)
}

/// One JSONL line per `(seed, condition)` cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeometricRecord {
    pub seed: u64,
    pub condition: String,
    pub ls: Option<f64>,
    pub lc: f64,
    pub phfe: f64,
    pub hfe: f64,
    pub sis: f64,
    pub coupling: CouplingProfile,
    pub flags: Vec<RecordFlag>,
    pub top_hf: TopHf,
    pub phfe_mav: f64,
}

impl GeometricRecord {
    /// Names accepted by [`GeometricRecord::metric`].
    pub const METRICS: [&'static str; 10] =
        ["ls", "lc", "phfe", "phfe_mav", "hfe", "sis", "top5_hf", "top10_hf", "top15_hf", "top20_hf"];

    /// Checks the record-level invariants; returns the first violation.
    pub fn validate(&self) -> Result<(), String> {
        let nonneg = [("lc", self.lc), ("phfe", self.phfe), ("hfe", self.hfe), ("sis", self.sis), ("phfe_mav", self.phfe_mav)];
        for (name, v) in nonneg {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(format!("{name} = {v} must be finite and non-negative"));
            }
        }
        if let Some(ls) = self.ls {
            if !ls.is_finite() {
                return Err(format!("ls = {ls} must be finite when present"));
            }
        } else if !self.flags.contains(&RecordFlag::LsRankZero) {
            return Err("null ls without ls_rank_zero flag".into());
        }
        let c = &self.coupling;
        if c.sis != self.sis {
            return Err("sis differs from coupling.sis".into());
        }
        if !std::iter::once(&c.principal).chain(&c.similarities).all(|s| (0.0..=1.0).contains(s)) {
            return Err("coupling similarity outside [0, 1]".into());
        }
        let t = &self.top_hf;
        for v in [t.top5, t.top10, t.top15, t.top20] {
            if !(0.0..=1.0).contains(&v) {
                return Err(format!("top-k share {v} outside [0, 1]"));
            }
        }
        if !(t.top5 <= t.top10 && t.top10 <= t.top15 && t.top15 <= t.top20) {
            return Err("top-k shares must be nondecreasing in k".into());
        }
        Ok(())
    }

    /// Named scalar metric used by correlation and detection tables.
    pub fn metric(&self, name: &str) -> Option<f64> {
        match name {
            "ls" => self.ls,
            "lc" => Some(self.lc),
            "phfe" => Some(self.phfe),
            "phfe_mav" => Some(self.phfe_mav),
            "hfe" => Some(self.hfe),
            "sis" => Some(self.sis),
            "top5_hf" => Some(self.top_hf.top5),
            "top10_hf" => Some(self.top_hf.top10),
            "top15_hf" => Some(self.top_hf.top15),
            "top20_hf" => Some(self.top_hf.top20),
            _ => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::Builtin;
    use crate::geometry::sample_orthonormal_basis;

    #[test]
    fn saddle_record_is_invariant_clean_and_deterministic() {
        let g = Builtin::saddle();
        let basis = sample_orthonormal_basis(2, 2, 5).unwrap();
        let z = LatentPoint::new(vec![1.3, -0.4]).unwrap();
        let settings = DiagnosticSettings::default();
        let a = diagnose_point(&g, &basis, &z, 17, &settings).unwrap().into_record(17, "normal");
        let b = diagnose_point(&g, &basis, &z, 17, &settings).unwrap().into_record(17, "normal");
        a.validate().unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
        assert!(a.ls.is_some());
    }

    #[test]
    fn json_field_names_are_fixed() {
        let g = Builtin::saddle();
        let basis = sample_orthonormal_basis(2, 2, 5).unwrap();
        let z = LatentPoint::new(vec![1.3, -0.4]).unwrap();
        let rec = diagnose_point(&g, &basis, &z, 1, &DiagnosticSettings::default())
            .unwrap()
            .into_record(1, "ood");
        let value: serde_json::Value = serde_json::to_value(&rec).unwrap();
        for key in ["seed", "condition", "ls", "lc", "phfe", "hfe", "sis", "coupling", "flags"] {
            assert!(value.get(key).is_some(), "missing {key}");
        }
        let back: GeometricRecord = serde_json::from_value(value).unwrap();
        assert_eq!(back, rec);
    }

    #[test]
    fn zero_generator_flags_rank() {
        let g = Builtin::linear(nalgebra::DMatrix::zeros(4, 3), crate::imaging::Shape::new(1, 2, 2)).unwrap();
        let basis = sample_orthonormal_basis(3, 2, 0).unwrap();
        let z = LatentPoint::new(vec![0.1, 0.2, 0.3]).unwrap();
        let rec = diagnose_point(&g, &basis, &z, 0, &DiagnosticSettings::default())
            .unwrap()
            .into_record(0, "normal");
        assert_eq!(rec.ls, None);
        assert!(rec.flags.contains(&RecordFlag::LsRankZero));
        assert!(rec.flags.contains(&RecordFlag::DegenerateSpectrum));
        rec.validate().unwrap();
        assert_eq!(serde_json::to_value(&rec).unwrap()["ls"], serde_json::Value::Null);
    }
}
