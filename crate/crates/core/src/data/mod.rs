//! Cohort schema: one record per ICU stay with 24 hourly feature rows, the
//! extracted entities, the stay length, and the four binary outcome labels.

pub mod io;
pub mod split;
pub mod synth;

pub use io::{load_cohort, load_cohort_dir, save_cohort, JoinStats};
pub use split::stratified_split;
pub use synth::{synth_cohort, synth_lexicon, Prevalences, SignalSpec};

use crate::entity::MedicalEntity;
use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Hourly rows per record: the first day after ICU admission.
pub const HOURS: usize = 24;

/// Minimum stay length (hours) for inclusion.
pub const MIN_STAY_HOURS: f64 = 30.0;

/// The four binary outcomes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TaskKind {
    InHospitalMortality,
    InIcuMortality,
    LosGt3,
    LosGt7,
}

pub const ALL_TASKS: [TaskKind; 4] = [
    TaskKind::InHospitalMortality,
    TaskKind::InIcuMortality,
    TaskKind::LosGt3,
    TaskKind::LosGt7,
];

impl TaskKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            TaskKind::InHospitalMortality => "in_hospital",
            TaskKind::InIcuMortality => "in_icu",
            TaskKind::LosGt3 => "los_gt3",
            TaskKind::LosGt7 => "los_gt7",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "in_hospital" => Ok(TaskKind::InHospitalMortality),
            "in_icu" => Ok(TaskKind::InIcuMortality),
            "los_gt3" => Ok(TaskKind::LosGt3),
            "los_gt7" => Ok(TaskKind::LosGt7),
            other => Err(Error::InvalidArgument(format!("unknown task {other:?}"))),
        }
    }
}

/// The four labels of one record.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Labels {
    pub in_hospital_mortality: bool,
    pub in_icu_mortality: bool,
    pub los_gt3: bool,
    pub los_gt7: bool,
}

impl Labels {
    pub fn get(&self, task: TaskKind) -> bool {
        match task {
            TaskKind::InHospitalMortality => self.in_hospital_mortality,
            TaskKind::InIcuMortality => self.in_icu_mortality,
            TaskKind::LosGt3 => self.los_gt3,
            TaskKind::LosGt7 => self.los_gt7,
        }
    }
}

/// Derives the four labels from the stay length and the mortality flags.
/// Length-of-stay thresholds are strict: exactly 72 hours is not "longer than
/// 3 days".
pub fn derive_labels(stay_hours: f64, died_in_icu: bool, died_in_hospital: bool) -> Result<Labels> {
    if !stay_hours.is_finite() || stay_hours < MIN_STAY_HOURS {
        return Err(Error::InvalidData(format!(
            "stay_hours {stay_hours} below inclusion minimum {MIN_STAY_HOURS}"
        )));
    }
    if died_in_icu && !died_in_hospital {
        return Err(Error::InvalidData(
            "inconsistent labels: death in ICU implies death in hospital".into(),
        ));
    }
    Ok(Labels {
        in_hospital_mortality: died_in_hospital,
        in_icu_mortality: died_in_icu,
        los_gt3: stay_hours > 72.0,
        los_gt7: stay_hours > 168.0,
    })
}

/// One ICU stay.
#[derive(Debug, Clone, PartialEq)]
pub struct PatientRecord {
    pub patient_id: String,
    /// `HOURS x F` hourly aggregated features.
    pub timeseries: Matrix,
    pub entities: Vec<MedicalEntity>,
    pub stay_hours: f64,
    pub labels: Labels,
}

/// A set of records with a shared feature schema.
#[derive(Debug, Clone, PartialEq)]
pub struct Cohort {
    pub records: Vec<PatientRecord>,
    pub feature_names: Vec<String>,
}

impl Cohort {
    pub fn feature_count(&self) -> usize {
        self.feature_names.len()
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        let f = self.feature_count();
        let mut seen = std::collections::HashSet::new();
        for rec in &self.records {
            if !seen.insert(&rec.patient_id) {
                return Err(Error::InvalidData(format!(
                    "duplicate patient id {}",
                    rec.patient_id
                )));
            }
            if rec.timeseries.rows() != HOURS || rec.timeseries.cols() != f {
                return Err(Error::InvalidData(format!(
                    "patient {}: time series is {}, expected {HOURS}x{f}",
                    rec.patient_id,
                    rec.timeseries.shape_string()
                )));
            }
            rec.timeseries
                .validate_finite(&format!("patient {} time series", rec.patient_id))?;
            if rec.labels.in_icu_mortality && !rec.labels.in_hospital_mortality {
                return Err(Error::InvalidData(format!(
                    "patient {}: ICU mortality without hospital mortality",
                    rec.patient_id
                )));
            }
        }
        Ok(())
    }

    /// Prevalence of the positive class for a task.
    pub fn prevalence(&self, task: TaskKind) -> f64 {
        if self.records.is_empty() {
            return 0.0;
        }
        let pos = self.records.iter().filter(|r| r.labels.get(task)).count();
        pos as f64 / self.records.len() as f64
    }
}

/// Split fractions, the task the split stratifies on, and the shuffle seed.
#[derive(Debug, Clone)]
pub struct SplitSpec {
    pub fractions: (f64, f64, f64),
    pub task: TaskKind,
    pub seed: u64,
}

impl SplitSpec {
    pub fn new(task: TaskKind, seed: u64) -> Self {
        SplitSpec {
            fractions: (0.70, 0.10, 0.20),
            task,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let (a, b, c) = self.fractions;
        if a <= 0.0 || b < 0.0 || c <= 0.0 {
            return Err(Error::InvalidArgument(
                "split fractions must be positive (validation may be zero)".into(),
            ));
        }
        if (a + b + c - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidArgument(format!(
                "split fractions must sum to 1, got {}",
                a + b + c
            )));
        }
        Ok(())
    }
}
