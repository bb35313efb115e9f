//! Synthetic cohort generator. Real ICU data is credential-gated, so
//! experiments run on generated cohorts with the same schema: hourly feature
//! grids, entity mentions drawn from a category-stratified lexicon, and stay
//! lengths/mortality flags hitting configurable prevalences.
//!
//! Two independently controllable signal channels tie features to one chosen
//! task label: a drift on a subset of time-series features, and a set of
//! "marker" entity phrases whose presence correlates with the label. Either
//! strength can be zero, including the regime where entities carry label
//! signal the time series lacks.

use std::collections::HashMap;

use crate::data::{derive_labels, Cohort, PatientRecord, TaskKind, HOURS};
use crate::entity::{EntityCategory, MedicalEntity};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::rng::Rng;

/// Target positive rates for the four tasks. Defaults: in-hospital mortality
/// 10.5%, in-ICU mortality 7%, stay over 3 days 43.2%, stay over 7 days 7.9%.
#[derive(Debug, Clone, PartialEq)]
pub struct Prevalences {
    pub in_hospital: f64,
    pub in_icu: f64,
    pub los_gt3: f64,
    pub los_gt7: f64,
}

impl Default for Prevalences {
    fn default() -> Self {
        Prevalences {
            in_hospital: 0.105,
            in_icu: 0.07,
            los_gt3: 0.432,
            los_gt7: 0.079,
        }
    }
}

impl Prevalences {
    pub fn get(&self, task: TaskKind) -> f64 {
        match task {
            TaskKind::InHospitalMortality => self.in_hospital,
            TaskKind::InIcuMortality => self.in_icu,
            TaskKind::LosGt3 => self.los_gt3,
            TaskKind::LosGt7 => self.los_gt7,
        }
    }

    pub fn set(&mut self, task: TaskKind, value: f64) {
        match task {
            TaskKind::InHospitalMortality => self.in_hospital = value,
            TaskKind::InIcuMortality => self.in_icu = value,
            TaskKind::LosGt3 => self.los_gt3 = value,
            TaskKind::LosGt7 => self.los_gt7 = value,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for task in crate::data::ALL_TASKS {
            let p = self.get(task);
            if !(0.0..1.0).contains(&p) || p == 0.0 {
                return Err(Error::InvalidArgument(format!(
                    "prevalence for {} must be in (0, 1), got {p}",
                    task.as_str()
                )));
            }
        }
        if self.in_icu > self.in_hospital {
            return Err(Error::InvalidArgument(
                "in-ICU mortality prevalence cannot exceed in-hospital".into(),
            ));
        }
        if self.los_gt7 > self.los_gt3 {
            return Err(Error::InvalidArgument(
                "stay>7d prevalence cannot exceed stay>3d".into(),
            ));
        }
        Ok(())
    }
}

/// Strength of each label-signal channel, and which task label drives them.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalSpec {
    pub task: TaskKind,
    /// Drift added to the leading `ts_signal_features` features of positive
    /// patients; 0 removes all label information from the time series.
    pub ts_strength: f64,
    pub ts_signal_features: usize,
    /// Probability lift of marker entities for positive patients; 0 makes
    /// marker presence independent of the label.
    pub entity_strength: f64,
    /// Background marker rate for either class.
    pub marker_base_rate: f64,
}

impl Default for SignalSpec {
    fn default() -> Self {
        SignalSpec {
            task: TaskKind::InHospitalMortality,
            ts_strength: 0.5,
            ts_signal_features: 4,
            entity_strength: 0.5,
            marker_base_rate: 0.05,
        }
    }
}

impl SignalSpec {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.ts_strength) || !(0.0..=1.0).contains(&self.entity_strength)
        {
            return Err(Error::InvalidArgument(
                "signal strengths must be in [0, 1]".into(),
            ));
        }
        if !(0.0..1.0).contains(&self.marker_base_rate) {
            return Err(Error::InvalidArgument(
                "marker base rate must be in [0, 1)".into(),
            ));
        }
        Ok(())
    }
}

/// Marker phrases: vasopressor drugs whose presence the generator can tie to
/// the label.
pub const MARKER_PHRASES: [&str; 3] = ["norepinephrine", "vasopressin", "epinephrine"];

const DRUGS: [&str; 18] = [
    "magnesium",
    "aspirin",
    "heparin",
    "insulin",
    "metoprolol",
    "furosemide",
    "potassium",
    "morphine",
    "fentanyl",
    "propofol",
    "vancomycin",
    "ceftriaxone",
    "warfarin",
    "lisinopril",
    "amiodarone",
    "pantoprazole",
    "acetaminophen",
    "lorazepam",
];
const STRENGTHS: [&str; 8] = [
    "400mg/5ml", "10mg", "25mg", "5mg/ml", "100mcg", "2g", "500mg", "40meq",
];
const FORMS: [&str; 6] = ["suspension", "tablet", "capsule", "solution", "patch", "cream"];
const ROUTES: [&str; 6] = ["po", "iv", "im", "sc", "ng", "inhaled"];
const DOSAGES: [&str; 6] = ["30ml", "1 tablet", "2 tablets", "10 units", "0.5ml", "one capsule"];
const FREQUENCIES: [&str; 8] = ["bid", "tid", "qid", "daily", "prn", "q6h", "q8h", "nightly"];
const DURATIONS: [&str; 6] = [
    "next 5 days",
    "x 3 days",
    "for 2 weeks",
    "x 5 days",
    "for 24 hours",
    "next 48 hours",
];

/// Category sampling weights (cumulative), roughly matching how often each
/// category shows up in clinical notes: drugs dominate.
const CATEGORY_CDF: [(EntityCategory, f64); 7] = [
    (EntityCategory::Drug, 0.40),
    (EntityCategory::Route, 0.55),
    (EntityCategory::Strength, 0.67),
    (EntityCategory::Dosage, 0.79),
    (EntityCategory::Frequency, 0.90),
    (EntityCategory::Form, 0.95),
    (EntityCategory::Duration, 1.0),
];

fn phrases(category: EntityCategory) -> &'static [&'static str] {
    match category {
        EntityCategory::Drug => &DRUGS,
        EntityCategory::Strength => &STRENGTHS,
        EntityCategory::Form => &FORMS,
        EntityCategory::Route => &ROUTES,
        EntityCategory::Dosage => &DOSAGES,
        EntityCategory::Frequency => &FREQUENCIES,
        EntityCategory::Duration => &DURATIONS,
    }
}

/// Phrase-to-category map over the whole generator vocabulary, markers
/// included. Doubles as a lexicon for the stand-in tagger.
pub fn synth_lexicon() -> HashMap<String, EntityCategory> {
    let mut lex = HashMap::new();
    for cat in crate::entity::ALL_CATEGORIES {
        for phrase in phrases(cat) {
            lex.insert(phrase.to_string(), cat);
        }
    }
    for marker in MARKER_PHRASES {
        lex.insert(marker.to_string(), EntityCategory::Drug);
    }
    lex
}

/// Generates a cohort of `n_patients` records with `feature_count` hourly
/// features. Deterministic for a fixed generator state.
pub fn synth_cohort(
    n_patients: usize,
    feature_count: usize,
    prevalences: &Prevalences,
    signal: &SignalSpec,
    rng: &mut Rng,
) -> Result<Cohort> {
    if n_patients < 20 {
        return Err(Error::InvalidArgument(format!(
            "need at least 20 patients, got {n_patients}"
        )));
    }
    if feature_count == 0 {
        return Err(Error::InvalidArgument("feature_count must be positive".into()));
    }
    prevalences.validate()?;
    signal.validate()?;
    for task in crate::data::ALL_TASKS {
        let expected = prevalences.get(task) * n_patients as f64;
        if expected < 3.0 {
            return Err(Error::InvalidArgument(format!(
                "prevalence {} for {} yields under 3 expected positives at n={n_patients}",
                prevalences.get(task),
                task.as_str()
            )));
        }
    }

    let feature_names: Vec<String> = (0..feature_count).map(|i| format!("f{:03}", i + 1)).collect();

    // Exact label quotas, shuffled over patients, so generated prevalences
    // land on target up to rounding at any n and seed.
    let quota = |p: f64| (p * n_patients as f64).round() as usize;
    let n_hosp = quota(prevalences.in_hospital);
    let n_icu = quota(prevalences.in_icu).min(n_hosp);
    let n_los3 = quota(prevalences.los_gt3);
    let n_los7 = quota(prevalences.los_gt7).min(n_los3);

    // 2 = died in ICU (and hospital), 1 = died in hospital only, 0 = survived.
    let mut mortality: Vec<u8> = (0..n_patients)
        .map(|i| {
            if i < n_icu {
                2
            } else if i < n_hosp {
                1
            } else {
                0
            }
        })
        .collect();
    rng.shuffle(&mut mortality);
    // 2 = stay > 168h, 1 = 72h < stay <= 168h, 0 = stay <= 72h.
    let mut stay_class: Vec<u8> = (0..n_patients)
        .map(|i| {
            if i < n_los7 {
                2
            } else if i < n_los3 {
                1
            } else {
                0
            }
        })
        .collect();
    rng.shuffle(&mut stay_class);

    let mut records = Vec::with_capacity(n_patients);
    for i in 0..n_patients {
        let patient_id = format!("p{i:05}");
        let died_in_hospital = mortality[i] >= 1;
        let died_in_icu = mortality[i] == 2;
        let stay_hours = draw_stay_hours(stay_class[i], rng);
        let labels = derive_labels(stay_hours, died_in_icu, died_in_hospital)?;
        let positive = labels.get(signal.task);

        let timeseries = draw_timeseries(feature_count, positive, signal, rng);
        let entities = draw_entities(positive, signal, rng);

        records.push(PatientRecord {
            patient_id,
            timeseries,
            entities,
            stay_hours,
            labels,
        });
    }

    let cohort = Cohort {
        records,
        feature_names,
    };
    cohort.validate()?;
    Ok(cohort)
}

/// Stay length within the band its class dictates; always at least the
/// 30-hour inclusion minimum.
fn draw_stay_hours(stay_class: u8, rng: &mut Rng) -> f64 {
    let raw = match stay_class {
        2 => rng.uniform(170.0, 420.0),
        1 => rng.uniform(73.0, 168.0),
        _ => rng.uniform(30.0, 72.0),
    };
    // One decimal keeps the files tidy without touching the thresholds.
    (raw * 10.0).round() / 10.0
}

/// First-order autoregressive noise per feature, plus a ramp on the leading
/// signal features for positive patients.
fn draw_timeseries(
    feature_count: usize,
    positive: bool,
    signal: &SignalSpec,
    rng: &mut Rng,
) -> Matrix {
    let mut ts = Matrix::zeros(HOURS, feature_count);
    for f in 0..feature_count {
        let offset = 0.5 * rng.gaussian();
        let mut x = offset + 0.3 * rng.gaussian();
        for t in 0..HOURS {
            if t > 0 {
                x = 0.2 * offset + 0.8 * x + 0.3 * rng.gaussian();
            }
            let mut value = x;
            if positive && f < signal.ts_signal_features {
                value += signal.ts_strength * 1.5 * t as f64 / (HOURS - 1) as f64;
            }
            ts.set(t, f, value);
        }
    }
    ts
}

fn draw_entities(positive: bool, signal: &SignalSpec, rng: &mut Rng) -> Vec<MedicalEntity> {
    // Notes first: each has one chart time inside the first day.
    let n_notes = rng.range_inclusive(1, 5);
    let mut note_hours: Vec<u32> = (0..n_notes).map(|_| rng.below(HOURS) as u32).collect();
    note_hours.sort_unstable();

    let mut entities = Vec::new();
    let push = |text: &str, category: EntityCategory, rng: &mut Rng, out: &mut Vec<MedicalEntity>| {
        let note = rng.below(n_notes);
        out.push(MedicalEntity {
            text: text.to_string(),
            category,
            note_id: format!("n{note:02}"),
            chart_hour: note_hours[note],
        });
    };

    let fillers = rng.range_inclusive(8, 40);
    for _ in 0..fillers {
        let u = rng.next_f64();
        let category = CATEGORY_CDF
            .iter()
            .find(|(_, cum)| u < *cum)
            .map(|(c, _)| *c)
            .unwrap_or(EntityCategory::Duration);
        let list = phrases(category);
        let phrase = list[rng.below(list.len())];
        push(phrase, category, rng, &mut entities);
    }

    let marker_prob = if positive {
        signal.marker_base_rate + signal.entity_strength * (0.9 - signal.marker_base_rate)
    } else {
        signal.marker_base_rate
    };
    if rng.bernoulli(marker_prob) {
        let count = rng.range_inclusive(1, 2);
        for _ in 0..count {
            let phrase = MARKER_PHRASES[rng.below(MARKER_PHRASES.len())];
            push(phrase, EntityCategory::Drug, rng, &mut entities);
        }
    }

    entities.sort_by(|a, b| (a.chart_hour, &a.note_id).cmp(&(b.chart_hour, &b.note_id)));
    entities
}

/// True when any marker phrase appears among the record's entities.
pub fn has_marker(record: &PatientRecord) -> bool {
    record
        .entities
        .iter()
        .any(|e| MARKER_PHRASES.contains(&e.text.as_str()))
}
