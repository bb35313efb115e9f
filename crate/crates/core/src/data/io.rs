//! Cohort file formats: three line-oriented delimited text files, UTF-8,
//! newline-terminated, each starting with a version comment.
//!
//! - `timeseries.csv`: header `patient_id,hour,<feature names>`, then one row
//!   per patient-hour; all 24 hours must be present per patient.
//! - `entities.csv`: header `patient_id,note_id,chart_hour,category,text`;
//!   the text field is double-quoted.
//! - `labels.csv`: header `patient_id,stay_hours,died_in_icu,died_in_hospital`.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::data::{derive_labels, Cohort, PatientRecord, HOURS};
use crate::entity::{parse_entity_record, quote_field, MedicalEntity};
use crate::error::{Error, Result};
use crate::matrix::Matrix;

pub const TIMESERIES_FILE: &str = "timeseries.csv";
pub const ENTITIES_FILE: &str = "entities.csv";
pub const LABELS_FILE: &str = "labels.csv";

const TS_VERSION: &str = "# cohort-timeseries v1";
const ENT_VERSION: &str = "# cohort-entities v1";
const LABELS_VERSION: &str = "# cohort-labels v1";

/// Join bookkeeping from [`load_cohort`]: records dropped because a source
/// file had no row for them.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct JoinStats {
    pub dropped_missing_labels: usize,
    pub dropped_missing_timeseries: usize,
}

/// Writes the three cohort files into `dir`.
pub fn save_cohort(cohort: &Cohort, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let mut ts = BufWriter::new(File::create(dir.join(TIMESERIES_FILE))?);
    writeln!(ts, "{TS_VERSION}")?;
    write!(ts, "patient_id,hour")?;
    for name in &cohort.feature_names {
        write!(ts, ",{name}")?;
    }
    writeln!(ts)?;
    for rec in &cohort.records {
        for hour in 0..HOURS {
            write!(ts, "{},{hour}", rec.patient_id)?;
            for v in rec.timeseries.row(hour) {
                write!(ts, ",{v}")?;
            }
            writeln!(ts)?;
        }
    }
    ts.flush()?;

    let mut ents = BufWriter::new(File::create(dir.join(ENTITIES_FILE))?);
    writeln!(ents, "{ENT_VERSION}")?;
    writeln!(ents, "patient_id,note_id,chart_hour,category,text")?;
    for rec in &cohort.records {
        for e in &rec.entities {
            writeln!(
                ents,
                "{},{},{},{},{}",
                rec.patient_id,
                e.note_id,
                e.chart_hour,
                e.category,
                quote_field(&e.text)
            )?;
        }
    }
    ents.flush()?;

    let mut labels = BufWriter::new(File::create(dir.join(LABELS_FILE))?);
    writeln!(labels, "{LABELS_VERSION}")?;
    writeln!(labels, "patient_id,stay_hours,died_in_icu,died_in_hospital")?;
    for rec in &cohort.records {
        writeln!(
            labels,
            "{},{},{},{}",
            rec.patient_id,
            rec.stay_hours,
            rec.labels.in_icu_mortality as u8,
            rec.labels.in_hospital_mortality as u8
        )?;
    }
    labels.flush()?;
    Ok(())
}

/// Loads and joins the three files from `dir`. Patients missing a time
/// series or labels are dropped (counted in [`JoinStats`]); patients with no
/// entity rows keep an empty entity list.
pub fn load_cohort_dir(dir: &Path) -> Result<(Cohort, JoinStats)> {
    load_cohort(
        &dir.join(TIMESERIES_FILE),
        &dir.join(ENTITIES_FILE),
        &dir.join(LABELS_FILE),
    )
}

pub fn load_cohort(
    ts_path: &Path,
    entities_path: &Path,
    labels_path: &Path,
) -> Result<(Cohort, JoinStats)> {
    let (order, series, feature_names) = load_timeseries(ts_path)?;
    let labels = load_labels(labels_path)?;
    let mut entities = load_entity_file(entities_path)?;

    let mut stats = JoinStats {
        dropped_missing_labels: 0,
        dropped_missing_timeseries: labels
            .keys()
            .filter(|id| !series.contains_key(*id))
            .count(),
    };

    let mut records = Vec::with_capacity(order.len());
    for id in order {
        let ts = &series[&id];
        let Some(&(stay_hours, died_icu, died_hosp)) = labels.get(&id) else {
            stats.dropped_missing_labels += 1;
            continue;
        };
        let labels = derive_labels(stay_hours, died_icu, died_hosp)?;
        records.push(PatientRecord {
            patient_id: id.clone(),
            timeseries: ts.clone(),
            entities: entities.remove(&id).unwrap_or_default(),
            stay_hours,
            labels,
        });
    }
    let cohort = Cohort {
        records,
        feature_names,
    };
    cohort.validate()?;
    Ok((cohort, stats))
}

type TimeseriesData = (Vec<String>, HashMap<String, Matrix>, Vec<String>);

fn load_timeseries(path: &Path) -> Result<TimeseriesData> {
    let reader = BufReader::new(File::open(path)?);
    let mut lines = reader.lines().enumerate();

    let header = loop {
        match lines.next() {
            Some((_, line)) => {
                let line = line?;
                if line.starts_with('#') || line.trim().is_empty() {
                    continue;
                }
                break line;
            }
            None => return Err(Error::InvalidData("time series file has no header".into())),
        }
    };
    let cols: Vec<&str> = header.split(',').collect();
    if cols.len() < 3 || cols[0] != "patient_id" || cols[1] != "hour" {
        return Err(Error::InvalidData(format!(
            "unexpected time series header {header:?}"
        )));
    }
    let feature_names: Vec<String> = cols[2..].iter().map(|s| s.to_string()).collect();
    let f = feature_names.len();

    let mut order: Vec<String> = Vec::new();
    let mut partial: HashMap<String, (Matrix, Vec<bool>)> = HashMap::new();

    for (idx, line) in lines {
        let line = line?;
        let lineno = idx + 1;
        if line.starts_with('#') || line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != f + 2 {
            return Err(Error::Parse {
                line: lineno,
                msg: format!("expected {} fields, got {}", f + 2, fields.len()),
            });
        }
        let id = fields[0].to_string();
        let hour: usize = fields[1].parse().map_err(|_| Error::Parse {
            line: lineno,
            msg: format!("bad hour {:?}", fields[1]),
        })?;
        if hour >= HOURS {
            return Err(Error::Parse {
                line: lineno,
                msg: format!("hour {hour} out of range 0..{HOURS}"),
            });
        }
        let entry = partial.entry(id.clone()).or_insert_with(|| {
            order.push(id.clone());
            (Matrix::zeros(HOURS, f), vec![false; HOURS])
        });
        if entry.1[hour] {
            return Err(Error::Parse {
                line: lineno,
                msg: format!("duplicate (patient {id}, hour {hour})"),
            });
        }
        for (c, field) in fields[2..].iter().enumerate() {
            let v: f64 = field.parse().map_err(|_| Error::Parse {
                line: lineno,
                msg: format!("non-numeric feature {field:?} in column {}", c + 3),
            })?;
            entry.0.set(hour, c, v);
        }
        entry.1[hour] = true;
    }

    let mut series = HashMap::with_capacity(partial.len());
    for id in &order {
        let (matrix, seen) = partial.remove(id).expect("collected above");
        if let Some(missing) = seen.iter().position(|&s| !s) {
            return Err(Error::InvalidData(format!(
                "patient {id} is missing hour {missing}; complete 24-hour grids are required"
            )));
        }
        series.insert(id.clone(), matrix);
    }
    Ok((order, series, feature_names))
}

type LabelRow = (f64, bool, bool);

fn load_labels(path: &Path) -> Result<HashMap<String, LabelRow>> {
    let reader = BufReader::new(File::open(path)?);
    let mut out = HashMap::new();
    let mut saw_header = false;
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = idx + 1;
        if line.starts_with('#') || line.trim().is_empty() {
            continue;
        }
        if !saw_header {
            saw_header = true;
            if line.starts_with("patient_id") {
                continue;
            }
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 4 {
            return Err(Error::Parse {
                line: lineno,
                msg: format!("expected 4 fields, got {}", fields.len()),
            });
        }
        let stay: f64 = fields[1].parse().map_err(|_| Error::Parse {
            line: lineno,
            msg: format!("bad stay_hours {:?}", fields[1]),
        })?;
        let flag = |s: &str| -> Result<bool> {
            match s {
                "0" => Ok(false),
                "1" => Ok(true),
                other => Err(Error::Parse {
                    line: lineno,
                    msg: format!("bad flag {other:?}"),
                }),
            }
        };
        out.insert(fields[0].to_string(), (stay, flag(fields[2])?, flag(fields[3])?));
    }
    Ok(out)
}

fn load_entity_file(path: &Path) -> Result<HashMap<String, Vec<MedicalEntity>>> {
    let reader = BufReader::new(File::open(path)?);
    let mut out: HashMap<String, Vec<MedicalEntity>> = HashMap::new();
    let mut saw_header = false;
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = idx + 1;
        if line.starts_with('#') || line.trim().is_empty() {
            continue;
        }
        if !saw_header {
            saw_header = true;
            if line.starts_with("patient_id,") {
                continue;
            }
        }
        if let Some((patient_id, entity)) = parse_entity_record(&line, lineno)? {
            out.entry(patient_id).or_default().push(entity);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::synth::{synth_cohort, Prevalences, SignalSpec};
    use crate::rng::Rng;

    fn temp_dir(tag: &str) -> std::path::PathBuf {
        let dir = std::env::temp_dir().join(format!(
            "icufuse-io-{tag}-{}-{}",
            std::process::id(),
            std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .unwrap()
                .as_nanos()
        ));
        std::fs::create_dir_all(&dir).unwrap();
        dir
    }

    #[test]
    fn save_load_save_is_byte_identical() {
        let dir = temp_dir("roundtrip");
        let mut rng = Rng::new(42);
        let cohort = synth_cohort(
            60,
            5,
            &Prevalences::default(),
            &SignalSpec::default(),
            &mut rng,
        )
        .unwrap();
        save_cohort(&cohort, &dir).unwrap();
        let (loaded, stats) = load_cohort_dir(&dir).unwrap();
        assert_eq!(stats, JoinStats::default());
        assert_eq!(loaded, cohort);

        let dir2 = temp_dir("roundtrip2");
        save_cohort(&loaded, &dir2).unwrap();
        for file in [TIMESERIES_FILE, ENTITIES_FILE, LABELS_FILE] {
            let a = std::fs::read(dir.join(file)).unwrap();
            let b = std::fs::read(dir2.join(file)).unwrap();
            assert_eq!(a, b, "{file} differs after a load/save cycle");
        }
        std::fs::remove_dir_all(&dir).ok();
        std::fs::remove_dir_all(&dir2).ok();
    }

    #[test]
    fn incomplete_hour_grid_rejected() {
        let dir = temp_dir("missing-hour");
        let mut ts = String::from("# cohort-timeseries v1\npatient_id,hour,f1\n");
        for hour in 0..23 {
            ts.push_str(&format!("p1,{hour},0.5\n"));
        }
        std::fs::write(dir.join(TIMESERIES_FILE), ts).unwrap();
        std::fs::write(
            dir.join(ENTITIES_FILE),
            "# cohort-entities v1\npatient_id,note_id,chart_hour,category,text\n",
        )
        .unwrap();
        std::fs::write(
            dir.join(LABELS_FILE),
            "# cohort-labels v1\npatient_id,stay_hours,died_in_icu,died_in_hospital\np1,48,0,0\n",
        )
        .unwrap();
        let err = load_cohort_dir(&dir).unwrap_err().to_string();
        assert!(err.contains("p1") && err.contains("hour 23"), "{err}");
        std::fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn duplicate_patient_hour_rejected() {
        let dir = temp_dir("dup-hour");
        let mut ts = String::from("# cohort-timeseries v1\npatient_id,hour,f1\n");
        for hour in 0..24 {
            ts.push_str(&format!("p1,{hour},0.5\n"));
        }
        ts.push_str("p1,3,0.9\n");
        std::fs::write(dir.join(TIMESERIES_FILE), ts).unwrap();
        std::fs::write(
            dir.join(ENTITIES_FILE),
            "# cohort-entities v1\npatient_id,note_id,chart_hour,category,text\n",
        )
        .unwrap();
        std::fs::write(
            dir.join(LABELS_FILE),
            "# cohort-labels v1\npatient_id,stay_hours,died_in_icu,died_in_hospital\np1,48,0,0\n",
        )
        .unwrap();
        let err = load_cohort_dir(&dir).unwrap_err().to_string();
        assert!(err.contains("duplicate"), "{err}");
        std::fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn join_rules() {
        let dir = temp_dir("join");
        let mut ts = String::from("# cohort-timeseries v1\npatient_id,hour,f1\n");
        for id in ["p1", "p2"] {
            for hour in 0..24 {
                ts.push_str(&format!("{id},{hour},1.25\n"));
            }
        }
        std::fs::write(dir.join(TIMESERIES_FILE), ts).unwrap();
        // p1 has one entity; p2 none. p3 exists only in labels.
        std::fs::write(
            dir.join(ENTITIES_FILE),
            "# cohort-entities v1\npatient_id,note_id,chart_hour,category,text\np1,n01,4,Drug,\"heparin\"\n",
        )
        .unwrap();
        std::fs::write(
            dir.join(LABELS_FILE),
            "# cohort-labels v1\npatient_id,stay_hours,died_in_icu,died_in_hospital\np1,48,0,0\np3,90,0,1\n",
        )
        .unwrap();
        let (cohort, stats) = load_cohort_dir(&dir).unwrap();
        // p2 had no labels -> dropped; p1 retained with its entity; p3 has no
        // time series -> dropped.
        assert_eq!(cohort.len(), 1);
        assert_eq!(cohort.records[0].patient_id, "p1");
        assert_eq!(cohort.records[0].entities.len(), 1);
        assert_eq!(stats.dropped_missing_labels, 1);
        assert_eq!(stats.dropped_missing_timeseries, 1);
        std::fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn non_numeric_feature_rejected_with_location() {
        let dir = temp_dir("bad-float");
        let mut ts = String::from("# cohort-timeseries v1\npatient_id,hour,f1\n");
        ts.push_str("p1,0,abc\n");
        std::fs::write(dir.join(TIMESERIES_FILE), ts).unwrap();
        std::fs::write(dir.join(ENTITIES_FILE), "# cohort-entities v1\n").unwrap();
        std::fs::write(dir.join(LABELS_FILE), "# cohort-labels v1\n").unwrap();
        let err = load_cohort_dir(&dir).unwrap_err().to_string();
        assert!(err.contains("line 3") && err.contains("abc"), "{err}");
        std::fs::remove_dir_all(&dir).ok();
    }
}
