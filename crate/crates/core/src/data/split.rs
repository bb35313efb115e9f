//! Stratified 70/10/20 splitting: within each class of the stratification
//! task, patients are shuffled by seed and partitioned with largest-remainder
//! rounding, so every partition's class prevalence stays within one patient
//! of the cohort's.

use crate::data::{Cohort, SplitSpec};
use crate::error::{Error, Result};
use crate::rng::Rng;

pub fn stratified_split(cohort: &Cohort, spec: &SplitSpec) -> Result<(Cohort, Cohort, Cohort)> {
    spec.validate()?;
    let mut pos: Vec<usize> = Vec::new();
    let mut neg: Vec<usize> = Vec::new();
    for (i, rec) in cohort.records.iter().enumerate() {
        if rec.labels.get(spec.task) {
            pos.push(i);
        } else {
            neg.push(i);
        }
    }
    for (name, class) in [("positive", &pos), ("negative", &neg)] {
        if class.len() < 3 {
            return Err(Error::InvalidData(format!(
                "{name} class of task {} has {} members; at least 3 are needed to cover all partitions",
                spec.task.as_str(),
                class.len()
            )));
        }
    }

    let mut rng = Rng::new(spec.seed);
    let mut parts: [Vec<usize>; 3] = [Vec::new(), Vec::new(), Vec::new()];
    for class in [&mut pos, &mut neg] {
        rng.shuffle(class);
        let counts = largest_remainder(class.len(), spec.fractions);
        let mut offset = 0;
        for (p, &count) in counts.iter().enumerate() {
            parts[p].extend_from_slice(&class[offset..offset + count]);
            offset += count;
        }
    }

    let mut out = Vec::with_capacity(3);
    for part in &mut parts {
        part.sort_unstable();
        out.push(Cohort {
            records: part.iter().map(|&i| cohort.records[i].clone()).collect(),
            feature_names: cohort.feature_names.clone(),
        });
    }
    let test = out.pop().expect("three partitions");
    let val = out.pop().expect("three partitions");
    let train = out.pop().expect("three partitions");
    Ok((train, val, test))
}

/// Partition sizes for `n` items under the given fractions: floor each share,
/// then hand remaining items to the largest fractional parts (ties to the
/// earlier partition).
fn largest_remainder(n: usize, fractions: (f64, f64, f64)) -> [usize; 3] {
    let fracs = [fractions.0, fractions.1, fractions.2];
    let mut counts = [0usize; 3];
    let mut remainders = [0.0f64; 3];
    let mut assigned = 0;
    for i in 0..3 {
        let share = n as f64 * fracs[i];
        counts[i] = share.floor() as usize;
        remainders[i] = share - share.floor();
        assigned += counts[i];
    }
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| remainders[b].partial_cmp(&remainders[a]).expect("finite"));
    let mut left = n - assigned;
    for &i in &order {
        if left == 0 {
            break;
        }
        counts[i] += 1;
        left -= 1;
    }
    counts
}
