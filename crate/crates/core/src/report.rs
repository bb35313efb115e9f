//! Experiment reports: a machine-readable key=value document plus a rendered
//! comparison table with one row per (model, embedding) cell and
//! "mean ± std" metric columns, best value per column marked.

use std::io::{BufRead, Write};

use crate::data::TaskKind;
use crate::error::{Error, Result};
use crate::metrics::{MetricSummary, MetricsReport};
use crate::models::ModelKind;
use crate::protocol::EmbeddingKind;

const FORMAT_HEADER: &str = "# experiment-report v1";

#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub model: ModelKind,
    pub embedding: Option<EmbeddingKind>,
    pub metrics: MetricsReport,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentReport {
    pub task: TaskKind,
    pub seeds: Vec<u64>,
    pub f1_threshold: f64,
    pub rows: Vec<ReportRow>,
}

fn embedding_str(e: Option<EmbeddingKind>) -> &'static str {
    e.map(|e| e.as_str()).unwrap_or("-")
}

pub fn write_report(report: &ExperimentReport, mut writer: impl Write) -> Result<()> {
    writeln!(writer, "{FORMAT_HEADER}")?;
    writeln!(writer, "task={}", report.task.as_str())?;
    let seeds: Vec<String> = report.seeds.iter().map(|s| s.to_string()).collect();
    writeln!(writer, "seeds={}", seeds.join(","))?;
    writeln!(writer, "f1_threshold={}", report.f1_threshold)?;
    writeln!(writer, "rows={}", report.rows.len())?;
    for (i, row) in report.rows.iter().enumerate() {
        writeln!(writer, "row.{i}.model={}", row.model.as_str())?;
        writeln!(writer, "row.{i}.embedding={}", embedding_str(row.embedding))?;
        for (name, summary) in [
            ("auroc", &row.metrics.auroc),
            ("auprc", &row.metrics.auprc),
            ("f1", &row.metrics.f1),
        ] {
            writeln!(writer, "row.{i}.{name}.mean={}", summary.mean)?;
            writeln!(writer, "row.{i}.{name}.std={}", summary.std)?;
            let per_seed: Vec<String> = summary.per_seed.iter().map(|v| v.to_string()).collect();
            writeln!(writer, "row.{i}.{name}.seeds={}", per_seed.join(" "))?;
        }
    }
    Ok(())
}

pub fn parse_report(reader: impl BufRead) -> Result<ExperimentReport> {
    let mut lines = reader.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::InvalidData("empty report".into()))?;
    let header = header?;
    if header != FORMAT_HEADER {
        return Err(Error::Parse {
            line: 1,
            msg: format!("expected {FORMAT_HEADER:?}, got {header:?}"),
        });
    }

    let mut task = None;
    let mut seeds: Vec<u64> = Vec::new();
    let mut f1_threshold = 0.5;
    let mut rows: Vec<PartialRow> = Vec::new();

    for (idx, line) in lines {
        let line = line?;
        let lineno = idx + 1;
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| Error::Parse {
            line: lineno,
            msg: format!("expected key=value, got {line:?}"),
        })?;
        match key {
            "task" => task = Some(TaskKind::parse(value)?),
            "seeds" => {
                seeds = value
                    .split(',')
                    .filter(|s| !s.is_empty())
                    .map(|s| {
                        s.parse::<u64>().map_err(|_| Error::Parse {
                            line: lineno,
                            msg: format!("bad seed {s:?}"),
                        })
                    })
                    .collect::<Result<_>>()?;
            }
            "f1_threshold" => {
                f1_threshold = value.parse().map_err(|_| Error::Parse {
                    line: lineno,
                    msg: format!("bad threshold {value:?}"),
                })?;
            }
            "rows" => {
                let n: usize = value.parse().map_err(|_| Error::Parse {
                    line: lineno,
                    msg: format!("bad row count {value:?}"),
                })?;
                rows = (0..n).map(|_| (None, None, [None, None, None])).collect();
            }
            _ if key.starts_with("row.") => {
                parse_row_field(&mut rows, key, value, lineno)?;
            }
            other => {
                return Err(Error::Parse {
                    line: lineno,
                    msg: format!("unknown report key {other:?}"),
                })
            }
        }
    }

    let task = task.ok_or_else(|| Error::InvalidData("report missing task".into()))?;
    let mut out_rows = Vec::with_capacity(rows.len());
    for (i, (model, embedding, metrics)) in rows.into_iter().enumerate() {
        let model = model.ok_or_else(|| Error::InvalidData(format!("row {i} missing model")))?;
        let [auroc, auprc, f1] = metrics;
        let missing = |name: &str| Error::InvalidData(format!("row {i} missing {name}"));
        out_rows.push(ReportRow {
            model,
            embedding,
            metrics: MetricsReport {
                auroc: auroc.ok_or_else(|| missing("auroc"))?,
                auprc: auprc.ok_or_else(|| missing("auprc"))?,
                f1: f1.ok_or_else(|| missing("f1"))?,
            },
        });
    }
    Ok(ExperimentReport {
        task,
        seeds,
        f1_threshold,
        rows: out_rows,
    })
}

type PartialRow = (Option<ModelKind>, Option<EmbeddingKind>, [Option<MetricSummary>; 3]);

fn parse_row_field(rows: &mut [PartialRow], key: &str, value: &str, lineno: usize) -> Result<()> {
    let parts: Vec<&str> = key.split('.').collect();
    let bad = |msg: String| Error::Parse { line: lineno, msg };
    if parts.len() < 3 {
        return Err(bad(format!("malformed row key {key:?}")));
    }
    let idx: usize = parts[1]
        .parse()
        .map_err(|_| bad(format!("bad row index {:?}", parts[1])))?;
    let row = rows
        .get_mut(idx)
        .ok_or_else(|| bad(format!("row index {idx} out of range")))?;
    match (parts[2], parts.len()) {
        ("model", 3) => row.0 = Some(ModelKind::parse(value)?),
        ("embedding", 3) => {
            row.1 = if value == "-" {
                None
            } else {
                Some(EmbeddingKind::parse(value)?)
            };
        }
        (metric @ ("auroc" | "auprc" | "f1"), 4) => {
            let slot = match metric {
                "auroc" => 0,
                "auprc" => 1,
                _ => 2,
            };
            let summary = row.2[slot].get_or_insert_with(|| MetricSummary {
                mean: 0.0,
                std: 0.0,
                per_seed: Vec::new(),
            });
            let parse_f = |v: &str| {
                v.parse::<f64>()
                    .map_err(|_| bad(format!("bad float {v:?} in {key}")))
            };
            match parts[3] {
                "mean" => summary.mean = parse_f(value)?,
                "std" => summary.std = parse_f(value)?,
                "seeds" => {
                    summary.per_seed = value
                        .split_whitespace()
                        .map(parse_f)
                        .collect::<Result<_>>()?;
                }
                other => return Err(bad(format!("unknown metric field {other:?}"))),
            }
        }
        _ => return Err(bad(format!("unknown row key {key:?}"))),
    }
    Ok(())
}

/// Plain-text comparison table. Metric cells read "MM.MM ± S.SSS" (mean as a
/// percentage, standard deviation in raw units); the best mean per metric
/// column is starred when the table has more than one row.
pub fn render_table(report: &ExperimentReport) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "task: {}   seeds: {}   f1 threshold: {}\n\n",
        report.task.as_str(),
        report.seeds.len(),
        report.f1_threshold
    ));

    let best = |pick: fn(&ReportRow) -> f64| -> Option<usize> {
        if report.rows.len() < 2 {
            return None;
        }
        report
            .rows
            .iter()
            .enumerate()
            .max_by(|(_, a), (_, b)| pick(a).partial_cmp(&pick(b)).expect("finite means"))
            .map(|(i, _)| i)
    };
    let best_auroc = best(|r| r.metrics.auroc.mean);
    let best_auprc = best(|r| r.metrics.auprc.mean);
    let best_f1 = best(|r| r.metrics.f1.mean);

    out.push_str(&format!(
        "{:<15} {:<10} {:>16} {:>16} {:>16}\n",
        "model", "embedding", "AUROC", "AUPRC", "F1"
    ));
    for (i, row) in report.rows.iter().enumerate() {
        let cell = |summary: &MetricSummary, starred: bool| {
            let text = format!("{:.2} ± {:.3}", summary.mean * 100.0, summary.std);
            if starred {
                format!("*{text}")
            } else {
                text
            }
        };
        out.push_str(&format!(
            "{:<15} {:<10} {:>16} {:>16} {:>16}\n",
            row.model.as_str(),
            embedding_str(row.embedding),
            cell(&row.metrics.auroc, best_auroc == Some(i)),
            cell(&row.metrics.auprc, best_auprc == Some(i)),
            cell(&row.metrics.f1, best_f1 == Some(i)),
        ));
    }
    out
}
