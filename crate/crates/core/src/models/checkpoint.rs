//! Versioned text checkpoints: configuration plus every parameter block.
//! Floats are written in shortest round-trip form, so load-after-save
//! restores parameters bit for bit.

use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::rng::Rng;

use super::{build, Model, ModelConfig, ModelKind};

const FORMAT_HEADER: &str = "# model-checkpoint v1";
const VALUES_PER_LINE: usize = 8;

pub fn save_checkpoint(model: &Model, mut writer: impl Write) -> Result<()> {
    let cfg = model.config();
    writeln!(writer, "{FORMAT_HEADER}")?;
    writeln!(writer, "kind={}", model.kind().as_str())?;
    writeln!(writer, "input_dim={}", cfg.input_dim)?;
    writeln!(writer, "seq_len={}", cfg.seq_len)?;
    writeln!(writer, "hidden_dim={}", cfg.hidden_dim)?;
    writeln!(writer, "fc_dim_baseline={}", cfg.fc_dim_baseline)?;
    writeln!(writer, "fc_dim_proposed={}", cfg.fc_dim_proposed)?;
    writeln!(
        writer,
        "conv_filters={},{},{}",
        cfg.conv_filters[0], cfg.conv_filters[1], cfg.conv_filters[2]
    )?;
    writeln!(writer, "kernel_size={}", cfg.kernel_size)?;
    writeln!(writer, "dropout={}", cfg.dropout)?;
    writeln!(writer, "l2_scale={}", cfg.l2_scale)?;
    writeln!(writer, "embed_dim={}", cfg.embed_dim)?;
    writeln!(writer, "k_max={}", cfg.k_max)?;
    let params = model.flat_params();
    writeln!(writer, "params={}", params.len())?;
    for chunk in params.chunks(VALUES_PER_LINE) {
        let mut first = true;
        for v in chunk {
            if !first {
                write!(writer, " ")?;
            }
            write!(writer, "{v}")?;
            first = false;
        }
        writeln!(writer)?;
    }
    Ok(())
}

pub fn load_checkpoint(reader: impl BufRead) -> Result<Model> {
    let mut lines = reader.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::InvalidData("empty checkpoint".into()))?;
    let header = header?;
    if header != FORMAT_HEADER {
        return Err(Error::Parse {
            line: 1,
            msg: format!("expected {FORMAT_HEADER:?}, got {header:?}"),
        });
    }

    let mut kind: Option<ModelKind> = None;
    let mut cfg = ModelConfig::default();
    let mut expected_params: Option<usize> = None;
    let mut params: Vec<f64> = Vec::new();

    for (idx, line) in lines {
        let line = line?;
        let lineno = idx + 1;
        if line.is_empty() {
            continue;
        }
        if expected_params.is_some() {
            for field in line.split_whitespace() {
                params.push(field.parse::<f64>().map_err(|_| Error::Parse {
                    line: lineno,
                    msg: format!("non-numeric parameter {field:?}"),
                })?);
            }
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| Error::Parse {
            line: lineno,
            msg: format!("expected key=value, got {line:?}"),
        })?;
        let parse_usize = |v: &str| {
            v.parse::<usize>().map_err(|_| Error::Parse {
                line: lineno,
                msg: format!("bad integer {v:?} for {key}"),
            })
        };
        let parse_f64 = |v: &str| {
            v.parse::<f64>().map_err(|_| Error::Parse {
                line: lineno,
                msg: format!("bad float {v:?} for {key}"),
            })
        };
        match key {
            "kind" => kind = Some(ModelKind::parse(value)?),
            "input_dim" => cfg.input_dim = parse_usize(value)?,
            "seq_len" => cfg.seq_len = parse_usize(value)?,
            "hidden_dim" => cfg.hidden_dim = parse_usize(value)?,
            "fc_dim_baseline" => cfg.fc_dim_baseline = parse_usize(value)?,
            "fc_dim_proposed" => cfg.fc_dim_proposed = parse_usize(value)?,
            "conv_filters" => {
                let parts: Vec<&str> = value.split(',').collect();
                if parts.len() != 3 {
                    return Err(Error::Parse {
                        line: lineno,
                        msg: "conv_filters needs three values".into(),
                    });
                }
                for (i, p) in parts.iter().enumerate() {
                    cfg.conv_filters[i] = parse_usize(p)?;
                }
            }
            "kernel_size" => cfg.kernel_size = parse_usize(value)?,
            "dropout" => cfg.dropout = parse_f64(value)?,
            "l2_scale" => cfg.l2_scale = parse_f64(value)?,
            "embed_dim" => cfg.embed_dim = parse_usize(value)?,
            "k_max" => cfg.k_max = parse_usize(value)?,
            "params" => expected_params = Some(parse_usize(value)?),
            other => {
                return Err(Error::Parse {
                    line: lineno,
                    msg: format!("unknown checkpoint key {other:?}"),
                })
            }
        }
    }

    let kind = kind.ok_or_else(|| Error::InvalidData("checkpoint missing kind".into()))?;
    let expected =
        expected_params.ok_or_else(|| Error::InvalidData("checkpoint missing params".into()))?;
    if params.len() != expected {
        return Err(Error::InvalidData(format!(
            "checkpoint declares {expected} parameters but carries {}",
            params.len()
        )));
    }
    let mut model = build(kind, &cfg, &mut Rng::new(0))?;
    model.set_flat_params(&params)?;
    Ok(model)
}
