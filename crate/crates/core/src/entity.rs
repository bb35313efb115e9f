//! Clinical entity handling: the seven entity categories, a lexicon-based
//! stand-in tagger, and the representations the models consume (averaged
//! vector and padded entity matrix).

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use crate::embed::{tokenize, WordEmbedder};
use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Closed set of recognized entity categories.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EntityCategory {
    Drug,
    Strength,
    Form,
    Route,
    Dosage,
    Frequency,
    Duration,
}

pub const ALL_CATEGORIES: [EntityCategory; 7] = [
    EntityCategory::Drug,
    EntityCategory::Strength,
    EntityCategory::Form,
    EntityCategory::Route,
    EntityCategory::Dosage,
    EntityCategory::Frequency,
    EntityCategory::Duration,
];

impl EntityCategory {
    pub fn as_str(&self) -> &'static str {
        match self {
            EntityCategory::Drug => "Drug",
            EntityCategory::Strength => "Strength",
            EntityCategory::Form => "Form",
            EntityCategory::Route => "Route",
            EntityCategory::Dosage => "Dosage",
            EntityCategory::Frequency => "Frequency",
            EntityCategory::Duration => "Duration",
        }
    }
}

impl fmt::Display for EntityCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EntityCategory {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "Drug" => Ok(EntityCategory::Drug),
            "Strength" => Ok(EntityCategory::Strength),
            "Form" => Ok(EntityCategory::Form),
            "Route" => Ok(EntityCategory::Route),
            "Dosage" => Ok(EntityCategory::Dosage),
            "Frequency" => Ok(EntityCategory::Frequency),
            "Duration" => Ok(EntityCategory::Duration),
            other => Err(Error::InvalidData(format!("unknown entity category {other:?}"))),
        }
    }
}

/// One extracted entity mention. `chart_hour` is hours since ICU admission;
/// only mentions inside the first 24 hours are kept by the loaders.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MedicalEntity {
    pub text: String,
    pub category: EntityCategory,
    pub note_id: String,
    pub chart_hour: u32,
}

/// Padded stack of entity vectors: the first `k` rows hold embeddings in
/// chart-time order, remaining rows are zero with a false mask.
#[derive(Debug, Clone, PartialEq)]
pub struct EntityMatrix {
    pub values: Matrix,
    pub mask: Vec<bool>,
    pub k: usize,
}

impl EntityMatrix {
    pub fn k_max(&self) -> usize {
        self.values.rows()
    }

    pub fn dim(&self) -> usize {
        self.values.cols()
    }
}

/// Longest-match, left-to-right, case-insensitive phrase tagging against a
/// lowercase lexicon. Matches never overlap; at each position the longest
/// matching phrase wins.
pub fn tag_entities_lexicon(
    note: &str,
    lexicon: &HashMap<String, EntityCategory>,
    note_id: &str,
    chart_hour: u32,
) -> Vec<MedicalEntity> {
    let tokens = tokenize(note);
    if tokens.is_empty() {
        return Vec::new();
    }
    let max_len = lexicon
        .keys()
        .map(|p| p.split_whitespace().count())
        .max()
        .unwrap_or(0);
    let mut out = Vec::new();
    let mut i = 0;
    while i < tokens.len() {
        let mut matched = false;
        let upper = max_len.min(tokens.len() - i);
        for len in (1..=upper).rev() {
            let phrase = tokens[i..i + len].join(" ");
            if let Some(&category) = lexicon.get(&phrase) {
                out.push(MedicalEntity {
                    text: phrase,
                    category,
                    note_id: note_id.to_string(),
                    chart_hour,
                });
                i += len;
                matched = true;
                break;
            }
        }
        if !matched {
            i += 1;
        }
    }
    out
}

/// Tokens of the tagged entity spans only, note by note, order preserved.
pub fn entity_only_tokens(notes: &[String], lexicon: &HashMap<String, EntityCategory>) -> Vec<String> {
    let mut out = Vec::new();
    for (idx, note) in notes.iter().enumerate() {
        for ent in tag_entities_lexicon(note, lexicon, &format!("n{idx}"), 0) {
            out.extend(tokenize(&ent.text));
        }
    }
    out
}

/// Component-wise mean of the entity vectors; zero vector when there are no
/// entities.
pub fn average_representation(entities: &[MedicalEntity], embedder: &WordEmbedder) -> Vec<f64> {
    let dim = embedder.dim();
    let mut out = vec![0.0; dim];
    if entities.is_empty() {
        return out;
    }
    for ent in entities {
        let v = embedder.embed_phrase(&ent.text);
        for (o, x) in out.iter_mut().zip(&v) {
            *o += x;
        }
    }
    let inv = 1.0 / entities.len() as f64;
    for o in &mut out {
        *o *= inv;
    }
    out
}

/// Stacks entity vectors in chart-time order (ties by note id, then input
/// order), truncating to the earliest `k_max` and zero-padding the rest.
pub fn entity_matrix(
    entities: &[MedicalEntity],
    embedder: &WordEmbedder,
    k_max: usize,
) -> Result<EntityMatrix> {
    if k_max == 0 {
        return Err(Error::InvalidArgument("k_max must be positive".into()));
    }
    let dim = embedder.dim();
    let mut order: Vec<usize> = (0..entities.len()).collect();
    order.sort_by(|&a, &b| {
        let ea = &entities[a];
        let eb = &entities[b];
        (ea.chart_hour, &ea.note_id, a).cmp(&(eb.chart_hour, &eb.note_id, b))
    });

    let k = entities.len().min(k_max);
    let mut values = Matrix::zeros(k_max, dim);
    let mut mask = vec![false; k_max];
    for (row, &idx) in order.iter().take(k).enumerate() {
        let v = embedder.embed_phrase(&entities[idx].text);
        values.row_mut(row).copy_from_slice(&v);
        mask[row] = true;
    }
    Ok(EntityMatrix { values, mask, k })
}

/// Parses one `patient_id,note_id,chart_hour,category,"text"` record.
/// Returns `Ok(None)` for records outside the first 24 hours.
pub fn parse_entity_record(line: &str, lineno: usize) -> Result<Option<(String, MedicalEntity)>> {
    let fields = split_record(line, lineno)?;
    if fields.len() != 5 {
        return Err(Error::Parse {
            line: lineno,
            msg: format!("expected 5 fields, got {}", fields.len()),
        });
    }
    let chart_hour: i64 = fields[2].trim().parse().map_err(|_| Error::Parse {
        line: lineno,
        msg: format!("missing or invalid chart_hour {:?}", fields[2]),
    })?;
    let category: EntityCategory = fields[3].parse().map_err(|_| Error::Parse {
        line: lineno,
        msg: format!("unknown entity category {:?}", fields[3]),
    })?;
    if !(0..24).contains(&chart_hour) {
        return Ok(None);
    }
    Ok(Some((
        fields[0].clone(),
        MedicalEntity {
            text: fields[4].clone(),
            category,
            note_id: fields[1].clone(),
            chart_hour: chart_hour as u32,
        },
    )))
}

/// Loads entity records from a line stream, filtered to the first 24 hours.
/// Comment lines and the column header are skipped; malformed records
/// (unknown category, missing chart hour) are rejected with their line
/// number.
pub fn load_entities(lines: impl Iterator<Item = std::io::Result<String>>) -> Result<Vec<(String, MedicalEntity)>> {
    let mut out = Vec::new();
    for (idx, line) in lines.enumerate() {
        let line = line?;
        let lineno = idx + 1;
        if line.is_empty() || line.starts_with('#') || line.starts_with("patient_id,") {
            continue;
        }
        if let Some(rec) = parse_entity_record(&line, lineno)? {
            out.push(rec);
        }
    }
    Ok(out)
}

/// Comma-split with double-quote handling for the final text field. Quotes
/// inside quoted fields are doubled.
fn split_record(line: &str, lineno: usize) -> Result<Vec<String>> {
    let mut fields = Vec::new();
    let mut cur = String::new();
    let mut chars = line.chars().peekable();
    let mut in_quotes = false;
    while let Some(c) = chars.next() {
        if in_quotes {
            if c == '"' {
                if chars.peek() == Some(&'"') {
                    cur.push('"');
                    chars.next();
                } else {
                    in_quotes = false;
                }
            } else {
                cur.push(c);
            }
        } else {
            match c {
                '"' => in_quotes = true,
                ',' => {
                    fields.push(std::mem::take(&mut cur));
                }
                _ => cur.push(c),
            }
        }
    }
    if in_quotes {
        return Err(Error::Parse {
            line: lineno,
            msg: "unterminated quoted field".into(),
        });
    }
    fields.push(cur);
    Ok(fields)
}

/// Quotes a text field for the entity file format.
pub(crate) fn quote_field(text: &str) -> String {
    format!("\"{}\"", text.replace('"', "\"\""))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embed::EmbeddingTable;

    fn lexicon() -> HashMap<String, EntityCategory> {
        let mut lex = HashMap::new();
        lex.insert("magnesium".to_string(), EntityCategory::Drug);
        lex.insert("400mg/5ml".to_string(), EntityCategory::Strength);
        lex.insert("po".to_string(), EntityCategory::Route);
        lex.insert("next".to_string(), EntityCategory::Duration);
        lex.insert("next 5 days".to_string(), EntityCategory::Duration);
        lex.insert("30ml".to_string(), EntityCategory::Dosage);
        lex
    }

    #[test]
    fn tags_table_example() {
        let ents = tag_entities_lexicon("magnesium 400mg/5ml PO", &lexicon(), "n1", 3);
        assert_eq!(ents.len(), 3);
        assert_eq!(ents[0].category, EntityCategory::Drug);
        assert_eq!(ents[1].category, EntityCategory::Strength);
        assert_eq!(ents[2].category, EntityCategory::Route);
        assert_eq!(ents[2].text, "po");
    }

    #[test]
    fn empty_note_tags_nothing() {
        assert!(tag_entities_lexicon("", &lexicon(), "n1", 0).is_empty());
    }

    #[test]
    fn longest_match_wins() {
        let ents = tag_entities_lexicon("take for next 5 days", &lexicon(), "n1", 0);
        assert_eq!(ents.len(), 1);
        assert_eq!(ents[0].text, "next 5 days");
    }

    #[test]
    fn entity_only_tokens_filters_and_orders() {
        let mut lex = lexicon();
        lex.insert("magnesium".to_string(), EntityCategory::Drug);
        let notes = vec![
            "give magnesium 30ml now".to_string(),
            "po".to_string(),
        ];
        let toks = entity_only_tokens(&notes, &lex);
        assert_eq!(toks, vec!["magnesium", "30ml", "po"]);
        assert!(entity_only_tokens(&["nothing tagged here".to_string()], &lex).is_empty());
    }

    fn unit_embedder(table: &EmbeddingTable) -> WordEmbedder<'_> {
        WordEmbedder::Word2vec(table)
    }

    fn two_token_table() -> EmbeddingTable {
        let mut t = EmbeddingTable::new(2);
        t.insert("a", vec![1.0, 0.0]).unwrap();
        t.insert("b", vec![0.0, 1.0]).unwrap();
        t
    }

    fn ent(text: &str, hour: u32, note: &str) -> MedicalEntity {
        MedicalEntity {
            text: text.to_string(),
            category: EntityCategory::Drug,
            note_id: note.to_string(),
            chart_hour: hour,
        }
    }

    #[test]
    fn average_of_two_unit_vectors() {
        let table = two_token_table();
        let emb = unit_embedder(&table);
        let ents = vec![ent("a", 0, "n1"), ent("b", 1, "n1")];
        assert_eq!(average_representation(&ents, &emb), vec![0.5, 0.5]);
        // K = 1 is the identity.
        assert_eq!(average_representation(&ents[..1], &emb), vec![1.0, 0.0]);
        // K = 0 is the zero vector.
        assert_eq!(average_representation(&[], &emb), vec![0.0, 0.0]);
    }

    #[test]
    fn matrix_pads_and_masks() {
        let table = two_token_table();
        let emb = unit_embedder(&table);
        let ents = vec![ent("a", 0, "n1"), ent("b", 1, "n1")];
        let m = entity_matrix(&ents, &emb, 4).unwrap();
        assert_eq!(m.k, 2);
        assert_eq!(m.mask, vec![true, true, false, false]);
        assert_eq!(m.values.row(0), &[1.0, 0.0]);
        assert_eq!(m.values.row(2), &[0.0, 0.0]);

        let empty = entity_matrix(&[], &emb, 3).unwrap();
        assert_eq!(empty.k, 0);
        assert!(empty.mask.iter().all(|&b| !b));
        assert!(empty.values.as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn matrix_truncates_keeping_earliest() {
        let table = two_token_table();
        let emb = unit_embedder(&table);
        let mut ents = Vec::new();
        for h in (0..10).rev() {
            ents.push(ent(if h < 5 { "a" } else { "b" }, h, "n1"));
        }
        let m = entity_matrix(&ents, &emb, 5).unwrap();
        assert_eq!(m.k, 5);
        // The earliest five hours embed token "a".
        for r in 0..5 {
            assert_eq!(m.values.row(r), &[1.0, 0.0]);
        }
    }

    #[test]
    fn average_matches_masked_matrix_mean() {
        let table = two_token_table();
        let emb = unit_embedder(&table);
        let ents = vec![ent("a", 3, "n2"), ent("b", 1, "n1"), ent("a", 2, "n1")];
        let avg = average_representation(&ents, &emb);
        let m = entity_matrix(&ents, &emb, 8).unwrap();
        let mut col_mean = vec![0.0; 2];
        for r in 0..m.k {
            for (c, acc) in col_mean.iter_mut().enumerate() {
                *acc += m.values.get(r, c);
            }
        }
        for c in &mut col_mean {
            *c /= m.k as f64;
        }
        for (a, b) in avg.iter().zip(&col_mean) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn record_parsing_filters_and_rejects() {
        let line = |s: &str| Ok::<String, std::io::Error>(s.to_string());
        let records = load_entities(
            vec![
                line("p1,n01,3,Drug,\"magnesium\""),
                line("p1,n02,30,Drug,\"late drug\""),
                line("p2,n01,0,Duration,\"next 5 days\""),
            ]
            .into_iter(),
        )
        .unwrap();
        assert_eq!(records.len(), 2);
        assert_eq!(records[0].1.text, "magnesium");
        assert_eq!(records[1].1.chart_hour, 0);

        let err = load_entities(vec![line("p1,n01,3,Disease,\"flu\"")].into_iter()).unwrap_err();
        assert!(err.to_string().contains("line 1"), "{err}");

        let err = load_entities(vec![line("p1,n01,,Drug,\"x\"")].into_iter()).unwrap_err();
        assert!(err.to_string().contains("chart_hour"), "{err}");
    }

    #[test]
    fn quoted_text_survives_commas_and_quotes() {
        let rec = parse_entity_record("p1,n1,2,Dosage,\"1,5 \"\"units\"\"\"", 1)
            .unwrap()
            .unwrap();
        assert_eq!(rec.1.text, "1,5 \"units\"");
    }
}
