//! Label conversion and inter-rater agreement for the human consistency
//! check: sentiment score pairs become three-way labels, and two label
//! sequences are compared with Cohen's kappa.

use std::collections::HashMap;
use std::hash::Hash;
use std::path::Path;

use crate::error::Error;
use crate::Result;

/// Collapses a pair of sentiment scores into a relative label:
/// `-1` when the first score trails by at least one point, `1` when it leads
/// by at least one point, `0` otherwise. Both boundaries are inclusive.
pub fn score_pair_to_label(s1: f64, s2: f64) -> i8 {
    let diff = s1 - s2;
    if diff <= -1.0 {
        -1
    } else if diff >= 1.0 {
        1
    } else {
        0
    }
}

/// Cohen's kappa between two label sequences of equal length.
///
/// Kappa is `(p_o - p_e) / (1 - p_e)` with observed agreement `p_o` and
/// chance agreement `p_e` from the raters' marginals. When both raters used
/// a single identical class, chance agreement is one and the quotient is
/// undefined; that degenerate perfect agreement is reported as `1.0`.
pub fn cohen_kappa<T: Eq + Hash>(a: &[T], b: &[T]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Input(format!(
            "label sequences differ in length: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    if a.is_empty() {
        return Err(Error::Input("cannot compute kappa over empty label sequences".into()));
    }
    let n = a.len();
    let mut agree = 0usize;
    let mut count_a: HashMap<&T, usize> = HashMap::new();
    let mut count_b: HashMap<&T, usize> = HashMap::new();
    for (x, y) in a.iter().zip(b) {
        if x == y {
            agree += 1;
        }
        *count_a.entry(x).or_default() += 1;
        *count_b.entry(y).or_default() += 1;
    }
    // Chance agreement as an exact integer ratio so the degenerate case is
    // detected without floating-point slack.
    let chance_numer: u128 = count_a
        .iter()
        .map(|(label, &ca)| ca as u128 * count_b.get(label).copied().unwrap_or(0) as u128)
        .sum();
    let n_squared = (n as u128) * (n as u128);
    if chance_numer == n_squared {
        // Both raters answered one identical class everywhere.
        return Ok(1.0);
    }
    let p_o = agree as f64 / n as f64;
    let p_e = chance_numer as f64 / n_squared as f64;
    Ok((p_o - p_e) / (1.0 - p_e))
}

/// Reads one rater's labels from a CSV stream. The header either names a
/// `label` column holding -1/0/1 directly, or `s1` and `s2` score columns
/// that are collapsed through [`score_pair_to_label`]. Rows are numbered
/// from 1, the header being row 0.
pub fn read_labels(reader: impl std::io::Read) -> Result<Vec<i8>> {
    let mut csv_reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = csv_reader
        .headers()
        .map_err(|e| Error::Ingestion { row: 0, message: e.to_string() })?
        .clone();
    let find = |name: &str| headers.iter().position(|h| h.eq_ignore_ascii_case(name));
    let label_column = find("label");
    let score_columns = find("s1").zip(find("s2"));
    if label_column.is_none() && score_columns.is_none() {
        return Err(Error::Ingestion {
            row: 0,
            message: "header must name a label column, or s1 and s2 score columns".into(),
        });
    }
    let mut labels = Vec::new();
    for (index, record) in csv_reader.records().enumerate() {
        let row = index + 1;
        let record = record.map_err(|e| Error::Ingestion { row, message: e.to_string() })?;
        let number = |column: usize| -> Result<f64> {
            let field = record.get(column).ok_or_else(|| Error::Ingestion {
                row,
                message: format!("missing column {}", column + 1),
            })?;
            field
                .parse::<f64>()
                .map_err(|_| Error::Ingestion { row, message: format!("bad number {field:?}") })
        };
        let label = if let Some(column) = label_column {
            let value = number(column)?;
            if value != -1.0 && value != 0.0 && value != 1.0 {
                return Err(Error::Ingestion {
                    row,
                    message: format!("label {value} is not -1, 0 or 1"),
                });
            }
            value as i8
        } else {
            let (first, second) = score_columns.expect("checked above");
            score_pair_to_label(number(first)?, number(second)?)
        };
        labels.push(label);
    }
    Ok(labels)
}

pub fn load_labels(path: impl AsRef<Path>) -> Result<Vec<i8>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_labels(file)
}
