//! Tolerant extraction of candidate solutions from free-form model output.

use thiserror::Error;

use crate::search_space::{Genotype, NUM_EDGES, NUM_OPERATIONS};

/// No usable array in a response. Variants carry the closest offending
/// fragment for logging.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("no bracketed integer array found")]
    NoArrayFound,
    #[error("array '{fragment}' has {length} entries")]
    WrongLength { fragment: String, length: usize },
    #[error("array '{fragment}' contains out-of-range value {value}")]
    OutOfRange { fragment: String, value: i64 },
}

/// Scans `response` for bracketed comma-separated integer lists and returns
/// the first one with exactly `num_edges` entries, all in `[0, num_ops)`.
/// Surrounding prose, code fences and whitespace are ignored; lists that are
/// not pure integers are skipped. When nothing qualifies, the error reports
/// the nearest miss: out-of-range beats wrong-length beats nothing found.
pub fn parse_solution(
    response: &str,
    num_edges: usize,
    num_ops: i64,
) -> Result<Vec<i64>, ParseError> {
    let mut wrong_length: Option<ParseError> = None;
    let mut out_of_range: Option<ParseError> = None;

    let bytes = response.as_bytes();
    let mut open = None;
    for (i, &b) in bytes.iter().enumerate() {
        match b {
            b'[' => open = Some(i),
            b']' => {
                let Some(start) = open.take() else { continue };
                let fragment = &response[start..=i];
                let Some(values) = integer_list(&response[start + 1..i]) else {
                    continue;
                };
                if values.len() != num_edges {
                    wrong_length.get_or_insert_with(|| ParseError::WrongLength {
                        fragment: fragment.to_string(),
                        length: values.len(),
                    });
                    continue;
                }
                match values.iter().find(|&&v| !(0..num_ops).contains(&v)) {
                    None => return Ok(values),
                    Some(&bad) => {
                        out_of_range.get_or_insert_with(|| ParseError::OutOfRange {
                            fragment: fragment.to_string(),
                            value: bad,
                        });
                    }
                }
            }
            _ => {}
        }
    }
    Err(out_of_range
        .or(wrong_length)
        .unwrap_or(ParseError::NoArrayFound))
}

/// Parses the contents of one bracket span as a comma-separated integer
/// list; `None` when any token is not an integer.
fn integer_list(inner: &str) -> Option<Vec<i64>> {
    let mut values = Vec::new();
    for token in inner.split(',') {
        values.push(token.trim().parse::<i64>().ok()?);
    }
    Some(values)
}

/// [`parse_solution`] for the native search space, validated into a
/// [`Genotype`].
pub fn parse_genotype(response: &str) -> Result<Genotype, ParseError> {
    let values = parse_solution(response, NUM_EDGES, NUM_OPERATIONS as i64)?;
    Ok(Genotype::from_indices(&values).expect("parse_solution checked length and range"))
}
