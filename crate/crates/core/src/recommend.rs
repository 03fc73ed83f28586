//! Query embedding and top-k cosine search.
//!
//! A query method is embedded as the arithmetic mean of the stored vectors of
//! its callee names; unknown callees are skipped rather than imputed, so the
//! query stays a mean over known functions. Candidates come from an
//! exhaustive linear scan of the table, ranked by cosine similarity with ties
//! broken by ascending name.

use std::collections::BTreeSet;

use serde::Serialize;

use crate::embed::EmbeddingTable;
use crate::{Error, Result};

/// One ranked candidate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Candidate {
    pub name: String,
    pub score: f64,
}

/// Ranked recommendation output.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RecommendationList {
    #[serde(rename = "candidates")]
    pub entries: Vec<Candidate>,
    #[serde(skip)]
    pub k: usize,
    #[serde(rename = "skipped")]
    pub skipped_callees: Vec<String>,
}

/// Mean of the table vectors of the given callee names. Names absent from the
/// table are returned as skipped; if none are known the query is an error.
pub fn query_embedding(
    table: &EmbeddingTable,
    callee_names: &BTreeSet<String>,
) -> Result<(Vec<f64>, Vec<String>)> {
    let mut mean = vec![0.0; table.dim()];
    let mut known = 0usize;
    let mut skipped = Vec::new();
    for name in callee_names {
        match table.get(name) {
            Some(vector) => {
                known += 1;
                for (m, x) in mean.iter_mut().zip(vector) {
                    *m += x;
                }
            }
            None => skipped.push(name.clone()),
        }
    }
    if known == 0 {
        return Err(Error::NoKnownCallees);
    }
    let inv = 1.0 / known as f64;
    for m in &mut mean {
        *m *= inv;
    }
    Ok((mean, skipped))
}

/// Cosine similarity, clamped into [-1, 1]. Zero-norm input is an error.
pub fn cosine(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            actual: b.len(),
        });
    }
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return Err(Error::ZeroNorm);
    }
    Ok((dot / (na * nb)).clamp(-1.0, 1.0))
}

/// The `k` table names most cosine-similar to `query`, excluding `exclude`.
/// Zero-norm table rows cannot be scored and are skipped.
pub fn top_k(
    table: &EmbeddingTable,
    query: &[f64],
    k: usize,
    exclude: &BTreeSet<String>,
) -> Result<RecommendationList> {
    if query.iter().all(|&x| x == 0.0) {
        return Err(Error::ZeroNorm);
    }
    let mut scored: Vec<(f64, &str)> = Vec::with_capacity(table.len());
    for (name, vector) in table.iter() {
        if exclude.contains(name) {
            continue;
        }
        match cosine(query, vector) {
            Ok(score) => scored.push((score, name)),
            Err(Error::ZeroNorm) => continue,
            Err(e) => return Err(e),
        }
    }
    scored.sort_by(|a, b| b.0.total_cmp(&a.0).then_with(|| a.1.cmp(b.1)));
    scored.truncate(k);
    Ok(RecommendationList {
        entries: scored
            .into_iter()
            .map(|(score, name)| Candidate {
                name: name.to_string(),
                score,
            })
            .collect(),
        k,
        skipped_callees: Vec::new(),
    })
}

/// Full recommendation for a callee name set: query embedding, then top-k.
pub fn recommend(
    table: &EmbeddingTable,
    callee_names: &BTreeSet<String>,
    k: usize,
) -> Result<RecommendationList> {
    let (query, skipped) = query_embedding(table, callee_names)?;
    let mut list = top_k(table, &query, k, &BTreeSet::new())?;
    list.skipped_callees = skipped;
    Ok(list)
}
