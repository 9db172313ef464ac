//! ROUGE-1 scoring and the experiment harness: plaintext metric baselines
//! and leakage x bits-per-coefficient sweeps over any corpus in the
//! documented directory format.

use crate::centrality::{self, ColumnSet, Metric, SupportSetConfig};
use crate::corpus::{Corpus, CorpusConfig, CorpusError};
use crate::protocol::{self, PrivateMapping, ProtocolError};
use crate::rng::derive_seed;
use crate::sbe::{self, SbeError, SbeParams};
use crate::text::{self, TextError};
use std::collections::HashMap;

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("document {0} has no reference summary")]
    MissingReference(String),
    #[error("trials must be at least 1")]
    NoTrials,
    #[error("bad CSV at line {line}: {text}")]
    BadCsv { line: usize, text: String },
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Text(#[from] TextError),
    #[error(transparent)]
    Centrality(#[from] centrality::CentralityError),
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
    #[error(transparent)]
    Sbe(#[from] SbeError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RougeScore {
    pub recall: f64,
    pub precision: f64,
    pub f1: f64,
    pub matched: usize,
    pub reference_total: usize,
    pub candidate_total: usize,
}

/// Unigram overlap with clipped counts. Tokenization matches the matrix
/// pipeline: lowercased, punctuation stripped, no stemming or stopwording.
pub fn rouge1(candidate: &str, reference: &str) -> RougeScore {
    let cand_tokens = text::tokenize(candidate);
    let ref_tokens = text::tokenize(reference);
    let mut cand_counts: HashMap<&str, usize> = HashMap::new();
    for t in &cand_tokens {
        *cand_counts.entry(t).or_insert(0) += 1;
    }
    let mut ref_counts: HashMap<&str, usize> = HashMap::new();
    for t in &ref_tokens {
        *ref_counts.entry(t).or_insert(0) += 1;
    }
    let matched: usize = ref_counts
        .iter()
        .map(|(tok, &rc)| rc.min(cand_counts.get(tok).copied().unwrap_or(0)))
        .sum();
    let recall = if ref_tokens.is_empty() { 0.0 } else { matched as f64 / ref_tokens.len() as f64 };
    let precision = if cand_tokens.is_empty() {
        0.0
    } else {
        matched as f64 / cand_tokens.len() as f64
    };
    let f1 = if recall + precision == 0.0 {
        0.0
    } else {
        2.0 * recall * precision / (recall + precision)
    };
    RougeScore {
        recall,
        precision,
        f1,
        matched,
        reference_total: ref_tokens.len(),
        candidate_total: cand_tokens.len(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SummarySize {
    /// Fixed number of passages.
    Fixed(usize),
    /// Fraction of the document's passage count, at least one.
    Ratio(f64),
}

impl SummarySize {
    fn resolve(&self, num_passages: usize) -> usize {
        match *self {
            SummarySize::Fixed(n) => n.max(1),
            SummarySize::Ratio(r) => ((num_passages as f64 * r).round() as usize).max(1),
        }
    }
}

#[derive(Debug, Clone)]
pub struct BaselineReport {
    pub per_doc: Vec<(String, f64)>,
    pub mean: f64,
}

/// Plaintext retrieval scored against the reference summaries; the reported
/// score is ROUGE-1 F1.
pub fn run_baseline(
    corpus: &Corpus,
    config: &CorpusConfig,
    metric: Metric,
    size: SummarySize,
    support: &SupportSetConfig,
) -> Result<BaselineReport, EvalError> {
    let stopwords = config.stopwords()?;
    let mut per_doc = Vec::with_capacity(corpus.docs.len());
    for doc in &corpus.docs {
        let reference = doc
            .reference
            .as_ref()
            .ok_or_else(|| EvalError::MissingReference(doc.id.clone()))?;
        let passages = doc.passages(config)?;
        let key_phrases = doc.key_phrases(&passages, config, &stopwords);
        let matrix =
            text::build_compact_matrix(&passages, &key_phrases, config.weighting, config.normalize)?;
        let n = size.resolve(passages.len());
        let ranked = centrality::retrieve(
            &ColumnSet::Real(matrix.columns()),
            passages.len(),
            n,
            metric,
            support,
        )?;
        let candidate = ranked
            .indices()
            .iter()
            .map(|&i| passages[i].text.as_str())
            .collect::<Vec<_>>()
            .join("\n");
        per_doc.push((doc.id.clone(), rouge1(&candidate, reference).f1));
    }
    let mean = per_doc.iter().map(|(_, s)| s).sum::<f64>() / per_doc.len().max(1) as f64;
    Ok(BaselineReport { per_doc, mean })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub leakage_target: f64,
    pub bpc: f64,
    pub achieved_leakage: f64,
    pub delta_used: f64,
    pub trials: usize,
    pub rouge1_mean: f64,
    pub rouge1_std: f64,
}

#[derive(Debug, Clone)]
pub struct SweepConfig {
    pub leakage_targets: Vec<f64>,
    pub bpc_values: Vec<f64>,
    pub trials: usize,
    pub seed: u64,
    pub gamma: f64,
    pub sigma: f64,
    pub size: SummarySize,
    pub support: SupportSetConfig,
}

/// One sweep cell per (leakage target, bpc): per document, calibrate delta
/// on the plaintext pairwise euclidean distances, generate per-document
/// params (L = vocabulary size, M = bpc * L), run the hashed protocol end to
/// end and score ROUGE-1 against the reference. Trial seeds derive from the
/// master seed, so serial and parallel execution agree.
pub fn run_sweep(
    corpus: &Corpus,
    config: &CorpusConfig,
    sweep: &SweepConfig,
) -> Result<Vec<SweepRow>, EvalError> {
    if sweep.trials == 0 {
        return Err(EvalError::NoTrials);
    }
    let stopwords = config.stopwords()?;

    // per-document artifacts shared by every cell
    struct DocPrep {
        matrix: text::CompactMatrix,
        passages: Vec<text::Passage>,
        distances: Vec<f64>,
        reference: String,
    }
    let mut preps = Vec::with_capacity(corpus.docs.len());
    for doc in &corpus.docs {
        let reference = doc
            .reference
            .as_ref()
            .ok_or_else(|| EvalError::MissingReference(doc.id.clone()))?
            .clone();
        let passages = doc.passages(config)?;
        let key_phrases = doc.key_phrases(&passages, config, &stopwords);
        let matrix =
            text::build_compact_matrix(&passages, &key_phrases, config.weighting, config.normalize)?;
        let dmat = centrality::pairwise_distances(&ColumnSet::Real(matrix.columns()), Metric::Euclidean)?;
        let mut distances = Vec::new();
        for i in 0..dmat.len() {
            for j in i + 1..dmat.len() {
                distances.push(dmat[i][j]);
            }
        }
        preps.push(DocPrep { matrix, passages, distances, reference });
    }

    let mut rows = Vec::new();
    for (ti, &target) in sweep.leakage_targets.iter().enumerate() {
        for (bi, &bpc) in sweep.bpc_values.iter().enumerate() {
            let mut deltas = Vec::with_capacity(preps.len());
            let mut achieved = Vec::with_capacity(preps.len());
            for prep in &preps {
                let delta = sbe::calibrate_delta(&prep.distances, target, sweep.sigma, sweep.gamma)?;
                achieved.push(sbe::achieved_leakage(&prep.distances, sweep.sigma, delta, sweep.gamma));
                deltas.push(delta);
            }
            let mut trial_means = Vec::with_capacity(sweep.trials);
            for trial in 0..sweep.trials {
                let mut doc_scores = Vec::with_capacity(preps.len());
                for (di, prep) in preps.iter().enumerate() {
                    let label = ((ti as u64) << 48)
                        ^ ((bi as u64) << 32)
                        ^ ((trial as u64) << 16)
                        ^ di as u64;
                    let seed = derive_seed(sweep.seed, label);
                    let l = prep.matrix.num_terms();
                    let m = ((bpc * l as f64).round() as usize).max(1);
                    let params = SbeParams::generate(seed, l, m, deltas[di], sweep.sigma)?;
                    let n = sweep.size.resolve(prep.passages.len());
                    let mut mapping = PrivateMapping::default();
                    let bundle = protocol::alice_prepare_matrix(
                        &corpus.docs[di].id,
                        &prep.matrix,
                        &params,
                        n,
                        &sweep.support,
                        None,
                        &mut mapping,
                    )?;
                    let result = protocol::bob_retrieve(&bundle)?;
                    let resolved = protocol::alice_resolve(&result, &mapping)?;
                    let candidate = resolved
                        .iter()
                        .map(|p| p.text.as_str())
                        .collect::<Vec<_>>()
                        .join("\n");
                    doc_scores.push(rouge1(&candidate, &prep.reference).f1);
                }
                trial_means.push(doc_scores.iter().sum::<f64>() / doc_scores.len().max(1) as f64);
            }
            let mean = trial_means.iter().sum::<f64>() / trial_means.len() as f64;
            let std = if trial_means.len() < 2 {
                0.0
            } else {
                let var = trial_means.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>()
                    / (trial_means.len() - 1) as f64;
                var.sqrt()
            };
            rows.push(SweepRow {
                leakage_target: target,
                bpc,
                achieved_leakage: achieved.iter().sum::<f64>() / achieved.len().max(1) as f64,
                delta_used: deltas.iter().sum::<f64>() / deltas.len().max(1) as f64,
                trials: sweep.trials,
                rouge1_mean: mean,
                rouge1_std: std,
            });
        }
    }
    Ok(rows)
}

pub const SWEEP_CSV_HEADER: &str =
    "leakage_target,bpc,achieved_leakage,delta,trials,rouge1_mean,rouge1_std";

pub fn emit_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from(SWEEP_CSV_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.leakage_target, r.bpc, r.achieved_leakage, r.delta_used, r.trials, r.rouge1_mean, r.rouge1_std
        ));
    }
    out
}

pub fn parse_csv(contents: &str) -> Result<Vec<SweepRow>, EvalError> {
    let mut lines = contents.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header == SWEEP_CSV_HEADER => {}
        other => {
            return Err(EvalError::BadCsv {
                line: 1,
                text: other.map(|(_, l)| l.to_string()).unwrap_or_default(),
            })
        }
    }
    let mut rows = Vec::new();
    for (i, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let bad = || EvalError::BadCsv { line: i + 1, text: line.to_string() };
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 7 {
            return Err(bad());
        }
        rows.push(SweepRow {
            leakage_target: fields[0].parse().map_err(|_| bad())?,
            bpc: fields[1].parse().map_err(|_| bad())?,
            achieved_leakage: fields[2].parse().map_err(|_| bad())?,
            delta_used: fields[3].parse().map_err(|_| bad())?,
            trials: fields[4].parse().map_err(|_| bad())?,
            rouge1_mean: fields[5].parse().map_err(|_| bad())?,
            rouge1_std: fields[6].parse().map_err(|_| bad())?,
        });
    }
    Ok(rows)
}
