//! Document modelling: passage segmentation, tokenization, key-phrase
//! provisioning and the term-by-column compact matrix whose columns are
//! passages followed by key phrases treated as pseudo-passages.

use std::collections::{HashMap, HashSet};

#[derive(Debug, thiserror::Error)]
pub enum TextError {
    #[error("empty document")]
    EmptyDocument,
    #[error("empty passage list")]
    EmptyPassageList,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Passage {
    pub index: usize,
    pub text: String,
    pub is_artificial: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KeyPhrase {
    pub text: String,
    pub score: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Weighting {
    Tf,
    TfIdf,
}

/// Sentence-final abbreviations that must not split a passage. Single
/// letters (initials, "e.g.", "i.e.") are handled separately.
const ABBREVIATIONS: &[&str] = &[
    "mr", "mrs", "ms", "dr", "prof", "sr", "jr", "st", "vs", "etc", "no", "inc", "ltd", "co",
    "fig", "al", "approx",
];

/// Splits raw text into sentences. A terminator (. ? !) ends a passage when
/// it is followed by whitespace and an uppercase letter or digit, or by end
/// of input, and the preceding word is not a known abbreviation.
pub fn segment(document: &str) -> Result<Vec<Passage>, TextError> {
    if document.trim().is_empty() {
        return Err(TextError::EmptyDocument);
    }
    let chars: Vec<char> = document.chars().collect();
    let mut passages = Vec::new();
    let mut start = 0usize;
    let mut i = 0usize;
    while i < chars.len() {
        let c = chars[i];
        if c == '.' || c == '?' || c == '!' {
            let boundary = if c == '.' {
                !is_abbreviation(&chars[start..i]) && next_starts_sentence(&chars, i + 1)
            } else {
                next_starts_sentence(&chars, i + 1)
            };
            if boundary {
                let text: String = chars[start..=i].iter().collect();
                let text = text.trim().to_string();
                if !text.is_empty() {
                    passages.push(text);
                }
                start = i + 1;
            }
        }
        i += 1;
    }
    let tail: String = chars[start..].iter().collect();
    let tail = tail.trim().to_string();
    if !tail.is_empty() {
        passages.push(tail);
    }
    Ok(passages
        .into_iter()
        .enumerate()
        .map(|(index, text)| Passage { index, text, is_artificial: false })
        .collect())
}

fn next_starts_sentence(chars: &[char], mut i: usize) -> bool {
    // trailing quotes/brackets ride along with the terminator
    while i < chars.len() && (chars[i] == '"' || chars[i] == '\'' || chars[i] == ')') {
        i += 1;
    }
    if i >= chars.len() {
        return true;
    }
    if !chars[i].is_whitespace() {
        return false;
    }
    while i < chars.len() && chars[i].is_whitespace() {
        i += 1;
    }
    if i >= chars.len() {
        return true;
    }
    chars[i].is_uppercase() || chars[i].is_ascii_digit()
}

fn is_abbreviation(before: &[char]) -> bool {
    let word: String = before
        .iter()
        .rev()
        .take_while(|c| c.is_alphabetic())
        .collect::<Vec<_>>()
        .into_iter()
        .rev()
        .collect();
    if word.is_empty() {
        return false;
    }
    let lower = word.to_lowercase();
    ABBREVIATIONS.contains(&lower.as_str())
}

/// One passage per nonempty line, in file order.
pub fn passages_from_lines(document: &str) -> Result<Vec<Passage>, TextError> {
    let lines: Vec<&str> = document.lines().filter(|l| !l.trim().is_empty()).collect();
    if lines.is_empty() {
        return Err(TextError::EmptyDocument);
    }
    Ok(lines
        .iter()
        .enumerate()
        .map(|(index, line)| Passage {
            index,
            text: line.trim().to_string(),
            is_artificial: false,
        })
        .collect())
}

/// Lowercased alphanumeric word tokens; everything else is a separator.
/// No stemming, no stopword removal.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|s| !s.is_empty())
        .map(|s| s.to_lowercase())
        .collect()
}

pub fn default_stopwords() -> HashSet<String> {
    [
        "a", "an", "the", "and", "or", "but", "of", "in", "on", "at", "to", "for", "from", "by",
        "with", "about", "as", "is", "are", "was", "were", "be", "been", "being", "it", "its",
        "this", "that", "these", "those", "he", "she", "they", "we", "you", "i", "his", "her",
        "their", "our", "your", "not", "no", "do", "does", "did", "have", "has", "had", "will",
        "would", "can", "could", "than", "then", "so", "if", "into", "over", "under", "up",
        "down", "out", "there", "here", "when", "where", "which", "who", "whom", "what", "why",
        "how", "all", "any", "both", "each", "more", "most", "other", "some", "such",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect()
}

/// Frequency-based key-phrase provider: candidate 1..3-grams scored by
/// occurrence count times phrase length, phrases with a stopword at either
/// boundary dropped. Ties resolve by first occurrence.
pub fn extract_key_phrases(passages: &[Passage], count: usize) -> Vec<KeyPhrase> {
    extract_key_phrases_with(passages, count, &default_stopwords())
}

pub fn extract_key_phrases_with(
    passages: &[Passage],
    count: usize,
    stopwords: &HashSet<String>,
) -> Vec<KeyPhrase> {
    if count == 0 {
        return Vec::new();
    }
    let mut freq: HashMap<String, usize> = HashMap::new();
    let mut first_seen: HashMap<String, usize> = HashMap::new();
    let mut order = 0usize;
    for passage in passages {
        let tokens = tokenize(&passage.text);
        for n in 1..=3usize {
            if tokens.len() < n {
                continue;
            }
            for window in tokens.windows(n) {
                if stopwords.contains(&window[0]) || stopwords.contains(&window[n - 1]) {
                    continue;
                }
                let phrase = window.join(" ");
                *freq.entry(phrase.clone()).or_insert(0) += 1;
                first_seen.entry(phrase).or_insert_with(|| {
                    order += 1;
                    order
                });
            }
        }
    }
    let mut candidates: Vec<(String, usize)> = freq.into_iter().collect();
    candidates.sort_by(|(pa, fa), (pb, fb)| {
        let sa = fa * (pa.split(' ').count());
        let sb = fb * (pb.split(' ').count());
        sb.cmp(&sa).then_with(|| first_seen[pa].cmp(&first_seen[pb]))
    });
    candidates
        .into_iter()
        .take(count)
        .map(|(text, f)| {
            let words = text.split(' ').count();
            KeyPhrase { text, score: (f * words) as f64 }
        })
        .collect()
}

/// Pass-through provider reading one phrase per line, file order preserved.
pub fn key_phrases_from_sidecar(contents: &str) -> Vec<KeyPhrase> {
    let lines: Vec<&str> = contents.lines().filter(|l| !l.trim().is_empty()).collect();
    let total = lines.len();
    lines
        .iter()
        .enumerate()
        .map(|(i, line)| KeyPhrase {
            text: line.trim().to_string(),
            score: (total - i) as f64,
        })
        .collect()
}

/// Term-weight matrix over N passage columns followed by M_kp key-phrase
/// columns. Rows are distinct terms in first-occurrence order.
#[derive(Debug, Clone)]
pub struct CompactMatrix {
    terms: Vec<String>,
    term_index: HashMap<String, usize>,
    columns: Vec<Vec<f64>>,
    num_passages: usize,
    column_meta: Vec<Passage>,
}

impl CompactMatrix {
    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn num_passages(&self) -> usize {
        self.num_passages
    }

    pub fn num_keyphrases(&self) -> usize {
        self.columns.len() - self.num_passages
    }

    pub fn num_columns(&self) -> usize {
        self.columns.len()
    }

    pub fn columns(&self) -> &[Vec<f64>] {
        &self.columns
    }

    pub fn column(&self, j: usize) -> &[f64] {
        &self.columns[j]
    }

    pub fn terms(&self) -> &[String] {
        &self.terms
    }

    pub fn term_row(&self, term: &str) -> Option<usize> {
        self.term_index.get(term).copied()
    }

    pub fn column_meta(&self) -> &[Passage] {
        &self.column_meta
    }

    /// Columns re-bucketed into a fixed dimension via FNV-1a term hashing,
    /// so one SBE parameter set can serve columns from any vocabulary.
    pub fn feature_hashed(&self, dim: usize, normalize: bool) -> Vec<Vec<f64>> {
        let buckets: Vec<usize> = self
            .terms
            .iter()
            .map(|t| (fnv1a64(t.as_bytes()) % dim as u64) as usize)
            .collect();
        self.columns
            .iter()
            .map(|col| {
                let mut out = vec![0.0; dim];
                for (row, &v) in col.iter().enumerate() {
                    out[buckets[row]] += v;
                }
                if normalize {
                    l2_normalize(&mut out);
                }
                out
            })
            .collect()
    }
}

pub(crate) fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h = 0xcbf29ce484222325u64;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

fn l2_normalize(v: &mut [f64]) {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        for x in v.iter_mut() {
            *x /= norm;
        }
    }
}

pub fn build_compact_matrix(
    passages: &[Passage],
    key_phrases: &[KeyPhrase],
    weighting: Weighting,
    normalize: bool,
) -> Result<CompactMatrix, TextError> {
    if passages.is_empty() {
        return Err(TextError::EmptyPassageList);
    }
    let num_passages = passages.len();
    let mut column_meta: Vec<Passage> = passages.to_vec();
    for (i, kp) in key_phrases.iter().enumerate() {
        column_meta.push(Passage {
            index: num_passages + i,
            text: kp.text.clone(),
            is_artificial: true,
        });
    }

    let mut terms: Vec<String> = Vec::new();
    let mut term_index: HashMap<String, usize> = HashMap::new();
    let token_lists: Vec<Vec<String>> = column_meta
        .iter()
        .map(|p| tokenize(&p.text))
        .collect();
    for tokens in &token_lists {
        for tok in tokens {
            if !term_index.contains_key(tok) {
                term_index.insert(tok.clone(), terms.len());
                terms.push(tok.clone());
            }
        }
    }

    let t = terms.len();
    let c = column_meta.len();
    let mut columns: Vec<Vec<f64>> = vec![vec![0.0; t]; c];
    for (j, tokens) in token_lists.iter().enumerate() {
        for tok in tokens {
            columns[j][term_index[tok]] += 1.0;
        }
    }

    if weighting == Weighting::TfIdf {
        // smoothed idf = ln(1 + C/df), kept positive so no row vanishes
        let mut df = vec![0usize; t];
        for col in &columns {
            for (row, &v) in col.iter().enumerate() {
                if v > 0.0 {
                    df[row] += 1;
                }
            }
        }
        for col in columns.iter_mut() {
            for (row, v) in col.iter_mut().enumerate() {
                if *v > 0.0 {
                    *v *= (1.0 + c as f64 / df[row] as f64).ln();
                }
            }
        }
    }

    if normalize {
        for col in columns.iter_mut() {
            l2_normalize(col);
        }
    }

    Ok(CompactMatrix { terms, term_index, columns, num_passages, column_meta })
}
