//! Corpus directory layout and configuration.
//!
//! A corpus directory holds `docs/<id>.txt` (one passage per line, or raw
//! text segmented into sentences depending on config), optional
//! `keyphrases/<id>.txt` sidecars (one phrase per line) and optional
//! `refs/<id>.txt` reference summaries. Configuration is a key=value text
//! file.

use crate::rng::SplitMix64;
use crate::text::{self, KeyPhrase, Passage, TextError, Weighting};
use std::collections::HashSet;
use std::fs;
use std::path::Path;

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("corpus has no documents under {0}")]
    NoDocuments(String),
    #[error("unknown document id: {0}")]
    UnknownDocument(String),
    #[error("bad config line {line}: {text}")]
    BadConfig { line: usize, text: String },
    #[error(transparent)]
    Text(#[from] TextError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Segmentation {
    Lines,
    Sentences,
}

#[derive(Debug, Clone)]
pub struct CorpusConfig {
    pub weighting: Weighting,
    pub normalize: bool,
    pub segmentation: Segmentation,
    pub stopword_path: Option<String>,
    pub kp_count: usize,
}

impl Default for CorpusConfig {
    fn default() -> Self {
        Self {
            weighting: Weighting::Tf,
            normalize: true,
            segmentation: Segmentation::Lines,
            stopword_path: None,
            kp_count: 40,
        }
    }
}

impl CorpusConfig {
    pub fn parse(contents: &str) -> Result<Self, CorpusError> {
        let mut config = Self::default();
        for (i, raw) in contents.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let bad = || CorpusError::BadConfig { line: i + 1, text: raw.to_string() };
            let (key, value) = line.split_once('=').ok_or_else(bad)?;
            match (key.trim(), value.trim()) {
                ("weighting", "tf") => config.weighting = Weighting::Tf,
                ("weighting", "tf-idf") => config.weighting = Weighting::TfIdf,
                ("normalize", "true") => config.normalize = true,
                ("normalize", "false") => config.normalize = false,
                ("segmentation", "lines") => config.segmentation = Segmentation::Lines,
                ("segmentation", "sentences") => config.segmentation = Segmentation::Sentences,
                ("stopwords", path) => config.stopword_path = Some(path.to_string()),
                ("keyphrases", n) => {
                    config.kp_count = n.parse().map_err(|_| bad())?;
                }
                _ => return Err(bad()),
            }
        }
        Ok(config)
    }

    pub fn load<P: AsRef<Path>>(path: P) -> Result<Self, CorpusError> {
        Self::parse(&fs::read_to_string(path)?)
    }

    pub fn stopwords(&self) -> Result<HashSet<String>, CorpusError> {
        match &self.stopword_path {
            None => Ok(text::default_stopwords()),
            Some(path) => Ok(fs::read_to_string(path)?
                .lines()
                .map(|l| l.trim().to_lowercase())
                .filter(|l| !l.is_empty())
                .collect()),
        }
    }
}

#[derive(Debug, Clone)]
pub struct CorpusDoc {
    pub id: String,
    pub text: String,
    pub key_phrases: Option<Vec<String>>,
    pub reference: Option<String>,
}

impl CorpusDoc {
    pub fn passages(&self, config: &CorpusConfig) -> Result<Vec<Passage>, TextError> {
        match config.segmentation {
            Segmentation::Lines => text::passages_from_lines(&self.text),
            Segmentation::Sentences => text::segment(&self.text),
        }
    }

    /// Sidecar phrases take precedence over the frequency-based extractor.
    pub fn key_phrases(
        &self,
        passages: &[Passage],
        config: &CorpusConfig,
        stopwords: &HashSet<String>,
    ) -> Vec<KeyPhrase> {
        match &self.key_phrases {
            Some(lines) => text::key_phrases_from_sidecar(&lines.join("\n")),
            None => text::extract_key_phrases_with(passages, config.kp_count, stopwords),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Corpus {
    pub docs: Vec<CorpusDoc>,
}

impl Corpus {
    pub fn doc(&self, id: &str) -> Result<&CorpusDoc, CorpusError> {
        self.docs
            .iter()
            .find(|d| d.id == id)
            .ok_or_else(|| CorpusError::UnknownDocument(id.to_string()))
    }
}

pub fn load_corpus<P: AsRef<Path>>(dir: P) -> Result<Corpus, CorpusError> {
    let dir = dir.as_ref();
    let docs_dir = dir.join("docs");
    let mut ids: Vec<String> = Vec::new();
    for entry in fs::read_dir(&docs_dir)
        .map_err(|_| CorpusError::NoDocuments(dir.display().to_string()))?
    {
        let path = entry?.path();
        if path.extension().map(|e| e == "txt").unwrap_or(false) {
            if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
                ids.push(stem.to_string());
            }
        }
    }
    if ids.is_empty() {
        return Err(CorpusError::NoDocuments(dir.display().to_string()));
    }
    ids.sort();
    let mut docs = Vec::with_capacity(ids.len());
    for id in ids {
        let text = fs::read_to_string(docs_dir.join(format!("{id}.txt")))?;
        let kp_path = dir.join("keyphrases").join(format!("{id}.txt"));
        let key_phrases = if kp_path.exists() {
            Some(
                fs::read_to_string(kp_path)?
                    .lines()
                    .map(|l| l.trim().to_string())
                    .filter(|l| !l.is_empty())
                    .collect(),
            )
        } else {
            None
        };
        let ref_path = dir.join("refs").join(format!("{id}.txt"));
        let reference = if ref_path.exists() {
            Some(fs::read_to_string(ref_path)?)
        } else {
            None
        };
        docs.push(CorpusDoc { id, text, key_phrases, reference });
    }
    Ok(Corpus { docs })
}

pub fn write_corpus<P: AsRef<Path>>(corpus: &Corpus, dir: P) -> Result<(), CorpusError> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir.join("docs"))?;
    for doc in &corpus.docs {
        fs::write(dir.join("docs").join(format!("{}.txt", doc.id)), &doc.text)?;
        if let Some(kps) = &doc.key_phrases {
            fs::create_dir_all(dir.join("keyphrases"))?;
            fs::write(
                dir.join("keyphrases").join(format!("{}.txt", doc.id)),
                kps.join("\n") + "\n",
            )?;
        }
        if let Some(reference) = &doc.reference {
            fs::create_dir_all(dir.join("refs"))?;
            fs::write(dir.join("refs").join(format!("{}.txt", doc.id)), reference)?;
        }
    }
    Ok(())
}

/// Deterministic synthetic corpus for experiments and tests.
///
/// Each document carries a private topic vocabulary. Four "important"
/// passages draw heavily from it and form a tight cluster together with the
/// sidecar key phrases; the reference summary is exactly those passages.
/// The remaining passages are filler, organized as groups of four
/// near-duplicates so the smallest pairwise distances in a document carry
/// no topical signal.
pub fn synthetic_corpus(seed: u64, num_docs: usize, passages_per_doc: usize) -> Corpus {
    let num_important = 4usize;
    let group_size = 4usize;
    let num_topic_words = 12usize;
    let mut docs = Vec::with_capacity(num_docs);
    for doc_idx in 0..num_docs {
        let mut rng = SplitMix64::new(seed ^ (doc_idx as u64).wrapping_mul(0x9E3779B97F4A7C15));
        let topic_words: Vec<String> = (0..num_topic_words)
            .map(|w| format!("topic{doc_idx}word{w}"))
            .collect();

        let mut passages: Vec<String> = Vec::new();
        for _ in 0..num_important {
            let tokens: Vec<&str> = (0..24)
                .map(|_| topic_words[(rng.next_u64() % num_topic_words as u64) as usize].as_str())
                .collect();
            passages.push(tokens.join(" "));
        }
        let num_filler = passages_per_doc.saturating_sub(num_important);
        let num_groups = num_filler.div_ceil(group_size);
        let mut filler_count = 0usize;
        'groups: for g in 0..num_groups {
            let group_words: Vec<String> =
                (0..16).map(|w| format!("fill{doc_idx}g{g}w{w}")).collect();
            for member in 0..group_size {
                if filler_count == num_filler {
                    break 'groups;
                }
                let mut tokens: Vec<String> = group_words.clone();
                // one private token per member keeps duplicates near, not exact
                tokens.push(format!("fill{doc_idx}g{g}solo{member}"));
                // vary lengths slightly to break exact distance ties
                for extra in 0..member {
                    tokens.push(format!("fill{doc_idx}g{g}pad{member}x{extra}"));
                }
                passages.push(tokens.join(" "));
                filler_count += 1;
            }
        }

        // deterministic shuffle so important passages land anywhere
        let mut order: Vec<usize> = (0..passages.len()).collect();
        for i in (1..order.len()).rev() {
            let j = (rng.next_u64() % (i as u64 + 1)) as usize;
            order.swap(i, j);
        }
        let shuffled: Vec<String> = order.iter().map(|&i| passages[i].clone()).collect();
        let reference = (0..num_important)
            .map(|orig| {
                let pos = order.iter().position(|&o| o == orig).unwrap();
                shuffled[pos].clone()
            })
            .collect::<Vec<_>>()
            .join("\n");

        let key_phrases: Vec<String> = (0..10)
            .map(|_| {
                (0..16)
                    .map(|_| {
                        topic_words[(rng.next_u64() % num_topic_words as u64) as usize].as_str()
                    })
                    .collect::<Vec<_>>()
                    .join(" ")
            })
            .collect();

        docs.push(CorpusDoc {
            id: format!("doc{doc_idx:03}"),
            text: shuffled.join("\n") + "\n",
            key_phrases: Some(key_phrases),
            reference: Some(reference + "\n"),
        });
    }
    Corpus { docs }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_parse_roundtrip() {
        let c = CorpusConfig::parse(
            "# comment\nweighting = tf-idf\nnormalize = false\nsegmentation = sentences\nkeyphrases = 12\n",
        )
        .unwrap();
        assert_eq!(c.weighting, Weighting::TfIdf);
        assert!(!c.normalize);
        assert_eq!(c.segmentation, Segmentation::Sentences);
        assert_eq!(c.kp_count, 12);
    }

    #[test]
    fn config_rejects_unknown_keys() {
        assert!(CorpusConfig::parse("nope = 3").is_err());
        assert!(CorpusConfig::parse("weighting tf").is_err());
    }

    #[test]
    fn synthetic_is_deterministic() {
        let a = synthetic_corpus(1, 3, 20);
        let b = synthetic_corpus(1, 3, 20);
        assert_eq!(a.docs.len(), 3);
        for (x, y) in a.docs.iter().zip(&b.docs) {
            assert_eq!(x.text, y.text);
            assert_eq!(x.reference, y.reference);
        }
    }

    #[test]
    fn synthetic_reference_is_subset_of_doc() {
        let corpus = synthetic_corpus(7, 2, 20);
        for doc in &corpus.docs {
            let lines: Vec<&str> = doc.text.lines().collect();
            assert_eq!(lines.len(), 20);
            for ref_line in doc.reference.as_ref().unwrap().lines() {
                assert!(lines.contains(&ref_line));
            }
        }
    }

    #[test]
    fn corpus_dir_roundtrip() {
        let dir = std::env::temp_dir().join(format!("spir-corpus-test-{}", std::process::id()));
        let corpus = synthetic_corpus(3, 2, 8);
        write_corpus(&corpus, &dir).unwrap();
        let loaded = load_corpus(&dir).unwrap();
        assert_eq!(loaded.docs.len(), 2);
        assert_eq!(loaded.docs[0].id, "doc000");
        assert_eq!(loaded.docs[0].text, corpus.docs[0].text);
        assert!(loaded.docs[0].key_phrases.is_some());
        assert!(loaded.doc("missing").is_err());
        fs::remove_dir_all(&dir).ok();
    }
}
