//! Labeled text corpora: JSONL ingestion, deterministic splits, mixed-text
//! construction and synthetic corpora drawn from explicit token
//! distributions.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::str::FromStr;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{self, streams};

pub const HGT: u8 = 0;
pub const MGT: u8 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Original,
    Mixed,
    Paraphrase,
    Synthetic,
}

impl Variant {
    pub fn as_str(self) -> &'static str {
        match self {
            Variant::Original => "original",
            Variant::Mixed => "mixed",
            Variant::Paraphrase => "paraphrase",
            Variant::Synthetic => "synthetic",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "original" => Ok(Variant::Original),
            "mixed" => Ok(Variant::Mixed),
            "paraphrase" => Ok(Variant::Paraphrase),
            "synthetic" => Ok(Variant::Synthetic),
            other => Err(Error::Validation(format!("unknown variant `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Val,
    Test,
}

/// One labeled text. Label 0 is human-written, 1 is machine-generated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TextSample {
    pub id: String,
    pub text: String,
    pub sentences: Vec<String>,
    pub label: u8,
    pub source_model: String,
    pub domain: String,
    pub variant: Variant,
    pub mix_ratio: f64,
}

impl TextSample {
    pub fn new(id: impl Into<String>, text: impl Into<String>, label: u8) -> Self {
        let text = text.into();
        TextSample {
            id: id.into(),
            sentences: segment_sentences(&text),
            text,
            label,
            source_model: String::new(),
            domain: String::new(),
            variant: Variant::Original,
            mix_ratio: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.label > 1 {
            return Err(Error::Validation(format!(
                "sample `{}`: label {} not in {{0,1}}",
                self.id, self.label
            )));
        }
        if !(0.0..=1.0).contains(&self.mix_ratio) {
            return Err(Error::Validation(format!(
                "sample `{}`: mix_ratio {} outside [0,1]",
                self.id, self.mix_ratio
            )));
        }
        if self.variant == Variant::Mixed && (self.label != MGT || self.mix_ratio <= 0.0) {
            return Err(Error::Validation(format!(
                "sample `{}`: mixed samples must be labeled 1 with mix_ratio > 0",
                self.id
            )));
        }
        Ok(())
    }
}

/// Splits on sentence-final punctuation (`.`, `?`, `!`) followed by
/// whitespace. The punctuation stays with its sentence.
pub fn segment_sentences(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut start = 0;
    let mut chars = text.char_indices().peekable();
    while let Some((i, c)) = chars.next() {
        if matches!(c, '.' | '?' | '!') {
            if let Some(&(_, next)) = chars.peek() {
                if next.is_whitespace() {
                    let end = i + c.len_utf8();
                    push_trimmed(&mut out, &text[start..end]);
                    start = end;
                }
            }
        }
    }
    push_trimmed(&mut out, &text[start..]);
    out
}

fn push_trimmed(out: &mut Vec<String>, piece: &str) {
    let piece = piece.trim();
    if !piece.is_empty() {
        out.push(piece.to_string());
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Corpus {
    samples: Vec<TextSample>,
    split_of: BTreeMap<String, Split>,
    split_issue: Option<String>,
    notices: Vec<String>,
}

impl Corpus {
    pub fn new(samples: Vec<TextSample>) -> Result<Self> {
        let mut seen = BTreeSet::new();
        for sample in &samples {
            sample.validate()?;
            if !seen.insert(sample.id.as_str()) {
                return Err(Error::Validation(format!("duplicate id `{}`", sample.id)));
            }
        }
        Ok(Corpus {
            samples,
            ..Default::default()
        })
    }

    pub fn samples(&self) -> &[TextSample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn split_of(&self, id: &str) -> Option<Split> {
        self.split_of.get(id).copied()
    }

    pub fn is_split(&self) -> bool {
        !self.samples.is_empty() && self.split_of.len() == self.samples.len()
    }

    /// Set when the train split lacks one of the classes.
    pub fn split_issue(&self) -> Option<&str> {
        self.split_issue.as_deref()
    }

    /// Non-fatal events recorded while building this corpus.
    pub fn notices(&self) -> &[String] {
        &self.notices
    }

    pub fn in_split(&self, split: Split) -> impl Iterator<Item = &TextSample> + '_ {
        self.samples
            .iter()
            .filter(move |s| self.split_of.get(&s.id) == Some(&split))
    }

    pub fn class_counts(&self) -> [usize; 2] {
        let mut counts = [0; 2];
        for s in &self.samples {
            counts[s.label as usize] += 1;
        }
        counts
    }

    pub fn split(&self, train_frac: f64, seed: u64) -> Result<Corpus> {
        split(self, train_frac, seed)
    }
}

#[derive(Debug, Deserialize)]
struct Record {
    id: Option<String>,
    text: String,
    label: i64,
    model: Option<String>,
    domain: Option<String>,
    variant: Option<String>,
    mix_ratio: Option<f64>,
}

#[derive(Debug, Serialize)]
struct RecordOut<'a> {
    id: &'a str,
    text: &'a str,
    label: u8,
    model: &'a str,
    domain: &'a str,
    variant: &'a str,
    mix_ratio: f64,
}

pub fn load_jsonl(path: impl AsRef<Path>) -> Result<Corpus> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut samples = Vec::new();
    let mut seen = BTreeSet::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let record: Record = serde_json::from_str(&line).map_err(|e| Error::Load {
            line: line_no,
            message: e.to_string(),
        })?;
        let sample = sample_from_record(record, line_no).map_err(|e| match e {
            Error::Validation(msg) => Error::Validation(format!("line {line_no}: {msg}")),
            other => other,
        })?;
        if !seen.insert(sample.id.clone()) {
            return Err(Error::Validation(format!(
                "line {line_no}: duplicate id `{}`",
                sample.id
            )));
        }
        samples.push(sample);
    }
    Ok(Corpus {
        samples,
        ..Default::default()
    })
}

fn sample_from_record(record: Record, line_no: usize) -> Result<TextSample> {
    let label = match record.label {
        0 => HGT,
        1 => MGT,
        other => return Err(Error::Validation(format!("label {other} not in {{0,1}}"))),
    };
    let variant = match record.variant.as_deref() {
        Some(v) => v.parse()?,
        None => Variant::Original,
    };
    let mut sample = TextSample::new(
        record.id.unwrap_or_else(|| format!("line-{line_no}")),
        record.text,
        label,
    );
    sample.source_model = record.model.unwrap_or_default();
    sample.domain = record.domain.unwrap_or_default();
    sample.variant = variant;
    sample.mix_ratio = record.mix_ratio.unwrap_or(0.0);
    sample.validate()?;
    Ok(sample)
}

pub fn write_jsonl(corpus: &Corpus, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut buf = Vec::new();
    for s in corpus.samples() {
        let record = RecordOut {
            id: &s.id,
            text: &s.text,
            label: s.label,
            model: &s.source_model,
            domain: &s.domain,
            variant: s.variant.as_str(),
            mix_ratio: s.mix_ratio,
        };
        serde_json::to_writer(&mut buf, &record)?;
        buf.push(b'\n');
    }
    let mut file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(&buf).map_err(|e| Error::io(path, e))
}

/// Seeded train/val/test assignment: `floor(train_frac * N)` samples go to
/// train, the remainder is halved into val and test (test takes the odd one).
pub fn split(corpus: &Corpus, train_frac: f64, seed: u64) -> Result<Corpus> {
    if !(train_frac > 0.0 && train_frac < 1.0) {
        return Err(Error::Input(format!(
            "train_frac must lie in (0,1), got {train_frac}"
        )));
    }
    let n = corpus.samples.len();
    let n_train = (train_frac * n as f64).floor() as usize;
    let n_val = (n - n_train) / 2;

    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng::stream(seed, streams::SPLIT));

    let mut split_of = BTreeMap::new();
    let mut train_classes = [false; 2];
    for (rank, &idx) in order.iter().enumerate() {
        let sample = &corpus.samples[idx];
        let which = if rank < n_train {
            train_classes[sample.label as usize] = true;
            Split::Train
        } else if rank < n_train + n_val {
            Split::Val
        } else {
            Split::Test
        };
        split_of.insert(sample.id.clone(), which);
    }

    let split_issue = match train_classes {
        [true, true] => None,
        [false, false] => Some(format!("train split is empty ({n} samples, train_frac {train_frac})")),
        [false, true] => Some("train split has no human-written samples".to_string()),
        [true, false] => Some("train split has no machine-generated samples".to_string()),
    };
    if let Some(issue) = &split_issue {
        log::warn!("{issue}");
    }

    Ok(Corpus {
        samples: corpus.samples.clone(),
        split_of,
        split_issue,
        notices: corpus.notices.clone(),
    })
}

/// Replaces a fraction of the sentences of every machine-generated sample
/// with sentences drawn uniformly from the human-written pool. Positions are
/// kept in place.
pub fn make_mixed(corpus: &Corpus, fraction: f64, seed: u64) -> Result<Corpus> {
    if !(0.0..=1.0).contains(&fraction) {
        return Err(Error::Input(format!("fraction must lie in [0,1], got {fraction}")));
    }
    let mut out = corpus.clone();
    if fraction == 0.0 {
        return Ok(out);
    }

    let pool: Vec<&str> = corpus
        .samples
        .iter()
        .filter(|s| s.label == HGT)
        .flat_map(|s| s.sentences.iter().map(String::as_str))
        .collect();

    let mut rng = rng::stream(seed, streams::MIX);
    for sample in out.samples.iter_mut().filter(|s| s.label == MGT) {
        let n_sent = sample.sentences.len();
        if n_sent < 2 {
            out.notices.push(format!(
                "sample `{}` has {n_sent} sentence(s); left unmixed",
                sample.id
            ));
            continue;
        }
        if pool.is_empty() {
            return Err(Error::Construction(
                "no human-written sentences available for mixing".into(),
            ));
        }
        let n_replace = ((fraction * n_sent as f64).round() as usize).clamp(1, n_sent);
        let mut positions = rand::seq::index::sample(&mut rng, n_sent, n_replace).into_vec();
        positions.sort_unstable();
        for pos in positions {
            let donor = pool[rng.random_range(0..pool.len())];
            sample.sentences[pos] = donor.to_string();
        }
        sample.text = sample.sentences.join(" ");
        sample.variant = Variant::Mixed;
        sample.mix_ratio = fraction;
    }
    Ok(out)
}

/// A pair of categorical token distributions over a shared alphabet.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticDist {
    human: Vec<f64>,
    machine: Vec<f64>,
}

impl SyntheticDist {
    pub fn new(human: Vec<f64>, machine: Vec<f64>) -> Result<Self> {
        if human.is_empty() {
            return Err(Error::Validation("alphabet must be nonempty".into()));
        }
        if human.len() != machine.len() {
            return Err(Error::Validation(format!(
                "distribution lengths differ: {} vs {}",
                human.len(),
                machine.len()
            )));
        }
        for (name, v) in [("human", &human), ("machine", &machine)] {
            check_pmf(name, v)?;
        }
        Ok(SyntheticDist { human, machine })
    }

    /// `h = (0.5, 0.5)`, `m = (0.5 - delta, 0.5 + delta)`; total variation `delta`.
    pub fn bernoulli(delta: f64) -> Result<Self> {
        if !(0.0..=0.5).contains(&delta) {
            return Err(Error::Validation(format!(
                "bernoulli pair needs delta in [0, 0.5], got {delta}"
            )));
        }
        Self::new(vec![0.5, 0.5], vec![0.5 - delta, 0.5 + delta])
    }

    pub fn alphabet_size(&self) -> usize {
        self.human.len()
    }

    pub fn human(&self) -> &[f64] {
        &self.human
    }

    pub fn machine(&self) -> &[f64] {
        &self.machine
    }
}

pub fn check_pmf(name: &str, v: &[f64]) -> Result<()> {
    if v.iter().any(|p| !p.is_finite() || *p < 0.0) {
        return Err(Error::Validation(format!(
            "{name} distribution has negative or non-finite entries"
        )));
    }
    let total: f64 = v.iter().sum();
    if (total - 1.0).abs() > 1e-12 {
        return Err(Error::Validation(format!(
            "{name} distribution sums to {total}, expected 1"
        )));
    }
    Ok(())
}

pub fn symbol_name(id: usize) -> String {
    format!("t{id}")
}

/// Human samples draw `n` tokens from `h`; machine samples draw
/// `ceil((1 - alpha) n)` tokens from `m` followed by the rest from `h`.
pub fn gen_synthetic(
    dist: &SyntheticDist,
    n: usize,
    count_per_class: usize,
    alpha: f64,
    seed: u64,
) -> Result<Corpus> {
    if n == 0 {
        return Err(Error::Input("sequence length n must be at least 1".into()));
    }
    if !(0.0..1.0).contains(&alpha) {
        return Err(Error::Input(format!("alpha must lie in [0,1), got {alpha}")));
    }
    let mut notices = Vec::new();
    let human_part = alpha * n as f64;
    if (human_part - human_part.round()).abs() > 1e-9 {
        notices.push(format!(
            "alpha*n = {human_part} is not integral; machine tokens rounded up"
        ));
    }
    let n_machine = (((1.0 - alpha) * n as f64) - 1e-9).ceil().max(0.0) as usize;
    let n_machine = n_machine.min(n);

    let human = WeightedIndex::new(&dist.human)
        .map_err(|e| Error::Validation(format!("human distribution: {e}")))?;
    let machine = WeightedIndex::new(&dist.machine)
        .map_err(|e| Error::Validation(format!("machine distribution: {e}")))?;

    let mut rng = rng::stream(seed, streams::SYNTH);
    let mut samples = Vec::with_capacity(2 * count_per_class);
    let render = |tokens: &[usize]| {
        tokens
            .iter()
            .map(|&t| symbol_name(t))
            .collect::<Vec<_>>()
            .join(" ")
    };
    for i in 0..count_per_class {
        let tokens: Vec<usize> = (0..n).map(|_| human.sample(&mut rng)).collect();
        samples.push(synthetic_sample(format!("synth-h-{i}"), render(&tokens), HGT, 0.0));
        let tokens: Vec<usize> = (0..n)
            .map(|pos| {
                if pos < n_machine {
                    machine.sample(&mut rng)
                } else {
                    human.sample(&mut rng)
                }
            })
            .collect();
        samples.push(synthetic_sample(format!("synth-m-{i}"), render(&tokens), MGT, alpha));
    }
    let mut corpus = Corpus::new(samples)?;
    corpus.notices = notices;
    Ok(corpus)
}

fn synthetic_sample(id: String, text: String, label: u8, mix_ratio: f64) -> TextSample {
    let mut sample = TextSample::new(id, text, label);
    sample.source_model = "synthetic".into();
    sample.domain = "synthetic".into();
    sample.variant = Variant::Synthetic;
    sample.mix_ratio = mix_ratio;
    sample
}

/// Whitespace vocabulary with reserved padding (0) and unknown (1) ids.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vocab {
    tokens: Vec<String>,
    #[serde(skip)]
    index: HashMap<String, u32>,
}

impl Vocab {
    pub const PAD: u32 = 0;
    pub const UNK: u32 = 1;

    pub fn from_tokens<I, S>(tokens: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let words: BTreeSet<String> = tokens.into_iter().map(Into::into).collect();
        let mut all = vec!["<pad>".to_string(), "<unk>".to_string()];
        all.extend(words.into_iter().filter(|w| w != "<pad>" && w != "<unk>"));
        Self::from_list(all)
    }

    /// Builds from an ordered list whose first two entries are the padding
    /// and unknown tokens.
    pub fn from_list(tokens: Vec<String>) -> Self {
        let index = tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i as u32))
            .collect();
        Vocab { tokens, index }
    }

    pub fn build<'a>(samples: impl IntoIterator<Item = &'a TextSample>) -> Self {
        Self::from_tokens(
            samples
                .into_iter()
                .flat_map(|s| s.text.split_whitespace().map(str::to_string)),
        )
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn get(&self, word: &str) -> u32 {
        self.index.get(word).copied().unwrap_or(Self::UNK)
    }

    pub fn hash(&self) -> String {
        use sha2::{Digest, Sha256};
        let mut hasher = Sha256::new();
        for t in &self.tokens {
            hasher.update(t.as_bytes());
            hasher.update([0u8]);
        }
        hex::encode(hasher.finalize())
    }

    pub(crate) fn rebuild_index(&mut self) {
        *self = Self::from_list(std::mem::take(&mut self.tokens));
    }
}

/// Token ids padded or truncated to a fixed width, plus the true length.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenSeq {
    pub ids: Vec<u32>,
    pub len: usize,
}

pub fn tokenize(sample: &TextSample, vocab: &Vocab, max_len: usize) -> Result<TokenSeq> {
    tokenize_text(&sample.text, vocab, max_len)
}

pub fn tokenize_text(text: &str, vocab: &Vocab, max_len: usize) -> Result<TokenSeq> {
    if max_len < 1 {
        return Err(Error::Config("max_len must be at least 1".into()));
    }
    let mut ids: Vec<u32> = text
        .split_whitespace()
        .take(max_len)
        .map(|w| vocab.get(w))
        .collect();
    let len = ids.len();
    ids.resize(max_len, Vocab::PAD);
    Ok(TokenSeq { ids, len })
}
