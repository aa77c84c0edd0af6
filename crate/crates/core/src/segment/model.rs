use std::collections::HashMap;
use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::features::{GapContext, SentenceFeatures};
use super::{GapLabel, SegmentError};
use crate::annotate::AnnotatedSentence;
use crate::constraints::ConstraintProfile;

pub const MODEL_FORMAT_VERSION: u32 = 1;
const MAGIC: &str = "subseg-linear-model";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainingConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub seed: u64,
    pub shuffle: bool,
}

impl TrainingConfig {
    /// Defaults for training from scratch: 12 epochs.
    pub fn base(seed: u64) -> Self {
        TrainingConfig {
            epochs: 12,
            learning_rate: 1.0,
            seed,
            shuffle: true,
        }
    }

    /// Defaults for fine-tuning: 6 epochs.
    pub fn fine_tune(seed: u64) -> Self {
        TrainingConfig {
            epochs: 6,
            ..Self::base(seed)
        }
    }

    fn validate(&self) -> Result<(), SegmentError> {
        if self.epochs == 0 {
            return Err(SegmentError::Config("epochs must be at least 1".into()));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate >= 0.0) {
            return Err(SegmentError::Config("learning rate must be finite and >= 0".into()));
        }
        Ok(())
    }
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self::base(0)
    }
}

/// Where a model's weights came from.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingMeta {
    pub epochs: usize,
    pub learning_rate: f64,
    pub seed: u64,
    pub shuffle: bool,
    pub fine_tuned: bool,
    pub fine_tune_epochs: usize,
    pub profile_cpl: usize,
}

/// Multiclass linear scorer over [`GapLabel`]s.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearSegmenterModel {
    vocab: HashMap<String, u32>,
    features: Vec<String>,
    weights: Vec<[f64; 3]>,
    pub meta: TrainingMeta,
}

impl LinearSegmenterModel {
    fn empty(meta: TrainingMeta) -> Self {
        LinearSegmenterModel {
            vocab: HashMap::new(),
            features: Vec::new(),
            weights: Vec::new(),
            meta,
        }
    }

    pub fn vocabulary_size(&self) -> usize {
        self.features.len()
    }

    pub fn weight(&self, feature: &str, label: GapLabel) -> f64 {
        self.vocab
            .get(feature)
            .map_or(0.0, |&id| self.weights[id as usize][label.index()])
    }

    /// Scores for each label, summed over the known features.
    pub fn score<S: AsRef<str>>(&self, features: &[S]) -> [f64; 3] {
        let mut s = [0.0; 3];
        for f in features {
            if let Some(&id) = self.vocab.get(f.as_ref()) {
                let w = &self.weights[id as usize];
                for k in 0..3 {
                    s[k] += w[k];
                }
            }
        }
        s
    }

    pub(crate) fn score_ids(&self, ids: &[u32]) -> [f64; 3] {
        let mut s = [0.0; 3];
        for &id in ids {
            let w = &self.weights[id as usize];
            for k in 0..3 {
                s[k] += w[k];
            }
        }
        s
    }

    fn intern(&mut self, feature: String) -> u32 {
        if let Some(&id) = self.vocab.get(&feature) {
            return id;
        }
        let id = self.features.len() as u32;
        self.vocab.insert(feature.clone(), id);
        self.features.push(feature);
        self.weights.push([0.0; 3]);
        id
    }

    /// Sets one weight, adding the feature if needed.
    pub fn set_weight(&mut self, feature: &str, label: GapLabel, weight: f64) {
        let id = self.intern(feature.to_string());
        self.weights[id as usize][label.index()] = weight;
    }

    /// Maximum absolute difference between two models' weights.
    pub fn max_weight_delta(&self, other: &LinearSegmenterModel) -> f64 {
        let mut delta: f64 = 0.0;
        for (f, &id) in &self.vocab {
            for l in GapLabel::ALL {
                delta = delta.max((self.weights[id as usize][l.index()] - other.weight(f, l)).abs());
            }
        }
        for (f, &id) in &other.vocab {
            if !self.vocab.contains_key(f) {
                for l in GapLabel::ALL {
                    delta = delta.max(other.weights[id as usize][l.index()].abs());
                }
            }
        }
        delta
    }

    /// Versioned text form: a header of `key<TAB>value` lines, then one
    /// `feature<TAB>label<TAB>weight` record per non-zero weight, sorted.
    pub fn to_text(&self) -> String {
        let m = &self.meta;
        let mut records: Vec<(&str, GapLabel, f64)> = self
            .features
            .iter()
            .zip(&self.weights)
            .flat_map(|(f, w)| {
                GapLabel::ALL
                    .into_iter()
                    .filter(|l| w[l.index()] != 0.0)
                    .map(move |l| (f.as_str(), l, w[l.index()]))
            })
            .collect();
        records.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));

        let mut out = String::new();
        let _ = writeln!(out, "{MAGIC}\t{MODEL_FORMAT_VERSION}");
        let _ = writeln!(out, "epochs\t{}", m.epochs);
        let _ = writeln!(out, "learning_rate\t{}", m.learning_rate);
        let _ = writeln!(out, "seed\t{}", m.seed);
        let _ = writeln!(out, "shuffle\t{}", m.shuffle);
        let _ = writeln!(out, "fine_tuned\t{}", m.fine_tuned);
        let _ = writeln!(out, "fine_tune_epochs\t{}", m.fine_tune_epochs);
        let _ = writeln!(out, "cpl_limit\t{}", m.profile_cpl);
        let _ = writeln!(out, "weights\t{}", records.len());
        for (f, l, w) in records {
            let _ = writeln!(out, "{f}\t{l}\t{w}");
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self, SegmentError> {
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
        let bad = |line: usize, reason: &str| SegmentError::ModelFormat {
            line,
            reason: reason.to_string(),
        };
        let (_, first) = lines.next().ok_or_else(|| bad(1, "empty model file"))?;
        match first.split_once('\t') {
            Some((MAGIC, v)) if v == MODEL_FORMAT_VERSION.to_string() => {}
            Some((MAGIC, v)) => return Err(SegmentError::UnknownVersion(v.to_string())),
            _ => return Err(bad(1, "not a segmenter model")),
        }

        let mut header: HashMap<&str, (usize, &str)> = HashMap::new();
        let mut count = None;
        for (n, line) in lines.by_ref() {
            let (k, v) = line.split_once('\t').ok_or_else(|| bad(n, "expected key<TAB>value"))?;
            if k == "weights" {
                count = Some(v.parse::<usize>().map_err(|_| bad(n, "bad record count"))?);
                break;
            }
            header.insert(k, (n, v));
        }
        let count = count.ok_or_else(|| bad(0, "missing weights section"))?;
        fn field<T: std::str::FromStr>(
            header: &HashMap<&str, (usize, &str)>,
            key: &str,
        ) -> Result<T, SegmentError> {
            let (n, v) = header.get(key).ok_or_else(|| SegmentError::ModelFormat {
                line: 0,
                reason: format!("missing header {key}"),
            })?;
            v.parse().map_err(|_| SegmentError::ModelFormat {
                line: *n,
                reason: format!("bad value for {key}"),
            })
        }
        let meta = TrainingMeta {
            epochs: field(&header, "epochs")?,
            learning_rate: field(&header, "learning_rate")?,
            seed: field(&header, "seed")?,
            shuffle: field(&header, "shuffle")?,
            fine_tuned: field(&header, "fine_tuned")?,
            fine_tune_epochs: field(&header, "fine_tune_epochs")?,
            profile_cpl: field(&header, "cpl_limit")?,
        };
        let mut model = LinearSegmenterModel::empty(meta);
        let mut seen = 0;
        for (n, line) in lines {
            let mut parts = line.split('\t');
            let (Some(f), Some(l), Some(w), None) = (parts.next(), parts.next(), parts.next(), parts.next())
            else {
                return Err(bad(n, "expected feature<TAB>label<TAB>weight"));
            };
            let label = GapLabel::from_name(l).ok_or_else(|| bad(n, "unknown label"))?;
            let weight: f64 = w.parse().map_err(|_| bad(n, "bad weight"))?;
            if !weight.is_finite() {
                return Err(bad(n, "non-finite weight"));
            }
            model.set_weight(f, label, weight);
            seen += 1;
        }
        if seen != count {
            return Err(bad(0, &format!("expected {count} weight records, found {seen}")));
        }
        Ok(model)
    }
}

/// One training gap: interned features and the gold label.
///
/// The scorer is trained over all three labels everywhere; the grammar is
/// only applied when decoding.
struct Instance {
    features: Vec<u32>,
    gold: GapLabel,
}

fn instances(
    model: &mut LinearSegmenterModel,
    s: &AnnotatedSentence,
    profile: &ConstraintProfile,
) -> Vec<Instance> {
    let sf = SentenceFeatures::new(s.words(), profile);
    let mut ctx = GapContext::sentence_start();
    let mut out = Vec::with_capacity(s.len());
    let mut buf = Vec::new();
    for (i, gold) in s.gaps().iter().map(|g| GapLabel::from(*g)).enumerate() {
        ctx = ctx.advance(sf.lens[i]);
        buf.clear();
        buf.extend(sf.fixed[i].iter().cloned());
        sf.contextual(i, &ctx, profile, &mut buf);
        let features = buf.drain(..).map(|f| model.intern(f)).collect();
        out.push(Instance { features, gold });
        ctx = ctx.after(gold);
    }
    out
}

/// Averaged perceptron with lazily accumulated weight totals.
struct Averager {
    totals: Vec<[f64; 3]>,
    stamps: Vec<[u64; 3]>,
    clock: u64,
}

impl Averager {
    fn new() -> Self {
        Averager {
            totals: Vec::new(),
            stamps: Vec::new(),
            clock: 0,
        }
    }

    fn bump(&mut self, model: &mut LinearSegmenterModel, id: u32, label: GapLabel, delta: f64) {
        let (i, k) = (id as usize, label.index());
        if self.totals.len() <= i {
            self.totals.resize(model.weights.len(), [0.0; 3]);
            self.stamps.resize(model.weights.len(), [0; 3]);
        }
        // The weights after example t count towards the average from t on.
        let now = self.clock - 1;
        let w = &mut model.weights[i][k];
        self.totals[i][k] += (now - self.stamps[i][k]) as f64 * *w;
        self.stamps[i][k] = now;
        *w += delta;
    }

    fn finish(mut self, model: &mut LinearSegmenterModel) {
        if self.clock == 0 {
            return;
        }
        self.totals.resize(model.weights.len(), [0.0; 3]);
        self.stamps.resize(model.weights.len(), [0; 3]);
        let c = self.clock as f64;
        for (i, w) in model.weights.iter_mut().enumerate() {
            for (k, wk) in w.iter_mut().enumerate() {
                let total = self.totals[i][k] + (self.clock - self.stamps[i][k]) as f64 * *wk;
                *wk = total / c;
            }
        }
    }
}

/// The best-scoring label other than `gold`, if it scores at least as high.
fn violation(scores: &[f64; 3], gold: GapLabel) -> Option<GapLabel> {
    let mut rival: Option<GapLabel> = None;
    for l in GapLabel::ALL.into_iter().filter(|&l| l != gold) {
        if rival.is_none_or(|r| scores[l.index()] > scores[r.index()]) {
            rival = Some(l);
        }
    }
    rival.filter(|r| scores[r.index()] >= scores[gold.index()])
}

fn run_epochs(
    model: &mut LinearSegmenterModel,
    corpus: &[AnnotatedSentence],
    config: &TrainingConfig,
    profile: &ConstraintProfile,
) {
    let data: Vec<Vec<Instance>> = corpus.iter().map(|s| instances(model, s, profile)).collect();
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut avg = Averager::new();
    for _ in 0..config.epochs {
        if config.shuffle {
            order.shuffle(&mut rng);
        }
        for &si in &order {
            for inst in &data[si] {
                avg.clock += 1;
                if let Some(guess) = violation(&model.score_ids(&inst.features), inst.gold) {
                    for &f in &inst.features {
                        avg.bump(model, f, inst.gold, config.learning_rate);
                        avg.bump(model, f, guess, -config.learning_rate);
                    }
                }
            }
        }
    }
    avg.finish(model);
}

fn check_strict(corpus: &[AnnotatedSentence]) -> Result<(), SegmentError> {
    for (index, s) in corpus.iter().enumerate() {
        s.check_strict().map_err(|e| SegmentError::NotStrict {
            index,
            reason: e.to_string(),
        })?;
    }
    Ok(())
}

/// Trains from scratch on strictly annotated sentences, using the gold
/// history at every gap. Single-threaded and deterministic for a seed.
pub fn train(
    corpus: &[AnnotatedSentence],
    config: &TrainingConfig,
    profile: &ConstraintProfile,
) -> Result<LinearSegmenterModel, SegmentError> {
    config.validate()?;
    if corpus.is_empty() {
        return Err(SegmentError::EmptyCorpus);
    }
    check_strict(corpus)?;
    let mut model = LinearSegmenterModel::empty(TrainingMeta {
        epochs: config.epochs,
        learning_rate: config.learning_rate,
        seed: config.seed,
        shuffle: config.shuffle,
        fine_tuned: false,
        fine_tune_epochs: 0,
        profile_cpl: profile.cpl_limit,
    });
    run_epochs(&mut model, corpus, config, profile);
    Ok(model)
}

/// Continues training `model` on sentences that all contain `<eol>`.
pub fn fine_tune(
    model: &LinearSegmenterModel,
    eol_subset: &[AnnotatedSentence],
    config: &TrainingConfig,
    profile: &ConstraintProfile,
) -> Result<LinearSegmenterModel, SegmentError> {
    config.validate()?;
    if eol_subset.is_empty() {
        return Err(SegmentError::EmptyCorpus);
    }
    if let Some(index) = eol_subset.iter().position(|s| !s.has_eol()) {
        return Err(SegmentError::SubsetViolation { index });
    }
    check_strict(eol_subset)?;
    let mut tuned = model.clone();
    run_epochs(&mut tuned, eol_subset, config, profile);
    tuned.meta.fine_tuned = true;
    tuned.meta.fine_tune_epochs = config.epochs;
    Ok(tuned)
}
