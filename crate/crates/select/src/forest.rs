//! Random-forest device classifier: CART trees with Gini splits, bootstrap
//! resampling and square-root feature subsampling.

use std::path::Path;

use qpredict_core::device::DeviceModel;
use qpredict_core::features::{schema_hash, FeatureVector};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::labels::{rank_by_score, TrainingSample};

pub const FOREST_FORMAT_VERSION: u32 = 1;

/// One point of the hyperparameter grid.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Hyper {
    pub trees: usize,
    /// `None` grows until leaves are pure or too small to split.
    pub max_depth: Option<usize>,
    pub min_leaf: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ForestConfig {
    /// Candidates compared by cross-validation. A single entry skips it.
    pub grid: Vec<Hyper>,
    pub folds: usize,
    pub test_fraction: f64,
    /// Draw each tree's samples with replacement.
    pub bootstrap: bool,
    pub seed: u64,
}

impl Default for ForestConfig {
    fn default() -> Self {
        let mut grid = Vec::new();
        for trees in [25, 100] {
            for max_depth in [Some(8), None] {
                for min_leaf in [1, 3] {
                    grid.push(Hyper {
                        trees,
                        max_depth,
                        min_leaf,
                    });
                }
            }
        }
        ForestConfig {
            grid,
            folds: 5,
            test_fraction: 0.3,
            bootstrap: true,
            seed: 0,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ForestError {
    #[error("need at least 10 samples, got {0}")]
    TooFewSamples(usize),
    #[error("need at least two distinct labels")]
    DegenerateLabels,
    #[error("label {0} is not a roster device")]
    UnknownLabel(String),
    #[error("invalid forest configuration: {0}")]
    Config(String),
    #[error("cannot access forest file {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("corrupt forest file {path}: {reason}")]
    Corrupt { path: String, reason: String },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RosterEntry {
    pub id: String,
    pub num_qubits: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Node {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    /// Training-sample count per roster class.
    Leaf { counts: Vec<usize> },
}

/// Nodes in preorder; the root is node 0.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    fn leaf(&self, x: &[f64]) -> &[usize] {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if x[*feature] <= *threshold { *left } else { *right },
                Node::Leaf { counts } => return counts,
            }
        }
    }

    /// Majority class of the reached leaf; ties go to the lower roster
    /// index, which is the smaller device.
    pub fn vote(&self, x: &[f64]) -> usize {
        let counts = self.leaf(x);
        let mut best = 0;
        for (k, &n) in counts.iter().enumerate() {
            if n > counts[best] {
                best = k;
            }
        }
        best
    }

    pub fn depth(&self) -> usize {
        fn go(t: &Tree, i: usize) -> usize {
            match &t.nodes[i] {
                Node::Split { left, right, .. } => 1 + go(t, *left).max(go(t, *right)),
                Node::Leaf { .. } => 0,
            }
        }
        go(self, 0)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    pub format_version: u32,
    pub fom: String,
    /// Devices in tie-break order: fewer qubits first, then id.
    pub roster: Vec<RosterEntry>,
    pub schema_hash: String,
    pub hyper: Hyper,
    pub seed: u64,
    pub trees: Vec<Tree>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ForestReport {
    pub hyper: Hyper,
    pub cv_accuracy: f64,
    pub train_size: usize,
    pub test_size: usize,
    /// Held-out fraction whose predicted device is the label.
    pub top1: f64,
    /// Held-out fraction whose label is among the three best-ranked devices.
    pub top3: f64,
    /// Held-out fraction whose predicted device scores at least as well as
    /// the third best device for that circuit.
    pub top3_score: f64,
    pub test_hashes: Vec<String>,
}

impl ForestModel {
    /// Vote share per roster device, in roster order. Shares sum to 1.
    pub fn vote_shares(&self, x: &[f64]) -> Vec<f64> {
        let mut votes = vec![0.0; self.roster.len()];
        for t in &self.trees {
            votes[t.vote(x)] += 1.0;
        }
        let n = self.trees.len() as f64;
        votes.iter().map(|v| v / n).collect()
    }

    /// Roster devices that fit `f`, ranked by vote share then tie-break.
    pub fn rank(&self, f: &FeatureVector) -> Vec<(String, f64)> {
        let shares = self.vote_shares(&f.to_vec());
        rank_by_score(
            self.roster
                .iter()
                .zip(&shares)
                .filter(|(r, _)| r.num_qubits >= f.num_qubits)
                .map(|(r, &s)| (r.id.as_str(), r.num_qubits, s)),
        )
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), ForestError> {
        let path = path.as_ref();
        let text = serde_json::to_string(self).expect("forest serialises");
        std::fs::write(path, text).map_err(|source| ForestError::Io {
            path: path.display().to_string(),
            source,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ForestError> {
        let path = path.as_ref();
        let shown = path.display().to_string();
        let text = std::fs::read_to_string(path).map_err(|source| ForestError::Io {
            path: shown.clone(),
            source,
        })?;
        let corrupt = |reason: String| ForestError::Corrupt {
            path: shown.clone(),
            reason,
        };
        let m: ForestModel = serde_json::from_str(&text).map_err(|e| corrupt(e.to_string()))?;
        if m.format_version != FOREST_FORMAT_VERSION {
            return Err(corrupt(format!(
                "unsupported format version {}",
                m.format_version
            )));
        }
        if m.trees.is_empty() || m.roster.is_empty() {
            return Err(corrupt("empty forest".into()));
        }
        for t in &m.trees {
            let n = t.nodes.len();
            for node in &t.nodes {
                match node {
                    Node::Split {
                        threshold,
                        left,
                        right,
                        ..
                    } => {
                        if !threshold.is_finite() || *left >= n || *right >= n {
                            return Err(corrupt("malformed split".into()));
                        }
                    }
                    Node::Leaf { counts } => {
                        if counts.len() != m.roster.len() || counts.iter().all(|&c| c == 0) {
                            return Err(corrupt("malformed leaf".into()));
                        }
                    }
                }
            }
        }
        Ok(m)
    }
}

/// Roster entries for `fleet`, sorted into tie-break order.
pub fn roster_of(fleet: &[DeviceModel]) -> Vec<RosterEntry> {
    let mut r: Vec<RosterEntry> = fleet
        .iter()
        .map(|d| RosterEntry {
            id: d.id().to_string(),
            num_qubits: d.num_qubits(),
        })
        .collect();
    r.sort_by(|a, b| a.num_qubits.cmp(&b.num_qubits).then(a.id.cmp(&b.id)));
    r
}

struct Data<'a> {
    x: Vec<Vec<f64>>,
    y: Vec<usize>,
    samples: Vec<&'a TrainingSample>,
    classes: usize,
}

/// Trains on a stratified 70/30 split, choosing hyperparameters by
/// cross-validated accuracy on the training part, and reports held-out
/// accuracy. Samples are put into content order first, so the result does
/// not depend on the order they are given in.
pub fn train_forest(
    samples: &[TrainingSample],
    fleet: &[DeviceModel],
    fom: &str,
    cfg: &ForestConfig,
) -> Result<(ForestModel, ForestReport), ForestError> {
    if samples.len() < 10 {
        return Err(ForestError::TooFewSamples(samples.len()));
    }
    if cfg.grid.is_empty() || cfg.grid.iter().any(|h| h.trees == 0 || h.min_leaf == 0) {
        return Err(ForestError::Config(
            "grid needs trees ≥ 1 and min_leaf ≥ 1".into(),
        ));
    }
    if cfg.folds < 2 || !(0.0..1.0).contains(&cfg.test_fraction) {
        return Err(ForestError::Config(
            "folds ≥ 2 and test fraction in [0, 1)".into(),
        ));
    }
    let roster = roster_of(fleet);
    let mut sorted: Vec<&TrainingSample> = samples.iter().collect();
    sorted.sort_by(|a, b| canonical_key(a).partial_cmp(&canonical_key(b)).unwrap());
    let mut y = Vec::with_capacity(sorted.len());
    for s in &sorted {
        let k = roster
            .iter()
            .position(|r| r.id == s.label)
            .ok_or_else(|| ForestError::UnknownLabel(s.label.clone()))?;
        y.push(k);
    }
    if y.iter().all(|&k| k == y[0]) {
        return Err(ForestError::DegenerateLabels);
    }
    let data = Data {
        x: sorted.iter().map(|s| s.features.to_vec()).collect(),
        y,
        samples: sorted,
        classes: roster.len(),
    };

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let (train, test) = stratified_split(&data.y, data.classes, cfg.test_fraction, &mut rng);

    let (hyper, cv_accuracy) = if cfg.grid.len() == 1 {
        (cfg.grid[0], f64::NAN)
    } else {
        let folds = stratified_folds(&train, &data.y, data.classes, cfg.folds, &mut rng);
        let mut best = (cfg.grid[0], f64::NEG_INFINITY);
        for (g, h) in cfg.grid.iter().enumerate() {
            let mut correct = 0usize;
            let mut total = 0usize;
            for (f, held) in folds.iter().enumerate() {
                let fit: Vec<usize> = folds
                    .iter()
                    .enumerate()
                    .filter(|&(o, _)| o != f)
                    .flat_map(|(_, v)| v.iter().copied())
                    .collect();
                let seed = cfg.seed ^ ((g as u64 + 1) << 32) ^ (f as u64 + 1);
                let trees = grow_forest(&data, &fit, h, cfg.bootstrap, seed);
                for &i in held {
                    correct += usize::from(majority(&trees, &data.x[i], data.classes) == data.y[i]);
                    total += 1;
                }
            }
            let acc = correct as f64 / total.max(1) as f64;
            if acc > best.1 {
                best = (*h, acc);
            }
        }
        best
    };

    let trees = grow_forest(&data, &train, &hyper, cfg.bootstrap, cfg.seed);
    let model = ForestModel {
        format_version: FOREST_FORMAT_VERSION,
        fom: fom.to_string(),
        roster,
        schema_hash: schema_hash(),
        hyper,
        seed: cfg.seed,
        trees,
    };

    let mut top1 = 0usize;
    let mut top3 = 0usize;
    let mut top3_score = 0usize;
    for &i in &test {
        let s = data.samples[i];
        let ranked = model.rank(&s.features);
        let Some((predicted, _)) = ranked.first() else {
            continue;
        };
        top1 += usize::from(*predicted == s.label);
        top3 += usize::from(ranked.iter().take(3).any(|(id, _)| *id == s.label));
        let by_score = rank_by_score(model.roster.iter().map(|r| {
            let score = s.per_device_scores.get(&r.id).copied().unwrap_or(0.0);
            (r.id.as_str(), r.num_qubits, score)
        }));
        let third = by_score[by_score.len().min(3) - 1].1;
        let got = s.per_device_scores.get(predicted).copied().unwrap_or(0.0);
        top3_score += usize::from(got >= third);
    }
    let n = test.len().max(1) as f64;
    let report = ForestReport {
        hyper,
        cv_accuracy,
        train_size: train.len(),
        test_size: test.len(),
        top1: top1 as f64 / n,
        top3: top3 as f64 / n,
        top3_score: top3_score as f64 / n,
        test_hashes: test
            .iter()
            .map(|&i| data.samples[i].circuit_hash.clone())
            .collect(),
    };
    Ok((model, report))
}

fn canonical_key(s: &TrainingSample) -> (String, String, Vec<f64>) {
    (s.circuit_hash.clone(), s.label.clone(), s.features.to_vec())
}

fn majority(trees: &[Tree], x: &[f64], classes: usize) -> usize {
    let mut votes = vec![0usize; classes];
    for t in trees {
        votes[t.vote(x)] += 1;
    }
    let mut best = 0;
    for k in 1..classes {
        if votes[k] > votes[best] {
            best = k;
        }
    }
    best
}

/// Per class, a seeded shuffle sends `fraction` of the members (rounded) to
/// the test side, keeping at least one in training.
fn stratified_split(
    y: &[usize],
    classes: usize,
    fraction: f64,
    rng: &mut ChaCha8Rng,
) -> (Vec<usize>, Vec<usize>) {
    let mut train = Vec::new();
    let mut test = Vec::new();
    for k in 0..classes {
        let mut members: Vec<usize> = (0..y.len()).filter(|&i| y[i] == k).collect();
        shuffle(&mut members, rng);
        let n_test =
            ((members.len() as f64 * fraction).round() as usize).min(members.len().saturating_sub(1));
        test.extend_from_slice(&members[..n_test]);
        train.extend_from_slice(&members[n_test..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    (train, test)
}

/// Deals each class's shuffled members round-robin over the folds.
fn stratified_folds(
    idx: &[usize],
    y: &[usize],
    classes: usize,
    folds: usize,
    rng: &mut ChaCha8Rng,
) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new(); folds];
    let mut next = 0;
    for k in 0..classes {
        let mut members: Vec<usize> = idx.iter().copied().filter(|&i| y[i] == k).collect();
        shuffle(&mut members, rng);
        for i in members {
            out[next % folds].push(i);
            next += 1;
        }
    }
    out
}

fn shuffle(v: &mut [usize], rng: &mut ChaCha8Rng) {
    use rand::seq::SliceRandom;
    v.shuffle(rng);
}

fn grow_forest(data: &Data, idx: &[usize], h: &Hyper, bootstrap: bool, seed: u64) -> Vec<Tree> {
    let d = data.x.first().map_or(0, |x| x.len());
    let mtry = ((d as f64).sqrt().round() as usize).clamp(1, d.max(1));
    (0..h.trees)
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(t as u64);
            let rows: Vec<usize> = if bootstrap {
                (0..idx.len()).map(|_| idx[rng.gen_range(0..idx.len())]).collect()
            } else {
                idx.to_vec()
            };
            let mut g = Grower {
                data,
                h,
                mtry,
                rng,
                nodes: Vec::new(),
            };
            g.grow(rows, 0);
            Tree { nodes: g.nodes }
        })
        .collect()
}

struct Grower<'a> {
    data: &'a Data<'a>,
    h: &'a Hyper,
    mtry: usize,
    rng: ChaCha8Rng,
    nodes: Vec<Node>,
}

impl Grower<'_> {
    fn counts(&self, rows: &[usize]) -> Vec<usize> {
        let mut c = vec![0; self.data.classes];
        for &i in rows {
            c[self.data.y[i]] += 1;
        }
        c
    }

    fn grow(&mut self, rows: Vec<usize>, depth: usize) -> usize {
        let id = self.nodes.len();
        let counts = self.counts(&rows);
        self.nodes.push(Node::Leaf {
            counts: counts.clone(),
        });
        let pure = counts.iter().filter(|&&n| n > 0).count() <= 1;
        let depth_done = self.h.max_depth.is_some_and(|m| depth >= m);
        if pure || depth_done || rows.len() < 2 * self.h.min_leaf {
            return id;
        }
        let Some((feature, threshold)) = self.best_split(&rows, &counts) else {
            return id;
        };
        let (l, r): (Vec<usize>, Vec<usize>) =
            rows.iter().partition(|&&i| self.data.x[i][feature] <= threshold);
        let left = self.grow(l, depth + 1);
        let right = self.grow(r, depth + 1);
        self.nodes[id] = Node::Split {
            feature,
            threshold,
            left,
            right,
        };
        id
    }

    /// Lowest weighted Gini impurity over a random subset of features. If
    /// none of those admits a split the remaining features are tried.
    fn best_split(&mut self, rows: &[usize], counts: &[usize]) -> Option<(usize, f64)> {
        let d = self.data.x[0].len();
        let chosen = sample(&mut self.rng, d, self.mtry).into_vec();
        if let Some(s) = self.scan(rows, counts, &chosen) {
            return Some(s);
        }
        let rest: Vec<usize> = (0..d).filter(|f| !chosen.contains(f)).collect();
        self.scan(rows, counts, &rest)
    }

    fn scan(&self, rows: &[usize], counts: &[usize], features: &[usize]) -> Option<(usize, f64)> {
        let n = rows.len();
        let min_leaf = self.h.min_leaf;
        let mut best: Option<(f64, usize, f64)> = None;
        let mut order = rows.to_vec();
        for &f in features {
            let x = |i: usize| self.data.x[i][f];
            order.sort_by(|&a, &b| x(a).total_cmp(&x(b)));
            let mut left = vec![0usize; counts.len()];
            for k in 0..n - 1 {
                left[self.data.y[order[k]]] += 1;
                let (a, b) = (x(order[k]), x(order[k + 1]));
                let nl = k + 1;
                if a == b || nl < min_leaf || n - nl < min_leaf {
                    continue;
                }
                let gl = gini_of(&left, nl);
                let right: Vec<usize> = counts.iter().zip(&left).map(|(c, l)| c - l).collect();
                let gr = gini_of(&right, n - nl);
                let imp = (nl as f64 * gl + (n - nl) as f64 * gr) / n as f64;
                let threshold = a + (b - a) / 2.0;
                if best.is_none_or(|(bi, _, _)| imp < bi) {
                    best = Some((imp, f, threshold));
                }
            }
        }
        best.map(|(_, f, t)| (f, t))
    }
}

fn gini_of(counts: &[usize], n: usize) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let n = n as f64;
    1.0 - counts.iter().map(|&c| (c as f64 / n).powi(2)).sum::<f64>()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gini_matches_hand_values() {
        assert_eq!(gini_of(&[4, 0], 4), 0.0);
        assert!((gini_of(&[2, 2], 4) - 0.5).abs() < 1e-15);
        assert!((gini_of(&[1, 1, 1], 3) - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn split_respects_class_and_fold_balance() {
        let y: Vec<usize> = (0..40).map(|i| usize::from(i >= 30)).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let (train, test) = stratified_split(&y, 2, 0.3, &mut rng);
        assert_eq!(test.iter().filter(|&&i| y[i] == 0).count(), 9);
        assert_eq!(test.iter().filter(|&&i| y[i] == 1).count(), 3);
        assert_eq!(train.len() + test.len(), 40);
        let folds = stratified_folds(&train, &y, 2, 5, &mut rng);
        let sizes: Vec<usize> = folds.iter().map(Vec::len).collect();
        assert_eq!(sizes.iter().sum::<usize>(), 28);
        assert!(sizes.iter().all(|&s| s == 5 || s == 6));
    }
}
