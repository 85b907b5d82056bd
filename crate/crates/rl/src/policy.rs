//! Masked softmax policy with a value head, and its on-disk form.

use std::path::Path;

use qpredict_core::passes::{catalog_hash, PassAction};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::obs::OBS_DIM;

pub const NUM_ACTIONS: usize = PassAction::ALL.len();
pub type Mask = [bool; NUM_ACTIONS];

/// Policy and value function sharing an optional tanh hidden layer.
///
/// Parameters are stored flat: `W1 (hidden x OBS_DIM)`, `b1`, then the
/// action head `Wp (NUM_ACTIONS x in)`, `bp`, then the value head `wv (in)`
/// and `bv`, where `in` is `hidden` or `OBS_DIM` when there is no hidden
/// layer.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolicyNet {
    pub hidden: usize,
    pub params: Vec<f64>,
}

/// Intermediate values of one forward pass.
#[derive(Clone, Debug)]
pub struct Forward {
    pub features: Vec<f64>,
    pub probs: [f64; NUM_ACTIONS],
    pub value: f64,
}

/// Per-sample loss coefficients for [`PolicyNet::accumulate_grad`].
#[derive(Clone, Copy, Debug)]
pub struct GradTerms {
    /// Multiplies the gradient of `log pi(a)`.
    pub logp: f64,
    /// Multiplies the gradient of the entropy.
    pub entropy: f64,
    /// Multiplies the gradient of `V`.
    pub value: f64,
}

impl PolicyNet {
    /// Zero action and value heads, so the initial policy is uniform over
    /// legal actions. The hidden layer is seeded from `seed`.
    pub fn new(hidden: usize, seed: u64) -> Self {
        let inputs = if hidden == 0 { OBS_DIM } else { hidden };
        let len = hidden * OBS_DIM + hidden + NUM_ACTIONS * inputs + NUM_ACTIONS + inputs + 1;
        let mut params = vec![0.0; len];
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let bound = 1.0 / (OBS_DIM as f64).sqrt();
        for p in params.iter_mut().take(hidden * OBS_DIM) {
            *p = rng.gen_range(-bound..bound);
        }
        PolicyNet { hidden, params }
    }

    fn inputs(&self) -> usize {
        if self.hidden == 0 {
            OBS_DIM
        } else {
            self.hidden
        }
    }

    fn offsets(&self) -> (usize, usize, usize, usize, usize) {
        let h = self.hidden;
        let b1 = h * OBS_DIM;
        let wp = b1 + h;
        let bp = wp + NUM_ACTIONS * self.inputs();
        let wv = bp + NUM_ACTIONS;
        let bv = wv + self.inputs();
        (b1, wp, bp, wv, bv)
    }

    pub fn expected_len(&self) -> usize {
        self.offsets().4 + 1
    }

    pub fn forward(&self, obs: &[f64; OBS_DIM], mask: &Mask) -> Forward {
        let (b1, wp, bp, wv, bv) = self.offsets();
        let p = &self.params;
        let features: Vec<f64> = if self.hidden == 0 {
            obs.to_vec()
        } else {
            (0..self.hidden)
                .map(|j| {
                    let row = &p[j * OBS_DIM..(j + 1) * OBS_DIM];
                    let z: f64 = row.iter().zip(obs).map(|(w, x)| w * x).sum::<f64>() + p[b1 + j];
                    z.tanh()
                })
                .collect()
        };
        let n = features.len();
        let mut logits = [f64::NEG_INFINITY; NUM_ACTIONS];
        for (a, l) in logits.iter_mut().enumerate() {
            if mask[a] {
                let row = &p[wp + a * n..wp + (a + 1) * n];
                *l = row.iter().zip(&features).map(|(w, x)| w * x).sum::<f64>() + p[bp + a];
            }
        }
        let value = p[wv..wv + n]
            .iter()
            .zip(&features)
            .map(|(w, x)| w * x)
            .sum::<f64>()
            + p[bv];
        Forward {
            probs: masked_softmax(&logits),
            features,
            value,
        }
    }

    /// Adds `terms.logp * d log pi(a) + terms.entropy * dH + terms.value * dV`
    /// to `grad`.
    pub fn accumulate_grad(
        &self,
        obs: &[f64; OBS_DIM],
        mask: &Mask,
        action: usize,
        terms: GradTerms,
        grad: &mut [f64],
    ) {
        let f = self.forward(obs, mask);
        let (b1, wp, bp, wv, bv) = self.offsets();
        let n = f.features.len();
        let entropy = entropy(&f.probs);
        let mut dz = [0.0; NUM_ACTIONS];
        for a in 0..NUM_ACTIONS {
            if !mask[a] {
                continue;
            }
            let pa = f.probs[a];
            let dlogp = if a == action { 1.0 - pa } else { -pa };
            let dh = if pa > 0.0 { -pa * (pa.ln() + entropy) } else { 0.0 };
            dz[a] = terms.logp * dlogp + terms.entropy * dh;
        }
        let mut dx = vec![0.0; n];
        for a in 0..NUM_ACTIONS {
            if dz[a] == 0.0 {
                continue;
            }
            for i in 0..n {
                grad[wp + a * n + i] += dz[a] * f.features[i];
                dx[i] += dz[a] * self.params[wp + a * n + i];
            }
            grad[bp + a] += dz[a];
        }
        for i in 0..n {
            grad[wv + i] += terms.value * f.features[i];
            dx[i] += terms.value * self.params[wv + i];
        }
        grad[bv] += terms.value;
        if self.hidden > 0 {
            for j in 0..self.hidden {
                let x = f.features[j];
                let dpre = dx[j] * (1.0 - x * x);
                for (k, o) in obs.iter().enumerate() {
                    grad[j * OBS_DIM + k] += dpre * o;
                }
                grad[b1 + j] += dpre;
            }
        }
    }

    /// Most probable legal action; ties go to the lowest catalog index.
    pub fn greedy(&self, obs: &[f64; OBS_DIM], mask: &Mask) -> Option<PassAction> {
        let f = self.forward(obs, mask);
        let mut best: Option<usize> = None;
        for a in (0..NUM_ACTIONS).filter(|&a| mask[a]) {
            if best.is_none_or(|b| f.probs[a] > f.probs[b]) {
                best = Some(a);
            }
        }
        best.map(|a| PassAction::ALL[a])
    }

    /// Samples a legal action. Returns it with its probability.
    pub fn sample(
        &self,
        obs: &[f64; OBS_DIM],
        mask: &Mask,
        rng: &mut impl Rng,
    ) -> Option<(PassAction, Forward)> {
        let f = self.forward(obs, mask);
        let a = sample_index(&f.probs, mask, rng)?;
        Some((PassAction::ALL[a], f))
    }
}

fn masked_softmax(logits: &[f64; NUM_ACTIONS]) -> [f64; NUM_ACTIONS] {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut p = [0.0; NUM_ACTIONS];
    if max == f64::NEG_INFINITY {
        return p;
    }
    let mut sum = 0.0;
    for (pi, &l) in p.iter_mut().zip(logits) {
        if l > f64::NEG_INFINITY {
            *pi = (l - max).exp();
            sum += *pi;
        }
    }
    for pi in p.iter_mut() {
        *pi /= sum;
    }
    p
}

pub fn entropy(p: &[f64]) -> f64 {
    -p.iter().filter(|&&x| x > 0.0).map(|x| x * x.ln()).sum::<f64>()
}

/// Draws an index with probability `probs[i]` among `mask`ed entries.
pub fn sample_index(probs: &[f64; NUM_ACTIONS], mask: &Mask, rng: &mut impl Rng) -> Option<usize> {
    let legal: Vec<usize> = (0..NUM_ACTIONS).filter(|&a| mask[a]).collect();
    let last = *legal.last()?;
    let mut u: f64 = rng.gen();
    for &a in &legal {
        u -= probs[a];
        if u < 0.0 {
            return Some(a);
        }
    }
    Some(last)
}

pub const POLICY_FORMAT_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum PolicyError {
    #[error("cannot access policy file {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("corrupt policy file {path}: {reason}")]
    Corrupt { path: String, reason: String },
    #[error("policy {path} was trained against a different pass catalog (file {found}, current {expected})")]
    CatalogMismatch {
        path: String,
        found: String,
        expected: String,
    },
}

/// A trained policy for one device and figure of merit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolicyFile {
    pub format_version: u32,
    pub catalog_hash: String,
    pub obs_dim: usize,
    pub device_id: String,
    pub fom: String,
    pub max_steps: usize,
    /// Training seed; also seeds the mapping state of compiles.
    pub seed: u64,
    pub net: PolicyNet,
    /// Mean greedy score on the evaluation set when the policy was kept.
    pub eval_score: f64,
}

impl PolicyFile {
    pub fn new(
        net: PolicyNet,
        device_id: &str,
        fom: &str,
        max_steps: usize,
        seed: u64,
        eval_score: f64,
    ) -> Self {
        PolicyFile {
            format_version: POLICY_FORMAT_VERSION,
            catalog_hash: catalog_hash(),
            obs_dim: OBS_DIM,
            device_id: device_id.to_string(),
            fom: fom.to_string(),
            max_steps,
            seed,
            net,
            eval_score,
        }
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), PolicyError> {
        let path = path.as_ref();
        let text = serde_json::to_string(self).expect("policy serialises");
        std::fs::write(path, text).map_err(|source| PolicyError::Io {
            path: path.display().to_string(),
            source,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, PolicyError> {
        let path = path.as_ref();
        let shown = path.display().to_string();
        let text = std::fs::read_to_string(path).map_err(|source| PolicyError::Io {
            path: shown.clone(),
            source,
        })?;
        let corrupt = |reason: String| PolicyError::Corrupt {
            path: shown.clone(),
            reason,
        };
        let file: PolicyFile = serde_json::from_str(&text).map_err(|e| corrupt(e.to_string()))?;
        if file.catalog_hash != catalog_hash() {
            return Err(PolicyError::CatalogMismatch {
                path: shown,
                found: file.catalog_hash,
                expected: catalog_hash(),
            });
        }
        if file.format_version != POLICY_FORMAT_VERSION {
            return Err(corrupt(format!(
                "unsupported format version {}",
                file.format_version
            )));
        }
        if file.obs_dim != OBS_DIM || file.net.params.len() != file.net.expected_len() {
            return Err(corrupt("parameter shape does not match the network".into()));
        }
        if file.net.params.iter().any(|p| !p.is_finite()) {
            return Err(corrupt("non-finite parameter".into()));
        }
        Ok(file)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn obs(seed: u64) -> [f64; OBS_DIM] {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut o = [0.0; OBS_DIM];
        for x in o.iter_mut() {
            *x = rng.gen();
        }
        o
    }

    fn random_net(hidden: usize, seed: u64) -> PolicyNet {
        let mut net = PolicyNet::new(hidden, seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed + 1);
        for p in net.params.iter_mut() {
            *p = rng.gen_range(-0.8..0.8);
        }
        net
    }

    fn mask() -> Mask {
        let mut m = [false; NUM_ACTIONS];
        for a in [0, 3, 4, 9, 12, 16] {
            m[a] = true;
        }
        m
    }

    /// The scalar whose gradient `accumulate_grad` computes.
    fn objective(net: &PolicyNet, o: &[f64; OBS_DIM], m: &Mask, a: usize, t: GradTerms) -> f64 {
        let f = net.forward(o, m);
        t.logp * f.probs[a].ln() + t.entropy * entropy(&f.probs) + t.value * f.value
    }

    #[test]
    fn analytic_gradient_matches_finite_differences() {
        let t = GradTerms {
            logp: 0.7,
            entropy: -0.3,
            value: 1.3,
        };
        for hidden in [0, 5] {
            let net = random_net(hidden, 11);
            let o = obs(3);
            let m = mask();
            let mut g = vec![0.0; net.params.len()];
            net.accumulate_grad(&o, &m, 9, t, &mut g);
            let h = 1e-6;
            for (i, &gi) in g.iter().enumerate() {
                let mut up = net.clone();
                up.params[i] += h;
                let mut down = net.clone();
                down.params[i] -= h;
                let fd = (objective(&up, &o, &m, 9, t) - objective(&down, &o, &m, 9, t)) / (2.0 * h);
                assert!((fd - gi).abs() < 1e-6, "param {i}: analytic {gi} vs numeric {fd}");
            }
        }
    }

    #[test]
    fn fresh_policy_is_uniform_over_legal_actions() {
        let net = PolicyNet::new(32, 0);
        let f = net.forward(&obs(1), &mask());
        for a in 0..NUM_ACTIONS {
            let want = if mask()[a] { 1.0 / 6.0 } else { 0.0 };
            assert!((f.probs[a] - want).abs() < 1e-12);
        }
        assert_eq!(net.greedy(&obs(1), &mask()), Some(PassAction::ALL[0]));
    }

    #[test]
    fn sampling_respects_the_mask() {
        let net = random_net(4, 5);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..500 {
            let (a, _) = net.sample(&obs(2), &mask(), &mut rng).unwrap();
            assert!(mask()[a.index()]);
        }
        assert!(net.sample(&obs(2), &[false; NUM_ACTIONS], &mut rng).is_none());
    }

    #[test]
    fn policy_files_round_trip_and_reject_damage() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.json");
        let file = PolicyFile::new(random_net(3, 2), "line-3q", "expected_fidelity", 40, 3, 0.5);
        file.save(&path).unwrap();
        assert_eq!(PolicyFile::load(&path).unwrap(), file);

        let mut other = file.clone();
        other.catalog_hash = "0".repeat(64);
        other.save(&path).unwrap();
        assert!(matches!(
            PolicyFile::load(&path),
            Err(PolicyError::CatalogMismatch { .. })
        ));

        let mut short = file.clone();
        short.net.params.pop();
        short.save(&path).unwrap();
        assert!(matches!(
            PolicyFile::load(&path),
            Err(PolicyError::Corrupt { .. })
        ));

        std::fs::write(&path, "{ not json").unwrap();
        assert!(matches!(
            PolicyFile::load(&path),
            Err(PolicyError::Corrupt { .. })
        ));
        assert!(matches!(
            PolicyFile::load(dir.path().join("missing.json")),
            Err(PolicyError::Io { .. })
        ));
    }
}
