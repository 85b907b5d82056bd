//! Clipped-surrogate policy optimisation over the compilation MDP.

use qpredict_core::device::DeviceModel;
use qpredict_core::fom::FigureOfMerit;
use qpredict_core::passes::PassAction;
use qpredict_core::Circuit;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cache::TransitionCache;
use crate::compile::{rollout, run_policy, Chooser, CompileMode};
use crate::env::Episode;
use crate::obs::{observe, OBS_DIM};
use crate::policy::{entropy, GradTerms, Mask, PolicyFile, PolicyNet};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub iterations: usize,
    pub episodes_per_batch: usize,
    /// Episodes are drawn in groups on the same circuit; each episode's
    /// baseline is the mean return of the rest of its group. With groups of
    /// one the value head is the baseline.
    pub episodes_per_circuit: usize,
    pub epochs: usize,
    pub minibatch: usize,
    pub learning_rate: f64,
    pub clip: f64,
    pub entropy_coef: f64,
    pub value_coef: f64,
    /// Width of the tanh hidden layer; 0 gives a linear policy.
    pub hidden: usize,
    pub max_steps: usize,
    /// Evaluate and keep the best parameters every this many iterations.
    pub eval_every: usize,
    /// Share of the corpus held out for evaluation.
    pub eval_fraction: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            iterations: 40,
            episodes_per_batch: 64,
            episodes_per_circuit: 4,
            epochs: 4,
            minibatch: 256,
            learning_rate: 0.01,
            clip: 0.2,
            entropy_coef: 0.01,
            value_coef: 0.5,
            hidden: 0,
            max_steps: crate::env::DEFAULT_MAX_STEPS,
            eval_every: 5,
            eval_fraction: 0.2,
            seed: 0,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum TrainError {
    #[error("the training corpus is empty")]
    EmptyCorpus,
    #[error("corpus circuit {index} has {qubits} qubits but device {device} has {available}")]
    TooLarge {
        index: usize,
        qubits: usize,
        device: String,
        available: usize,
    },
    #[error("non-finite loss at iteration {iteration} (mean reward {mean_reward}, {samples} samples)")]
    NonFinite {
        iteration: usize,
        mean_reward: f64,
        samples: usize,
    },
    #[error("invalid training configuration: {0}")]
    Config(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationStats {
    pub iteration: usize,
    pub mean_reward: f64,
    pub eval_score: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub circuits: usize,
    pub best_iteration: usize,
    pub best_eval_score: f64,
    pub history: Vec<IterationStats>,
}

/// One recorded decision.
#[derive(Clone, Debug, PartialEq)]
pub struct Transition {
    pub obs: [f64; OBS_DIM],
    pub mask: Mask,
    pub action: usize,
    /// Probability of `action` under the policy that sampled it.
    pub old_prob: f64,
    /// Episode return.
    pub ret: f64,
    pub value: f64,
    /// Return minus baseline, before batch normalisation.
    pub advantage: f64,
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
    lr: f64,
}

impl Adam {
    fn new(len: usize, lr: f64) -> Self {
        Adam {
            m: vec![0.0; len],
            v: vec![0.0; len],
            t: 0,
            lr,
        }
    }

    /// Descends along `grad`.
    fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        const B1: f64 = 0.9;
        const B2: f64 = 0.999;
        self.t += 1;
        let c1 = 1.0 - B1.powi(self.t);
        let c2 = 1.0 - B2.powi(self.t);
        for i in 0..params.len() {
            self.m[i] = B1 * self.m[i] + (1.0 - B1) * grad[i];
            self.v[i] = B2 * self.v[i] + (1.0 - B2) * grad[i] * grad[i];
            params[i] -= self.lr * (self.m[i] / c1) / ((self.v[i] / c2).sqrt() + 1e-8);
        }
    }
}

/// Mean greedy score (no fallback) over `circuits`.
pub fn evaluate(
    net: &PolicyNet,
    circuits: &[Circuit],
    d: &DeviceModel,
    fom: FigureOfMerit,
    max_steps: usize,
    seed: u64,
    cache: &mut TransitionCache,
) -> f64 {
    if circuits.is_empty() {
        return 0.0;
    }
    let total: f64 = circuits
        .iter()
        .map(|c| {
            run_policy(c, d, fom, net, max_steps, CompileMode::Greedy, seed, false, cache)
                .map(|o| o.score)
                .unwrap_or(0.0)
        })
        .sum();
    total / circuits.len() as f64
}

/// Samples from the policy and records each decision.
struct Recording<'a, 'n> {
    net: &'n PolicyNet,
    rng: &'a mut ChaCha8Rng,
    out: &'a mut Vec<Transition>,
}

impl Chooser for Recording<'_, '_> {
    fn choose(&mut self, ep: &Episode<'_>, mask: &Mask) -> Option<PassAction> {
        let obs = observe(&ep.circuit, ep.status, ep.mapping.layout.is_some());
        let (a, f) = self.net.sample(&obs, mask, self.rng)?;
        self.out.push(Transition {
            obs,
            mask: *mask,
            action: a.index(),
            old_prob: f.probs[a.index()],
            ret: 0.0,
            value: f.value,
            advantage: 0.0,
        });
        Some(a)
    }
}

/// Samples one episode, appending its decisions to `out`. Returns the
/// episode reward.
#[allow(clippy::too_many_arguments)]
fn collect_episode(
    net: &PolicyNet,
    c: &Circuit,
    d: &DeviceModel,
    fom: FigureOfMerit,
    cfg: &TrainConfig,
    rng: &mut ChaCha8Rng,
    cache: &mut TransitionCache,
    out: &mut Vec<Transition>,
) -> f64 {
    let mut ep = Episode::new(c.clone(), d, fom, cfg.max_steps, cfg.seed);
    let start = out.len();
    let mut rec = Recording { net, rng, out };
    let (_, reward) = rollout(&mut ep, &mut rec, cache);
    for s in &mut out[start..] {
        s.ret = reward;
    }
    reward
}

/// Trains a policy for one device and figure of merit. A seeded random
/// `eval_fraction` of the corpus (at least one circuit, unless the corpus
/// has only one) is held out, and the parameters with the best mean greedy
/// score on it are returned.
pub fn train_policy(
    circuits: &[Circuit],
    d: &DeviceModel,
    fom: FigureOfMerit,
    cfg: &TrainConfig,
) -> Result<(PolicyFile, TrainReport), TrainError> {
    if cfg.episodes_per_batch == 0
        || cfg.episodes_per_circuit == 0
        || cfg.minibatch == 0
        || cfg.max_steps == 0
    {
        return Err(TrainError::Config(
            "batch sizes and step cap must be positive".into(),
        ));
    }
    if !(0.0..1.0).contains(&cfg.eval_fraction) {
        return Err(TrainError::Config("eval_fraction must lie in [0, 1)".into()));
    }
    if circuits.is_empty() {
        return Err(TrainError::EmptyCorpus);
    }
    if let Some((index, c)) = circuits
        .iter()
        .enumerate()
        .find(|(_, c)| c.num_qubits() > d.num_qubits())
    {
        return Err(TrainError::TooLarge {
            index,
            qubits: c.num_qubits(),
            device: d.id().to_string(),
            available: d.num_qubits(),
        });
    }
    let held = if circuits.len() < 2 {
        0
    } else {
        ((circuits.len() as f64 * cfg.eval_fraction).ceil() as usize).clamp(1, circuits.len() - 1)
    };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut shuffled: Vec<&Circuit> = circuits.iter().collect();
    shuffled.shuffle(&mut rng);
    let (eval, train) = shuffled.split_at(held);
    let train: Vec<Circuit> = train.iter().map(|&c| c.clone()).collect();
    let eval: Vec<Circuit> = if eval.is_empty() {
        train.clone()
    } else {
        eval.iter().map(|&c| c.clone()).collect()
    };

    let mut net = PolicyNet::new(cfg.hidden, cfg.seed);
    let mut adam = Adam::new(net.params.len(), cfg.learning_rate);
    let mut cache = TransitionCache::default();

    let mut best = net.clone();
    let mut best_score = evaluate(&net, &eval, d, fom, cfg.max_steps, cfg.seed, &mut cache);
    let mut best_iteration = 0;
    let mut history = Vec::new();

    for it in 1..=cfg.iterations {
        let mut samples = Vec::new();
        let mut total = 0.0;
        let mut episodes = 0;
        while episodes < cfg.episodes_per_batch {
            let c = &train[rng.gen_range(0..train.len())];
            let k = cfg.episodes_per_circuit.min(cfg.episodes_per_batch - episodes);
            let mut spans = Vec::with_capacity(k);
            for _ in 0..k {
                let start = samples.len();
                let r = collect_episode(&net, c, d, fom, cfg, &mut rng, &mut cache, &mut samples);
                spans.push((start, samples.len(), r));
                total += r;
            }
            let sum: f64 = spans.iter().map(|s| s.2).sum();
            for &(a, b, r) in &spans {
                for s in &mut samples[a..b] {
                    let baseline = if k > 1 {
                        (sum - r) / (k - 1) as f64
                    } else {
                        s.value
                    };
                    s.advantage = r - baseline;
                }
            }
            episodes += k;
        }
        let mean_reward = total / cfg.episodes_per_batch as f64;
        if !update(&mut net, &mut adam, &mut samples, cfg, &mut rng) {
            return Err(TrainError::NonFinite {
                iteration: it,
                mean_reward,
                samples: samples.len(),
            });
        }

        let eval_score = (it % cfg.eval_every.max(1) == 0 || it == cfg.iterations)
            .then(|| evaluate(&net, &eval, d, fom, cfg.max_steps, cfg.seed, &mut cache));
        if let Some(s) = eval_score {
            if s > best_score {
                best_score = s;
                best = net.clone();
                best_iteration = it;
            }
        }
        log::debug!(
            "{} {fom} iteration {it}: reward {mean_reward:.4}, eval {eval_score:?}",
            d.id()
        );
        history.push(IterationStats {
            iteration: it,
            mean_reward,
            eval_score,
        });
    }
    let report = TrainReport {
        circuits: train.len(),
        best_iteration,
        best_eval_score: best_score,
        history,
    };
    let file = PolicyFile::new(best, d.id(), &fom.id(), cfg.max_steps, cfg.seed, best_score);
    Ok((file, report))
}

/// One round of clipped-surrogate epochs. Returns false if the gradient
/// became non-finite.
fn update(
    net: &mut PolicyNet,
    adam: &mut Adam,
    samples: &mut [Transition],
    cfg: &TrainConfig,
    rng: &mut ChaCha8Rng,
) -> bool {
    if samples.is_empty() {
        return true;
    }
    let adv: Vec<f64> = samples.iter().map(|s| s.advantage).collect();
    let mean = adv.iter().sum::<f64>() / adv.len() as f64;
    let sd = (adv.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / adv.len() as f64).sqrt();
    let adv: Vec<f64> = adv.iter().map(|a| (a - mean) / (sd + 1e-8)).collect();

    let mut order: Vec<usize> = (0..samples.len()).collect();
    for _ in 0..cfg.epochs {
        order.shuffle(rng);
        for chunk in order.chunks(cfg.minibatch) {
            let batch: Vec<Transition> = chunk.iter().map(|&i| samples[i].clone()).collect();
            let a: Vec<f64> = chunk.iter().map(|&i| adv[i]).collect();
            let grad = surrogate_gradient(net, &batch, &a, cfg);
            if grad.iter().any(|g| !g.is_finite()) {
                return false;
            }
            adam.step(&mut net.params, &grad);
        }
    }
    true
}

/// Mean loss over `batch` with advantages `adv`:
/// -min(r A, clip(r) A) - c_e H + c_v (V - R)^2, where r is the probability
/// ratio against the sampling policy.
pub fn surrogate_loss(net: &PolicyNet, batch: &[Transition], adv: &[f64], cfg: &TrainConfig) -> f64 {
    let mut total = 0.0;
    for (s, &a) in batch.iter().zip(adv) {
        let f = net.forward(&s.obs, &s.mask);
        let ratio = f.probs[s.action] / s.old_prob;
        let clipped = ratio.clamp(1.0 - cfg.clip, 1.0 + cfg.clip);
        total += -(ratio * a).min(clipped * a) - cfg.entropy_coef * entropy(&f.probs)
            + cfg.value_coef * (f.value - s.ret).powi(2);
    }
    total / batch.len().max(1) as f64
}

/// Gradient of [`surrogate_loss`] with respect to the parameters.
pub fn surrogate_gradient(net: &PolicyNet, batch: &[Transition], adv: &[f64], cfg: &TrainConfig) -> Vec<f64> {
    let mut grad = vec![0.0; net.params.len()];
    let scale = 1.0 / batch.len().max(1) as f64;
    for (s, &a) in batch.iter().zip(adv) {
        let f = net.forward(&s.obs, &s.mask);
        let ratio = f.probs[s.action] / s.old_prob;
        // The clipped branch is constant in the parameters.
        let clipped = (a > 0.0 && ratio > 1.0 + cfg.clip) || (a < 0.0 && ratio < 1.0 - cfg.clip);
        let terms = GradTerms {
            logp: if clipped { 0.0 } else { -a * ratio * scale },
            entropy: -cfg.entropy_coef * scale,
            value: 2.0 * cfg.value_coef * (f.value - s.ret) * scale,
        };
        net.accumulate_grad(&s.obs, &s.mask, s.action, terms, &mut grad);
    }
    grad
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn adam_minimises_a_quadratic() {
        let mut p = vec![3.0, -2.0];
        let mut adam = Adam::new(2, 0.1);
        for _ in 0..500 {
            let g: Vec<f64> = p.iter().map(|x| 2.0 * x).collect();
            adam.step(&mut p, &g);
        }
        assert!(p.iter().all(|x| x.abs() < 1e-2), "{p:?}");
    }

    #[test]
    fn bad_corpora_are_rejected() {
        let d = qpredict_core::device::line_device(2);
        let cfg = TrainConfig::default();
        let fom = FigureOfMerit::CriticalDepth;
        let r = train_policy(&[Circuit::new(2), Circuit::new(3)], &d, fom, &cfg);
        assert!(matches!(r, Err(TrainError::TooLarge { index: 1, .. })));
        assert!(matches!(
            train_policy(&[], &d, fom, &cfg),
            Err(TrainError::EmptyCorpus)
        ));
    }

    fn frozen_batch(net: &PolicyNet, seed: u64) -> (Vec<Transition>, Vec<f64>) {
        use crate::policy::NUM_ACTIONS;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut batch = Vec::new();
        let mut adv = Vec::new();
        for k in 0..24 {
            let mut obs = [0.0; OBS_DIM];
            for o in obs.iter_mut() {
                *o = rng.gen();
            }
            let mut mask = [false; NUM_ACTIONS];
            for m in mask.iter_mut() {
                *m = rng.gen_bool(0.6);
            }
            mask[PassAction::Terminate.index()] = true;
            let legal: Vec<usize> = (0..NUM_ACTIONS).filter(|&a| mask[a]).collect();
            let action = legal[rng.gen_range(0..legal.len())];
            let p = net.forward(&obs, &mask).probs[action];
            // A quarter of the samples sit well inside the clipped region.
            let factor = if k % 4 == 0 { 0.5 } else { rng.gen_range(0.9..1.1) };
            batch.push(Transition {
                obs,
                mask,
                action,
                old_prob: p * factor,
                ret: rng.gen(),
                value: 0.0,
                advantage: 0.0,
            });
            adv.push(rng.gen_range(-1.5..1.5));
        }
        (batch, adv)
    }

    #[test]
    fn surrogate_gradient_matches_finite_differences() {
        for hidden in [0, 6] {
            let mut net = PolicyNet::new(hidden, 5);
            let mut rng = ChaCha8Rng::seed_from_u64(8);
            for p in net.params.iter_mut() {
                *p = rng.gen_range(-0.5..0.5);
            }
            let (batch, adv) = frozen_batch(&net, 2);
            let cfg = TrainConfig::default();
            let g = surrogate_gradient(&net, &batch, &adv, &cfg);
            let h = 1e-6;
            for (i, &gi) in g.iter().enumerate() {
                let mut up = net.clone();
                up.params[i] += h;
                let mut down = net.clone();
                down.params[i] -= h;
                let fd = (surrogate_loss(&up, &batch, &adv, &cfg)
                    - surrogate_loss(&down, &batch, &adv, &cfg))
                    / (2.0 * h);
                let err = (fd - gi).abs() / fd.abs().max(gi.abs()).max(1e-3);
                assert!(err < 1e-5, "hidden {hidden} param {i}: fd {fd} vs {gi}");
            }
        }
    }
}
