//! Adversarial initialisation of the mapping.
//!
//! A one-hidden-layer discriminator learns to tell mapped source vectors
//! from target vectors; the mapping is then updated to fool it and projected
//! back onto the orthogonal matrices after every step.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::TranslationMatrix;
use crate::embeddings::EmbeddingSpace;
use crate::error::{Error, Result};
use crate::numerics::{dot, nearest_orthogonal, Matrix};

const LEAKY_SLOPE: f64 = 0.2;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AdversarialConfig {
    pub epochs: usize,
    pub steps_per_epoch: usize,
    /// Discriminator updates per mapping update.
    pub discriminator_steps: usize,
    pub batch_size: usize,
    pub hidden_units: usize,
    pub discriminator_lr: f64,
    pub generator_lr: f64,
    /// Multiplicative learning-rate decay applied after each epoch.
    pub lr_decay: f64,
    pub label_smoothing: f64,
    /// Batches are drawn from this many most frequent words of each space.
    pub vocab_cap: usize,
    /// Words per side used to measure discriminator accuracy.
    pub eval_size: usize,
    pub seed: u64,
}

impl Default for AdversarialConfig {
    fn default() -> Self {
        Self {
            epochs: 50,
            steps_per_epoch: 100,
            discriminator_steps: 5,
            batch_size: 64,
            hidden_units: 256,
            discriminator_lr: 0.1,
            generator_lr: 0.05,
            lr_decay: 0.98,
            label_smoothing: 0.1,
            vocab_cap: 5000,
            eval_size: 1000,
            seed: 0,
        }
    }
}

impl AdversarialConfig {
    fn validate(&self) -> Result<()> {
        let counts = [
            ("steps_per_epoch", self.steps_per_epoch),
            ("discriminator_steps", self.discriminator_steps),
            ("batch_size", self.batch_size),
            ("hidden_units", self.hidden_units),
            ("vocab_cap", self.vocab_cap),
            ("eval_size", self.eval_size),
        ];
        if let Some((name, _)) = counts.iter().find(|(_, v)| *v == 0) {
            return Err(Error::InvalidConfig(format!("{name} must be positive")));
        }
        if !(0.0..0.5).contains(&self.label_smoothing) {
            return Err(Error::InvalidConfig("label_smoothing must be in [0, 0.5)".into()));
        }
        for (name, lr) in [
            ("discriminator_lr", self.discriminator_lr),
            ("generator_lr", self.generator_lr),
            ("lr_decay", self.lr_decay),
        ] {
            if !(lr.is_finite() && lr > 0.0) {
                return Err(Error::InvalidConfig(format!("{name} must be positive")));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub discriminator_loss: f64,
    pub generator_loss: f64,
    pub discriminator_accuracy: f64,
    pub orthogonality_residual: f64,
}

#[derive(Clone, Debug)]
pub struct AdversarialRun {
    pub matrix: TranslationMatrix,
    pub trace: Vec<EpochStats>,
}

/// `logit = v·leaky(W1 x + b1) + c`; label 1 means "mapped source".
struct Discriminator {
    w1: Vec<Vec<f64>>,
    b1: Vec<f64>,
    v: Vec<f64>,
    c: f64,
}

struct Activations {
    pre: Vec<f64>,
    hidden: Vec<f64>,
    prob: f64,
}

fn leaky(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        LEAKY_SLOPE * x
    }
}

fn leaky_grad(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else {
        LEAKY_SLOPE
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn bce(prob: f64, label: f64) -> f64 {
    let p = prob.clamp(1e-12, 1.0 - 1e-12);
    -(label * p.ln() + (1.0 - label) * (1.0 - p).ln())
}

impl Discriminator {
    fn new(dim: usize, hidden: usize, rng: &mut ChaCha8Rng) -> Self {
        let b_in = 1.0 / (dim as f64).sqrt();
        let b_out = 1.0 / (hidden as f64).sqrt();
        Self {
            w1: (0..hidden)
                .map(|_| (0..dim).map(|_| rng.random_range(-b_in..b_in)).collect())
                .collect(),
            b1: (0..hidden).map(|_| rng.random_range(-b_in..b_in)).collect(),
            v: (0..hidden).map(|_| rng.random_range(-b_out..b_out)).collect(),
            c: rng.random_range(-b_out..b_out),
        }
    }

    fn forward(&self, x: &[f64]) -> Activations {
        let pre: Vec<f64> = self.w1.iter().zip(&self.b1).map(|(w, b)| dot(w, x) + b).collect();
        let hidden: Vec<f64> = pre.iter().map(|&p| leaky(p)).collect();
        let prob = sigmoid(dot(&self.v, &hidden) + self.c);
        Activations { pre, hidden, prob }
    }

    /// Gradient of the loss with respect to the input.
    fn input_grad(&self, act: &Activations, dlogit: f64, out: &mut [f64]) {
        for ((w, v), pre) in self.w1.iter().zip(&self.v).zip(&act.pre) {
            let g = dlogit * v * leaky_grad(*pre);
            for (o, wi) in out.iter_mut().zip(w) {
                *o += g * wi;
            }
        }
    }

    /// One SGD step on a labelled batch; returns the mean loss.
    fn train_step(&mut self, batch: &[(Vec<f64>, f64)], lr: f64) -> f64 {
        let hidden = self.v.len();
        let dim = self.w1[0].len();
        let mut gw1 = vec![vec![0.0; dim]; hidden];
        let mut gb1 = vec![0.0; hidden];
        let mut gv = vec![0.0; hidden];
        let mut gc = 0.0;
        let mut loss = 0.0;
        for (x, label) in batch {
            let act = self.forward(x);
            loss += bce(act.prob, *label);
            let dlogit = act.prob - label;
            gc += dlogit;
            for h in 0..hidden {
                gv[h] += dlogit * act.hidden[h];
                let g = dlogit * self.v[h] * leaky_grad(act.pre[h]);
                gb1[h] += g;
                for (gw, xi) in gw1[h].iter_mut().zip(x) {
                    *gw += g * xi;
                }
            }
        }
        let scale = lr / batch.len() as f64;
        for h in 0..hidden {
            self.v[h] -= scale * gv[h];
            self.b1[h] -= scale * gb1[h];
            for (w, g) in self.w1[h].iter_mut().zip(&gw1[h]) {
                *w -= scale * g;
            }
        }
        self.c -= scale * gc;
        loss / batch.len() as f64
    }
}

fn map(w: &Matrix, x: &[f64]) -> Vec<f64> {
    w.row_iter().map(|r| dot(r, x)).collect()
}

/// Train a mapping from `src` to `tgt` adversarially, starting from the
/// identity.
pub fn adversarial_init(
    src: &EmbeddingSpace,
    tgt: &EmbeddingSpace,
    cfg: &AdversarialConfig,
) -> Result<AdversarialRun> {
    if src.dim() != tgt.dim() {
        return Err(Error::DimensionMismatch {
            context: "source vs target embedding dimension".into(),
            expected: src.dim(),
            found: tgt.dim(),
        });
    }
    src.require_normalized("adversarial training")?;
    tgt.require_normalized("adversarial training")?;
    cfg.validate()?;
    let d = src.dim();
    let mut w = Matrix::identity(d);
    let mut trace = Vec::with_capacity(cfg.epochs);
    if cfg.epochs == 0 {
        return Ok(AdversarialRun {
            matrix: TranslationMatrix::identity(d),
            trace,
        });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut disc = Discriminator::new(d, cfg.hidden_units, &mut rng);
    let src_cap = cfg.vocab_cap.min(src.len());
    let tgt_cap = cfg.vocab_cap.min(tgt.len());
    let src_label = 1.0 - cfg.label_smoothing;
    let tgt_label = cfg.label_smoothing;
    let mut dis_lr = cfg.discriminator_lr;
    let mut gen_lr = cfg.generator_lr;

    let eval_src: Vec<usize> = (0..cfg.eval_size.min(src_cap)).map(|_| rng.random_range(0..src_cap)).collect();
    let eval_tgt: Vec<usize> = (0..cfg.eval_size.min(tgt_cap)).map(|_| rng.random_range(0..tgt_cap)).collect();

    for epoch in 0..cfg.epochs {
        let mut dis_loss = 0.0;
        let mut gen_loss = 0.0;
        for _ in 0..cfg.steps_per_epoch {
            for _ in 0..cfg.discriminator_steps {
                let mut batch = Vec::with_capacity(2 * cfg.batch_size);
                for _ in 0..cfg.batch_size {
                    let i = rng.random_range(0..src_cap);
                    batch.push((map(&w, src.vectors().row(i)), src_label));
                }
                for _ in 0..cfg.batch_size {
                    let j = rng.random_range(0..tgt_cap);
                    batch.push((tgt.vectors().row(j).to_vec(), tgt_label));
                }
                dis_loss += disc.train_step(&batch, dis_lr);
            }

            // mapping step: push mapped sources towards the target label
            let mut grad = vec![0.0; d * d];
            let mut loss = 0.0;
            let mut gx = vec![0.0; d];
            for _ in 0..cfg.batch_size {
                let i = rng.random_range(0..src_cap);
                let x = src.vectors().row(i);
                let act = disc.forward(&map(&w, x));
                loss += bce(act.prob, tgt_label);
                gx.iter_mut().for_each(|g| *g = 0.0);
                disc.input_grad(&act, act.prob - tgt_label, &mut gx);
                for (a, ga) in gx.iter().enumerate() {
                    for (b, xb) in x.iter().enumerate() {
                        grad[a * d + b] += ga * xb;
                    }
                }
            }
            gen_loss += loss / cfg.batch_size as f64;
            let scale = gen_lr / cfg.batch_size as f64;
            let stepped: Vec<f64> = w.as_slice().iter().zip(&grad).map(|(wi, g)| wi - scale * g).collect();
            w = match Matrix::from_vec(d, d, stepped) {
                Ok(m) => nearest_orthogonal(&m)?,
                Err(_) => {
                    return Err(Error::Divergence {
                        epoch,
                        message: "mapping update produced non-finite values".into(),
                    })
                }
            };
        }

        let steps = cfg.steps_per_epoch as f64;
        let dis_loss = dis_loss / (steps * cfg.discriminator_steps as f64);
        let gen_loss = gen_loss / steps;
        if !dis_loss.is_finite() || !gen_loss.is_finite() {
            return Err(Error::Divergence {
                epoch,
                message: format!("non-finite loss (discriminator {dis_loss}, mapping {gen_loss})"),
            });
        }
        let correct_src = eval_src
            .iter()
            .filter(|&&i| disc.forward(&map(&w, src.vectors().row(i))).prob >= 0.5)
            .count();
        let correct_tgt = eval_tgt
            .iter()
            .filter(|&&j| disc.forward(tgt.vectors().row(j)).prob < 0.5)
            .count();
        let stats = EpochStats {
            epoch,
            discriminator_loss: dis_loss,
            generator_loss: gen_loss,
            discriminator_accuracy: (correct_src + correct_tgt) as f64 / (eval_src.len() + eval_tgt.len()) as f64,
            orthogonality_residual: w.orthogonality_residual(),
        };
        log::debug!("adversarial epoch {epoch}: {stats:?}");
        trace.push(stats);
        dis_lr *= cfg.lr_decay;
        gen_lr *= cfg.lr_decay;
    }

    Ok(AdversarialRun {
        matrix: TranslationMatrix::new(w)?,
        trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_distr::StandardNormal;

    fn random_space(n: usize, d: usize, seed: u64) -> EmbeddingSpace {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data = (0..n * d).map(|_| rng.sample(StandardNormal)).collect();
        let words = (0..n).map(|i| format!("w{i}")).collect();
        EmbeddingSpace::new(words, Matrix::from_vec(n, d, data).unwrap())
            .unwrap()
            .normalize()
            .unwrap()
    }

    fn small_cfg() -> AdversarialConfig {
        AdversarialConfig {
            epochs: 3,
            steps_per_epoch: 20,
            hidden_units: 32,
            batch_size: 16,
            eval_size: 200,
            seed: 3,
            ..Default::default()
        }
    }

    #[test]
    fn zero_epochs_is_identity() {
        let s = random_space(50, 4, 1);
        let cfg = AdversarialConfig {
            epochs: 0,
            ..Default::default()
        };
        let run = adversarial_init(&s, &s, &cfg).unwrap();
        assert_eq!(run.matrix, TranslationMatrix::identity(4));
        assert!(run.trace.is_empty());
    }

    #[test]
    fn stays_orthogonal_and_deterministic() {
        let s = random_space(200, 6, 2);
        let a = adversarial_init(&s, &s, &small_cfg()).unwrap();
        let b = adversarial_init(&s, &s, &small_cfg()).unwrap();
        assert_eq!(a.matrix, b.matrix);
        assert_eq!(a.trace, b.trace);
        for e in &a.trace {
            assert!(e.orthogonality_residual < 1e-3);
        }
    }

    #[test]
    fn rejects_bad_config() {
        let s = random_space(20, 3, 4);
        let t = random_space(20, 4, 5);
        assert!(matches!(
            adversarial_init(&s, &t, &small_cfg()),
            Err(Error::DimensionMismatch { .. })
        ));
        let cfg = AdversarialConfig {
            label_smoothing: 0.5,
            ..small_cfg()
        };
        assert!(adversarial_init(&s, &s, &cfg).is_err());
    }

    #[test]
    fn input_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let disc = Discriminator::new(5, 7, &mut rng);
        let x: Vec<f64> = (0..5).map(|_| rng.random_range(-1.0..1.0)).collect();
        let label = 0.1;
        let act = disc.forward(&x);
        let mut g = vec![0.0; 5];
        disc.input_grad(&act, act.prob - label, &mut g);
        let h = 1e-6;
        for i in 0..5 {
            let mut xp = x.clone();
            xp[i] += h;
            let mut xm = x.clone();
            xm[i] -= h;
            let fd = (bce(disc.forward(&xp).prob, label) - bce(disc.forward(&xm).prob, label)) / (2.0 * h);
            assert!((fd - g[i]).abs() < 1e-6, "dim {i}: {fd} vs {}", g[i]);
        }
    }
}
