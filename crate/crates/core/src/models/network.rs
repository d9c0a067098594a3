//! Embedding-bag encoder with a linear softmax head.
//!
//! A text is the mean of its n-gram bucket embeddings; the head maps that
//! vector to class logits. Training is mini-batch SGD on cross-entropy with
//! a linearly decaying step size, run sequentially so a seed fixes the
//! result bit for bit.

use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    pub dim: usize,
    pub buckets: u32,
    pub classes: usize,
    emb: Vec<f32>,
    out_w: Vec<f32>,
    out_b: Vec<f32>,
}

/// One training example: feature ids, class index and loss weight.
pub struct Sample<'a> {
    pub ids: &'a [u32],
    pub class: usize,
    pub weight: f32,
}

impl Network {
    /// Random embeddings and a zero head, the usual starting point for
    /// training.
    pub fn init(dim: usize, buckets: u32, classes: usize, rng: &mut ChaCha8Rng) -> Self {
        let bound = 1.0 / dim as f32;
        let emb = (0..buckets as usize * dim).map(|_| rng.gen_range(-bound..bound)).collect();
        Self {
            dim,
            buckets,
            classes,
            emb,
            out_w: vec![0.0; classes * dim],
            out_b: vec![0.0; classes],
        }
    }

    /// Random embeddings and a random head: an untrained classifier.
    pub fn untrained(dim: usize, buckets: u32, classes: usize, rng: &mut ChaCha8Rng) -> Self {
        let mut net = Self::init(dim, buckets, classes, rng);
        let bound = (6.0 / (dim + classes) as f32).sqrt();
        for w in &mut net.out_w {
            *w = rng.gen_range(-bound..bound);
        }
        net
    }

    fn hidden(&self, ids: &[u32]) -> Vec<f32> {
        let mut h = vec![0.0f32; self.dim];
        if ids.is_empty() {
            return h;
        }
        for &id in ids {
            let row = &self.emb[id as usize * self.dim..][..self.dim];
            for (a, b) in h.iter_mut().zip(row) {
                *a += b;
            }
        }
        let inv = 1.0 / ids.len() as f32;
        h.iter_mut().for_each(|x| *x *= inv);
        h
    }

    fn softmax_from_hidden(&self, h: &[f32]) -> Vec<f64> {
        let logits: Vec<f64> = (0..self.classes)
            .map(|c| {
                let row = &self.out_w[c * self.dim..][..self.dim];
                self.out_b[c] as f64 + row.iter().zip(h).map(|(w, x)| (*w as f64) * (*x as f64)).sum::<f64>()
            })
            .collect();
        let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
        let z: f64 = exps.iter().sum();
        exps.into_iter().map(|e| e / z).collect()
    }

    /// Class probabilities, summing to 1.
    pub fn probabilities(&self, ids: &[u32]) -> Vec<f64> {
        self.softmax_from_hidden(&self.hidden(ids))
    }

    /// Trains in place; returns the mean loss of the final epoch.
    pub fn train(
        &mut self,
        samples: &[Sample<'_>],
        epochs: usize,
        learning_rate: f64,
        batch_size: usize,
        rng: &mut ChaCha8Rng,
    ) -> f64 {
        let n = samples.len();
        let batches_per_epoch = n.div_ceil(batch_size);
        let total_steps = (epochs * batches_per_epoch).max(1) as f64;
        let mut order: Vec<usize> = (0..n).collect();
        let mut step = 0usize;
        let mut last_loss = 0.0;
        let dim = self.dim;

        let mut grad_w = vec![0.0f32; self.classes * dim];
        let mut grad_b = vec![0.0f32; self.classes];
        let mut grad_emb: HashMap<u32, Vec<f32>> = HashMap::new();

        for _ in 0..epochs {
            order.shuffle(rng);
            let mut epoch_loss = 0.0;
            for batch in order.chunks(batch_size) {
                let lr = (learning_rate * (1.0 - step as f64 / total_steps)) as f32;
                step += 1;
                grad_w.iter_mut().for_each(|g| *g = 0.0);
                grad_b.iter_mut().for_each(|g| *g = 0.0);
                grad_emb.clear();

                for &i in batch {
                    let s = &samples[i];
                    let h = self.hidden(s.ids);
                    let p = self.softmax_from_hidden(&h);
                    epoch_loss += -(p[s.class].max(1e-12)).ln() * s.weight as f64;
                    let mut dh = vec![0.0f32; dim];
                    for c in 0..self.classes {
                        let g = (p[c] as f32 - if c == s.class { 1.0 } else { 0.0 }) * s.weight;
                        if g == 0.0 {
                            continue;
                        }
                        grad_b[c] += g;
                        let row = &self.out_w[c * dim..][..dim];
                        let grow = &mut grad_w[c * dim..][..dim];
                        for k in 0..dim {
                            grow[k] += g * h[k];
                            dh[k] += g * row[k];
                        }
                    }
                    if s.ids.is_empty() {
                        continue;
                    }
                    let share = 1.0 / s.ids.len() as f32;
                    for &id in s.ids {
                        let e = grad_emb.entry(id).or_insert_with(|| vec![0.0; dim]);
                        for k in 0..dim {
                            e[k] += dh[k] * share;
                        }
                    }
                }

                let scale = lr / batch.len() as f32;
                for (w, g) in self.out_w.iter_mut().zip(&grad_w) {
                    *w -= scale * g;
                }
                for (b, g) in self.out_b.iter_mut().zip(&grad_b) {
                    *b -= scale * g;
                }
                for (id, g) in &grad_emb {
                    let row = &mut self.emb[*id as usize * dim..][..dim];
                    for k in 0..dim {
                        row[k] -= scale * g[k];
                    }
                }
            }
            last_loss = epoch_loss / n.max(1) as f64;
        }
        last_loss
    }

    /// Little-endian f32: embeddings, head weights, head biases.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(4 * (self.emb.len() + self.out_w.len() + self.out_b.len()));
        for x in self.emb.iter().chain(&self.out_w).chain(&self.out_b) {
            out.extend_from_slice(&x.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(dim: usize, buckets: u32, classes: usize, bytes: &[u8]) -> Result<Self> {
        let n_emb = buckets as usize * dim;
        let n_w = classes * dim;
        let expected = 4 * (n_emb + n_w + classes);
        if bytes.len() != expected {
            return Err(Error::Format(format!(
                "weights file has {} bytes, expected {expected}",
                bytes.len()
            )));
        }
        let floats: Vec<f32> = bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        if floats.iter().any(|x| !x.is_finite()) {
            return Err(Error::Format("weights contain non-finite values".into()));
        }
        Ok(Self {
            dim,
            buckets,
            classes,
            emb: floats[..n_emb].to_vec(),
            out_w: floats[n_emb..n_emb + n_w].to_vec(),
            out_b: floats[n_emb + n_w..].to_vec(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn learns_separable_toy_problem() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut net = Network::init(8, 64, 2, &mut rng);
        let a: Vec<u32> = vec![1, 2, 3];
        let b: Vec<u32> = vec![4, 5, 6];
        let samples: Vec<Sample> = (0..40)
            .map(|i| if i % 2 == 0 {
                Sample { ids: &a, class: 0, weight: 1.0 }
            } else {
                Sample { ids: &b, class: 1, weight: 1.0 }
            })
            .collect();
        net.train(&samples, 20, 0.5, 4, &mut rng);
        assert!(net.probabilities(&a)[0] > 0.9);
        assert!(net.probabilities(&b)[1] > 0.9);
    }

    #[test]
    fn bytes_roundtrip() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let net = Network::untrained(4, 16, 3, &mut rng);
        let back = Network::from_bytes(4, 16, 3, &net.to_bytes()).unwrap();
        assert_eq!(net, back);
        assert!(Network::from_bytes(4, 16, 2, &net.to_bytes()).is_err());
        let p = back.probabilities(&[1, 2]);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        assert_eq!(back.probabilities(&[]).len(), 3);
    }
}
