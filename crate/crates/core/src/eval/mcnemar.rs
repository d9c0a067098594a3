//! Exact McNemar test on paired classifier outputs.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McNemar {
    /// Items A got right and B got wrong.
    pub b: u64,
    /// Items A got wrong and B got right.
    pub c: u64,
    pub p_value: f64,
    /// No discordant pairs: the test carries no information.
    pub degenerate: bool,
}

impl McNemar {
    pub fn significant(&self, alpha: f64) -> bool {
        !self.degenerate && self.p_value < alpha
    }
}

/// Compares two classifiers on the same gold labels.
pub fn mcnemar<A: AsRef<str>, B: AsRef<str>, G: AsRef<str>>(
    preds_a: &[A],
    preds_b: &[B],
    golds: &[G],
) -> Result<McNemar> {
    if preds_a.len() != golds.len() || preds_b.len() != golds.len() {
        return Err(Error::Validation(format!(
            "paired test needs equal lengths, got {}, {} and {} gold",
            preds_a.len(),
            preds_b.len(),
            golds.len()
        )));
    }
    let (mut b, mut c) = (0, 0);
    for ((pa, pb), g) in preds_a.iter().zip(preds_b).zip(golds) {
        let a_ok = pa.as_ref() == g.as_ref();
        let b_ok = pb.as_ref() == g.as_ref();
        match (a_ok, b_ok) {
            (true, false) => b += 1,
            (false, true) => c += 1,
            _ => {}
        }
    }
    Ok(mcnemar_counts(b, c))
}

/// Two-sided exact binomial p-value on discordant counts:
/// p = min(1, 2 · Σ_{i ≤ min(b,c)} C(b+c, i) / 2^(b+c)).
///
/// Summed in log space so large discordant counts neither overflow nor
/// underflow.
pub fn mcnemar_counts(b: u64, c: u64) -> McNemar {
    let n = b + c;
    if n == 0 {
        return McNemar {
            b,
            c,
            p_value: 1.0,
            degenerate: true,
        };
    }
    let k = b.min(c);
    let ln2n = n as f64 * std::f64::consts::LN_2;
    let mut ln_choose = 0.0f64;
    let mut terms = Vec::with_capacity(k as usize + 1);
    for i in 0..=k {
        if i > 0 {
            ln_choose += ((n - i + 1) as f64).ln() - (i as f64).ln();
        }
        terms.push(ln_choose - ln2n);
    }
    let max = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let tail = max.exp() * terms.iter().map(|t| (t - max).exp()).sum::<f64>();
    McNemar {
        b,
        c,
        p_value: (2.0 * tail).min(1.0),
        degenerate: false,
    }
}
