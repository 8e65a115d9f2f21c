//! Brute-force reference computations used by the test suites.
//!
//! Everything here is written for clarity on small inputs (at most about a
//! thousand elements) and depends on nothing but `std`, so it cannot share
//! arithmetic with the implementation it checks.

/// A value compared against a reference under a relative tolerance.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OracleResult {
    pub value: f64,
    pub reference: f64,
    pub tolerance: f64,
    pub passed: bool,
}

/// `|value − reference| ≤ tol · max(|value|, |reference|, floor)`.
pub fn compare_rel(value: f64, reference: f64, tolerance: f64, floor: f64) -> OracleResult {
    let scale = value.abs().max(reference.abs()).max(floor);
    OracleResult {
        value,
        reference,
        tolerance,
        passed: (value - reference).abs() <= tolerance * scale,
    }
}

/// Central differences `(f(θ+h) − f(θ−h)) / 2h`, one coordinate at a time.
pub fn fd_gradient<F: FnMut(&[f64]) -> f64>(mut loss: F, params: &[f64], h: f64) -> Vec<f64> {
    assert!((1e-7..=1e-3).contains(&h), "step {h} outside [1e-7, 1e-3]");
    let mut theta = params.to_vec();
    let mut grad = Vec::with_capacity(params.len());
    for i in 0..params.len() {
        let orig = theta[i];
        theta[i] = orig + h;
        let up = loss(&theta);
        theta[i] = orig - h;
        let down = loss(&theta);
        theta[i] = orig;
        grad.push((up - down) / (2.0 * h));
    }
    grad
}

/// Fraction of (positive, negative) pairs ranked correctly, ties counting ½.
pub fn auroc_pairwise(scored: &[(f64, bool)]) -> f64 {
    let mut wins = 0.0;
    let mut pairs = 0.0;
    for &(p, lp) in scored {
        if !lp {
            continue;
        }
        for &(n, ln) in scored {
            if ln {
                continue;
            }
            pairs += 1.0;
            if p > n {
                wins += 1.0;
            } else if p == n {
                wins += 0.5;
            }
        }
    }
    assert!(pairs > 0.0, "need at least one positive and one negative");
    wins / pairs
}

/// (TP, FP, TN, FN) with "positive" meaning `score > threshold`.
pub fn confusion_count(scored: &[(f64, bool)], threshold: f64) -> (usize, usize, usize, usize) {
    let mut c = (0, 0, 0, 0);
    for &(s, label) in scored {
        match (s > threshold, label) {
            (true, true) => c.0 += 1,
            (true, false) => c.1 += 1,
            (false, false) => c.2 += 1,
            (false, true) => c.3 += 1,
        }
    }
    c
}

pub fn f1_from_counts(tp: usize, fp: usize, fn_: usize) -> f64 {
    if tp == 0 {
        return 0.0;
    }
    let p = tp as f64 / (tp + fp) as f64;
    let r = tp as f64 / (tp + fn_) as f64;
    2.0 * p * r / (p + r)
}

/// Best F1 over thresholds `{−∞} ∪ scores`, preferring the highest threshold
/// among equal F1 values.
pub fn best_f1_sweep(scored: &[(f64, bool)]) -> (f64, f64) {
    let mut candidates: Vec<f64> = scored.iter().map(|s| s.0).collect();
    candidates.push(f64::NEG_INFINITY);
    let mut best = (f64::NEG_INFINITY, -1.0);
    for &t in &candidates {
        let (tp, fp, _, fn_) = confusion_count(scored, t);
        let f1 = f1_from_counts(tp, fp, fn_);
        if f1 > best.1 || (f1 == best.1 && t > best.0) {
            best = (t, f1);
        }
    }
    best
}

/// Valid strided cross-correlation by direct summation.
///
/// `input[t][c]`, `kernels[o][c][j]`; returns `out[t][o]` before activation.
pub fn conv1d_direct(input: &[Vec<f64>], kernels: &[Vec<Vec<f64>>], bias: &[f64], stride: usize) -> Vec<Vec<f64>> {
    let k = kernels[0][0].len();
    let mut out = Vec::new();
    let mut start = 0;
    while start + k <= input.len() {
        let mut row = Vec::new();
        for (o, ko) in kernels.iter().enumerate() {
            let mut acc = bias[o];
            for (c, kc) in ko.iter().enumerate() {
                for (j, w) in kc.iter().enumerate() {
                    acc += w * input[start + j][c];
                }
            }
            row.push(acc);
        }
        out.push(row);
        start += stride;
    }
    out
}

/// End indices of every length-`t` window with the given stride, by scanning
/// all sample indices.
pub fn window_ends(len: usize, t: usize, stride: usize) -> Vec<usize> {
    (0..len).filter(|&i| i + 1 >= t && (i + 1 - t) % stride == 0).collect()
}

pub fn l2_distance(x: &[f64], y: &[f64]) -> f64 {
    assert_eq!(x.len(), y.len());
    let mut s = 0.0;
    for i in 0..x.len() {
        s += (x[i] - y[i]) * (x[i] - y[i]);
    }
    s.sqrt()
}

/// `−½ Σ (1 + lv − μ² − e^lv)`.
pub fn kl_standard_normal(mu: &[f64], log_var: &[f64]) -> f64 {
    let mut s = 0.0;
    for i in 0..mu.len() {
        s += 1.0 + log_var[i] - mu[i] * mu[i] - log_var[i].exp();
    }
    -0.5 * s
}

/// Mean absolute difference over a `rows × cols` time-major buffer, plus the
/// per-column means.
pub fn mean_abs_error(x: &[f64], y: &[f64], cols: usize) -> (f64, Vec<f64>) {
    assert_eq!(x.len(), y.len());
    let rows = x.len() / cols;
    let mut per = vec![0.0; cols];
    let mut total = 0.0;
    for r in 0..rows {
        for c in 0..cols {
            let d = (x[r * cols + c] - y[r * cols + c]).abs();
            per[c] += d;
            total += d;
        }
    }
    for p in &mut per {
        *p /= rows as f64;
    }
    (total / x.len() as f64, per)
}

/// Mean and population standard deviation.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

pub fn selu(x: f64) -> f64 {
    let lambda = 1.0507009873554805;
    let alpha = 1.6732632423543773;
    if x > 0.0 {
        lambda * x
    } else {
        lambda * alpha * (x.exp() - 1.0)
    }
}
