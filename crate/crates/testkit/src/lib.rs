//! Reference implementations used only by tests.
//!
//! Nothing here calls into the engine crates; each oracle re-derives its
//! answer from definitions so it can check the production code path.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Window enumeration by scanning every whole-second start time.
pub mod windows {
    use std::collections::BTreeSet;

    pub type Bounds = (i64, i64);

    /// `(positives, negatives)` for integer code times and duration.
    pub fn enumerate(codes: &[i64], duration: i64) -> (Vec<Bounds>, Vec<Bounds>) {
        let inside: Vec<i64> = codes.iter().copied().filter(|&t| t <= duration).collect();

        let mut pos = BTreeSet::new();
        for s in 0..=duration.max(0) {
            let w = (s, s + 60);
            let ends_at_code = inside.iter().any(|&t| t >= 60 && w.1 == t);
            let early_code = s == 0 && inside.iter().any(|&t| t < 60);
            if ends_at_code || early_code {
                pos.insert(w);
            }
        }

        let mut boundaries: Vec<i64> = vec![0, duration];
        boundaries.extend(&inside);
        let mut neg = Vec::new();
        for s in 0..=duration {
            let prev = boundaries.iter().copied().filter(|&b| b <= s).max();
            let next = boundaries.iter().copied().filter(|&b| b > s).min();
            let (Some(prev), Some(next)) = (prev, next) else { continue };
            let w = (s, s + 60);
            if next - prev >= 300 && (s - prev) % 60 == 0 && w.1 <= next && !pos.contains(&w) {
                neg.push(w);
            }
        }
        (pos.into_iter().collect(), neg)
    }
}

/// Elastic-net objective and a coarse-to-fine grid search over `(w1, w2, b)`.
pub mod grid {
    fn ln1pexp(z: f64) -> f64 {
        if z > 30.0 {
            z
        } else {
            z.exp().ln_1p()
        }
    }

    pub struct Data {
        pub x: Vec<[f64; 2]>,
        pub y: Vec<u8>,
        pub s: Vec<f64>,
    }

    /// z-scores each column with the population standard deviation.
    pub fn standardize(raw: &[[f64; 2]]) -> Vec<[f64; 2]> {
        let n = raw.len() as f64;
        let mut out = raw.to_vec();
        for j in 0..2 {
            let mean = raw.iter().map(|r| r[j]).sum::<f64>() / n;
            let sd = (raw.iter().map(|r| (r[j] - mean).powi(2)).sum::<f64>() / n).sqrt();
            for r in out.iter_mut() {
                r[j] = (r[j] - mean) / sd;
            }
        }
        out
    }

    pub fn balanced(y: &[u8]) -> Vec<f64> {
        let n = y.len() as f64;
        let p = y.iter().filter(|&&v| v == 1).count() as f64;
        y.iter()
            .map(|&v| if v == 1 { n / (2.0 * p) } else { n / (2.0 * (n - p)) })
            .collect()
    }

    pub fn objective(d: &Data, w: [f64; 2], b: f64, c: f64, alpha: f64) -> f64 {
        let mut loss = 0.0;
        for ((x, &y), s) in d.x.iter().zip(&d.y).zip(&d.s) {
            let z = w[0] * x[0] + w[1] * x[1] + b;
            let nll = if y == 1 { ln1pexp(-z) } else { ln1pexp(z) };
            loss += s * nll;
        }
        let l1 = w[0].abs() + w[1].abs();
        let l2 = w[0] * w[0] + w[1] * w[1];
        loss + (alpha * l1 + 0.5 * (1.0 - alpha) * l2) / c
    }

    /// Minimum found by three nested grids; returns `(J, [w1, w2, b])`.
    pub fn search(d: &Data, c: f64, alpha: f64) -> (f64, [f64; 3]) {
        let mut half = 6.0;
        let mut best = (f64::INFINITY, [0.0; 3]);
        for _ in 0..4 {
            let steps = 60;
            let h = 2.0 * half / steps as f64;
            let start = best.1;
            for i in 0..=steps {
                let w0 = start[0] - half + h * i as f64;
                for j in 0..=steps {
                    let w1 = start[1] - half + h * j as f64;
                    for k in 0..=steps {
                        let b = start[2] - half + h * k as f64;
                        let v = objective(d, [w0, w1], b, c, alpha);
                        if v < best.0 {
                            best = (v, [w0, w1, b]);
                        }
                    }
                }
            }
            half = 4.0 * h;
        }
        best
    }
}

/// Area under the ROC curve by sweeping thresholds and integrating with trapezoids.
pub fn trapezoid_auc(labels: &[u8], scores: &[f64]) -> f64 {
    let mut order: Vec<usize> = (0..labels.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let p = labels.iter().filter(|&&y| y == 1).count() as f64;
    let n = labels.len() as f64 - p;
    let (mut tp, mut fp) = (0.0, 0.0);
    let (mut prev_tpr, mut prev_fpr) = (0.0, 0.0);
    let mut area = 0.0;
    let mut i = 0;
    while i < order.len() {
        // consume a whole block of tied scores at once
        let s = scores[order[i]];
        while i < order.len() && scores[order[i]] == s {
            if labels[order[i]] == 1 {
                tp += 1.0;
            } else {
                fp += 1.0;
            }
            i += 1;
        }
        let (tpr, fpr) = (tp / p, fp / n);
        area += (fpr - prev_fpr) * (tpr + prev_tpr) / 2.0;
        prev_tpr = tpr;
        prev_fpr = fpr;
    }
    area
}

/// Central finite-difference gradient.
pub fn central_diff(f: impl Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    (0..x.len())
        .map(|i| {
            let mut hi = x.to_vec();
            let mut lo = x.to_vec();
            hi[i] += h;
            lo[i] -= h;
            (f(&hi) - f(&lo)) / (2.0 * h)
        })
        .collect()
}

/// Two-feature synthetic classification data with label noise.
pub fn synthetic_2d(n: usize, seed: u64) -> (Vec<[f64; 2]>, Vec<u8>) {
    let mut r = rng(seed);
    let mut x = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    for i in 0..n {
        let label = u8::from(i % 3 != 0);
        let shift = if label == 1 { 0.8 } else { -0.4 };
        x.push([shift + r.random_range(-1.5..1.5), 2.0 * r.random_range(-1.0..1.0) - shift]);
        y.push(label);
    }
    (x, y)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn enumerator_matches_hand_counts() {
        let (p, n) = windows::enumerate(&[100, 500], 900);
        assert_eq!(p, vec![(40, 100), (440, 500)]);
        assert_eq!(n.len(), 12);
        let (p, n) = windows::enumerate(&[], 600);
        assert!(p.is_empty());
        assert_eq!(n.len(), 10);
    }

    #[test]
    fn trapezoid_handles_ties() {
        assert_eq!(trapezoid_auc(&[1, 0], &[0.5, 0.5]), 0.5);
        assert_eq!(trapezoid_auc(&[0, 1], &[0.1, 0.9]), 1.0);
    }
}

/// Incremental parser for `text/event-stream` bodies.
pub mod sse {
    #[derive(Debug, Clone, Default, PartialEq, Eq)]
    pub struct Frame {
        pub id: Option<String>,
        pub event: Option<String>,
        pub data: String,
    }

    #[derive(Debug, Default)]
    pub struct Parser {
        buf: String,
    }

    impl Parser {
        /// Feeds bytes and returns every frame completed by them. Comment-only frames are dropped.
        pub fn push(&mut self, chunk: &[u8]) -> Vec<Frame> {
            self.buf.push_str(&String::from_utf8_lossy(chunk));
            self.buf = self.buf.replace("\r\n", "\n");
            let mut out = Vec::new();
            while let Some(end) = self.buf.find("\n\n") {
                let block: String = self.buf.drain(..end + 2).collect();
                let mut frame = Frame::default();
                let mut data = Vec::new();
                for line in block.lines() {
                    let (field, value) = match line.split_once(':') {
                        Some((f, v)) => (f, v.strip_prefix(' ').unwrap_or(v)),
                        None => (line, ""),
                    };
                    match field {
                        "id" => frame.id = Some(value.to_string()),
                        "event" => frame.event = Some(value.to_string()),
                        "data" => data.push(value.to_string()),
                        _ => {}
                    }
                }
                frame.data = data.join("\n");
                if frame.id.is_some() || frame.event.is_some() || !frame.data.is_empty() {
                    out.push(frame);
                }
            }
            out
        }
    }

}
