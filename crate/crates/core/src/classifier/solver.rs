//! Proximal gradient for weighted elastic-net logistic regression.
//!
//! Minimizes
//!
//! ```text
//! J(w, b) = Σᵢ sᵢ·BCE(yᵢ, σ(w·xᵢ + b)) + (1/C)·[α‖w‖₁ + ((1−α)/2)‖w‖₂²]
//! ```
//!
//! with the intercept unpenalized. The smooth part (weighted loss plus the
//! ridge term) takes a gradient step; the L1 term is handled by
//! soft-thresholding. Step sizes come from backtracking on the smooth part,
//! which keeps `J` non-increasing.

/// Training data after scaling, with per-sample loss weights.
#[derive(Debug, Clone)]
pub struct Problem<'a> {
    pub rows: &'a [Vec<f64>],
    pub labels: &'a [u8],
    pub weights: &'a [f64],
    pub c: f64,
    pub l1_ratio: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct SolverOptions {
    pub max_iters: usize,
    pub tol: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub w: Vec<f64>,
    pub b: f64,
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
    /// `J` after each accepted step, starting with the value at zero.
    pub trace: Vec<f64>,
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^z)` without overflow.
fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

/// `sign(z)·max(|z| − λ, 0)`.
pub fn soft_threshold(z: f64, lambda: f64) -> f64 {
    z.signum() * (z.abs() - lambda).max(0.0)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl Problem<'_> {
    pub fn dim(&self) -> usize {
        self.rows.first().map_or(0, Vec::len)
    }

    fn l1_strength(&self) -> f64 {
        self.l1_ratio / self.c
    }

    fn l2_strength(&self) -> f64 {
        (1.0 - self.l1_ratio) / self.c
    }

    /// Weighted BCE plus the ridge term.
    pub fn smooth_objective(&self, w: &[f64], b: f64) -> f64 {
        let loss: f64 = self
            .rows
            .iter()
            .zip(self.labels)
            .zip(self.weights)
            .map(|((x, &y), s)| {
                let z = dot(w, x) + b;
                // BCE(y, σ(z)) = softplus(z) − y·z
                s * (softplus(z) - f64::from(y) * z)
            })
            .sum();
        loss + 0.5 * self.l2_strength() * dot(w, w)
    }

    /// Gradient of [`Self::smooth_objective`] as `(∂w, ∂b)`.
    pub fn smooth_gradient(&self, w: &[f64], b: f64) -> (Vec<f64>, f64) {
        let mut gw: Vec<f64> = w.iter().map(|wi| self.l2_strength() * wi).collect();
        let mut gb = 0.0;
        for ((x, &y), s) in self.rows.iter().zip(self.labels).zip(self.weights) {
            let r = s * (sigmoid(dot(w, x) + b) - f64::from(y));
            for (g, xi) in gw.iter_mut().zip(x) {
                *g += r * xi;
            }
            gb += r;
        }
        (gw, gb)
    }

    pub fn objective(&self, w: &[f64], b: f64) -> f64 {
        self.smooth_objective(w, b) + self.l1_strength() * w.iter().map(|x| x.abs()).sum::<f64>()
    }

    /// Upper bound on the Lipschitz constant of the smooth gradient.
    fn lipschitz_bound(&self) -> f64 {
        let data: f64 = self
            .rows
            .iter()
            .zip(self.weights)
            .map(|(x, s)| s * (dot(x, x) + 1.0))
            .sum();
        0.25 * data + self.l2_strength()
    }

    pub fn solve(&self, opts: SolverOptions) -> Solution {
        let k = self.dim();
        let mut w = vec![0.0; k];
        let mut b = 0.0;
        let mut f = self.smooth_objective(&w, b);
        let mut trace = vec![self.objective(&w, b)];
        let max_step = 1.0 / self.lipschitz_bound().max(1e-12);
        let mut step = max_step;
        let l1 = self.l1_strength();

        for iter in 1..=opts.max_iters {
            let (gw, gb) = self.smooth_gradient(&w, b);
            // grow optimistically, then backtrack
            step *= 2.0;
            let (nw, nb, nf) = loop {
                let nw: Vec<f64> = w
                    .iter()
                    .zip(&gw)
                    .map(|(wi, gi)| soft_threshold(wi - step * gi, step * l1))
                    .collect();
                let nb = b - step * gb;
                let nf = self.smooth_objective(&nw, nb);
                let dw: Vec<f64> = nw.iter().zip(&w).map(|(a, c)| a - c).collect();
                let db = nb - b;
                let model = f + dot(&gw, &dw) + gb * db + (dot(&dw, &dw) + db * db) / (2.0 * step);
                if nf <= model || step <= max_step * 1e-12 {
                    break (nw, nb, nf);
                }
                step *= 0.5;
            };
            let change = nw
                .iter()
                .zip(&w)
                .map(|(a, c)| (a - c).abs())
                .fold((nb - b).abs(), f64::max);
            w = nw;
            b = nb;
            f = nf;
            trace.push(self.objective(&w, b));
            if change < opts.tol {
                return Solution {
                    objective: self.objective(&w, b),
                    w,
                    b,
                    iterations: iter,
                    converged: true,
                    trace,
                };
            }
        }
        Solution {
            objective: self.objective(&w, b),
            w,
            b,
            iterations: opts.max_iters,
            converged: false,
            trace,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn soft_threshold_points() {
        let lambda = 0.7;
        assert_eq!(soft_threshold(-lambda, lambda), 0.0);
        assert_eq!(soft_threshold(0.0, lambda), 0.0);
        assert_eq!(soft_threshold(lambda, lambda), 0.0);
        assert!((soft_threshold(2.0 * lambda, lambda) - lambda).abs() < 1e-15);
        assert!((soft_threshold(-2.0 * lambda, lambda) + lambda).abs() < 1e-15);
    }

    #[test]
    fn sigmoid_is_stable() {
        assert_eq!(sigmoid(0.0), 0.5);
        assert!((sigmoid(3f64.ln()) - 0.75).abs() < 1e-15);
        assert!(sigmoid(-800.0) >= 0.0 && sigmoid(800.0) <= 1.0);
        assert!((softplus(-800.0)).abs() < 1e-300);
        assert_eq!(softplus(800.0), 800.0);
    }

    #[test]
    fn objective_never_increases() {
        let rows: Vec<Vec<f64>> = (0..30)
            .map(|i| vec![((i * 37) % 17) as f64 / 5.0 - 1.5, ((i * 11) % 7) as f64 / 3.0 - 1.0])
            .collect();
        let labels: Vec<u8> = (0..30).map(|i| u8::from((i * 13) % 5 < 2)).collect();
        let weights = vec![1.0; 30];
        for (c, a) in [(1.0, 0.5), (0.1, 1.0), (10.0, 0.0)] {
            let p = Problem {
                rows: &rows,
                labels: &labels,
                weights: &weights,
                c,
                l1_ratio: a,
            };
            let sol = p.solve(SolverOptions {
                max_iters: 5000,
                tol: 1e-9,
            });
            assert!(sol.converged, "c={c} a={a} iters={} obj={}", sol.iterations, sol.objective);
            for pair in sol.trace.windows(2) {
                assert!(pair[1] <= pair[0] + 1e-12, "{} -> {}", pair[0], pair[1]);
            }
        }
    }
}
