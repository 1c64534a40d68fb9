//! Brute-force maximizer of the regularized Bradley-Terry log-likelihood,
//! written without any of the crate's estimation code: a coarse grid over the
//! gauge-fixed parameters followed by cyclic golden-section coordinate
//! ascent. Slow, but only relies on concavity.

/// `(winner, loser)` pairs over `n` items, `alpha` pseudo-wins each way.
pub struct Problem<'a> {
    pub n: usize,
    pub pairs: &'a [(usize, usize)],
    pub alpha: f64,
}

fn log_sigmoid(d: f64) -> f64 {
    // ln(1 / (1 + e^-d))
    if d > 0.0 {
        -(-d).exp().ln_1p()
    } else {
        d - d.exp().ln_1p()
    }
}

impl Problem<'_> {
    /// Objective for the full parameter vector.
    pub fn objective(&self, theta: &[f64]) -> f64 {
        let mut ll: f64 = self.pairs.iter().map(|&(w, l)| log_sigmoid(theta[w] - theta[l])).sum();
        for i in 0..self.n {
            for j in 0..self.n {
                if i != j {
                    ll += self.alpha * log_sigmoid(theta[i] - theta[j]);
                }
            }
        }
        ll
    }

    fn full(&self, free: &[f64]) -> Vec<f64> {
        let mut t = Vec::with_capacity(self.n);
        t.push(0.0);
        t.extend_from_slice(free);
        t
    }

    /// Centered maximizer.
    pub fn solve(&self) -> Vec<f64> {
        let dims = self.n - 1;
        let grid: Vec<f64> = (-6..=6).map(f64::from).collect();
        let mut best = vec![0.0; dims];
        let mut best_val = f64::NEG_INFINITY;
        let mut idx = vec![0usize; dims];
        'grid: loop {
            let point: Vec<f64> = idx.iter().map(|&k| grid[k]).collect();
            let v = self.objective(&self.full(&point));
            if v > best_val {
                best_val = v;
                best = point;
            }
            for k in idx.iter_mut() {
                *k += 1;
                if *k < grid.len() {
                    continue 'grid;
                }
                *k = 0;
            }
            break;
        }
        let eval = |p: &[f64]| self.objective(&self.full(p));
        for _sweep in 0..5_000 {
            let start = best.clone();
            for d in 0..dims {
                best[d] = golden_max(
                    |x| {
                        let mut p = best.clone();
                        p[d] = x;
                        eval(&p)
                    },
                    best[d],
                );
            }
            // extrapolate along the net move of the sweep
            let dir: Vec<f64> = best.iter().zip(&start).map(|(b, s)| b - s).collect();
            let along = |s: f64| best.iter().zip(&dir).map(|(b, d)| b + s * d).collect::<Vec<f64>>();
            let s = golden_max(|s| eval(&along(s)), 0.0);
            if eval(&along(s)) > eval(&best) {
                best = along(s);
            }
            let moved = best.iter().zip(&start).map(|(b, s)| (b - s).abs()).fold(0.0, f64::max);
            let gain = eval(&best) - eval(&start);
            if moved < 1e-10 || gain <= 1e-15 * eval(&start).abs().max(1.0) {
                break;
            }
        }
        let mut theta = self.full(&best);
        let mean = theta.iter().sum::<f64>() / self.n as f64;
        theta.iter_mut().for_each(|t| *t -= mean);
        theta
    }
}

/// Maximizes a concave function of one variable near `start`.
fn golden_max(f: impl Fn(f64) -> f64, start: f64) -> f64 {
    let mut step = 1.0;
    let (mut lo, mut hi) = (start - step, start + step);
    while f(lo) > f(start) && step < 1e3 {
        step *= 2.0;
        lo = start - step;
    }
    step = 1.0;
    while f(hi) > f(start) && step < 1e3 {
        step *= 2.0;
        hi = start + step;
    }
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (lo, hi);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while b - a > 1e-12 {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    (a + b) / 2.0
}
