//! Multi-start projected gradient ascent over real parameter vectors.
//!
//! Every stochastic bound in the toolkit is produced by this one routine so
//! that results are reproducible from (config, seed) alone.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    pub restarts: usize,
    pub iterations: usize,
    pub seed: u64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self { restarts: 32, iterations: 500, seed: 0x5EED }
    }
}

impl OptimizerConfig {
    pub fn new(restarts: usize, iterations: usize, seed: u64) -> Self {
        Self { restarts, iterations, seed }
    }

    /// A cheaper configuration for inner loops of sampling probes.
    pub fn light(&self) -> Self {
        Self {
            restarts: self.restarts.clamp(1, 4),
            iterations: self.iterations.clamp(1, 80),
            seed: self.seed,
        }
    }
}

/// Maximize `objective` over parameter vectors of length `dim`, starting from
/// the given deterministic points plus random restarts. `project` must map an
/// arbitrary vector into the feasible set; it is applied after every step and
/// to every start. Returns the best (value, point).
pub fn maximize(
    cfg: &OptimizerConfig,
    salt: u64,
    dim: usize,
    starts: &[Vec<f64>],
    project: impl Fn(&mut Vec<f64>),
    objective: impl Fn(&[f64]) -> f64,
) -> (f64, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ salt);
    let mut best_val = f64::NEG_INFINITY;
    let mut best_pt = vec![0.0; dim];

    let mut run = |start: Vec<f64>| {
        let mut x = start;
        project(&mut x);
        let mut fx = objective(&x);
        let mut step = 0.3;
        let h = 1e-6;
        for _ in 0..cfg.iterations {
            // Central-difference gradient.
            let mut grad = vec![0.0; dim];
            for k in 0..dim {
                let mut xp = x.clone();
                xp[k] += h;
                project(&mut xp);
                let mut xm = x.clone();
                xm[k] -= h;
                project(&mut xm);
                grad[k] = (objective(&xp) - objective(&xm)) / (2.0 * h);
            }
            let gnorm: f64 = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
            if gnorm < 1e-12 {
                break;
            }
            let mut trial: Vec<f64> = x
                .iter()
                .zip(&grad)
                .map(|(xi, gi)| xi + step * gi / gnorm)
                .collect();
            project(&mut trial);
            let ft = objective(&trial);
            if ft > fx {
                x = trial;
                fx = ft;
                step = (step * 1.3).min(1.0);
            } else {
                step *= 0.5;
                if step < 1e-9 {
                    break;
                }
            }
        }
        if fx > best_val {
            best_val = fx;
            best_pt = x;
        }
    };

    for s in starts {
        run(s.clone());
    }
    for _ in 0..cfg.restarts {
        let s: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
        run(s);
    }
    (best_val, best_pt)
}

/// Pack complex vectors into a flat real parameter vector and back.
pub fn pack_complex(vs: &[&[num_complex::Complex<f64>]]) -> Vec<f64> {
    let mut out = Vec::new();
    for v in vs {
        for z in *v {
            out.push(z.re);
            out.push(z.im);
        }
    }
    out
}

pub fn unpack_complex(params: &[f64], lens: &[usize]) -> Vec<Vec<num_complex::Complex<f64>>> {
    let mut out = Vec::with_capacity(lens.len());
    let mut idx = 0;
    for &len in lens {
        let mut v = Vec::with_capacity(len);
        for _ in 0..len {
            v.push(num_complex::Complex::new(params[idx], params[idx + 1]));
            idx += 2;
        }
        out.push(v);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn maximizes_quadratic_on_sphere() {
        // max of x^T diag(1,2,3) x on the unit sphere is 3.
        let cfg = OptimizerConfig::new(8, 200, 1);
        let project = |x: &mut Vec<f64>| {
            let n: f64 = x.iter().map(|v| v * v).sum::<f64>().sqrt();
            if n > 1e-12 {
                for v in x.iter_mut() {
                    *v /= n;
                }
            } else {
                x[0] = 1.0;
            }
        };
        let (val, _) = maximize(&cfg, 0, 3, &[], project, |x| {
            x[0] * x[0] + 2.0 * x[1] * x[1] + 3.0 * x[2] * x[2]
        });
        assert!((val - 3.0).abs() < 1e-6, "got {val}");
    }

    #[test]
    fn deterministic_given_seed() {
        let cfg = OptimizerConfig::new(4, 50, 9);
        let project = |x: &mut Vec<f64>| {
            for v in x.iter_mut() {
                *v = v.clamp(-1.0, 1.0);
            }
        };
        let f = |x: &[f64]| -> f64 { x.iter().map(|v| v - v * v * v * v).sum() };
        let (a, pa) = maximize(&cfg, 3, 4, &[], project, f);
        let (b, pb) = maximize(&cfg, 3, 4, &[], project, f);
        assert_eq!(a, b);
        assert_eq!(pa, pb);
    }
}
