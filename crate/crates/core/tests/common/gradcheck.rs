//! Central finite-difference gradient checks.

use navtl::nn::{Network, Tensor};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const STEP: f32 = 1e-3;
pub const TOLERANCE: f64 = 1e-2;
/// Denominator floor for the relative error; guards coordinates whose true
/// gradient is ~0, where f32 round-off in the loss dominates the difference.
pub const ABS_FLOOR: f64 = 2e-2;

#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub label: String,
    pub checked: usize,
    pub max_rel_err: f64,
    pub failures: Vec<String>,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

#[derive(Clone, Copy, Debug)]
enum Coord {
    Input(usize),
    Weight(usize, usize),
    Bias(usize, usize),
}

fn loss(net: &Network, x: &Tensor, coeff: &[f32]) -> f64 {
    let q = net.forward(x).unwrap();
    q.data().iter().zip(coeff).map(|(&a, &b)| a as f64 * b as f64).sum()
}

pub fn rel_err(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(ABS_FLOOR)
}

/// Compare analytic and numeric gradients of `L = sum(c * Q(x))` at
/// `coords` random coordinates drawn from the input and every parameter tensor.
pub fn check(label: &str, net: &Network, x: &Tensor, coords: usize, seed: u64) -> GradCheckReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let out_len = net.forward(x).unwrap().len();
    let coeff: Vec<f32> = (0..out_len).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let grad_q = Tensor::new(net.forward(x).unwrap().shape().to_vec(), coeff.clone()).unwrap();
    let (param_grads, input_grad) = net.gradients(x, &grad_q).unwrap();

    let names: Vec<String> = net.layer_params().map(|(n, _)| n.to_string()).collect();
    let mut pool: Vec<Coord> = (0..x.len()).map(Coord::Input).collect();
    for (li, name) in names.iter().enumerate() {
        let p = net.params(name).unwrap();
        pool.extend((0..p.weight.len()).map(|k| Coord::Weight(li, k)));
        pool.extend((0..p.bias.len()).map(|k| Coord::Bias(li, k)));
    }
    let picked: Vec<Coord> = pool.choose_multiple(&mut rng, coords.min(pool.len())).copied().collect();

    let mut report = GradCheckReport { label: label.to_string(), checked: 0, max_rel_err: 0.0, failures: vec![] };
    for c in picked {
        let mut net_p = net.clone();
        let mut x_p = x.clone();
        let analytic = match c {
            Coord::Input(k) => input_grad.data()[k] as f64,
            Coord::Weight(li, k) => param_grads.iter().find(|(n, _)| *n == names[li]).unwrap().1.weight[k] as f64,
            Coord::Bias(li, k) => param_grads.iter().find(|(n, _)| *n == names[li]).unwrap().1.bias[k] as f64,
        };
        let mut eval = |delta: f32| -> f64 {
            match c {
                Coord::Input(k) => {
                    let orig = x.data()[k];
                    x_p.data_mut()[k] = orig + delta;
                    let l = loss(net, &x_p, &coeff);
                    x_p.data_mut()[k] = orig;
                    l
                }
                Coord::Weight(li, k) => {
                    let orig = net.params(&names[li]).unwrap().weight.data()[k];
                    net_p.params_mut(&names[li]).unwrap().weight.data_mut()[k] = orig + delta;
                    let l = loss(&net_p, x, &coeff);
                    net_p.params_mut(&names[li]).unwrap().weight.data_mut()[k] = orig;
                    l
                }
                Coord::Bias(li, k) => {
                    let orig = net.params(&names[li]).unwrap().bias.data()[k];
                    net_p.params_mut(&names[li]).unwrap().bias.data_mut()[k] = orig + delta;
                    let l = loss(&net_p, x, &coeff);
                    net_p.params_mut(&names[li]).unwrap().bias.data_mut()[k] = orig;
                    l
                }
            }
        };
        let numeric = (eval(STEP) - eval(-STEP)) / (2.0 * STEP as f64);
        let err = rel_err(analytic, numeric);
        report.checked += 1;
        report.max_rel_err = report.max_rel_err.max(err);
        if err > TOLERANCE {
            report.failures.push(format!("{c:?}: analytic {analytic:.6} numeric {numeric:.6} rel {err:.3e}"));
        }
    }
    report
}

/// Uniform values in [-1, 1] that stay at least `2 * STEP` away from zero,
/// so a relu kink is never straddled by the central difference.
pub fn away_from_zero(n: usize, rng: &mut ChaCha8Rng) -> Vec<f32> {
    (0..n)
        .map(|_| loop {
            let v: f32 = rng.gen_range(-1.0..=1.0);
            if v.abs() > 2.0 * STEP {
                break v;
            }
        })
        .collect()
}

/// Distinct values in [-1, 1] spaced further apart than `2 * STEP`, shuffled,
/// so max-pool never sees a near tie.
pub fn well_separated(n: usize, rng: &mut ChaCha8Rng) -> Vec<f32> {
    let mut v: Vec<f32> = (0..n).map(|i| -1.0 + 2.0 * i as f32 / (n.max(2) - 1) as f32).collect();
    v.shuffle(rng);
    v
}
