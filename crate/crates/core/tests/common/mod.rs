//! Helpers shared by integration test targets.
#![allow(dead_code)]

use ndarray::Array2;
use pdfmlp_core::mlp::{mean_cross_entropy, MlpModel, Mode, ModelConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Central-difference step.
pub const FD_STEP: f64 = 1e-5;

/// Gradients smaller than this are compared in absolute terms: central
/// differences carry roughly 1e-11 of rounding noise at `FD_STEP`.
pub const REL_ERR_FLOOR: f64 = 1e-6;

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_ERR_FLOOR)
}

/// Mutable access to parameter `i` in `MlpModel::flat_params` order.
pub fn param_mut(m: &mut MlpModel, mut i: usize) -> &mut f64 {
    for l in &mut m.layers {
        let n = l.weights.len();
        if i < n {
            return &mut l.weights.as_slice_mut().expect("standard layout")[i];
        }
        i -= n;
        let n = l.biases.len();
        if i < n {
            return &mut l.biases[i];
        }
        i -= n;
        if let Some(bn) = &mut l.batch_norm {
            let n = bn.gamma.len();
            if i < n {
                return &mut bn.gamma[i];
            }
            i -= n;
            if i < n {
                return &mut bn.beta[i];
            }
            i -= n;
        }
    }
    panic!("parameter index out of range")
}

#[derive(Debug, Clone, Copy, Default)]
pub struct GradCheck {
    pub max_rel_err: f64,
    pub checked: usize,
    /// Parameters whose ±h perturbation flips a ReLU gate; central
    /// differences do not estimate the derivative there.
    pub skipped_kinks: usize,
}

impl GradCheck {
    pub fn merge(self, o: GradCheck) -> GradCheck {
        GradCheck {
            max_rel_err: self.max_rel_err.max(o.max_rel_err),
            checked: self.checked + o.checked,
            skipped_kinks: self.skipped_kinks + o.skipped_kinks,
        }
    }
}

fn gates(cache: &pdfmlp_core::mlp::ForwardCache, hidden: usize) -> Vec<bool> {
    (0..hidden)
        .flat_map(|l| cache.pre_activation(l).unwrap().iter().map(|&v| v > 0.0).collect::<Vec<_>>())
        .collect()
}

/// Compares `backward` against central differences for every parameter of
/// a freshly initialized model on a random batch. Dropout masks are
/// pinned by reseeding the generator before every forward pass.
pub fn check_instance(config: &ModelConfig, batch_size: usize, seed: u64) -> GradCheck {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut model = MlpModel::new(config, &mut rng).unwrap();
    let x = Array2::from_shape_simple_fn((batch_size, config.input_width), || rng.random_range(-2.0..2.0));
    let y: Vec<f64> = (0..batch_size).map(|_| f64::from(rng.random_bool(0.5))).collect();
    let mask_seed = rng.random::<u64>();
    let hidden = config.hidden_widths.len();
    let run = |m: &MlpModel| {
        let mut r = ChaCha8Rng::seed_from_u64(mask_seed);
        m.forward(x.view(), Mode::Train, &mut r).unwrap()
    };
    let cache = run(&model);
    let analytic = model.backward(&cache, &y).unwrap().flatten();
    let mut out = GradCheck::default();
    for (i, &a) in analytic.iter().enumerate() {
        let orig = *param_mut(&mut model, i);
        *param_mut(&mut model, i) = orig + FD_STEP;
        let plus = run(&model);
        *param_mut(&mut model, i) = orig - FD_STEP;
        let minus = run(&model);
        *param_mut(&mut model, i) = orig;
        if gates(&plus, hidden) != gates(&minus, hidden) {
            out.skipped_kinks += 1;
            continue;
        }
        let lp = mean_cross_entropy(plus.probabilities().as_slice().unwrap(), &y);
        let lm = mean_cross_entropy(minus.probabilities().as_slice().unwrap(), &y);
        let numeric = (lp - lm) / (2.0 * FD_STEP);
        out.max_rel_err = out.max_rel_err.max(relative_error(a, numeric));
        out.checked += 1;
    }
    out
}

/// Runs `check_instance` for seeds `seed0..seed0 + instances` in parallel.
pub fn check_many(config: &ModelConfig, batch_size: usize, seed0: u64, instances: u64) -> GradCheck {
    let threads = std::thread::available_parallelism().map_or(4, |n| n.get()).min(instances as usize).max(1);
    std::thread::scope(|s| {
        let handles: Vec<_> = (0..threads as u64)
            .map(|t| {
                s.spawn(move || {
                    (seed0..seed0 + instances)
                        .filter(|seed| (seed - seed0) % threads as u64 == t)
                        .map(|seed| check_instance(config, batch_size, seed))
                        .fold(GradCheck::default(), GradCheck::merge)
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().unwrap())
            .fold(GradCheck::default(), GradCheck::merge)
    })
}

pub fn paper_shape(batch_norm: bool, dropout_rate: f64) -> ModelConfig {
    ModelConfig {
        batch_norm,
        dropout_rate,
        ..ModelConfig::default()
    }
}

/// Two Gaussian clusters with unit noise and means -2 (benign) and +2
/// (malicious) on every axis, `malicious` of `n` rows labeled 1.
pub fn separable_set(n: usize, malicious: usize, seed: u64) -> pdfmlp_core::preprocess::Dataset {
    use rand_distr::StandardNormal;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let labels: Vec<u8> = (0..n).map(|i| u8::from(i < malicious)).collect();
    let features = Array2::from_shape_fn((n, pdfmlp_core::features::FEATURE_COUNT), |(i, _)| {
        let centre = if labels[i] == 1 { 2.0 } else { -2.0 };
        centre + rng.sample::<f64, _>(StandardNormal)
    });
    let paths = (0..n).map(|i| format!("sep/{i:05}.pdf")).collect();
    pdfmlp_core::preprocess::Dataset::new(features, labels, paths, pdfmlp_core::features::SCHEMA_ID).unwrap()
}

/// XOR of two coordinate signs: clusters at (±1, ±1) with noise 0.1 in
/// features 0 and 1, all other features zero.
pub fn xor_set(n: usize, seed: u64) -> pdfmlp_core::preprocess::Dataset {
    use rand_distr::{Distribution, Normal};
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, 0.1).unwrap();
    let mut features = Array2::zeros((n, pdfmlp_core::features::FEATURE_COUNT));
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let (sx, sy) = [(1.0, 1.0), (-1.0, -1.0), (1.0, -1.0), (-1.0, 1.0)][i % 4];
        features[[i, 0]] = sx + noise.sample(&mut rng);
        features[[i, 1]] = sy + noise.sample(&mut rng);
        labels.push(u8::from(sx != sy));
    }
    let paths = (0..n).map(|i| format!("xor/{i:05}.pdf")).collect();
    pdfmlp_core::preprocess::Dataset::new(features, labels, paths, pdfmlp_core::features::SCHEMA_ID).unwrap()
}

/// Rosenblatt perceptron on raw features. Returns true once an epoch
/// passes with no mistakes, which certifies linear separability.
pub fn perceptron_separates(d: &pdfmlp_core::preprocess::Dataset, max_epochs: usize) -> bool {
    let w_len = d.width();
    let mut w = vec![0.0; w_len];
    let mut b = 0.0;
    for _ in 0..max_epochs {
        let mut mistakes = 0;
        for (row, &label) in d.features.rows().into_iter().zip(&d.labels) {
            let y = if label == 1 { 1.0 } else { -1.0 };
            let score: f64 = row.iter().zip(&w).map(|(x, w)| x * w).sum::<f64>() + b;
            if y * score <= 0.0 {
                mistakes += 1;
                for (wj, xj) in w.iter_mut().zip(row) {
                    *wj += y * xj;
                }
                b += y;
            }
        }
        if mistakes == 0 {
            return true;
        }
    }
    false
}

/// Best accuracy of any linear rule `w·x + b >= 0` on 2-D points, found
/// exhaustively. The ordering of projections only changes at directions
/// perpendicular to a pair difference, so one direction strictly inside
/// every angular cell between those critical angles, swept over every
/// cut position and both orientations, covers every linear labeling.
pub fn best_linear_accuracy_2d(points: &[(f64, f64)], labels: &[u8]) -> f64 {
    use std::f64::consts::PI;
    let n = points.len();
    let mut angles = Vec::with_capacity(n * (n - 1) / 2 + 1);
    for i in 0..n {
        for j in i + 1..n {
            let (dx, dy) = (points[j].0 - points[i].0, points[j].1 - points[i].1);
            // Direction perpendicular to the pair, folded into [0, PI).
            angles.push((dy.atan2(dx) + PI / 2.0).rem_euclid(PI));
        }
    }
    angles.push(0.0);
    angles.sort_by(f64::total_cmp);
    angles.dedup();
    let total_pos = labels.iter().filter(|&&l| l == 1).count();
    let mut best = 0usize;
    let mut proj: Vec<(f64, u8)> = Vec::with_capacity(n);
    for k in 0..angles.len() {
        let next = if k + 1 < angles.len() { angles[k + 1] } else { angles[0] + PI };
        let theta = 0.5 * (angles[k] + next);
        let (c, s) = (theta.cos(), theta.sin());
        proj.clear();
        proj.extend(points.iter().zip(labels).map(|(p, &l)| (p.0 * c + p.1 * s, l)));
        proj.sort_by(|a, b| a.0.total_cmp(&b.0));
        // Cut before index `m`: rows below predicted 0, rows from m on predicted 1.
        let mut pos_below = 0usize;
        for m in 0..=n {
            let neg_below = m - pos_below;
            let correct = neg_below + (total_pos - pos_below);
            best = best.max(correct).max(n - correct);
            if proj.get(m).is_some_and(|p| p.1 == 1) {
                pos_below += 1;
            }
        }
    }
    best as f64 / n as f64
}

/// Fraction of rows where `model` at `threshold` agrees with the label.
pub fn accuracy(
    model: &MlpModel,
    scaler: &pdfmlp_core::preprocess::Scaler,
    d: &pdfmlp_core::preprocess::Dataset,
    threshold: f64,
) -> f64 {
    let x = scaler.transform_dataset(d).unwrap();
    let p = model.predict_proba(x.view()).unwrap();
    let correct = p.iter().zip(&d.labels).filter(|(&p, &l)| u8::from(p >= threshold) == l).count();
    correct as f64 / d.len() as f64
}
