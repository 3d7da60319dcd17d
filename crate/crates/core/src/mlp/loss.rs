/// Probabilities are clamped to `[ε, 1 − ε]` before taking logarithms.
pub const PROB_EPSILON: f64 = 1e-12;

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Binary cross-entropy `−y ln ŷ − (1 − y) ln(1 − ŷ)`.
pub fn cross_entropy(y_hat: f64, y: f64) -> f64 {
    let p = y_hat.clamp(PROB_EPSILON, 1.0 - PROB_EPSILON);
    let loss = -y * p.ln() - (1.0 - y) * (1.0 - p).ln();
    loss.max(0.0)
}

/// Mean cross-entropy over a batch.
pub fn mean_cross_entropy(probs: &[f64], labels: &[f64]) -> f64 {
    debug_assert_eq!(probs.len(), labels.len());
    if probs.is_empty() {
        return 0.0;
    }
    probs
        .iter()
        .zip(labels)
        .map(|(&p, &y)| cross_entropy(p, y))
        .sum::<f64>()
        / probs.len() as f64
}
