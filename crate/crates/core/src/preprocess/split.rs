use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{Dataset, PreprocessError};

/// Stratified split. The validation part receives `round(fraction · n)`
/// rows; per-class quotas are `fraction · n_c`, floored, with the
/// remaining rows handed out by largest fractional part (ties to the
/// lower label). Both outputs keep the original row order.
pub fn split_train_validation(
    d: &Dataset,
    fraction: f64,
    seed: u64,
) -> Result<(Dataset, Dataset), PreprocessError> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(PreprocessError::InvalidFraction(fraction));
    }
    let mut by_class: [Vec<usize>; 2] = [Vec::new(), Vec::new()];
    for (i, &l) in d.labels.iter().enumerate() {
        by_class[usize::from(l)].push(i);
    }
    for (label, members) in by_class.iter().enumerate() {
        if members.len() < 2 {
            return Err(PreprocessError::CannotStratify {
                label: label as u8,
                count: members.len(),
            });
        }
    }

    let total = (fraction * d.len() as f64).round() as usize;
    let exact: Vec<f64> = by_class.iter().map(|m| fraction * m.len() as f64).collect();
    let mut quota: Vec<usize> = exact.iter().map(|q| q.floor() as usize).collect();
    let mut order: Vec<usize> = (0..2).collect();
    order.sort_by(|&a, &b| {
        let (fa, fb) = (exact[a] - exact[a].floor(), exact[b] - exact[b].floor());
        fb.total_cmp(&fa).then(a.cmp(&b))
    });
    let mut remaining = total.saturating_sub(quota.iter().sum());
    for &c in order.iter().cycle().take(4) {
        if remaining == 0 {
            break;
        }
        if quota[c] < by_class[c].len() {
            quota[c] += 1;
            remaining -= 1;
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut in_validation = vec![false; d.len()];
    for (members, &q) in by_class.iter_mut().zip(&quota) {
        members.shuffle(&mut rng);
        for &i in &members[..q] {
            in_validation[i] = true;
        }
    }
    let (val, train): (Vec<usize>, Vec<usize>) = (0..d.len()).partition(|&i| in_validation[i]);
    Ok((d.select(&train), d.select(&val)))
}
