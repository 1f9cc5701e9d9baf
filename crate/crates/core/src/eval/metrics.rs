use serde::{Deserialize, Serialize};

use super::EvalError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub threshold: f64,
    pub far: f64,
    pub frr: f64,
}

fn check(legit: &[f64], attack: &[f64]) -> Result<(), EvalError> {
    if legit.is_empty() || attack.is_empty() {
        return Err(EvalError::EmptyClass);
    }
    if legit.iter().chain(attack).any(|s| s.is_nan()) {
        return Err(EvalError::NonFiniteScore);
    }
    Ok(())
}

fn sorted(v: &[f64]) -> Vec<f64> {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    s
}

/// FAR (attack ≥ t) and FRR (legit < t) at every distinct observed score,
/// plus one threshold above the maximum where everything is rejected.
pub fn threshold_sweep(legit: &[f64], attack: &[f64]) -> Result<Vec<SweepPoint>, EvalError> {
    check(legit, attack)?;
    let (l, a) = (sorted(legit), sorted(attack));
    let mut thresholds: Vec<f64> = l.iter().chain(&a).cloned().collect();
    thresholds.sort_by(f64::total_cmp);
    thresholds.dedup();
    let top = *thresholds.last().unwrap();
    let above = if top.is_finite() { top + 1.0f64.max(top.abs()) } else { f64::INFINITY };
    if above > top {
        thresholds.push(above);
    }
    Ok(thresholds
        .into_iter()
        .map(|t| {
            let rejected_legit = l.partition_point(|&s| s < t);
            let rejected_attack = a.partition_point(|&s| s < t);
            SweepPoint {
                threshold: t,
                far: (a.len() - rejected_attack) as f64 / a.len() as f64,
                frr: rejected_legit as f64 / l.len() as f64,
            }
        })
        .collect())
}

/// EER at the FAR/FRR crossing of [`threshold_sweep`], linearly
/// interpolated between the two sweep points where `FAR - FRR` changes
/// sign. Returns `(eer, threshold)`.
pub fn compute_eer(legit: &[f64], attack: &[f64]) -> Result<(f64, f64), EvalError> {
    let sweep = threshold_sweep(legit, attack)?;
    Ok(eer_from_sweep(&sweep))
}

pub fn eer_from_sweep(sweep: &[SweepPoint]) -> (f64, f64) {
    let diff = |p: &SweepPoint| p.far - p.frr;
    for (i, p) in sweep.iter().enumerate() {
        let d = diff(p);
        if d == 0.0 {
            return (p.far, p.threshold);
        }
        if d < 0.0 {
            // The first point always has FAR = 1, FRR = 0, so i > 0 here.
            let q = &sweep[i - 1];
            let dq = diff(q);
            let w = dq / (dq - d);
            let eer = q.far + w * (p.far - q.far);
            let t = q.threshold + w * (p.threshold - q.threshold);
            return (eer, t);
        }
    }
    let last = sweep.last().expect("sweep is never empty");
    (last.far, last.threshold)
}

/// Mann–Whitney AUC: P(legit > attack) + 0.5 P(legit = attack).
pub fn compute_auc(legit: &[f64], attack: &[f64]) -> Result<f64, EvalError> {
    check(legit, attack)?;
    let a = sorted(attack);
    let mut u = 0.0;
    for &s in legit {
        let below = a.partition_point(|&x| x < s);
        let not_above = a.partition_point(|&x| x <= s);
        u += below as f64 + 0.5 * (not_above - below) as f64;
    }
    Ok(u / (legit.len() as f64 * a.len() as f64))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub legit_density: Vec<f64>,
    pub attack_density: Vec<f64>,
}

fn density(scores: &[f64], edges: &[f64]) -> Vec<f64> {
    let bins = edges.len() - 1;
    let (lo, hi) = (edges[0], edges[bins]);
    let width = (hi - lo) / bins as f64;
    let mut counts = vec![0.0; bins];
    for &s in scores {
        let b = (((s - lo) / width).floor().max(0.0) as usize).min(bins - 1);
        counts[b] += 1.0;
    }
    let norm = scores.len().max(1) as f64 * width;
    counts.iter().map(|c| c / norm).collect()
}

/// Per-class score densities on `bins` equal-width bins over `[0, 1]`.
pub fn score_histogram(legit: &[f64], attack: &[f64], bins: usize) -> Histogram {
    assert!(bins > 0);
    let edges: Vec<f64> = (0..=bins).map(|i| i as f64 / bins as f64).collect();
    Histogram { legit_density: density(legit, &edges), attack_density: density(attack, &edges), edges }
}

/// Fraction correct with `score ≥ threshold` meaning legitimate.
pub fn accuracy_at(legit: &[f64], attack: &[f64], threshold: f64) -> f64 {
    let ok = legit.iter().filter(|&&s| s >= threshold).count() + attack.iter().filter(|&&s| s < threshold).count();
    ok as f64 / (legit.len() + attack.len()).max(1) as f64
}
