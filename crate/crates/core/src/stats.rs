//! Shared statistical routines: Pearson correlation and the Mann-Whitney
//! U test.
//!
//! The U test carries two routes. For pooled sizes of at most
//! [`EXACT_ENUMERATION_LIMIT`] the two-sided p-value comes from exhaustive
//! enumeration of rank assignments (conditional on the observed midranks,
//! so ties are handled exactly). Above the limit a normal approximation
//! with tie-corrected variance and a 0.5 continuity correction is used.
//! The approximation degrades sharply for very small samples, which is why
//! the exact route exists at all.

use statrs::distribution::{ContinuousCDF, Normal};

use crate::scalar::Real;

/// Pooled-size threshold at or below which the exact route is used.
pub const EXACT_ENUMERATION_LIMIT: usize = 12;

/// Result of a two-sided Mann-Whitney U test.
///
/// `u` is the U statistic of the first sample; `p_two_sided` is in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MannWhitney {
    pub u: f64,
    pub p_two_sided: f64,
}

/// Sample Pearson correlation. `None` when fewer than two points or when
/// either sequence has zero variance.
pub fn pearson<T: Real>(x: &[T], y: &[T]) -> Option<T> {
    assert_eq!(x.len(), y.len(), "pearson requires paired samples");
    if x.len() < 2 {
        return None;
    }
    let n = T::from_count(x.len());
    let mean_x = x.iter().copied().sum::<T>() / n;
    let mean_y = y.iter().copied().sum::<T>() / n;
    let mut cov = T::zero();
    let mut var_x = T::zero();
    let mut var_y = T::zero();
    for (&xi, &yi) in x.iter().zip(y) {
        let dx = xi - mean_x;
        let dy = yi - mean_y;
        cov = cov + dx * dy;
        var_x = var_x + dx * dx;
        var_y = var_y + dy * dy;
    }
    if var_x <= T::zero() || var_y <= T::zero() {
        return None;
    }
    Some(cov / (var_x * var_y).sqrt())
}

/// Two-sided Mann-Whitney U test with automatic route selection: exact
/// enumeration when `a.len() + b.len() <= EXACT_ENUMERATION_LIMIT`, the
/// tie-corrected normal approximation otherwise.
///
/// Both samples must be non-empty. When every value in both samples is
/// identical the test carries no information and `p_two_sided` is 1.
pub fn mann_whitney_u<T: Real>(a: &[T], b: &[T]) -> MannWhitney {
    assert!(!a.is_empty() && !b.is_empty(), "samples must be non-empty");
    if a.len() + b.len() <= EXACT_ENUMERATION_LIMIT {
        mann_whitney_exact(a, b)
    } else {
        mann_whitney_normal_approx(a, b)
    }
}

/// Exact two-sided p-value by enumerating every assignment of the pooled
/// midranks to the first sample. The p-value is the fraction of
/// assignments whose U deviates from the null mean at least as much as the
/// observed U.
pub fn mann_whitney_exact<T: Real>(a: &[T], b: &[T]) -> MannWhitney {
    let (ranks_a, pooled) = midranks(a, b);
    let n1 = a.len();
    let n2 = b.len();
    let u_obs = u_statistic(ranks_a.iter().sum(), n1);
    let mean = n1 as f64 * n2 as f64 / 2.0;
    let observed_dev = (u_obs - mean).abs();

    let mut extreme = 0u64;
    let mut total = 0u64;
    for_each_combination(pooled.len(), n1, |chosen| {
        let rank_sum: f64 = chosen.iter().map(|&i| pooled[i]).sum();
        let u = u_statistic(rank_sum, n1);
        if (u - mean).abs() >= observed_dev - 1e-9 {
            extreme += 1;
        }
        total += 1;
    });

    MannWhitney {
        u: u_obs,
        p_two_sided: extreme as f64 / total as f64,
    }
}

/// Two-sided p-value from the normal approximation with tie-corrected
/// variance and a 0.5 continuity correction. Returns p = 1 when the
/// tie-corrected variance is zero (all pooled values identical).
pub fn mann_whitney_normal_approx<T: Real>(a: &[T], b: &[T]) -> MannWhitney {
    let (ranks_a, pooled) = midranks(a, b);
    let n1 = a.len() as f64;
    let n2 = b.len() as f64;
    let n = n1 + n2;
    let u_obs = u_statistic(ranks_a.iter().sum(), a.len());
    let mean = n1 * n2 / 2.0;

    let tie_sum = tie_correction_sum(&pooled);
    let variance = (n1 * n2 / 12.0) * ((n + 1.0) - tie_sum / (n * (n - 1.0)));
    if variance <= 0.0 {
        return MannWhitney {
            u: u_obs,
            p_two_sided: 1.0,
        };
    }

    let z = ((u_obs - mean).abs() - 0.5).max(0.0) / variance.sqrt();
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let p = (2.0 * normal.sf(z)).clamp(0.0, 1.0);
    MannWhitney {
        u: u_obs,
        p_two_sided: p,
    }
}

fn u_statistic(rank_sum: f64, n1: usize) -> f64 {
    rank_sum - (n1 * (n1 + 1)) as f64 / 2.0
}

/// Midranks of the pooled sample. Returns the ranks of `a`'s values and the
/// full pooled midrank vector (sorted by value).
fn midranks<T: Real>(a: &[T], b: &[T]) -> (Vec<f64>, Vec<f64>) {
    let mut pooled: Vec<(f64, bool)> = a
        .iter()
        .map(|v| (v.to_f64().expect("finite sample"), true))
        .chain(b.iter().map(|v| (v.to_f64().expect("finite sample"), false)))
        .collect();
    pooled.sort_by(|x, y| x.0.total_cmp(&y.0));

    let mut ranks = vec![0.0; pooled.len()];
    let mut i = 0;
    while i < pooled.len() {
        let mut j = i + 1;
        while j < pooled.len() && pooled[j].0 == pooled[i].0 {
            j += 1;
        }
        let midrank = (i + 1 + j) as f64 / 2.0;
        for r in ranks.iter_mut().take(j).skip(i) {
            *r = midrank;
        }
        i = j;
    }

    let ranks_a: Vec<f64> = ranks
        .iter()
        .zip(&pooled)
        .filter(|(_, &(_, from_a))| from_a)
        .map(|(&r, _)| r)
        .collect();
    (ranks_a, ranks)
}

/// Sum of `t^3 - t` over tie groups of the pooled midranks.
fn tie_correction_sum(sorted_ranks: &[f64]) -> f64 {
    let mut sum = 0.0;
    let mut i = 0;
    while i < sorted_ranks.len() {
        let mut j = i + 1;
        while j < sorted_ranks.len() && sorted_ranks[j] == sorted_ranks[i] {
            j += 1;
        }
        let t = (j - i) as f64;
        sum += t * t * t - t;
        i = j;
    }
    sum
}

/// Visits every k-subset of `0..n` in lexicographic order.
fn for_each_combination<F: FnMut(&[usize])>(n: usize, k: usize, mut visit: F) {
    let mut indices: Vec<usize> = (0..k).collect();
    loop {
        visit(&indices);
        // Advance to the next combination.
        let mut i = k;
        loop {
            if i == 0 {
                return;
            }
            i -= 1;
            if indices[i] != i + n - k {
                break;
            }
            if i == 0 {
                return;
            }
        }
        indices[i] += 1;
        for j in i + 1..k {
            indices[j] = indices[j - 1] + 1;
        }
    }
}
