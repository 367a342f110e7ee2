//! Functional ANOVA: group mean functions, pooled covariance, the F-ratio
//! of between- to within-group variation, its Satterthwaite-approximate
//! asymptotic p-value, and the distance-matrix permutation p-value.

use ndarray::Array2;
use rayon::prelude::*;
use serde::Serialize;

use crate::dist::f_upper_tail;
use crate::error::{Error, Result};
use crate::genotype::Phenotype;
use crate::rng::{domain, substream_rng};
use crate::splines::CurveGrid;

/// Group mean functions, the grand mean, and the pooled covariance on the
/// discretization grid.
#[derive(Debug, Clone)]
pub struct GroupFunctionStats {
    /// k x M group mean functions.
    pub group_means: Array2<f64>,
    /// Size-weighted grand mean (length M).
    pub grand_mean: Vec<f64>,
    /// M x M pooled within-group covariance.
    pub pooled_cov: Array2<f64>,
    pub group_sizes: Vec<usize>,
    pub n: usize,
    pub k: usize,
}

/// Moment match of a chi-square mixture by a scaled chi-square `c chi2_kappa`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct SatterthwaiteApprox {
    /// Degrees-of-freedom adjustment factor `tr^2 / tr(G^2)`.
    pub kappa: f64,
    /// Scale `tr(G^2) / tr(G)`.
    pub c: f64,
    pub trace: f64,
    pub trace_sq: f64,
}

/// Full output of the functional ANOVA test.
#[derive(Debug, Clone, Serialize)]
pub struct FanovaResult {
    pub f_stat: f64,
    pub kappa: f64,
    pub df1: f64,
    pub df2: f64,
    pub p_asymptotic: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p_permutation: Option<f64>,
    pub permutations_used: usize,
    pub flags: Vec<String>,
}

/// Estimate per-group mean functions, the grand mean, and the pooled
/// covariance of the residual curves.
pub fn group_function_stats(grid: &CurveGrid, ph: &Phenotype) -> Result<GroupFunctionStats> {
    let n = grid.n_subjects();
    let m = grid.m();
    let k = ph.k();
    if ph.n() != n {
        return Err(Error::Group(format!(
            "{} phenotype labels but {} curves",
            ph.n(),
            n
        )));
    }
    if n == k {
        return Err(Error::ZeroWithinDf { n });
    }
    let sizes = ph.group_sizes().to_vec();
    let values = grid.values();

    let mut group_means = Array2::zeros((k, m));
    for (i, &g) in ph.labels().iter().enumerate() {
        for a in 0..m {
            group_means[(g, a)] += values[(i, a)];
        }
    }
    for g in 0..k {
        let inv = 1.0 / sizes[g] as f64;
        for a in 0..m {
            group_means[(g, a)] *= inv;
        }
    }
    let mut grand_mean = vec![0.0; m];
    for g in 0..k {
        let w = sizes[g] as f64 / n as f64;
        for a in 0..m {
            grand_mean[a] += w * group_means[(g, a)];
        }
    }

    // Residual curves r_ij = y_ij - mu_g(i); pooled covariance R'R / (n-k).
    let mut resid = Array2::zeros((n, m));
    for (i, &g) in ph.labels().iter().enumerate() {
        for a in 0..m {
            resid[(i, a)] = values[(i, a)] - group_means[(g, a)];
        }
    }
    let mut pooled_cov = Array2::zeros((m, m));
    let inv_df = 1.0 / (n - k) as f64;
    for i in 0..n {
        let row = resid.row(i);
        for a in 0..m {
            let ra = row[a];
            if ra == 0.0 {
                continue;
            }
            for b in a..m {
                pooled_cov[(a, b)] += ra * row[b];
            }
        }
    }
    for a in 0..m {
        for b in a..m {
            let v = pooled_cov[(a, b)] * inv_df;
            pooled_cov[(a, b)] = v;
            pooled_cov[(b, a)] = v;
        }
    }

    Ok(GroupFunctionStats {
        group_means,
        grand_mean,
        pooled_cov,
        group_sizes: sizes,
        n,
        k,
    })
}

/// The two algebraically identical denominator forms of the F ratio must
/// agree to this relative tolerance.
const DENOM_IDENTITY_RTOL: f64 = 1e-10;

/// Between/within F ratio with trapezoid integrals on the grid.
///
/// Returns `(f, degenerate)`; a region with no functional variation at all
/// reports `f = 0` with the degenerate flag set.
pub fn fanova_f_statistic(
    stats: &GroupFunctionStats,
    grid: &CurveGrid,
    ph: &Phenotype,
) -> Result<(f64, bool)> {
    let m = grid.m();
    let w = grid.weights();
    let values = grid.values();
    let k = stats.k;
    let n = stats.n;

    let mut between = 0.0;
    for g in 0..k {
        let ng = stats.group_sizes[g] as f64;
        let mut acc = 0.0;
        for a in 0..m {
            let d = stats.group_means[(g, a)] - stats.grand_mean[a];
            acc += w[a] * d * d;
        }
        between += ng * acc;
    }
    between /= (k - 1) as f64;

    // Denominator, form 1: raw residual sum over (n - k).
    let mut within_raw = 0.0;
    for (i, &g) in ph.labels().iter().enumerate() {
        for a in 0..m {
            let d = values[(i, a)] - stats.group_means[(g, a)];
            within_raw += w[a] * d * d;
        }
    }
    let within_form1 = within_raw / (n - k) as f64;

    // Denominator, form 2: integrated diagonal of the pooled covariance.
    let mut within_form2 = 0.0;
    for a in 0..m {
        within_form2 += w[a] * stats.pooled_cov[(a, a)];
    }

    let scale = within_form1.abs().max(within_form2.abs());
    if scale > 0.0 && (within_form1 - within_form2).abs() > DENOM_IDENTITY_RTOL * scale {
        return Err(Error::Numeric(format!(
            "denominator identity violated: {within_form1} vs {within_form2}"
        )));
    }

    // Scale for "numerically zero" relative to the total variation.
    let total_scale = between.abs() + within_form2.abs();
    if total_scale == 0.0 {
        return Ok((0.0, true));
    }
    if within_form2 <= 1e-12 * total_scale {
        if between <= 1e-12 * total_scale {
            return Ok((0.0, true));
        }
        return Err(Error::DegenerateDenominator(format!(
            "within-group variation {within_form2} vanishes while between-group is {between}"
        )));
    }
    Ok((between / within_form2, false))
}

/// Satterthwaite factors from the pooled covariance traces.
pub fn satterthwaite_kappa(pooled_cov: &Array2<f64>) -> Result<SatterthwaiteApprox> {
    let m = pooled_cov.nrows();
    if pooled_cov.ncols() != m {
        return Err(Error::Shape("covariance matrix must be square".into()));
    }
    let mut trace = 0.0;
    let mut trace_sq = 0.0;
    for a in 0..m {
        trace += pooled_cov[(a, a)];
        for b in 0..m {
            let v = pooled_cov[(a, b)];
            trace_sq += v * v;
        }
    }
    if !(trace > 0.0) || !(trace_sq > 0.0) {
        return Err(Error::DegenerateCovariance(format!(
            "trace {trace}, trace of square {trace_sq}"
        )));
    }
    let kappa = (trace * trace / trace_sq).clamp(1.0, m as f64);
    let c = trace_sq / trace;
    Ok(SatterthwaiteApprox {
        kappa,
        c,
        trace,
        trace_sq,
    })
}

/// Upper tail of `F_{(k-1)kappa, (n-k)kappa}` at the observed ratio.
pub fn fanova_asymptotic_pvalue(f: f64, k: usize, n: usize, kappa: f64) -> Result<f64> {
    if !(f.is_finite() && kappa.is_finite()) || f < 0.0 || kappa <= 0.0 {
        return Err(Error::Numeric(format!(
            "invalid asymptotic p-value inputs: f={f}, kappa={kappa}"
        )));
    }
    if n <= k {
        return Err(Error::ZeroWithinDf { n });
    }
    let df1 = (k - 1) as f64 * kappa;
    let df2 = (n - k) as f64 * kappa;
    f_upper_tail(df1, df2, f)
}

/// Pairwise squared L2 distances between subject curves, integrated by
/// trapezoid on the grid: `D2[i][j] = integral of (y_i - y_j)^2`.
pub fn squared_distance_matrix(grid: &CurveGrid) -> Array2<f64> {
    let n = grid.n_subjects();
    let m = grid.m();
    let w = grid.weights();
    let values = grid.values();
    // D2(i,j) = q_i + q_j - 2 S(i,j) with S the weighted Gram matrix.
    let mut q = vec![0.0; n];
    for i in 0..n {
        let row = values.row(i);
        q[i] = (0..m).map(|a| w[a] * row[a] * row[a]).sum();
    }
    let mut d2 = Array2::zeros((n, n));
    for i in 0..n {
        let ri = values.row(i);
        for j in (i + 1)..n {
            let rj = values.row(j);
            let mut s = 0.0;
            for a in 0..m {
                s += w[a] * ri[a] * rj[a];
            }
            let v = (q[i] + q[j] - 2.0 * s).max(0.0);
            d2[(i, j)] = v;
            d2[(j, i)] = v;
        }
    }
    d2
}

/// Sums of squares from the distance matrix for a given labeling.
fn distance_sums(d2: &Array2<f64>, labels: &[usize], k: usize, sizes: &[usize]) -> (f64, f64) {
    let n = labels.len();
    let mut total = 0.0;
    let mut within = vec![0.0; k];
    for i in 0..n {
        let row = d2.row(i);
        let li = labels[i];
        for j in (i + 1)..n {
            let v = row[j];
            total += v;
            if labels[j] == li {
                within[li] += v;
            }
        }
    }
    let ss_total = total / n as f64;
    let ss_within: f64 = within
        .iter()
        .zip(sizes)
        .map(|(&s, &ng)| s / ng as f64)
        .sum();
    (ss_total, ss_within)
}

/// F statistic recomputed from pairwise squared distances (the Gower
/// identity route). Equals [`fanova_f_statistic`] on the same grid.
pub fn f_from_distances(d2: &Array2<f64>, ph: &Phenotype) -> Result<(f64, bool)> {
    let n = ph.n();
    let k = ph.k();
    if d2.nrows() != n || d2.ncols() != n {
        return Err(Error::Shape(format!(
            "distance matrix is {}x{}, phenotype has {n} subjects",
            d2.nrows(),
            d2.ncols()
        )));
    }
    if n == k {
        return Err(Error::ZeroWithinDf { n });
    }
    let (ss_total, ss_within) = distance_sums(d2, ph.labels(), k, ph.group_sizes());
    f_ratio_from_sums(ss_total, ss_within, n, k)
}

fn f_ratio_from_sums(ss_total: f64, ss_within: f64, n: usize, k: usize) -> Result<(f64, bool)> {
    let ss_between = ss_total - ss_within;
    if ss_total <= 0.0 {
        return Ok((0.0, true));
    }
    if ss_within <= 1e-12 * ss_total {
        if ss_between <= 1e-12 * ss_total {
            return Ok((0.0, true));
        }
        return Err(Error::DegenerateDenominator(format!(
            "within-group sum {ss_within} vanishes while between-group is {ss_between}"
        )));
    }
    let f = (ss_between / (k - 1) as f64) / (ss_within / (n - k) as f64);
    Ok((f.max(0.0), false))
}

/// Permutation p-value by relabeling against the precomputed distance
/// matrix, `p = (#{F_perm >= F_obs} + 1) / (I + 1)`.
///
/// Permutations are drawn from seeded substreams indexed by replicate, so
/// the result is identical for any number of worker threads.
pub fn permutation_pvalue(
    d2: &Array2<f64>,
    ph: &Phenotype,
    permutations: usize,
    seed: u64,
) -> Result<f64> {
    if permutations == 0 {
        return Err(Error::Config("need at least 1 permutation".into()));
    }
    let (f_obs, degenerate) = f_from_distances(d2, ph)?;
    if degenerate {
        return Ok(1.0);
    }
    let k = ph.k();
    let sizes = ph.group_sizes().to_vec();
    let base_labels = ph.labels().to_vec();
    let n = base_labels.len();
    let exceed: usize = (0..permutations)
        .into_par_iter()
        .map(|rep| {
            use rand::seq::SliceRandom;
            let mut rng = substream_rng(seed, domain::PERMUTATION, rep as u64);
            let mut labels = base_labels.clone();
            labels.shuffle(&mut rng);
            let (ss_total, ss_within) = distance_sums(d2, &labels, k, &sizes);
            let ss_between = ss_total - ss_within;
            let f_perm = if ss_within <= 0.0 {
                if ss_between <= 0.0 {
                    0.0
                } else {
                    f64::INFINITY
                }
            } else {
                (ss_between / (k - 1) as f64) / (ss_within / (n - k) as f64)
            };
            usize::from(f_perm >= f_obs)
        })
        .sum();
    Ok((exceed + 1) as f64 / (permutations + 1) as f64)
}

/// Options for [`fanova_test`].
#[derive(Debug, Clone)]
pub struct FanovaOptions {
    /// Also compute the distance-matrix permutation p-value.
    pub with_permutation: bool,
    /// Number of permutations (paper default: 999).
    pub permutations: usize,
    pub seed: u64,
}

impl Default for FanovaOptions {
    fn default() -> Self {
        FanovaOptions {
            with_permutation: false,
            permutations: 999,
            seed: 0,
        }
    }
}

/// Run the full FANOVA test on a curve grid.
pub fn fanova_test(grid: &CurveGrid, ph: &Phenotype, opts: &FanovaOptions) -> Result<FanovaResult> {
    let stats = group_function_stats(grid, ph)?;
    let (f_stat, degenerate) = fanova_f_statistic(&stats, grid, ph)?;
    let mut flags = Vec::new();
    let (kappa, p_asymptotic) = if degenerate {
        flags.push("degenerate_zero_variation".to_string());
        (f64::NAN, 1.0)
    } else {
        let sat = satterthwaite_kappa(&stats.pooled_cov)?;
        let p = fanova_asymptotic_pvalue(f_stat, stats.k, stats.n, sat.kappa)?;
        (sat.kappa, p)
    };
    let (df1, df2) = if kappa.is_nan() {
        (f64::NAN, f64::NAN)
    } else {
        (
            (stats.k - 1) as f64 * kappa,
            (stats.n - stats.k) as f64 * kappa,
        )
    };
    let (p_permutation, permutations_used) = if opts.with_permutation {
        let d2 = squared_distance_matrix(grid);
        (
            Some(permutation_pvalue(&d2, ph, opts.permutations, opts.seed)?),
            opts.permutations,
        )
    } else {
        (None, 0)
    };
    Ok(FanovaResult {
        f_stat,
        kappa,
        df1,
        df2,
        p_asymptotic,
        p_permutation,
        permutations_used,
        flags,
    })
}
