//! Simplified variance-component comparator: a sum of single-variant
//! trend score chi-squares with inverse-null-variance weights, calibrated
//! by phenotype permutation, with an optional moment-matched scaled
//! chi-square p-value.

use ndarray::Array2;
use rayon::prelude::*;
use serde::Serialize;

use crate::dist::chi2_upper_tail;
use crate::error::{Error, Result};
use crate::genotype::{GenotypeMatrix, Phenotype};
use crate::rng::{domain, substream_rng};

#[derive(Debug, Clone, Serialize)]
pub struct SkatLiteResult {
    pub q: f64,
    #[serde(skip_serializing)]
    pub per_variant_chi2: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p_permutation: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p_satterthwaite: Option<f64>,
    pub permutations_used: usize,
    pub flags: Vec<String>,
}

/// Centered genotype columns (missing entries mean-imputed, hence centered
/// to zero) plus each column's sum of squares.
struct CenteredGenotypes {
    centered: Array2<f64>,
    col_ss: Vec<f64>,
}

fn center_genotypes(g: &GenotypeMatrix) -> CenteredGenotypes {
    let n = g.n_subjects();
    let t = g.n_variants();
    let mut centered = Array2::zeros((n, t));
    let mut col_ss = vec![0.0; t];
    for j in 0..t {
        let mut sum = 0.0;
        let mut count = 0usize;
        for i in 0..n {
            if let Some(c) = g.code(i, j) {
                sum += c as f64;
                count += 1;
            }
        }
        let mean = if count > 0 { sum / count as f64 } else { 0.0 };
        let mut ss = 0.0;
        for i in 0..n {
            let v = match g.code(i, j) {
                Some(c) => c as f64 - mean,
                None => 0.0,
            };
            centered[(i, j)] = v;
            ss += v * v;
        }
        col_ss[j] = ss;
    }
    CenteredGenotypes { centered, col_ss }
}

fn check_binary(y: &[f64]) -> Result<f64> {
    let n = y.len();
    if n == 0 {
        return Err(Error::Shape("empty response".into()));
    }
    for &v in y {
        if v != 0.0 && v != 1.0 {
            return Err(Error::Group(format!("responses must be 0/1, got {v}")));
        }
    }
    let ybar = y.iter().sum::<f64>() / n as f64;
    if ybar == 0.0 || ybar == 1.0 {
        return Err(Error::Group("need both cases and controls".into()));
    }
    Ok(ybar)
}

/// Per-variant trend score chi-squares,
/// `chi2_j = U_j^2 / V0_j` with `U_j = sum_i (g_ij - gbar_j)(y_i - ybar)`
/// and `V0_j = ybar (1 - ybar) sum_i (g_ij - gbar_j)^2`.
/// Missing genotypes are mean-imputed (their centered value is zero).
pub fn trend_statistics(g: &GenotypeMatrix, y: &[f64]) -> Result<Vec<f64>> {
    if y.len() != g.n_subjects() {
        return Err(Error::Shape(format!(
            "{} responses for {} subjects",
            y.len(),
            g.n_subjects()
        )));
    }
    let ybar = check_binary(y)?;
    let cg = center_genotypes(g);
    Ok(trend_from_centered(&cg, y, ybar))
}

fn trend_from_centered(cg: &CenteredGenotypes, y: &[f64], ybar: f64) -> Vec<f64> {
    let (n, t) = cg.centered.dim();
    let null_var_scale = ybar * (1.0 - ybar);
    let mut u = vec![0.0; t];
    for i in 0..n {
        let dy = y[i] - ybar;
        if dy == 0.0 {
            continue;
        }
        let row = cg.centered.row(i);
        for j in 0..t {
            u[j] += row[j] * dy;
        }
    }
    (0..t)
        .map(|j| {
            let v0 = null_var_scale * cg.col_ss[j];
            if v0 > 0.0 {
                u[j] * u[j] / v0
            } else {
                0.0
            }
        })
        .collect()
}

/// The set statistic: the sum of the standardized per-variant chi-squares.
pub fn skat_q(per_variant: &[f64]) -> f64 {
    per_variant.iter().sum()
}

/// Permutation p-value for Q, `(#{Q_perm >= Q_obs} + 1) / (I + 1)`.
pub fn skat_permutation_pvalue(
    g: &GenotypeMatrix,
    y: &[f64],
    permutations: usize,
    seed: u64,
) -> Result<f64> {
    if permutations == 0 {
        return Err(Error::Config("need at least 1 permutation".into()));
    }
    let ybar = check_binary(y)?;
    let cg = center_genotypes(g);
    let q_obs = skat_q(&trend_from_centered(&cg, y, ybar));
    let exceed: usize = (0..permutations)
        .into_par_iter()
        .map(|rep| {
            use rand::seq::SliceRandom;
            let mut rng = substream_rng(seed, domain::PERMUTATION, rep as u64);
            let mut perm = y.to_vec();
            perm.shuffle(&mut rng);
            let q = skat_q(&trend_from_centered(&cg, &perm, ybar));
            usize::from(q >= q_obs)
        })
        .sum();
    Ok((exceed + 1) as f64 / (permutations + 1) as f64)
}

/// Approximate p-value by moment-matching Q against a scaled chi-square.
///
/// Under the permutation null, Q behaves like a mixture of chi-squares
/// whose weights are the eigenvalues of the correlation matrix R of the
/// per-variant scores; `tr(R) = T` and `tr(R^2) = |R|_F^2` give the scale
/// and degrees of freedom, no eigendecomposition needed. Labeled
/// approximate: permutation is the reference route.
pub fn skat_satterthwaite_pvalue(g: &GenotypeMatrix, y: &[f64]) -> Result<f64> {
    let ybar = check_binary(y)?;
    let cg = center_genotypes(g);
    let q_obs = skat_q(&trend_from_centered(&cg, y, ybar));
    let t = g.n_variants();
    let mut trace_r2 = 0.0;
    for j in 0..t {
        for l in 0..t {
            if cg.col_ss[j] <= 0.0 || cg.col_ss[l] <= 0.0 {
                continue;
            }
            let mut dot = 0.0;
            for i in 0..g.n_subjects() {
                dot += cg.centered[(i, j)] * cg.centered[(i, l)];
            }
            let r = dot / (cg.col_ss[j] * cg.col_ss[l]).sqrt();
            trace_r2 += r * r;
        }
    }
    if trace_r2 <= 0.0 {
        return Err(Error::DegenerateCovariance(
            "per-variant score correlation has zero trace".into(),
        ));
    }
    let trace = t as f64;
    let c = trace_r2 / trace;
    let kappa = trace * trace / trace_r2;
    chi2_upper_tail(kappa, q_obs / c)
}

/// Options for [`skat_test`].
#[derive(Debug, Clone)]
pub struct SkatOptions {
    pub permutations: usize,
    pub seed: u64,
    /// Also report the moment-matched approximate p-value.
    pub with_satterthwaite: bool,
}

impl Default for SkatOptions {
    fn default() -> Self {
        SkatOptions {
            permutations: 999,
            seed: 0,
            with_satterthwaite: false,
        }
    }
}

/// Full simplified-SKAT comparator run.
pub fn skat_test(g: &GenotypeMatrix, ph: &Phenotype, opts: &SkatOptions) -> Result<SkatLiteResult> {
    let y = ph.binary_responses()?;
    let per_variant = trend_statistics(g, &y)?;
    let q = skat_q(&per_variant);
    let mut flags = Vec::new();
    if per_variant.iter().any(|&v| v == 0.0) {
        // Zero contributions should not occur on constant-filtered input.
        flags.push("zero_variance_variant".to_string());
    }
    let p_permutation = Some(skat_permutation_pvalue(g, &y, opts.permutations, opts.seed)?);
    let p_satterthwaite = if opts.with_satterthwaite {
        Some(skat_satterthwaite_pvalue(g, &y)?)
    } else {
        None
    };
    Ok(SkatLiteResult {
        q,
        per_variant_chi2: per_variant,
        p_permutation,
        p_satterthwaite,
        permutations_used: opts.permutations,
        flags,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use ndarray::Array2;

    fn matrix_from_rows(rows: &[&[i8]]) -> GenotypeMatrix {
        let n = rows.len();
        let t = rows[0].len();
        let mut codes = Array2::from_elem((n, t), crate::genotype::MISSING);
        for (i, r) in rows.iter().enumerate() {
            for (j, &c) in r.iter().enumerate() {
                codes[(i, j)] = c;
            }
        }
        let positions: Vec<f64> = (0..t).map(|j| j as f64).collect();
        GenotypeMatrix::from_parts(
            codes,
            &positions,
            (0..t).map(|j| format!("v{j}")).collect(),
            (0..n).map(|i| format!("s{i}")).collect(),
        )
        .unwrap()
    }

    #[test]
    fn balanced_variant_contributes_nothing() {
        // Same genotype mean in cases and controls: U = 0.
        let g = matrix_from_rows(&[&[0], &[2], &[0], &[2]]);
        let y = vec![1.0, 1.0, 0.0, 0.0];
        let chi2 = trend_statistics(&g, &y).unwrap();
        assert_abs_diff_eq!(chi2[0], 0.0, epsilon = 1e-12);
    }

    #[test]
    fn perfect_separation_reaches_n() {
        // Cases all 2, controls all 0: the trend chi-square equals n for
        // this coding, for any case fraction.
        let g = matrix_from_rows(&[&[2], &[2], &[2], &[0], &[0], &[0], &[0], &[0]]);
        let y = vec![1.0, 1.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0];
        let chi2 = trend_statistics(&g, &y).unwrap();
        assert_relative_eq!(chi2[0], 8.0, max_relative = 1e-12);
    }

    #[test]
    fn matches_contingency_table_formula() {
        use rand::Rng;
        let mut rng = crate::rng::substream_rng(5, 21, 0);
        for _ in 0..25 {
            let n = 30;
            let rows: Vec<Vec<i8>> = (0..n)
                .map(|_| vec![rng.random_range(0..3) as i8])
                .collect();
            let refs: Vec<&[i8]> = rows.iter().map(|r| r.as_slice()).collect();
            let g = matrix_from_rows(&refs);
            let mut y: Vec<f64> = (0..n).map(|i| if i < 13 { 1.0 } else { 0.0 }).collect();
            use rand::seq::SliceRandom;
            y.shuffle(&mut rng);
            // Skip degenerate draws where the variant is constant.
            let col: Vec<i8> = rows.iter().map(|r| r[0]).collect();
            if col.iter().all(|&c| c == col[0]) {
                continue;
            }
            let chi2 = trend_statistics(&g, &y).unwrap()[0];
            // Classical 2x3 contingency-table trend statistic with scores
            // x = (0,1,2): N (N*sum(x r) - R*sum(x n))^2 /
            //              [R(N-R) (N*sum(x^2 n) - sum(x n)^2)].
            let big_n = n as f64;
            let big_r: f64 = y.iter().sum();
            let mut xn = 0.0; // sum x_j n_j
            let mut xxn = 0.0; // sum x_j^2 n_j
            let mut xr = 0.0; // sum x_j r_j
            for geno in 0..3 {
                let x = geno as f64;
                let nj = col.iter().filter(|&&c| c == geno as i8).count() as f64;
                let rj = col
                    .iter()
                    .zip(&y)
                    .filter(|(&c, &yy)| c == geno as i8 && yy == 1.0)
                    .count() as f64;
                xn += x * nj;
                xxn += x * x * nj;
                xr += x * rj;
            }
            let num = big_n * (big_n * xr - big_r * xn).powi(2);
            let den = big_r * (big_n - big_r) * (big_n * xxn - xn * xn);
            let classical = num / den;
            assert_relative_eq!(chi2, classical, max_relative = 1e-10);
        }
    }

    #[test]
    fn q_is_the_sum_and_additive() {
        assert_eq!(skat_q(&[]), 0.0);
        assert_eq!(skat_q(&[3.5]), 3.5);
        let parts = [1.0, 2.0, 4.0, 0.5];
        assert_eq!(
            skat_q(&parts),
            skat_q(&parts[..2]) + skat_q(&parts[2..])
        );
    }

    #[test]
    fn flip_invariance() {
        use crate::genotype::FlipMask;
        let g = matrix_from_rows(&[
            &[0, 2, 1],
            &[2, 0, 0],
            &[1, 1, 2],
            &[0, 2, 0],
            &[2, 1, 1],
            &[0, 0, 2],
        ]);
        let y = vec![1.0, 0.0, 1.0, 0.0, 1.0, 0.0];
        let chi2 = trend_statistics(&g, &y).unwrap();
        let mask = FlipMask::new(vec![true, false, true]);
        let flipped = mask.apply(&g).unwrap();
        let chi2_flipped = trend_statistics(&flipped, &y).unwrap();
        for (a, b) in chi2.iter().zip(&chi2_flipped) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        }
    }

    #[test]
    fn missing_entries_are_mean_imputed() {
        use crate::genotype::MISSING;
        let g = matrix_from_rows(&[&[0], &[2], &[MISSING], &[2], &[0], &[2]]);
        let y = vec![0.0, 1.0, 1.0, 1.0, 0.0, 0.0];
        let chi2 = trend_statistics(&g, &y).unwrap();
        assert!(chi2[0].is_finite());
        // The imputed entry is centered to zero, so it cannot contribute.
        let g2 = matrix_from_rows(&[&[0], &[2], &[1], &[2], &[0], &[2]]);
        let chi2_full = trend_statistics(&g2, &y).unwrap();
        assert!(chi2[0] != chi2_full[0]);
    }

    #[test]
    fn permutation_add_one_rule() {
        // Large enough n that no shuffle ties the separated optimum (Q is
        // invariant under label complement, so tiny n would tie).
        let n = 16;
        let rows: Vec<Vec<i8>> = (0..n)
            .map(|i| {
                let case = i < n / 2;
                vec![if case { 2 } else { 0 }, ((i % 3) as i8)]
            })
            .collect();
        let refs: Vec<&[i8]> = rows.iter().map(|r| r.as_slice()).collect();
        let g = matrix_from_rows(&refs);
        let y: Vec<f64> = (0..n).map(|i| if i < n / 2 { 1.0 } else { 0.0 }).collect();
        let p = skat_permutation_pvalue(&g, &y, 99, 11).unwrap();
        assert_relative_eq!(p, 0.01, max_relative = 1e-12);
    }

    #[test]
    fn rejects_single_class_response() {
        let g = matrix_from_rows(&[&[0], &[2]]);
        assert!(matches!(
            trend_statistics(&g, &[1.0, 1.0]),
            Err(Error::Group(_))
        ));
    }

    #[test]
    fn satterthwaite_close_to_permutation_on_independent_variants() {
        use rand::Rng;
        let mut rng = crate::rng::substream_rng(14, 3, 0);
        let n = 60;
        let t = 5;
        let rows: Vec<Vec<i8>> = (0..n)
            .map(|_| (0..t).map(|_| rng.random_range(0..3) as i8).collect())
            .collect();
        let refs: Vec<&[i8]> = rows.iter().map(|r| r.as_slice()).collect();
        let g = matrix_from_rows(&refs);
        let y: Vec<f64> = (0..n).map(|i| if i % 2 == 0 { 1.0 } else { 0.0 }).collect();
        let p_perm = skat_permutation_pvalue(&g, &y, 1999, 8).unwrap();
        let p_sat = skat_satterthwaite_pvalue(&g, &y).unwrap();
        assert!(
            (p_perm - p_sat).abs() < 0.12,
            "moment approximation too far from permutation: {p_sat} vs {p_perm}"
        );
    }
}
