//! Functional linear model comparator: a scalar (binary) response regressed
//! on the genotype function through a basis expansion of the coefficient
//! function, tested with a Wald statistic and calibrated by permuting the
//! phenotype vector.

use nalgebra::{DMatrix, DVector, SVD};
use ndarray::Array2;
use rayon::prelude::*;
use serde::Serialize;

use crate::dist::chi2_upper_tail;
use crate::error::{Error, Result};
use crate::genotype::Phenotype;
use crate::rng::{domain, substream_rng};
use crate::splines::{BasisSpec, CurveGrid};

/// Fitted regression of the response on `[1 | W]`.
#[derive(Debug, Clone)]
pub struct FlmModel {
    /// n x K_beta design `W[i][k] = integral of X_i(t) theta_k(t)`.
    pub design: Array2<f64>,
    pub intercept: f64,
    /// Slope coefficient estimates (length K_beta).
    pub coefficients: Vec<f64>,
    /// Residual variance estimate.
    pub sigma2: f64,
    /// Numerical rank of the full design.
    pub rank: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct FlmResult {
    pub t_q: f64,
    /// Wald degrees of freedom (the slope rank; K_beta when full rank).
    pub k_beta: usize,
    pub p_chisq: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p_permutation: Option<f64>,
    pub permutations_used: usize,
    pub flags: Vec<String>,
}

/// Design matrix of integrated curve-basis products,
/// `W[i][k] = integral of X_i(t) theta_k(t) dt` by trapezoid on the grid.
pub fn flm_design_matrix(grid: &CurveGrid, beta_basis: &BasisSpec) -> Result<Array2<f64>> {
    let m = grid.m();
    let n = grid.n_subjects();
    let k = beta_basis.k();
    let w = grid.weights();
    let theta = beta_basis.basis_matrix(grid.grid_points())?;
    let mut design = Array2::zeros((n, k));
    let values = grid.values();
    for i in 0..n {
        let row = values.row(i);
        for j in 0..k {
            let mut acc = 0.0;
            for a in 0..m {
                acc += w[a] * row[a] * theta[(a, j)];
            }
            design[(i, j)] = acc;
        }
    }
    Ok(design)
}

/// Residual variance below this fraction of the response variance is
/// treated as degenerate (constant response or perfect fit).
const SIGMA2_DEGENERATE_RTOL: f64 = 1e-12;

struct WaldEngine {
    /// Thin-SVD factors of `X = [1 | W]`.
    u: DMatrix<f64>,
    v: DMatrix<f64>,
    inv_singular: DVector<f64>,
    rank: usize,
    n: usize,
    p: usize,
    /// Inverse of the slope block of `(X'X)^-1` (the Wald metric).
    wald_metric: DMatrix<f64>,
}

impl WaldEngine {
    fn new(design: &Array2<f64>) -> Result<Self> {
        let n = design.nrows();
        let k = design.ncols();
        let p = k + 1;
        if n <= p {
            return Err(Error::InsufficientData(format!(
                "need n > K_beta + 1 ({} needed, {n} subjects)",
                p
            )));
        }
        let x = DMatrix::from_fn(n, p, |i, j| if j == 0 { 1.0 } else { design[(i, j - 1)] });
        let svd = SVD::new(x, true, true);
        let u = svd.u.as_ref().unwrap().clone();
        let v_t = svd.v_t.as_ref().unwrap().clone();
        let smax = svd.singular_values.iter().cloned().fold(0.0_f64, f64::max);
        let eps = f64::EPSILON * smax * n.max(p) as f64;
        let rank = svd.singular_values.iter().filter(|&&s| s > eps).count();
        let inv_singular = DVector::from_iterator(
            svd.singular_values.len(),
            svd.singular_values
                .iter()
                .map(|&s| if s > eps { 1.0 / s } else { 0.0 }),
        );
        let v = v_t.transpose();

        // C = pinv(X'X) = V S^-2 V'; slope block C_s; Wald metric = pinv(C_s).
        let mut c = DMatrix::zeros(p, p);
        for r in 0..inv_singular.len() {
            let sc = inv_singular[r] * inv_singular[r];
            if sc == 0.0 {
                continue;
            }
            for a in 0..p {
                for b in 0..p {
                    c[(a, b)] += sc * v[(a, r)] * v[(b, r)];
                }
            }
        }
        let c_s = c.view((1, 1), (k, k)).into_owned();
        let wald_metric = pinv_symmetric(&c_s);
        Ok(WaldEngine {
            u,
            v,
            inv_singular,
            rank,
            n,
            p,
            wald_metric,
        })
    }

    fn slope_df(&self) -> usize {
        self.rank.saturating_sub(1)
    }

    /// Least-squares fit and Wald statistic for a response vector; the
    /// last element reports whether the residual variance degenerated.
    fn wald(&self, y: &DVector<f64>) -> (DVector<f64>, f64, f64, bool) {
        // b = V S^+ U' y, RSS = |y|^2 - |U_r' y|^2.
        let uy = self.u.transpose() * y;
        let mut proj = 0.0;
        let mut b = DVector::zeros(self.p);
        for r in 0..self.inv_singular.len() {
            if self.inv_singular[r] == 0.0 {
                continue;
            }
            proj += uy[r] * uy[r];
            let coef = uy[r] * self.inv_singular[r];
            for a in 0..self.p {
                b[a] += coef * self.v[(a, r)];
            }
        }
        let rss = (y.norm_squared() - proj).max(0.0);
        let sigma2 = rss / (self.n - self.rank) as f64;
        let slopes = b.rows(1, self.p - 1).into_owned();
        let mean = y.iter().sum::<f64>() / self.n as f64;
        let var_y = y.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / self.n as f64;
        let degenerate = sigma2 <= SIGMA2_DEGENERATE_RTOL * (var_y + 1.0);
        let t_q = if degenerate {
            0.0
        } else {
            let q = (&self.wald_metric * &slopes).dot(&slopes) / sigma2;
            q.max(0.0)
        };
        (b, sigma2, t_q, degenerate)
    }
}

fn pinv_symmetric(m: &DMatrix<f64>) -> DMatrix<f64> {
    let eig = nalgebra::SymmetricEigen::new(m.clone());
    let k = m.nrows();
    let emax = eig.eigenvalues.iter().cloned().fold(0.0_f64, f64::max);
    let tol = f64::EPSILON * emax.max(1e-300) * k as f64;
    let mut out = DMatrix::zeros(k, k);
    for r in 0..k {
        let ev = eig.eigenvalues[r];
        if ev <= tol {
            continue;
        }
        let col = eig.eigenvectors.column(r);
        for a in 0..k {
            for b in 0..k {
                out[(a, b)] += col[a] * col[b] / ev;
            }
        }
    }
    out
}

/// Wald test of the slope block from the linear regression of `y` on
/// `[1 | W]`; the statistic follows chi-square with `K_beta` degrees of
/// freedom under the null (binary responses enter the linear model
/// directly).
pub fn flm_wald(design: &Array2<f64>, y: &[f64]) -> Result<(FlmModel, FlmResult)> {
    if y.len() != design.nrows() {
        return Err(Error::Shape(format!(
            "{} responses for {} design rows",
            y.len(),
            design.nrows()
        )));
    }
    let engine = WaldEngine::new(design)?;
    let yv = DVector::from_column_slice(y);
    let (b, sigma2, t_q, degenerate) = engine.wald(&yv);
    let mut flags = Vec::new();
    if engine.rank < engine.p {
        flags.push("rank_deficient".to_string());
    }
    if degenerate {
        flags.push("degenerate_variance".to_string());
    }
    let df = engine.slope_df();
    if df == 0 {
        return Err(Error::DegenerateCovariance(
            "design has no effective slope directions".into(),
        ));
    }
    let p_chisq = chi2_upper_tail(df as f64, t_q)?;
    let model = FlmModel {
        design: design.clone(),
        intercept: b[0],
        coefficients: b.iter().skip(1).cloned().collect(),
        sigma2,
        rank: engine.rank,
    };
    Ok((
        model,
        FlmResult {
            t_q,
            k_beta: df,
            p_chisq,
            p_permutation: None,
            permutations_used: 0,
            flags,
        },
    ))
}

/// Permutation p-value: permute the response, recompute the chi-square
/// p-value each time, and report `(#{p_perm <= p_obs} + 1) / (I + 1)`.
/// More extreme means a smaller p-value.
pub fn flm_permutation_pvalue(
    design: &Array2<f64>,
    y: &[f64],
    permutations: usize,
    seed: u64,
) -> Result<f64> {
    if permutations == 0 {
        return Err(Error::Config("need at least 1 permutation".into()));
    }
    let engine = WaldEngine::new(design)?;
    let yv = DVector::from_column_slice(y);
    let (_, _, t_obs, _) = engine.wald(&yv);
    // Same degrees of freedom for every permutation, so comparing p-values
    // is comparing statistics with the order reversed.
    let exceed: usize = (0..permutations)
        .into_par_iter()
        .map(|rep| {
            use rand::seq::SliceRandom;
            let mut rng = substream_rng(seed, domain::PERMUTATION, rep as u64);
            let mut perm = y.to_vec();
            perm.shuffle(&mut rng);
            let (_, _, t_perm, _) = engine.wald(&DVector::from_vec(perm));
            usize::from(t_perm >= t_obs)
        })
        .sum();
    Ok((exceed + 1) as f64 / (permutations + 1) as f64)
}

/// Options for [`flm_test`].
#[derive(Debug, Clone)]
pub struct FlmOptions {
    pub permutations: usize,
    pub seed: u64,
}

impl Default for FlmOptions {
    fn default() -> Self {
        FlmOptions {
            permutations: 999,
            seed: 0,
        }
    }
}

/// Full FLM comparator on a curve grid: build the design against the
/// coefficient-function basis, Wald test, permutation calibration.
pub fn flm_test(
    grid: &CurveGrid,
    ph: &Phenotype,
    beta_basis: &BasisSpec,
    opts: &FlmOptions,
) -> Result<FlmResult> {
    let y = ph.binary_responses()?;
    let design = flm_design_matrix(grid, beta_basis)?;
    let (_, mut result) = flm_wald(&design, &y)?;
    result.p_permutation = Some(flm_permutation_pvalue(&design, &y, opts.permutations, opts.seed)?);
    result.permutations_used = opts.permutations;
    Ok(result)
}

/// Default coefficient-function basis: cubic B-splines on six equally
/// spaced interior knots (ten basis functions).
pub fn default_beta_basis() -> BasisSpec {
    let interior: Vec<f64> = (1..=6).map(|j| j as f64 / 7.0).collect();
    BasisSpec::new(4, interior, crate::splines::KnotStrategy::SmallFixed)
        .expect("static knot set is valid")
}
