//! Penalized least-squares smoothing of per-subject genotype sequences and
//! discretization of the fitted curves.

use std::sync::Arc;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen, SVD};
use ndarray::Array2;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::genotype::GenotypeMatrix;
use crate::splines::basis::{make_knots, BasisSpec, KnotStrategy};

/// GCV search bounds for the smoothing parameter.
pub const GCV_LAMBDA_MIN: f64 = 1e-16;
pub const GCV_LAMBDA_MAX: f64 = 1e3;

/// A fitted basis expansion for one subject.
#[derive(Debug, Clone)]
pub struct SmoothCurve {
    pub basis: Arc<BasisSpec>,
    pub coefficients: Vec<f64>,
    /// Smoothing parameter used for the fit (0 = plain least squares).
    pub lambda: f64,
    /// GCV score at `lambda` (`inf` in the interpolation regime).
    pub gcv: f64,
    /// Positions that entered the fit.
    pub observed_mask: Vec<bool>,
}

impl SmoothCurve {
    pub fn evaluate(&self, t: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&t) {
            return Err(Error::Domain(format!("evaluation point {t} outside [0,1]")));
        }
        let (span, vals) = self.basis.nonzero_basis(t);
        let first = span + 1 - self.basis.order();
        Ok(vals
            .iter()
            .enumerate()
            .map(|(r, v)| v * self.coefficients[first + r])
            .sum())
    }

    pub fn evaluate_many(&self, ts: &[f64]) -> Result<Vec<f64>> {
        ts.iter().map(|&t| self.evaluate(t)).collect()
    }

    /// Integrated squared second derivative of the fitted curve, by
    /// per-span quadrature of `(y'')^2`. Non-negative by construction.
    pub fn roughness(&self) -> Result<f64> {
        self.basis.integrate_curvature_sq(&self.coefficients)
    }
}

/// Per-subject curve evaluations on a common equally spaced grid over [0,1].
#[derive(Debug, Clone, PartialEq)]
pub struct CurveGrid {
    grid_points: Vec<f64>,
    values: Array2<f64>,
}

impl CurveGrid {
    /// Wrap an existing values matrix (rows = subjects) on the canonical
    /// equally spaced grid.
    pub fn from_values(values: Array2<f64>) -> Result<Self> {
        let m = values.ncols();
        if m < 2 {
            return Err(Error::Grid(format!("grid needs at least 2 points, got {m}")));
        }
        Ok(CurveGrid {
            grid_points: equally_spaced(m),
            values,
        })
    }

    pub fn m(&self) -> usize {
        self.grid_points.len()
    }

    pub fn n_subjects(&self) -> usize {
        self.values.nrows()
    }

    pub fn grid_points(&self) -> &[f64] {
        &self.grid_points
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    /// Trapezoid quadrature weights for this grid.
    pub fn weights(&self) -> Vec<f64> {
        trapezoid_weights(self.m())
    }

    /// Emit as TSV: header `id  t_1 .. t_M`, one row per subject.
    pub fn write_tsv<W: std::io::Write>(&self, mut w: W, subject_ids: &[String]) -> Result<()> {
        let mut header = String::from("id");
        for t in &self.grid_points {
            header.push('\t');
            header.push_str(&format!("{t:.6}"));
        }
        writeln!(w, "{header}")?;
        for (i, row) in self.values.rows().into_iter().enumerate() {
            let id = subject_ids
                .get(i)
                .map(|s| s.as_str())
                .unwrap_or("subject");
            let mut line = id.to_string();
            for v in row.iter() {
                line.push('\t');
                line.push_str(&format!("{v:.10e}"));
            }
            writeln!(w, "{line}")?;
        }
        Ok(())
    }
}

fn equally_spaced(m: usize) -> Vec<f64> {
    (0..m).map(|i| i as f64 / (m - 1) as f64).collect()
}

/// Trapezoid weights on `m` equally spaced points spanning [0,1].
pub fn trapezoid_weights(m: usize) -> Vec<f64> {
    let h = 1.0 / (m - 1) as f64;
    let mut w = vec![h; m];
    w[0] = h / 2.0;
    w[m - 1] = h / 2.0;
    w
}

fn observed_subset(
    values: &[f64],
    observed: &[bool],
    positions: &[f64],
) -> Result<(Vec<f64>, Vec<f64>)> {
    if values.len() != observed.len() || values.len() != positions.len() {
        return Err(Error::Shape(format!(
            "mismatched lengths: {} values, {} mask, {} positions",
            values.len(),
            observed.len(),
            positions.len()
        )));
    }
    let mut pos = Vec::new();
    let mut val = Vec::new();
    for i in 0..values.len() {
        if observed[i] {
            pos.push(positions[i]);
            val.push(values[i]);
        }
    }
    if val.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "need at least 2 observed points, got {}",
            val.len()
        )));
    }
    Ok((pos, val))
}

fn design_matrix(spec: &BasisSpec, positions: &[f64]) -> Result<DMatrix<f64>> {
    let k = spec.k();
    let mut phi = DMatrix::zeros(positions.len(), k);
    for (i, &t) in positions.iter().enumerate() {
        if !(0.0..=1.0).contains(&t) {
            return Err(Error::Domain(format!("position {t} outside [0,1]")));
        }
        let (span, vals) = spec.nonzero_basis(t);
        let first = span + 1 - spec.order();
        for (r, v) in vals.into_iter().enumerate() {
            phi[(i, first + r)] = v;
        }
    }
    Ok(phi)
}

fn svd_rank_eps(svd: &SVD<f64, Dyn, Dyn>, nrows: usize, ncols: usize) -> f64 {
    let smax = svd.singular_values.iter().cloned().fold(0.0_f64, f64::max);
    f64::EPSILON * smax * nrows.max(ncols) as f64
}

/// Solve the penalized least-squares problem
/// `min_b ||g - Phi b||^2 + lambda b' P b` over the observed positions.
///
/// `lambda = 0` with a rank-deficient design resolves to the minimum-norm
/// least-squares solution (SVD pseudo-inverse).
pub fn fit_penalized(
    values: &[f64],
    observed: &[bool],
    positions: &[f64],
    spec: &Arc<BasisSpec>,
    lambda: f64,
) -> Result<SmoothCurve> {
    if !lambda.is_finite() || lambda < 0.0 {
        return Err(Error::Numeric(format!("lambda must be finite and >= 0, got {lambda}")));
    }
    let (pos, val) = observed_subset(values, observed, positions)?;
    let n_obs = val.len();
    let phi = design_matrix(spec, &pos)?;
    let y = DVector::from_vec(val);
    let k = spec.k();

    let (b, tr_h) = if lambda == 0.0 {
        let svd = SVD::new(phi.clone(), true, true);
        let eps = svd_rank_eps(&svd, n_obs, k);
        let rank = svd.rank(eps);
        let b = svd
            .solve(&y, eps)
            .map_err(|e| Error::Numeric(format!("SVD solve failed: {e}")))?;
        (b.column(0).into_owned(), rank as f64)
    } else {
        let penalty = spec.penalty_matrix()?;
        let p = DMatrix::from_fn(k, k, |i, j| penalty[(i, j)]);
        let gram = phi.transpose() * &phi;
        let a = &gram + p * lambda;
        let rhs = phi.transpose() * &y;
        match Cholesky::new(a.clone()) {
            Some(chol) => {
                let b = chol.solve(&rhs);
                let x = chol.solve(&gram);
                (b, x.trace())
            }
            None => {
                // Near-singular penalized system; fall back to a symmetric
                // pseudo-inverse.
                let eig = SymmetricEigen::new(a);
                let tol = f64::EPSILON
                    * eig.eigenvalues.iter().cloned().fold(0.0_f64, f64::max)
                    * k as f64;
                let mut b = DVector::zeros(k);
                let mut tr = 0.0;
                for (idx, &ev) in eig.eigenvalues.iter().enumerate() {
                    if ev > tol {
                        let u = eig.eigenvectors.column(idx);
                        let proj = u.dot(&rhs) / ev;
                        b += u * proj;
                        tr += u.dot(&(&gram * u)) / ev;
                    }
                }
                (b, tr)
            }
        }
    };

    let resid = &y - &phi * &b;
    let rss = resid.norm_squared();
    let denom = n_obs as f64 - tr_h;
    let gcv = if denom > 1e-8 {
        n_obs as f64 * rss / (denom * denom)
    } else {
        f64::INFINITY
    };
    Ok(SmoothCurve {
        basis: spec.clone(),
        coefficients: b.iter().cloned().collect(),
        lambda,
        gcv,
        observed_mask: observed.to_vec(),
    })
}

/// One-time factorization of the pencil `(Phi'Phi, P)` that makes GCV
/// evaluation O(K) per lambda: with `S = Phi'Phi + P = LL'` and
/// `L^-1 P L^-T = U diag(sigma) U'`, the penalized system at any lambda is
/// `T diag(1 + (lambda-1) sigma)^-1 T'` with `T = L^-T U`.
struct Pencil {
    sigma: DVector<f64>,
    tmat: DMatrix<f64>,
    /// `T' Phi'` (K x n_obs): maps a data vector to rotated coordinates.
    w: DMatrix<f64>,
}

/// Modes with sigma above `1 - SIGMA_ONE_TOL` are treated as exact
/// penalty-only directions outside the column space of the design; genuine
/// data modes in saturated bases stay well below this (1 - sigma is at
/// least the data share of the mode, ~1e-7 even for extreme knot spans).
const SIGMA_ONE_TOL: f64 = 1e-10;

/// Sigma values below this are eigen-solver noise on exact penalty
/// null-space modes (observed up to ~1e-8); the smallest genuine sigma of a
/// curvature penalty sits orders of magnitude higher. Cleaning the noise to
/// zero keeps the null space a true pass-through at arbitrarily large
/// lambda.
const SIGMA_ZERO_TOL: f64 = 1e-6;

/// Scores within this absolute band of the minimum count as ties; ties go
/// to the largest lambda (degenerate rows fit every lambda equally well and
/// should report a smooth fit, matching the large lambdas seen on constant
/// rows in practice).
const GCV_TIE_ABS: f64 = 1e-12;

struct GcvScore {
    gcv: f64,
}

impl Pencil {
    fn new(phi: &DMatrix<f64>, penalty: &DMatrix<f64>) -> Result<Self> {
        let s = phi.transpose() * phi + penalty;
        let chol = Cholesky::new(s)
            .ok_or_else(|| Error::Numeric("pencil factorization failed".into()))?;
        let l = chol.l();
        let x = l
            .solve_lower_triangular(penalty)
            .ok_or_else(|| Error::Numeric("triangular solve failed".into()))?;
        let mut e = l
            .solve_lower_triangular(&x.transpose())
            .ok_or_else(|| Error::Numeric("triangular solve failed".into()))?;
        let k = e.nrows();
        for i in 0..k {
            for j in (i + 1)..k {
                let avg = 0.5 * (e[(i, j)] + e[(j, i)]);
                e[(i, j)] = avg;
                e[(j, i)] = avg;
            }
        }
        let eig = SymmetricEigen::new(e);
        let sigma = eig.eigenvalues.map(|v| {
            let c = v.clamp(0.0, 1.0);
            if c < SIGMA_ZERO_TOL {
                0.0
            } else {
                c
            }
        });
        let tmat = l
            .transpose()
            .solve_upper_triangular(&eig.eigenvectors)
            .ok_or_else(|| Error::Numeric("triangular solve failed".into()))?;
        let w = tmat.transpose() * phi.transpose();
        Ok(Pencil { sigma, tmat, w })
    }

    fn rotate(&self, y: &DVector<f64>) -> DVector<f64> {
        &self.w * y
    }

    /// GCV through the orthogonalized hat-matrix modes. The design columns
    /// in rotated coordinates are orthogonal with norms sqrt(1 - sigma), so
    ///   RSS(lambda)    = r_perp + sum_i e_i (lambda sigma_i / d_i)^2
    ///   n - trH(lambda) = (n - K') + sum_i lambda sigma_i / d_i
    /// with e_i = z_i^2 / (1 - sigma_i), d_i = 1 + (lambda - 1) sigma_i,
    /// and K' the number of modes inside the column space. Every term is
    /// non-negative, so the interpolation regime cannot cancel to a
    /// spurious zero.
    fn score(&self, lambda: f64, z: &DVector<f64>, yty: f64, n_obs: usize) -> GcvScore {
        let mut energy = 0.0;
        let mut rss_fit = 0.0;
        let mut shrink_sum = 0.0;
        let mut kept = 0usize;
        for (zi, &si) in z.iter().zip(self.sigma.iter()) {
            if si >= 1.0 - SIGMA_ONE_TOL {
                continue;
            }
            kept += 1;
            let e_i = zi * zi / (1.0 - si);
            energy += e_i;
            let d = 1.0 + (lambda - 1.0) * si;
            let s = lambda * si / d;
            rss_fit += e_i * s * s;
            shrink_sum += s;
        }
        let r_perp = (yty - energy).max(0.0);
        let rss = r_perp + rss_fit;
        let denom = (n_obs as f64 - kept as f64).max(0.0) + shrink_sum;
        let gcv = if denom > 1e-8 {
            n_obs as f64 * rss / (denom * denom)
        } else {
            f64::INFINITY
        };
        GcvScore { gcv }
    }

    /// Coefficients at a given lambda; exact penalty-only modes are zeroed
    /// (the minimum-norm convention for directions the data cannot see).
    fn coefficients(&self, lambda: f64, z: &DVector<f64>) -> DVector<f64> {
        let c = DVector::from_iterator(
            z.len(),
            z.iter().zip(self.sigma.iter()).map(|(zi, &si)| {
                if si >= 1.0 - SIGMA_ONE_TOL {
                    0.0
                } else {
                    zi / (1.0 + (lambda - 1.0) * si)
                }
            }),
        );
        &self.tmat * c
    }
}

/// Shared state for smoothing many subjects over the same positions.
pub struct PenalizedSmoother {
    spec: Arc<BasisSpec>,
    positions: Vec<f64>,
    penalty: DMatrix<f64>,
    full_phi: DMatrix<f64>,
    full_pencil: Pencil,
    full_svd: SVD<f64, Dyn, Dyn>,
}

impl PenalizedSmoother {
    pub fn new(spec: Arc<BasisSpec>, positions: &[f64]) -> Result<Self> {
        if positions.len() < 2 {
            return Err(Error::InsufficientData(
                "smoothing needs at least 2 positions".into(),
            ));
        }
        let penalty_nd = spec.penalty_matrix()?;
        let k = spec.k();
        let penalty = DMatrix::from_fn(k, k, |i, j| penalty_nd[(i, j)]);
        let full_phi = design_matrix(&spec, positions)?;
        let full_pencil = Pencil::new(&full_phi, &penalty)?;
        let full_svd = SVD::new(full_phi.clone(), true, true);
        Ok(PenalizedSmoother {
            spec,
            positions: positions.to_vec(),
            penalty,
            full_phi,
            full_pencil,
            full_svd,
        })
    }

    pub fn spec(&self) -> &Arc<BasisSpec> {
        &self.spec
    }

    /// Plain least-squares fit (lambda = 0, minimum-norm on rank deficiency).
    pub fn fit_ls(&self, values: &[f64], observed: &[bool]) -> Result<SmoothCurve> {
        if observed.iter().all(|&o| o) {
            if values.len() != self.positions.len() {
                return Err(Error::Shape("row length does not match positions".into()));
            }
            let n_obs = values.len();
            let y = DVector::from_column_slice(values);
            let eps = svd_rank_eps(&self.full_svd, n_obs, self.spec.k());
            let b = self
                .full_svd
                .solve(&y, eps)
                .map_err(|e| Error::Numeric(format!("SVD solve failed: {e}")))?;
            let b = b.column(0).into_owned();
            let rank = self.full_svd.rank(eps) as f64;
            let rss = (&y - &self.full_phi * &b).norm_squared();
            let denom = n_obs as f64 - rank;
            let gcv = if denom > 1e-8 {
                n_obs as f64 * rss / (denom * denom)
            } else {
                f64::INFINITY
            };
            Ok(SmoothCurve {
                basis: self.spec.clone(),
                coefficients: b.iter().cloned().collect(),
                lambda: 0.0,
                gcv,
                observed_mask: observed.to_vec(),
            })
        } else {
            fit_penalized(values, observed, &self.positions, &self.spec, 0.0)
        }
    }

    /// Penalized fit at a fixed lambda through the pencil factorization,
    /// which separates the penalty null space analytically and stays
    /// accurate at extreme lambda. `lambda = 0` falls back to [`Self::fit_ls`].
    pub fn fit_lambda(&self, values: &[f64], observed: &[bool], lambda: f64) -> Result<SmoothCurve> {
        if !lambda.is_finite() || lambda < 0.0 {
            return Err(Error::Numeric(format!(
                "lambda must be finite and >= 0, got {lambda}"
            )));
        }
        if lambda == 0.0 {
            return self.fit_ls(values, observed);
        }
        let all_observed = observed.iter().all(|&o| o);
        let (pencil, y) = if all_observed {
            if values.len() != self.positions.len() {
                return Err(Error::Shape("row length does not match positions".into()));
            }
            (None, DVector::from_column_slice(values))
        } else {
            let (pos, val) = observed_subset(values, observed, &self.positions)?;
            let phi = design_matrix(&self.spec, &pos)?;
            (Some(Pencil::new(&phi, &self.penalty)?), DVector::from_vec(val))
        };
        let pencil = match &pencil {
            Some(p) => p,
            None => &self.full_pencil,
        };
        let z = pencil.rotate(&y);
        let b = pencil.coefficients(lambda, &z);
        let score = pencil.score(lambda, &z, y.norm_squared(), y.len());
        Ok(SmoothCurve {
            basis: self.spec.clone(),
            coefficients: b.iter().cloned().collect(),
            lambda,
            gcv: score.gcv,
            observed_mask: observed.to_vec(),
        })
    }

    /// Penalized fit with the smoothing parameter chosen by GCV for this
    /// subject.
    pub fn fit_gcv(&self, values: &[f64], observed: &[bool]) -> Result<SmoothCurve> {
        let all_observed = observed.iter().all(|&o| o);
        let (pencil, y) = if all_observed {
            if values.len() != self.positions.len() {
                return Err(Error::Shape("row length does not match positions".into()));
            }
            (None, DVector::from_column_slice(values))
        } else {
            let (pos, val) = observed_subset(values, observed, &self.positions)?;
            let phi = design_matrix(&self.spec, &pos)?;
            (Some(Pencil::new(&phi, &self.penalty)?), DVector::from_vec(val))
        };
        let pencil = match &pencil {
            Some(p) => p,
            None => &self.full_pencil,
        };
        let n_obs = y.len();
        if n_obs < 2 {
            return Err(Error::InsufficientData(format!(
                "need at least 2 observed points, got {n_obs}"
            )));
        }
        let z = pencil.rotate(&y);
        let yty = y.norm_squared();

        let score_at = |log10_lambda: f64| -> f64 {
            pencil
                .score(10f64.powf(log10_lambda), &z, yty, n_obs)
                .gcv
        };

        let lo = GCV_LAMBDA_MIN.log10();
        let hi = GCV_LAMBDA_MAX.log10();
        let n_grid = 58;
        let exps: Vec<f64> = (0..n_grid)
            .map(|i| lo + (hi - lo) * i as f64 / (n_grid - 1) as f64)
            .collect();
        let scores: Vec<f64> = exps.iter().map(|&e| score_at(e)).collect();
        if scores.iter().all(|s| !s.is_finite()) {
            return Err(Error::Gcv("no finite GCV value on the search grid".into()));
        }

        // Refine around every local minimum of the coarse grid, then select
        // the largest lambda whose score ties the overall minimum.
        let mut candidates: Vec<(f64, f64)> = exps
            .iter()
            .zip(&scores)
            .filter(|(_, s)| s.is_finite())
            .map(|(&e, &s)| (e, s))
            .collect();
        for i in 0..n_grid {
            let left_ok = i == 0 || scores[i] <= scores[i - 1];
            let right_ok = i == n_grid - 1 || scores[i] <= scores[i + 1];
            if !(left_ok && right_ok) || !scores[i].is_finite() {
                continue;
            }
            let a = if i == 0 { lo } else { exps[i - 1] };
            let b = if i == n_grid - 1 { hi } else { exps[i + 1] };
            let (e_star, s_star) = golden_min(&score_at, a, b, 60);
            if s_star.is_finite() {
                candidates.push((e_star, s_star));
            }
        }
        let s_best = candidates
            .iter()
            .map(|&(_, s)| s)
            .fold(f64::INFINITY, f64::min);
        let e_star = candidates
            .iter()
            .filter(|&&(_, s)| s <= s_best + GCV_TIE_ABS)
            .map(|&(e, _)| e)
            .fold(f64::NEG_INFINITY, f64::max);
        if !e_star.is_finite() {
            return Err(Error::Gcv("no finite GCV value after refinement".into()));
        }
        let lambda = 10f64.powf(e_star);
        let b = pencil.coefficients(lambda, &z);
        let final_score = pencil.score(lambda, &z, yty, n_obs);
        Ok(SmoothCurve {
            basis: self.spec.clone(),
            coefficients: b.iter().cloned().collect(),
            lambda,
            gcv: final_score.gcv,
            observed_mask: observed.to_vec(),
        })
    }
}

/// Golden-section minimization on [a, b]; returns (x, f(x)).
fn golden_min<F: Fn(f64) -> f64>(f: &F, mut a: f64, mut b: f64, iters: usize) -> (f64, f64) {
    const INVPHI: f64 = 0.618_033_988_749_894_8;
    let mut c = b - INVPHI * (b - a);
    let mut d = a + INVPHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    for _ in 0..iters {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INVPHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INVPHI * (b - a);
            fd = f(d);
        }
    }
    // Prefer the right end on flat objectives (smoother fits).
    let x = if fd <= fc { d } else { c };
    let fx = fd.min(fc);
    (x, fx)
}

/// GCV-selected penalized fit for a single subject (one-shot wrapper).
pub fn gcv_select_lambda(
    values: &[f64],
    observed: &[bool],
    positions: &[f64],
    spec: &Arc<BasisSpec>,
) -> Result<SmoothCurve> {
    let smoother = PenalizedSmoother::new(spec.clone(), positions)?;
    smoother.fit_gcv(values, observed)
}

/// Smooth every subject of a genotype matrix with the given strategy:
/// plain least squares for the fixed-basis strategies, per-subject GCV for
/// the penalized one.
pub fn smooth_matrix(
    g: &GenotypeMatrix,
    strategy: KnotStrategy,
) -> Result<(Vec<SmoothCurve>, Arc<BasisSpec>)> {
    let spec = Arc::new(make_knots(g.positions(), strategy)?);
    let smoother = PenalizedSmoother::new(spec.clone(), g.positions())?;
    let gcv = matches!(strategy, KnotStrategy::PenalizedFull);
    let curves: Result<Vec<SmoothCurve>> = (0..g.n_subjects())
        .into_par_iter()
        .with_min_len(16)
        .map(|i| {
            let (values, observed) = g.row_values(i);
            if gcv {
                smoother.fit_gcv(&values, &observed)
            } else {
                smoother.fit_ls(&values, &observed)
            }
        })
        .collect();
    Ok((curves?, spec))
}

/// Evaluate fitted curves on `m` equally spaced grid points.
pub fn discretize_curves(curves: &[SmoothCurve], m: usize) -> Result<CurveGrid> {
    if m < 2 {
        return Err(Error::Grid(format!("grid needs at least 2 points, got {m}")));
    }
    if curves.is_empty() {
        return Err(Error::Shape("no curves to discretize".into()));
    }
    let grid = equally_spaced(m);
    let shared = curves
        .iter()
        .all(|c| Arc::ptr_eq(&c.basis, &curves[0].basis));
    let mut values = Array2::zeros((curves.len(), m));
    if shared {
        let spec = &curves[0].basis;
        let phi = spec.basis_matrix(&grid)?;
        for (i, curve) in curves.iter().enumerate() {
            for (g_idx, _) in grid.iter().enumerate() {
                let mut acc = 0.0;
                for (j, &b) in curve.coefficients.iter().enumerate() {
                    acc += phi[(g_idx, j)] * b;
                }
                values[(i, g_idx)] = acc;
            }
        }
    } else {
        for (i, curve) in curves.iter().enumerate() {
            for (g_idx, &t) in grid.iter().enumerate() {
                values[(i, g_idx)] = curve.evaluate(t)?;
            }
        }
    }
    CurveGrid::from_values(values)
}
