//! Clamped B-spline bases on [0,1] and the curvature penalty matrix.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Knot placement strategies for smoothing genotype sequences.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KnotStrategy {
    /// Six equally spaced interior knots; heavy smoothing.
    SmallFixed,
    /// A knot at every other variant position; oscillatory fits.
    EveryOtherPosition,
    /// A knot at every variant position, smoothed by a GCV-selected penalty.
    PenalizedFull,
}

impl std::fmt::Display for KnotStrategy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            KnotStrategy::SmallFixed => "small",
            KnotStrategy::EveryOtherPosition => "everyother",
            KnotStrategy::PenalizedFull => "penalized",
        };
        f.write_str(s)
    }
}

impl std::str::FromStr for KnotStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "small" | "small_fixed" => Ok(KnotStrategy::SmallFixed),
            "everyother" | "every_other_position" => Ok(KnotStrategy::EveryOtherPosition),
            "penalized" | "penalized_full" => Ok(KnotStrategy::PenalizedFull),
            other => Err(Error::Config(format!("unknown smoothing strategy: {other:?}"))),
        }
    }
}

/// A clamped B-spline basis on [0,1]: boundary knots repeated `order` times,
/// simple interior knots strictly inside (0,1). The basis has
/// `K = interior_knots + order` functions.
#[derive(Debug, Clone, PartialEq)]
pub struct BasisSpec {
    order: usize,
    interior: Vec<f64>,
    strategy: KnotStrategy,
    /// Full knot vector of length K + order.
    knots: Vec<f64>,
}

pub const DEFAULT_ORDER: usize = 4;
const MAX_ORDER: usize = 8;

impl BasisSpec {
    pub fn new(order: usize, interior: Vec<f64>, strategy: KnotStrategy) -> Result<Self> {
        if !(2..=MAX_ORDER).contains(&order) {
            return Err(Error::Basis(format!(
                "order must be in 2..={MAX_ORDER}, got {order}"
            )));
        }
        for w in interior.windows(2) {
            if w[1] <= w[0] {
                return Err(Error::Basis("interior knots must be strictly increasing".into()));
            }
        }
        if interior.iter().any(|&k| !(k > 0.0 && k < 1.0)) {
            return Err(Error::Basis("interior knots must lie strictly inside (0,1)".into()));
        }
        let mut knots = vec![0.0; order];
        knots.extend_from_slice(&interior);
        knots.extend(std::iter::repeat(1.0).take(order));
        Ok(BasisSpec {
            order,
            interior,
            strategy,
            knots,
        })
    }

    /// Number of basis functions.
    pub fn k(&self) -> usize {
        self.interior.len() + self.order
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn interior_knots(&self) -> &[f64] {
        &self.interior
    }

    pub fn strategy(&self) -> KnotStrategy {
        self.strategy
    }

    pub fn knot_vector(&self) -> &[f64] {
        &self.knots
    }

    /// Index of the knot span containing `t` (right-closed at t = 1).
    fn span(&self, t: f64) -> usize {
        let k = self.k();
        if t >= 1.0 {
            return k - 1;
        }
        let mut lo = self.order - 1;
        let mut hi = k - 1;
        while lo < hi {
            let mid = (lo + hi + 1) / 2;
            if self.knots[mid] <= t {
                lo = mid;
            } else {
                hi = mid - 1;
            }
        }
        lo
    }

    /// The `order` non-zero basis values at `t`, returned with the span so
    /// that value `r` belongs to basis function `span - order + 1 + r`.
    pub fn nonzero_basis(&self, t: f64) -> (usize, Vec<f64>) {
        let span = self.span(t);
        let p = self.order - 1;
        let u = &self.knots;
        let mut n = vec![0.0; self.order];
        let mut left = vec![0.0; self.order];
        let mut right = vec![0.0; self.order];
        n[0] = 1.0;
        for j in 1..=p {
            left[j] = t - u[span + 1 - j];
            right[j] = u[span + j] - t;
            let mut saved = 0.0;
            for r in 0..j {
                let den = right[r + 1] + left[j - r];
                let temp = if den != 0.0 { n[r] / den } else { 0.0 };
                n[r] = saved + right[r + 1] * temp;
                saved = left[j - r] * temp;
            }
            n[j] = saved;
        }
        (span, n)
    }

    /// All K basis values at `t`.
    pub fn basis_row(&self, t: f64) -> Result<Vec<f64>> {
        if !(0.0..=1.0).contains(&t) {
            return Err(Error::Domain(format!("evaluation point {t} outside [0,1]")));
        }
        let (span, vals) = self.nonzero_basis(t);
        let mut row = vec![0.0; self.k()];
        let first = span + 1 - self.order;
        row[first..=span].copy_from_slice(&vals);
        Ok(row)
    }

    /// Basis matrix at the given evaluation points (len(points) x K rows
    /// summing to one).
    pub fn basis_matrix(&self, points: &[f64]) -> Result<Array2<f64>> {
        let k = self.k();
        let mut out = Array2::zeros((points.len(), k));
        for (i, &t) in points.iter().enumerate() {
            let row = self.basis_row(t)?;
            for (j, v) in row.into_iter().enumerate() {
                out[(i, j)] = v;
            }
        }
        Ok(out)
    }

    /// All basis values of the given order on this knot vector, via the
    /// plain Cox–de Boor recursion. Used for derivative evaluation.
    fn all_basis_of_order(&self, t: f64, ord: usize) -> Vec<f64> {
        let u = &self.knots;
        let m = u.len();
        let last_span = self.k() - 1;
        let mut b: Vec<f64> = (0..m - 1)
            .map(|i| {
                let inside = u[i] <= t && t < u[i + 1];
                let at_end = t >= 1.0 && i == last_span;
                if inside || at_end {
                    1.0
                } else {
                    0.0
                }
            })
            .collect();
        for k in 2..=ord {
            let rows = m - k;
            let mut nb = vec![0.0; rows];
            for i in 0..rows {
                let d1 = u[i + k - 1] - u[i];
                let d2 = u[i + k] - u[i + 1];
                let mut v = 0.0;
                if d1 > 0.0 {
                    v += (t - u[i]) / d1 * b[i];
                }
                if d2 > 0.0 {
                    v += (u[i + k] - t) / d2 * b[i + 1];
                }
                nb[i] = v;
            }
            b = nb;
        }
        b
    }

    /// Derivative raising step: maps values associated with order `ord - 1`
    /// to derivatives of the order-`ord` functions.
    fn raise_derivative(&self, lower: &[f64], ord: usize) -> Vec<f64> {
        let u = &self.knots;
        let rows = u.len() - ord;
        let mut d = vec![0.0; rows];
        for i in 0..rows {
            let d1 = u[i + ord - 1] - u[i];
            let d2 = u[i + ord] - u[i + 1];
            let mut v = 0.0;
            if d1 > 0.0 {
                v += lower[i] / d1;
            }
            if d2 > 0.0 {
                v -= lower[i + 1] / d2;
            }
            d[i] = (ord as f64 - 1.0) * v;
        }
        d
    }

    /// First derivatives of all K basis functions at `t`.
    pub fn basis_first_derivs(&self, t: f64) -> Result<Vec<f64>> {
        if !(0.0..=1.0).contains(&t) {
            return Err(Error::Domain(format!("evaluation point {t} outside [0,1]")));
        }
        let lower = self.all_basis_of_order(t, self.order - 1);
        Ok(self.raise_derivative(&lower, self.order))
    }

    /// Second derivatives of all K basis functions at `t` (order >= 3).
    pub fn basis_second_derivs(&self, t: f64) -> Result<Vec<f64>> {
        if self.order < 3 {
            return Err(Error::Basis(format!(
                "second derivatives need order >= 3, got {}",
                self.order
            )));
        }
        if !(0.0..=1.0).contains(&t) {
            return Err(Error::Domain(format!("evaluation point {t} outside [0,1]")));
        }
        let low = self.all_basis_of_order(t, self.order - 2);
        let first_of_lower = self.raise_derivative(&low, self.order - 1);
        Ok(self.raise_derivative(&first_of_lower, self.order))
    }

    /// Curvature penalty `P[j][k] = integral of B_j'' B_k''` over [0,1],
    /// by per-span Gauss–Legendre quadrature (exact: the integrand is a
    /// polynomial on every span).
    pub fn penalty_matrix(&self) -> Result<Array2<f64>> {
        if self.order < 3 {
            return Err(Error::Basis(format!(
                "penalty needs order >= 3, got {}",
                self.order
            )));
        }
        let k = self.k();
        let mut p = Array2::zeros((k, k));
        let mut breaks = vec![0.0];
        breaks.extend_from_slice(&self.interior);
        breaks.push(1.0);
        for w in breaks.windows(2) {
            let (a, b) = (w[0], w[1]);
            if b <= a {
                continue;
            }
            let half = 0.5 * (b - a);
            let mid = 0.5 * (a + b);
            for (&node, &weight) in GL8_NODES.iter().zip(GL8_WEIGHTS.iter()) {
                let t = mid + half * node;
                let d2 = self.basis_second_derivs(t)?;
                let span = self.span(t);
                let first = span + 1 - self.order;
                let w_t = weight * half;
                for j in first..=span {
                    for l in first..=span {
                        p[(j, l)] += w_t * d2[j] * d2[l];
                    }
                }
            }
        }
        // Symmetrize away quadrature round-off.
        for j in 0..k {
            for l in (j + 1)..k {
                let avg = 0.5 * (p[(j, l)] + p[(l, j)]);
                p[(j, l)] = avg;
                p[(l, j)] = avg;
            }
        }
        Ok(p)
    }

    /// Integral of the squared second derivative of `sum_k b_k B_k`, by the
    /// same per-span quadrature as the penalty matrix. Evaluating the sum
    /// before squaring keeps the result non-negative even when the
    /// quadratic form `b' P b` would cancel to noise.
    pub fn integrate_curvature_sq(&self, coefficients: &[f64]) -> Result<f64> {
        if coefficients.len() != self.k() {
            return Err(Error::Shape(format!(
                "expected {} coefficients, got {}",
                self.k(),
                coefficients.len()
            )));
        }
        let mut breaks = vec![0.0];
        breaks.extend_from_slice(&self.interior);
        breaks.push(1.0);
        let mut acc = 0.0;
        for w in breaks.windows(2) {
            let (a, b) = (w[0], w[1]);
            if b <= a {
                continue;
            }
            let half = 0.5 * (b - a);
            let mid = 0.5 * (a + b);
            for (&node, &weight) in GL8_NODES.iter().zip(GL8_WEIGHTS.iter()) {
                let t = mid + half * node;
                let d2 = self.basis_second_derivs(t)?;
                let span = self.span(t);
                let first = span + 1 - self.order;
                let mut ypp = 0.0;
                for j in first..=span {
                    ypp += coefficients[j] * d2[j];
                }
                acc += weight * half * ypp * ypp;
            }
        }
        Ok(acc)
    }

    /// Greville abscissae: coefficient locations at which the basis
    /// reproduces affine functions (`sum_k xi_k B_k(t) = t`).
    pub fn greville_abscissae(&self) -> Vec<f64> {
        let p = self.order - 1;
        (0..self.k())
            .map(|j| {
                let s: f64 = self.knots[j + 1..=j + p].iter().sum();
                s / p as f64
            })
            .collect()
    }
}

/// 8-point Gauss–Legendre nodes/weights on [-1, 1]; exact for polynomials
/// up to degree 15, which covers products of second derivatives for every
/// supported order.
const GL8_NODES: [f64; 8] = [
    -0.960_289_856_497_536_2,
    -0.796_666_477_413_626_7,
    -0.525_532_409_916_329_0,
    -0.183_434_642_495_649_8,
    0.183_434_642_495_649_8,
    0.525_532_409_916_329_0,
    0.796_666_477_413_626_7,
    0.960_289_856_497_536_2,
];
const GL8_WEIGHTS: [f64; 8] = [
    0.101_228_536_290_376_26,
    0.222_381_034_453_374_47,
    0.313_706_645_877_887_3,
    0.362_683_783_378_362_0,
    0.362_683_783_378_362_0,
    0.313_706_645_877_887_3,
    0.222_381_034_453_374_47,
    0.101_228_536_290_376_26,
];

/// Build the knot set for a strategy from normalized variant positions
/// (cubic splines, order 4).
pub fn make_knots(positions: &[f64], strategy: KnotStrategy) -> Result<BasisSpec> {
    make_knots_with_order(positions, strategy, DEFAULT_ORDER)
}

/// As [`make_knots`] with an explicit polynomial order.
pub fn make_knots_with_order(
    positions: &[f64],
    strategy: KnotStrategy,
    order: usize,
) -> Result<BasisSpec> {
    for w in positions.windows(2) {
        if w[1] <= w[0] {
            return Err(Error::Basis("positions must be strictly increasing".into()));
        }
    }
    if positions.len() < order {
        return Err(Error::Basis(format!(
            "need at least {order} distinct positions, got {}",
            positions.len()
        )));
    }
    let interior = match strategy {
        KnotStrategy::SmallFixed => (1..=6).map(|j| j as f64 / 7.0).collect(),
        KnotStrategy::EveryOtherPosition => {
            let picked: Vec<f64> = positions.iter().copied().skip(1).step_by(2).collect();
            nudge_boundary_knots(picked)
        }
        KnotStrategy::PenalizedFull => nudge_boundary_knots(positions.to_vec()),
    };
    BasisSpec::new(order, interior, strategy)
}

/// Candidate knots equal to a boundary are shoved inside by an eighth of
/// the gap to their nearest neighbor (the convention of R's `bs`), so the
/// interior-knot invariant holds while keeping one knot per position.
fn nudge_boundary_knots(mut knots: Vec<f64>) -> Vec<f64> {
    let n = knots.len();
    if n >= 2 {
        if knots[0] <= 0.0 {
            knots[0] = knots[1] / 8.0;
        }
        if knots[n - 1] >= 1.0 {
            knots[n - 1] = 1.0 - (1.0 - knots[n - 2]) / 8.0;
        }
    }
    knots
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    fn uniform_positions(t: usize) -> Vec<f64> {
        (0..t).map(|j| j as f64 / (t - 1) as f64).collect()
    }

    #[test]
    fn small_fixed_has_six_knots() {
        let spec = make_knots(&uniform_positions(30), KnotStrategy::SmallFixed).unwrap();
        assert_eq!(spec.interior_knots().len(), 6);
        assert_eq!(spec.k(), 10);
    }

    #[test]
    fn every_other_is_about_half() {
        let spec = make_knots(&uniform_positions(81), KnotStrategy::EveryOtherPosition).unwrap();
        let n = spec.interior_knots().len();
        assert!((38..=42).contains(&n), "got {n} knots");
    }

    #[test]
    fn penalized_full_dimension_arithmetic() {
        let spec = make_knots(
            &[0.0, 0.5, 1.0],
            KnotStrategy::PenalizedFull,
        );
        // Three positions with order 4 is below the position minimum.
        assert!(spec.is_err());
        let spec =
            make_knots_with_order(&[0.0, 0.5, 1.0], KnotStrategy::PenalizedFull, 3).unwrap();
        assert_eq!(spec.k(), 3 + 3);
        let spec = make_knots(&uniform_positions(10), KnotStrategy::PenalizedFull).unwrap();
        assert_eq!(spec.k(), 10 + 4);
        // All interior knots strictly inside.
        assert!(spec
            .interior_knots()
            .iter()
            .all(|&k| k > 0.0 && k < 1.0));
    }

    #[test]
    fn rejects_too_few_positions() {
        assert!(matches!(
            make_knots(&[0.0, 0.5, 1.0], KnotStrategy::SmallFixed),
            Err(Error::Basis(_))
        ));
    }

    #[test]
    fn partition_of_unity() {
        let spec = make_knots(&uniform_positions(15), KnotStrategy::PenalizedFull).unwrap();
        for i in 0..=50 {
            let t = i as f64 / 50.0;
            let row = spec.basis_row(t).unwrap();
            let sum: f64 = row.iter().sum();
            assert_abs_diff_eq!(sum, 1.0, epsilon = 1e-10);
        }
    }

    #[test]
    fn rejects_out_of_domain_points() {
        let spec = make_knots(&uniform_positions(10), KnotStrategy::SmallFixed).unwrap();
        assert!(matches!(spec.basis_matrix(&[0.2, 1.2]), Err(Error::Domain(_))));
        assert!(matches!(spec.basis_row(-0.1), Err(Error::Domain(_))));
    }

    #[test]
    fn continuity_across_interior_knot() {
        let spec = make_knots(&uniform_positions(12), KnotStrategy::PenalizedFull).unwrap();
        let knot = spec.interior_knots()[4];
        let eps = 1e-7;
        let before = spec.basis_row(knot - eps).unwrap();
        let after = spec.basis_row(knot + eps).unwrap();
        let d1_before = spec.basis_first_derivs(knot - eps).unwrap();
        let d1_after = spec.basis_first_derivs(knot + eps).unwrap();
        let d2_before = spec.basis_second_derivs(knot - eps).unwrap();
        let d2_after = spec.basis_second_derivs(knot + eps).unwrap();
        for j in 0..spec.k() {
            assert_abs_diff_eq!(before[j], after[j], epsilon = 1e-5);
            assert_abs_diff_eq!(d1_before[j], d1_after[j], epsilon = 1e-3);
            // Second derivative of a cubic is piecewise linear; continuity
            // at a simple knot bounds the jump by the slope times 2*eps.
            assert_abs_diff_eq!(d2_before[j], d2_after[j], epsilon = 1.0);
        }
    }

    #[test]
    fn penalty_is_symmetric_psd_with_affine_null_space() {
        // Plain uniform interior knots keep the penalty scale moderate so
        // the 1e-10 absolute null-space tolerance is meaningful.
        let interior: Vec<f64> = (1..10).map(|j| j as f64 / 10.0).collect();
        let spec = BasisSpec::new(4, interior, KnotStrategy::PenalizedFull).unwrap();
        let p = spec.penalty_matrix().unwrap();
        let k = spec.k();
        for j in 0..k {
            for l in 0..k {
                assert_abs_diff_eq!(p[(j, l)], p[(l, j)], epsilon = 1e-10);
            }
        }
        let pm = nalgebra::DMatrix::from_fn(k, k, |i, j| p[(i, j)]);
        let eig = nalgebra::SymmetricEigen::new(pm);
        for &ev in eig.eigenvalues.iter() {
            assert!(ev > -1e-10, "negative eigenvalue {ev}");
        }
        // Affine functions have zero curvature: b_k = a + c*xi_k.
        let xi = spec.greville_abscissae();
        let b: Vec<f64> = xi.iter().map(|&x| 0.7 - 1.3 * x).collect();
        let mut quad = 0.0;
        for j in 0..k {
            for l in 0..k {
                quad += b[j] * p[(j, l)] * b[l];
            }
        }
        assert_abs_diff_eq!(quad, 0.0, epsilon = 1e-10);
        assert_abs_diff_eq!(spec.integrate_curvature_sq(&b).unwrap(), 0.0, epsilon = 1e-12);
        // A coefficient vector with curvature has positive roughness.
        let b: Vec<f64> = xi.iter().map(|&x| x * x).collect();
        let mut quad = 0.0;
        for j in 0..k {
            for l in 0..k {
                quad += b[j] * p[(j, l)] * b[l];
            }
        }
        assert!(quad > 1e-6);
    }

    #[test]
    fn affine_null_space_holds_for_nudged_knots() {
        // The boundary-nudged penalized basis has a much larger penalty
        // scale; the quadrature form of the curvature integral still
        // vanishes on affine coefficient vectors.
        let spec = make_knots(&uniform_positions(9), KnotStrategy::PenalizedFull).unwrap();
        let xi = spec.greville_abscissae();
        let b: Vec<f64> = xi.iter().map(|&x| 0.7 - 1.3 * x).collect();
        assert_abs_diff_eq!(spec.integrate_curvature_sq(&b).unwrap(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn greville_reproduces_affine() {
        let spec = make_knots(&uniform_positions(11), KnotStrategy::PenalizedFull).unwrap();
        let xi = spec.greville_abscissae();
        for i in 0..=20 {
            let t = i as f64 / 20.0;
            let row = spec.basis_row(t).unwrap();
            let val: f64 = row.iter().zip(&xi).map(|(b, x)| b * (2.0 * x - 0.5)).sum();
            assert_relative_eq!(val, 2.0 * t - 0.5, epsilon = 1e-10);
        }
    }
}
