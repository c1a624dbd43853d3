//! Linearization along the certified orbit.
//!
//! At an orbit point with `f[t*_{n+1}, t*_n] = 0` and long flights, the impact
//! map is approximated by the generalized standard map, whose Jacobian is
//!
//! ```text
//! A_n = | 1            2/g             |
//!       | 2 f̈(t*_n)    1 + (4/g) f̈(t*_n) |
//! ```
//!
//! Along an N-cycle the phases repeat, so the N-step linearization is the
//! constant matrix `A = A_0 A_{N-1} ... A_1`; hyperbolicity is `|tr A| > 2`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::orbit::{build_n2_schedule, OrbitSchedule};
use crate::racket::{family_coefficients, true_max_derivative, FamilyParams, TrigPoly2};
use crate::real::Real;

/// Row-major real 2×2 matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Mat2<R = f64> {
    pub m11: R,
    pub m12: R,
    pub m21: R,
    pub m22: R,
}

impl<R: Real> Mat2<R> {
    pub fn new(m11: R, m12: R, m21: R, m22: R) -> Self {
        Mat2 { m11, m12, m21, m22 }
    }

    pub fn identity() -> Self {
        Mat2::diag(R::one(), R::one())
    }

    pub fn diag(a: R, b: R) -> Self {
        Mat2::new(a, R::zero(), R::zero(), b)
    }

    pub fn mul(&self, rhs: &Mat2<R>) -> Mat2<R> {
        let c = |a: &R, b: &R, c: &R, d: &R| a.clone() * b.clone() + c.clone() * d.clone();
        Mat2::new(
            c(&self.m11, &rhs.m11, &self.m12, &rhs.m21),
            c(&self.m11, &rhs.m12, &self.m12, &rhs.m22),
            c(&self.m21, &rhs.m11, &self.m22, &rhs.m21),
            c(&self.m21, &rhs.m12, &self.m22, &rhs.m22),
        )
    }

    pub fn apply(&self, x: &[R; 2]) -> [R; 2] {
        [
            self.m11.clone() * x[0].clone() + self.m12.clone() * x[1].clone(),
            self.m21.clone() * x[0].clone() + self.m22.clone() * x[1].clone(),
        ]
    }

    pub fn det(&self) -> R {
        self.m11.clone() * self.m22.clone() - self.m12.clone() * self.m21.clone()
    }

    pub fn trace(&self) -> R {
        self.m11.clone() + self.m22.clone()
    }

    pub fn transpose(&self) -> Mat2<R> {
        Mat2::new(
            self.m11.clone(),
            self.m21.clone(),
            self.m12.clone(),
            self.m22.clone(),
        )
    }

    pub fn inverse(&self) -> Result<Mat2<R>> {
        let det = self.det();
        if det == R::zero() || !det.is_finite() {
            return Err(Error::PreconditionFailed(format!(
                "singular matrix (det = {})",
                det.to_f64()
            )));
        }
        Ok(Mat2::new(
            self.m22.clone() / det.clone(),
            -self.m12.clone() / det.clone(),
            -self.m21.clone() / det.clone(),
            self.m11.clone() / det,
        ))
    }

    pub fn entries(&self) -> [R; 4] {
        [
            self.m11.clone(),
            self.m12.clone(),
            self.m21.clone(),
            self.m22.clone(),
        ]
    }

    pub fn to_f64(&self) -> Mat2<f64> {
        Mat2::new(
            self.m11.to_f64(),
            self.m12.to_f64(),
            self.m21.to_f64(),
            self.m22.to_f64(),
        )
    }
}

impl Mat2<f64> {
    pub fn max_abs_diff(&self, other: &Mat2<f64>) -> f64 {
        self.entries()
            .iter()
            .zip(other.entries())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn lift<S: Real>(&self) -> Mat2<S> {
        Mat2::new(
            S::from_f64(self.m11),
            S::from_f64(self.m12),
            S::from_f64(self.m21),
            S::from_f64(self.m22),
        )
    }
}

/// `A_n` at an orbit time `t`.
pub fn impact_matrix<R: Real>(f: &TrigPoly2<R>, t: &R, g: &R) -> Mat2<R> {
    let acc = f.second(t);
    let two_over_g = R::from_f64(2.0) / g.clone();
    Mat2::new(
        R::one(),
        two_over_g.clone(),
        acc.clone() * 2.0,
        two_over_g * acc * 2.0 + 1.0,
    )
}

/// `A = A_0 A_{N-1} ... A_1`, the linearization of N steps starting at a
/// cycle point `t*_0`.
pub fn cycle_matrix_at<R: Real>(f: &TrigPoly2<R>, sched: &OrbitSchedule<R>, g: &R) -> Mat2<R> {
    let mats: Vec<Mat2<R>> = sched.t_star.iter().map(|t| impact_matrix(f, t, g)).collect();
    let mut prod = mats[0].clone();
    for m in mats[1..].iter().rev() {
        prod = prod.mul(m);
    }
    prod
}

/// `A_{N-1} ... A_1 A_0`; similar to [`cycle_matrix_at`], with the same trace.
pub fn cycle_matrix_reversed<R: Real>(
    f: &TrigPoly2<R>,
    sched: &OrbitSchedule<R>,
    g: &R,
) -> Mat2<R> {
    let mut prod = Mat2::identity();
    for t in &sched.t_star {
        prod = impact_matrix(f, t, g).mul(&prod);
    }
    prod
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TraceCheck {
    pub trace: f64,
    pub hyperbolic: bool,
}

/// Unimodular matrices further than this from `det = 1` are rejected.
pub const UNIMODULAR_TOL: f64 = 1e-9;

/// `|tr A| > 2` for a unimodular `A`.
pub fn trace_criterion<R: Real>(a: &Mat2<R>) -> Result<TraceCheck> {
    let det = a.det().to_f64();
    if !((det - 1.0).abs() <= UNIMODULAR_TOL) {
        return Err(Error::NotUnimodular { det });
    }
    let trace = a.trace().to_f64();
    Ok(TraceCheck {
        trace,
        hyperbolic: trace.abs() > 2.0,
    })
}

/// Eigen-decomposition of a hyperbolic unimodular 2×2 matrix.
///
/// `to_eigen` is the change of basis `P` with `P A P⁻¹ = diag(stable, unstable)`;
/// its inverse `from_eigen` has the unit eigenvectors as columns, each with a
/// non-negative first component.
#[derive(Debug, Clone)]
pub struct SpectralSplit<R = f64> {
    pub stable: R,
    pub unstable: R,
    pub stable_vector: [R; 2],
    pub unstable_vector: [R; 2],
    pub to_eigen: Mat2<R>,
    pub from_eigen: Mat2<R>,
}

impl<R: Real> SpectralSplit<R> {
    /// `B = diag(λ_s, λ_u)`.
    pub fn block(&self) -> Mat2<R> {
        Mat2::diag(self.stable.clone(), self.unstable.clone())
    }

    /// `U_1 = diag(λ_s, 0)`.
    pub fn stable_part(&self) -> Mat2<R> {
        Mat2::diag(self.stable.clone(), R::zero())
    }

    /// `U_2 = diag(0, λ_u)`.
    pub fn unstable_part(&self) -> Mat2<R> {
        Mat2::diag(R::zero(), self.unstable.clone())
    }

    /// `P⁻¹ B P`, which reproduces the decomposed matrix.
    pub fn reconstruct(&self) -> Mat2<R> {
        self.from_eigen.mul(&self.block()).mul(&self.to_eigen)
    }
}

/// Margin above 2 required of `|tr A|` by [`spectral_split`].
pub const HYPERBOLIC_MARGIN: f64 = 1e-12;

pub fn spectral_split<R: Real>(a: &Mat2<R>) -> Result<SpectralSplit<R>> {
    let trace = a.trace();
    if !(trace.abs() > R::from_f64(2.0 + HYPERBOLIC_MARGIN)) {
        return Err(Error::NotHyperbolic {
            trace: trace.to_f64(),
        });
    }
    let det = a.det();
    if !((det.to_f64() - 1.0).abs() <= UNIMODULAR_TOL) {
        return Err(Error::NotUnimodular { det: det.to_f64() });
    }
    let disc = (trace.square() - det.clone() * 4.0).sqrt();
    // Add like signs to avoid cancellation in the large root.
    let big = if trace > R::zero() {
        (trace + disc) / 2.0
    } else {
        (trace - disc) / 2.0
    };
    let small = det / big.clone();
    let stable_vector = eigenvector(a, &small);
    let unstable_vector = eigenvector(a, &big);
    let from_eigen = Mat2::new(
        stable_vector[0].clone(),
        unstable_vector[0].clone(),
        stable_vector[1].clone(),
        unstable_vector[1].clone(),
    );
    let to_eigen = from_eigen.inverse()?;
    Ok(SpectralSplit {
        stable: small,
        unstable: big,
        stable_vector,
        unstable_vector,
        to_eigen,
        from_eigen,
    })
}

fn eigenvector<R: Real>(a: &Mat2<R>, lambda: &R) -> [R; 2] {
    // Either row of (A - λI) gives a null vector; take the better conditioned one.
    let row1 = [a.m12.clone(), lambda.clone() - a.m11.clone()];
    let row2 = [lambda.clone() - a.m22.clone(), a.m21.clone()];
    let n1 = row1[0].square() + row1[1].square();
    let n2 = row2[0].square() + row2[1].square();
    let (v, n) = if n1 >= n2 { (row1, n1) } else { (row2, n2) };
    let n = n.sqrt();
    let mut e = [v[0].clone() / n.clone(), v[1].clone() / n];
    if e[0] < R::zero() || (e[0] == R::zero() && e[1] < R::zero()) {
        e = [-e[0].clone(), -e[1].clone()];
    }
    e
}

/// One row of [`scan_family`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScanRow {
    pub s: f64,
    /// `max ṗ_s / g`.
    pub max_pdot_over_g: f64,
    /// `p̈_s(t*_0) / g`.
    pub pt0: f64,
    /// `p̈_s(t*_1) / g`.
    pub pt1: f64,
    pub trace: f64,
    pub hyperbolic: bool,
}

impl ScanRow {
    pub fn below_threshold(&self) -> bool {
        self.max_pdot_over_g < 0.25
    }

    /// The sufficient conditions used to build the interval of hyperbolic
    /// family members: `max ṗ_s < g/4`, `p̈_s(t*_0) > 0`, `p̈_s(t*_1) > 0`.
    pub fn member(&self) -> bool {
        self.below_threshold() && self.pt0 > 0.0 && self.pt1 > 0.0
    }
}

/// Threshold, curvature and trace data of `p_s` along a grid of `s`.
pub fn scan_family(s_grid: &[f64], g: f64, k: u64) -> Result<Vec<ScanRow>> {
    if s_grid.is_empty() {
        return Err(Error::invalid("s_grid", "must not be empty"));
    }
    let sched = build_n2_schedule::<f64>(&g, k)?;
    s_grid
        .iter()
        .map(|&s| {
            let p = family_coefficients::<f64>(&FamilyParams::new(s, g)?)?;
            let a = cycle_matrix_at(&p, &sched, &g);
            let check = trace_criterion(&a)?;
            Ok(ScanRow {
                s,
                max_pdot_over_g: true_max_derivative(&p) / g,
                pt0: p.second(&sched.t_star[0]) / g,
                pt1: p.second(&sched.t_star[1]) / g,
                trace: check.trace,
                hyperbolic: check.hyperbolic,
            })
        })
        .collect()
}

/// Trace of the family cycle matrix in closed form:
/// `2 + 8 (q0 + q1 + 2 q0 q1)` with `q_i = p̈_s(t*_i) / g`.
pub fn family_trace_formula(pt0: f64, pt1: f64) -> f64 {
    2.0 + 8.0 * (pt0 + pt1 + 2.0 * pt0 * pt1)
}

/// `[lo, hi]` spanned by the run of consecutive [`ScanRow::member`] rows that
/// contains the row closest to `anchor`.
pub fn certified_interval(rows: &[ScanRow], anchor: f64) -> Option<(f64, f64)> {
    let (idx, _) = rows.iter().enumerate().min_by(|(_, a), (_, b)| {
        (a.s - anchor)
            .abs()
            .partial_cmp(&(b.s - anchor).abs())
            .unwrap_or(std::cmp::Ordering::Equal)
    })?;
    if !rows[idx].member() {
        return None;
    }
    let mut lo = idx;
    while lo > 0 && rows[lo - 1].member() {
        lo -= 1;
    }
    let mut hi = idx;
    while hi + 1 < rows.len() && rows[hi + 1].member() {
        hi += 1;
    }
    Some((rows[lo].s, rows[hi].s))
}

/// `n` evenly spaced points from `lo` to `hi` inclusive; the midpoint when `n` is one.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![0.5 * (lo + hi)],
        _ => (0..n)
            .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::racket::OPTIMAL_S;

    fn family(s: f64) -> TrigPoly2 {
        family_coefficients(&FamilyParams { s, g: 1.0 }).unwrap()
    }

    #[test]
    fn shear_case_is_parabolic() {
        let f = TrigPoly2::<f64>::zero();
        let sched = build_n2_schedule::<f64>(&1.0, 20).unwrap();
        let a = cycle_matrix_at(&f, &sched, &1.0);
        assert_eq!(a, Mat2::new(1.0, 4.0, 0.0, 1.0));
        let check = trace_criterion(&a).unwrap();
        assert_eq!(check.trace, 2.0);
        assert!(!check.hyperbolic);
        assert!(matches!(spectral_split(&a), Err(Error::NotHyperbolic { .. })));
    }

    #[test]
    fn identity_and_rotation() {
        let id = Mat2::<f64>::identity();
        assert_eq!(trace_criterion(&id).unwrap(), TraceCheck { trace: 2.0, hyperbolic: false });
        let rot = Mat2::new(0.0, 1.0, -1.0, 0.0);
        assert_eq!(trace_criterion(&rot).unwrap(), TraceCheck { trace: 0.0, hyperbolic: false });
        assert!(matches!(
            trace_criterion(&Mat2::new(2.0, 0.0, 0.0, 2.0)),
            Err(Error::NotUnimodular { .. })
        ));
    }

    #[test]
    fn trace_three_split() {
        let a = Mat2::new(2.0, 1.0, 1.0, 1.0);
        let split = spectral_split(&a).unwrap();
        let r5 = 5f64.sqrt();
        assert!((split.stable - (3.0 - r5) / 2.0).abs() < 1e-15);
        assert!((split.unstable - (3.0 + r5) / 2.0).abs() < 1e-15);
        assert!(split.reconstruct().max_abs_diff(&a) < 1e-14);
        let diag = split.to_eigen.mul(&a).mul(&split.from_eigen);
        assert!(diag.max_abs_diff(&split.block()) < 1e-14);
    }

    #[test]
    fn family_trace_at_optimum() {
        let f = family(OPTIMAL_S);
        let sched = build_n2_schedule::<f64>(&1.0, 20).unwrap();
        let a = cycle_matrix_at(&f, &sched, &1.0);
        let pt0 = f.second(&0.0);
        let pt1 = f.second(&(5.0 / 12.0));
        assert!((pt0 + pt1 + 2.0 * pt0 * pt1 - 1.186500669840734).abs() < 1e-9);
        assert!((a.trace() - family_trace_formula(pt0, pt1)).abs() < 1e-12);
        let rev = cycle_matrix_reversed(&f, &sched, &1.0);
        assert!((rev.trace() - a.trace()).abs() < 1e-12);
        assert!(rev.max_abs_diff(&a) > 1e-3, "orderings differ as matrices");
        let a0 = impact_matrix(&f, &sched.t_star[0], &1.0);
        assert!(a0.inverse().unwrap().mul(&a).mul(&a0).max_abs_diff(&rev) < 1e-10);
    }

    #[test]
    fn scan_flags_membership() {
        let rows = scan_family(&[0.006, OPTIMAL_S], 1.0, 20).unwrap();
        assert!(rows[0].pt0 > 0.0 && rows[0].pt1 > 0.0 && rows[0].member());
        assert!(rows[1].hyperbolic && rows[1].trace > 2.0);
        assert!(scan_family(&[], 1.0, 20).is_err());
    }

    #[test]
    fn interval_around_anchor() {
        let grid = linspace(-0.05, 0.05, 201);
        let rows = scan_family(&grid, 1.0, 20).unwrap();
        let (lo, hi) = certified_interval(&rows, 0.006).unwrap();
        assert!(lo < 0.006 && 0.006 < hi);
        assert!(rows.iter().filter(|r| r.s >= lo && r.s <= hi).all(ScanRow::member));
    }

    #[test]
    fn linspace_endpoints() {
        assert_eq!(linspace(0.0, 1.0, 3), vec![0.0, 0.5, 1.0]);
        assert_eq!(linspace(2.0, 3.0, 1), vec![2.5]);
        assert!(linspace(0.0, 1.0, 0).is_empty());
    }
}
