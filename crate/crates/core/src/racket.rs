//! Racket motions: degree-2 trigonometric polynomials of period one, the
//! one-parameter family `p_s` that carries the period-2 unbounded orbit, and
//! the bound `p̄(s)` on `max ṗ_s / g` together with its minimizer.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::real::Real;

/// `a1 sin(2πt) + b1 cos(2πt) + a2 sin(4πt) + b2 cos(4πt)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrigPoly2<R = f64> {
    pub a1: R,
    pub b1: R,
    pub a2: R,
    pub b2: R,
}

/// Order of the derivative requested from [`TrigPoly2::eval`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Derivative {
    Value = 0,
    First = 1,
    Second = 2,
    Third = 3,
}

impl TryFrom<u8> for Derivative {
    type Error = Error;

    fn try_from(order: u8) -> Result<Self> {
        match order {
            0 => Ok(Derivative::Value),
            1 => Ok(Derivative::First),
            2 => Ok(Derivative::Second),
            3 => Ok(Derivative::Third),
            _ => Err(Error::invalid("order", format!("{order} is not in 0..=3"))),
        }
    }
}

/// Value and first three derivatives at one time.
#[derive(Debug, Clone)]
pub struct Jet<R> {
    pub value: R,
    pub first: R,
    pub second: R,
    pub third: R,
}

/// `sin` and `cos` of both harmonics at `t`, after reducing `t` modulo one.
struct Harmonics<R> {
    s1: R,
    c1: R,
    s2: R,
    c2: R,
}

impl<R: Real> Harmonics<R> {
    fn at(t: &R) -> Self {
        let phase = t.clone() - t.floor();
        let (s1, c1) = (phase * R::pi() * 2.0).sin_cos();
        let s2 = s1.clone() * c1.clone() * 2.0;
        let c2 = (c1.clone() - s1.clone()) * (c1.clone() + s1.clone());
        Harmonics { s1, c1, s2, c2 }
    }
}

impl<R: Real> TrigPoly2<R> {
    pub fn new(a1: R, b1: R, a2: R, b2: R) -> Self {
        TrigPoly2 { a1, b1, a2, b2 }
    }

    pub fn zero() -> Self {
        TrigPoly2::new(R::zero(), R::zero(), R::zero(), R::zero())
    }

    /// Single harmonic `amplitude · sin(2πt)`.
    pub fn sine(amplitude: R) -> Self {
        TrigPoly2::new(amplitude, R::zero(), R::zero(), R::zero())
    }

    /// The value or one of the first three derivatives at `t`.
    pub fn eval(&self, t: &R, order: Derivative) -> R {
        let h = Harmonics::at(t);
        match order {
            Derivative::Value => self.even(&h, 1.0),
            Derivative::First => self.odd(&h, 1.0),
            Derivative::Second => self.even(&h, -1.0),
            Derivative::Third => self.odd(&h, -1.0),
        }
    }

    pub fn value(&self, t: &R) -> R {
        self.eval(t, Derivative::Value)
    }

    pub fn first(&self, t: &R) -> R {
        self.eval(t, Derivative::First)
    }

    pub fn second(&self, t: &R) -> R {
        self.eval(t, Derivative::Second)
    }

    pub fn third(&self, t: &R) -> R {
        self.eval(t, Derivative::Third)
    }

    /// Value and first derivative, sharing one `sin_cos`.
    pub fn value_and_first(&self, t: &R) -> (R, R) {
        let h = Harmonics::at(t);
        (self.even(&h, 1.0), self.odd(&h, 1.0))
    }

    /// Value, first and second derivative, sharing one `sin_cos`.
    pub fn value_first_second(&self, t: &R) -> (R, R, R) {
        let h = Harmonics::at(t);
        (self.even(&h, 1.0), self.odd(&h, 1.0), self.even(&h, -1.0))
    }

    pub fn jet(&self, t: &R) -> Jet<R> {
        let h = Harmonics::at(t);
        Jet {
            value: self.even(&h, 1.0),
            first: self.odd(&h, 1.0),
            second: self.even(&h, -1.0),
            third: self.odd(&h, -1.0),
        }
    }

    // Even derivatives: sign · ω^k (a1 s1 + b1 c1) + sign · (2ω)^k (a2 s2 + b2 c2),
    // with sign = 1 for the value and -1 for p̈.
    fn even(&self, h: &Harmonics<R>, sign: f64) -> R {
        let first = self.a1.clone() * h.s1.clone() + self.b1.clone() * h.c1.clone();
        let second = self.a2.clone() * h.s2.clone() + self.b2.clone() * h.c2.clone();
        if sign > 0.0 {
            first + second
        } else {
            let w2 = R::pi().square() * 4.0;
            -(first + second * 4.0) * w2
        }
    }

    // Odd derivatives: ṗ for sign = 1, p⃛ for sign = -1.
    fn odd(&self, h: &Harmonics<R>, sign: f64) -> R {
        let w = R::pi() * 2.0;
        let first = self.a1.clone() * h.c1.clone() - self.b1.clone() * h.s1.clone();
        let second = self.a2.clone() * h.c2.clone() - self.b2.clone() * h.s2.clone();
        if sign > 0.0 {
            (first + second * 2.0) * w
        } else {
            let w3 = w.clone() * w.clone() * w;
            -(first + second * 8.0) * w3
        }
    }

    /// `2π√(a1²+b1²) + 4π√(a2²+b2²)`, an upper bound for `max |ṗ|`.
    pub fn derivative_amplitude(&self) -> R {
        let h1 = (self.a1.square() + self.b1.square()).sqrt();
        let h2 = (self.a2.square() + self.b2.square()).sqrt();
        (h1 * 2.0 + h2 * 4.0) * R::pi()
    }

    /// Bound on `max |p̈|`, used for divided-difference error estimates.
    pub fn second_derivative_amplitude(&self) -> R {
        let h1 = (self.a1.square() + self.b1.square()).sqrt();
        let h2 = (self.a2.square() + self.b2.square()).sqrt();
        (h1 + h2 * 4.0) * R::pi().square() * 4.0
    }

    pub fn to_f64(&self) -> TrigPoly2<f64> {
        TrigPoly2::new(
            self.a1.to_f64(),
            self.b1.to_f64(),
            self.a2.to_f64(),
            self.b2.to_f64(),
        )
    }

    pub fn coefficients(&self) -> [R; 4] {
        [
            self.a1.clone(),
            self.b1.clone(),
            self.a2.clone(),
            self.b2.clone(),
        ]
    }
}

impl TrigPoly2<f64> {
    /// Re-express the coefficients in another scalar type.
    pub fn lift<S: Real>(&self) -> TrigPoly2<S> {
        TrigPoly2::new(
            S::from_f64(self.a1),
            S::from_f64(self.b1),
            S::from_f64(self.a2),
            S::from_f64(self.b2),
        )
    }
}

/// Parameters of the racket family.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FamilyParams {
    pub s: f64,
    pub g: f64,
}

impl FamilyParams {
    pub fn new(s: f64, g: f64) -> Result<Self> {
        let params = FamilyParams { s, g };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        check_gravity(self.g)?;
        if !self.s.is_finite() {
            return Err(Error::invalid("s", "must be finite"));
        }
        Ok(())
    }

    pub fn coefficients(&self) -> Result<TrigPoly2<f64>> {
        family_coefficients(self)
    }
}

impl Default for FamilyParams {
    fn default() -> Self {
        FamilyParams {
            s: OPTIMAL_S,
            g: 1.0,
        }
    }
}

/// Minimizer of the derivative bound over the family, to the digits quoted
/// for it in the literature.
pub const OPTIMAL_S: f64 = 0.009569094523943;

/// Cycle point times of the family orbit modulo one: `t0* = 0`, `t1* = 5/12`.
pub const CYCLE_PHASE: (i64, i64) = (5, 12);

pub(crate) fn check_gravity(g: f64) -> Result<()> {
    if !(g.is_finite() && g > 0.0) {
        return Err(Error::invalid("g", format!("must be positive and finite, got {g}")));
    }
    Ok(())
}

/// Coefficients of `p_s` at the precision of `R`.
///
/// `a1 = gs`, `b1 = g((2-√3)s + (4√3-7)/(4π))`, `a2 = g(5/(96π) - s/2)`,
/// `b2 = g((√3/2)s + (48-29√3)/(96π))`.
pub fn family_coefficients<R: Real>(params: &FamilyParams) -> Result<TrigPoly2<R>> {
    params.validate()?;
    let s = R::from_f64(params.s);
    let g = R::from_f64(params.g);
    let pi = R::pi();
    let r3 = R::from_f64(3.0).sqrt();

    let a1 = g.clone() * s.clone();
    let b1 = g.clone()
        * ((-r3.clone() + 2.0) * s.clone() + (r3.clone() * 4.0 - 7.0) / (pi.clone() * 4.0));
    let a2 = g.clone() * (R::from_f64(5.0) / (pi.clone() * 96.0) - s.clone() / 2.0);
    let b2 = g * (r3.clone() / 2.0 * s + (-(r3 * 29.0) + 48.0) / (pi * 96.0));
    Ok(TrigPoly2::new(a1, b1, a2, b2))
}

/// `p̄(s)`: the bound `max ṗ_s ≤ g p̄(s)`, dimensionless and independent of `g`.
pub fn derivative_bound(params: &FamilyParams) -> Result<f64> {
    let p = family_coefficients::<f64>(params)?;
    Ok(p.derivative_amplitude() / params.g)
}

/// d p̄ / ds, from the affine dependence of the coefficients on `s`.
pub fn derivative_bound_slope(s: f64) -> f64 {
    let p = family_coefficients::<f64>(&FamilyParams { s, g: 1.0 }).expect("g = 1 is valid");
    let r3 = 3f64.sqrt();
    let (da1, db1, da2, db2) = (1.0, 2.0 - r3, -0.5, r3 / 2.0);
    let h1 = p.a1.hypot(p.b1);
    let h2 = p.a2.hypot(p.b2);
    let pi = std::f64::consts::PI;
    2.0 * pi * (p.a1 * da1 + p.b1 * db1) / h1 + 4.0 * pi * (p.a2 * da2 + p.b2 * db2) / h2
}

const MAX_GRID: usize = 4096;

/// Global maximum of `ṗ` over one period.
///
/// A uniform grid locates every local maximum; each is refined to the nearby
/// root of `p̈` by bisection. The result is never below the sampled maximum.
pub fn true_max_derivative(p: &TrigPoly2<f64>) -> f64 {
    let n = MAX_GRID;
    let grid: Vec<f64> = (0..n).map(|i| p.first(&(i as f64 / n as f64))).collect();
    let mut best = grid.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    for i in 0..n {
        let prev = grid[(i + n - 1) % n];
        let next = grid[(i + 1) % n];
        if grid[i] >= prev && grid[i] >= next {
            let lo = (i as f64 - 1.0) / n as f64;
            let hi = (i as f64 + 1.0) / n as f64;
            if let Some(t) = refine_critical_point(p, lo, hi) {
                best = best.max(p.first(&t));
            }
        }
    }
    best
}

// Root of p̈ in [lo, hi] where p̈(lo) ≥ 0 ≥ p̈(hi).
fn refine_critical_point(p: &TrigPoly2<f64>, mut lo: f64, mut hi: f64) -> Option<f64> {
    let f_lo = p.second(&lo);
    let f_hi = p.second(&hi);
    if f_lo < 0.0 || f_hi > 0.0 {
        return None;
    }
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if p.second(&mid) >= 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-15 {
            break;
        }
    }
    Some(0.5 * (lo + hi))
}

/// Result of [`minimize_bound`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundMinimum {
    pub s: f64,
    pub value: f64,
}

const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Golden-section search for an interior minimum of `f` on `[lo, hi]`.
///
/// Returns `(x, f(x))` with the final bracket narrower than `tol`.
pub fn golden_section<F>(f: F, lo: f64, hi: f64, tol: f64) -> Result<(f64, f64)>
where
    F: Fn(f64) -> f64,
{
    if !(lo.is_finite() && hi.is_finite()) || lo >= hi {
        return Err(Error::invalid("interval", format!("need lo < hi, got [{lo}, {hi}]")));
    }
    if !(tol > 0.0) {
        return Err(Error::invalid("tol", format!("must be positive, got {tol}")));
    }
    let (f_lo, f_hi) = (f(lo), f(hi));
    let (mut a, mut b) = (lo, hi);
    let mut x1 = b - INV_PHI * (b - a);
    let mut x2 = a + INV_PHI * (b - a);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    while b - a > tol {
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - INV_PHI * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + INV_PHI * (b - a);
            f2 = f(x2);
        }
        if b - a <= f64::EPSILON * (a.abs() + b.abs()) {
            break;
        }
    }
    let (x, fx) = if f1 <= f2 { (x1, f1) } else { (x2, f2) };
    // The search collapses onto an endpoint when f is monotone on the bracket.
    let margin = tol.max(1e-12 * (hi - lo));
    if x - lo <= margin || hi - x <= margin || fx >= f_lo || fx >= f_hi {
        return Err(Error::NoInteriorMinimum { lo, hi });
    }
    Ok((x, fx))
}

/// Minimize `p̄(s)` on `[s_lo, s_hi]`.
///
/// Golden-section search brackets the minimum; the analytic slope of `p̄`
/// then gets bisected to sharpen `s` below the resolution of value
/// comparisons, which is limited to about `√ε` for a flat minimum.
pub fn minimize_bound(s_lo: f64, s_hi: f64, tol: f64) -> Result<BoundMinimum> {
    let bound = |s: f64| derivative_bound(&FamilyParams { s, g: 1.0 }).expect("g = 1 is valid");
    let coarse_tol = tol.max(1e-7 * (s_hi - s_lo).abs());
    let (s0, _) = golden_section(bound, s_lo, s_hi, coarse_tol)?;

    let width = 4.0 * coarse_tol;
    let (mut a, mut b) = ((s0 - width).max(s_lo), (s0 + width).min(s_hi));
    let s = if derivative_bound_slope(a) < 0.0 && derivative_bound_slope(b) > 0.0 {
        for _ in 0..200 {
            if b - a <= tol.min(1e-15_f64.max(f64::EPSILON * s0.abs())) {
                break;
            }
            let mid = 0.5 * (a + b);
            if mid <= a || mid >= b {
                break;
            }
            if derivative_bound_slope(mid) < 0.0 {
                a = mid;
            } else {
                b = mid;
            }
        }
        0.5 * (a + b)
    } else {
        s0
    };
    Ok(BoundMinimum {
        s,
        value: bound(s),
    })
}

/// JSON record for one member of the family.
#[derive(Debug, Clone, Serialize)]
pub struct CoefficientReport {
    pub s: f64,
    pub g: f64,
    pub a1: f64,
    pub b1: f64,
    pub a2: f64,
    pub b2: f64,
    /// `p̄(s)`.
    pub bound: f64,
    /// `max ṗ_s / g` from [`true_max_derivative`].
    pub true_max: f64,
}

impl CoefficientReport {
    pub fn new(params: &FamilyParams) -> Result<Self> {
        let p = family_coefficients::<f64>(params)?;
        Ok(CoefficientReport {
            s: params.s,
            g: params.g,
            a1: p.a1,
            b1: p.b1,
            a2: p.a2,
            b2: p.b2,
            bound: p.derivative_amplitude() / params.g,
            true_max: true_max_derivative(&p) / params.g,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::real::Precise;
    use std::f64::consts::PI;

    fn family(s: f64, g: f64) -> TrigPoly2 {
        family_coefficients(&FamilyParams { s, g }).unwrap()
    }

    #[test]
    fn s_zero_closed_form() {
        let p = family(0.0, 1.0);
        let r3 = 3f64.sqrt();
        assert_eq!(p.a1, 0.0);
        assert!((p.b1 - (4.0 * r3 - 7.0) / (4.0 * PI)).abs() < 1e-16);
        assert!((p.a2 - 5.0 / (96.0 * PI)).abs() < 1e-16);
        assert!((p.b2 - (48.0 - 29.0 * r3) / (96.0 * PI)).abs() < 1e-16);
    }

    #[test]
    fn s_0006_matches_extended_precision() {
        // Reference values from the 512-bit evaluation of the same closed form.
        let p = family(0.006, 1.0);
        let q = family_coefficients::<Precise>(&FamilyParams { s: 0.006, g: 1.0 }).unwrap();
        for (x, y) in p.coefficients().iter().zip(q.coefficients()) {
            assert!((x - y.to_f64()).abs() < 1e-16, "{x} vs {y:?}");
        }
        let scaled = family(0.006, 9.81);
        for (x, y) in p.coefficients().iter().zip(scaled.coefficients()) {
            assert!((9.81 * x - y).abs() < 1e-15);
        }
    }

    #[test]
    fn rejects_nonpositive_gravity() {
        assert!(matches!(
            family_coefficients::<f64>(&FamilyParams { s: 0.0, g: 0.0 }),
            Err(Error::InvalidParameter { name: "g", .. })
        ));
        assert!(derivative_bound(&FamilyParams { s: 0.0, g: -1.0 }).is_err());
        assert!(FamilyParams::new(0.0, f64::NAN).is_err());
    }

    #[test]
    fn derivative_order_parsing() {
        assert_eq!(Derivative::try_from(2).unwrap(), Derivative::Second);
        assert!(Derivative::try_from(4).is_err());
    }

    #[test]
    fn derivatives_are_consistent_with_finite_differences() {
        let p = family(0.006, 1.0);
        let h = 1e-5;
        for &t in &[0.0, 0.1, 0.37, 0.8] {
            for order in [Derivative::Value, Derivative::First, Derivative::Second] {
                let next = match order {
                    Derivative::Value => Derivative::First,
                    Derivative::First => Derivative::Second,
                    _ => Derivative::Third,
                };
                let fd = (p.eval(&(t + h), order) - p.eval(&(t - h), order)) / (2.0 * h);
                let exact = p.eval(&t, next);
                assert!((fd - exact).abs() < 1e-6 * (1.0 + exact.abs()), "{t} {order:?}");
            }
        }
    }

    #[test]
    fn single_harmonic_max() {
        let p = TrigPoly2::sine(1.0);
        assert!((true_max_derivative(&p) - 2.0 * PI).abs() < 1e-12);
    }

    #[test]
    fn threshold_at_0006() {
        assert!(derivative_bound(&FamilyParams { s: 0.006, g: 1.0 }).unwrap() < 0.25);
        let p = family(0.006, 1.0);
        assert!(true_max_derivative(&p) <= p.derivative_amplitude());
    }

    #[test]
    fn bound_is_gravity_invariant() {
        let b1 = derivative_bound(&FamilyParams { s: 0.02, g: 1.0 }).unwrap();
        let b7 = derivative_bound(&FamilyParams { s: 0.02, g: 7.0 }).unwrap();
        assert!((b1 - b7).abs() < 1e-15);
    }

    #[test]
    fn slope_matches_finite_difference() {
        let bound = |s: f64| derivative_bound(&FamilyParams { s, g: 1.0 }).unwrap();
        for &s in &[-0.03, 0.0, 0.006, 0.02] {
            let h = 1e-6;
            let fd = (bound(s + h) - bound(s - h)) / (2.0 * h);
            assert!((fd - derivative_bound_slope(s)).abs() < 1e-7);
        }
    }

    #[test]
    fn golden_section_on_quadratic() {
        let c = 0.3;
        let (x, fx) = golden_section(|x| (x - c) * (x - c), c - 1.0, c + 1.0, 1e-10).unwrap();
        assert!((x - c).abs() < 1e-10);
        assert!(fx < 1e-19);
    }

    #[test]
    fn golden_section_rejects_monotone() {
        assert!(matches!(
            golden_section(|x| x, 0.0, 1.0, 1e-8),
            Err(Error::NoInteriorMinimum { .. })
        ));
        assert!(golden_section(|x| x * x, 0.01, 0.01, 1e-8).is_err());
        assert!(golden_section(|x| x * x, -1.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn minimize_bound_finds_optimum() {
        let m = minimize_bound(0.0, 0.05, 1e-12).unwrap();
        assert!((m.s - OPTIMAL_S).abs() < 1e-12, "{}", m.s);
        assert!((m.value - 0.211931840664873).abs() < 1e-13);
        assert!(minimize_bound(0.02, 0.05, 1e-12).is_err());
    }

    #[test]
    fn report_fields() {
        let r = CoefficientReport::new(&FamilyParams { s: 0.006, g: 1.0 }).unwrap();
        assert!(r.bound < 0.25);
        assert!(r.true_max <= r.bound);
        let json = serde_json::to_value(&r).unwrap();
        let keys: Vec<_> = json.as_object().unwrap().keys().cloned().collect();
        assert_eq!(keys.len(), 8);
    }
}
