//! The impact map of a ball bouncing elastically on a periodically moving
//! racket under gravity, in the coordinates (impact time, outgoing velocity):
//!
//! ```text
//! t1 = t0 + (2/g) v0 - (2/g) f[t1, t0]
//! v1 = v0 + 2 ḟ(t1) - 2 f[t1, t0]
//! ```
//!
//! The first equation is implicit in `t1` and is solved by Newton's method
//! with a bisection fallback. When `f[t1, t0]` vanishes the map reduces to the
//! explicit generalized standard map, see [`gs_step`].

use std::cell::RefCell;

use crate::error::{Error, Result};
use crate::linear::Mat2;
use crate::racket::TrigPoly2;
use crate::real::Real;

#[derive(Debug, Clone, PartialEq)]
pub struct ImpactState<R = f64> {
    /// Impact time.
    pub t: R,
    /// Velocity just after the impact.
    pub v: R,
}

impl<R: Real> ImpactState<R> {
    pub fn new(t: R, v: R) -> Self {
        ImpactState { t, v }
    }

    pub fn to_f64(&self) -> ImpactState<f64> {
        ImpactState::new(self.t.to_f64(), self.v.to_f64())
    }
}

impl ImpactState<f64> {
    pub fn lift<S: Real>(&self) -> ImpactState<S> {
        ImpactState::new(S::from_f64(self.t), S::from_f64(self.v))
    }
}

#[derive(Debug, Clone)]
pub struct SolverConfig<R = f64> {
    /// Accepted residual of the time equation, relative to `max(1, |t1|)`.
    pub newton_tol: R,
    pub max_newton_iters: usize,
    pub bisection_fallback: bool,
    /// Lowest velocity for which the map is evaluated.
    pub velocity_floor: R,
}

impl<R: Real> SolverConfig<R> {
    /// Defaults for racket `f`: the velocity floor is `g/2 + 2 max|ḟ|`.
    ///
    /// Above `g/2` the time equation changes sign on `[t + 1, ∞)`; the extra
    /// `2 max|ḟ|` keeps the first flight long compared with the racket speed.
    pub fn for_racket(f: &TrigPoly2<R>, g: &R) -> Self {
        SolverConfig {
            newton_tol: R::default_newton_tol(),
            max_newton_iters: 50,
            bisection_fallback: true,
            velocity_floor: g.clone() / 2.0 + f.derivative_amplitude() * 2.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.newton_tol > R::zero()) {
            return Err(Error::invalid("newton_tol", "must be positive"));
        }
        if self.max_newton_iters == 0 {
            return Err(Error::invalid("max_newton_iters", "must be at least 1"));
        }
        if !(self.velocity_floor > R::zero()) {
            return Err(Error::invalid("velocity_floor", "must be positive"));
        }
        Ok(())
    }
}

/// Times closer than this use the derivative limit of the divided difference.
pub const COINCIDENT_TIMES: f64 = 1e-8;

/// `f[t1, t0] = (f(t1) - f(t0)) / (t1 - t0)`, with `f[t, t] = ḟ(t)`.
pub fn divided_difference<R: Real>(f: &TrigPoly2<R>, t1: &R, t0: &R) -> R {
    let dt = t1.clone() - t0.clone();
    if dt.abs() < R::from_f64(COINCIDENT_TIMES) {
        let mid = (t1.clone() + t0.clone()) / 2.0;
        return f.first(&mid);
    }
    (f.value(t1) - f.value(t0)) / dt
}

fn check_velocity<R: Real>(v: &R, cfg: &SolverConfig<R>) -> Result<()> {
    if !(v.clone() > cfg.velocity_floor) {
        return Err(Error::VelocityTooLow {
            v: v.to_f64(),
            floor: cfg.velocity_floor.to_f64(),
        });
    }
    Ok(())
}

pub(crate) fn check_gravity<R: Real>(g: &R) -> Result<()> {
    if !(g.clone() > R::zero() && g.is_finite()) {
        return Err(Error::invalid("g", "must be positive and finite"));
    }
    Ok(())
}

/// Scalar equation in one unknown, evaluated together with its derivatives.
trait Equation<R> {
    fn eval(&self, x: &R) -> (R, R);
    fn eval2(&self, x: &R) -> (R, R, R);
}

/// `F(T) = (T - t) - (2/g) v + (2/g) f[T, t]`, unknown `T`.
struct ForwardTime<'a, R> {
    f: &'a TrigPoly2<R>,
    t: &'a R,
    f_t: R,
    two_v_over_g: R,
    two_over_g: R,
    /// `(T, f(T), ḟ(T))` from the latest evaluation.
    last: RefCell<Option<(R, R, R)>>,
}

impl<'a, R: Real> ForwardTime<'a, R> {
    fn new(f: &'a TrigPoly2<R>, state: &'a ImpactState<R>, g: &R) -> Self {
        let two_over_g = R::from_f64(2.0) / g.clone();
        ForwardTime {
            f,
            t: &state.t,
            f_t: f.value(&state.t),
            two_v_over_g: two_over_g.clone() * state.v.clone(),
            two_over_g,
            last: RefCell::new(None),
        }
    }
}

impl<R: Real> ForwardTime<'_, R> {
    /// `f(T)` and `ḟ(T)`, reusing the latest evaluation if it was at `T`.
    fn racket_at(&self, big_t: &R) -> (R, R) {
        match self.last.borrow().as_ref() {
            Some((x, value, slope)) if x == big_t => (value.clone(), slope.clone()),
            _ => self.f.value_and_first(big_t),
        }
    }
}

impl<R: Real> Equation<R> for ForwardTime<'_, R> {
    fn eval(&self, big_t: &R) -> (R, R) {
        let gap = big_t.clone() - self.t.clone();
        let (value, slope) = self.f.value_and_first(big_t);
        *self.last.borrow_mut() = Some((big_t.clone(), value.clone(), slope.clone()));
        let dd = (value - self.f_t.clone()) / gap.clone();
        let residual = gap.clone() - self.two_v_over_g.clone() + self.two_over_g.clone() * dd.clone();
        let derivative = self.two_over_g.clone() * (slope - dd) / gap + 1.0;
        (residual, derivative)
    }

    fn eval2(&self, big_t: &R) -> (R, R, R) {
        let gap = big_t.clone() - self.t.clone();
        let (value, slope, curv) = self.f.value_first_second(big_t);
        *self.last.borrow_mut() = Some((big_t.clone(), value.clone(), slope.clone()));
        let dd = (value - self.f_t.clone()) / gap.clone();
        let excess = (slope - dd.clone()) / gap.clone();
        let residual = gap.clone() - self.two_v_over_g.clone() + self.two_over_g.clone() * dd;
        let derivative = self.two_over_g.clone() * excess.clone() + 1.0;
        let second = self.two_over_g.clone() * ((curv - excess * 2.0) / gap);
        (residual, derivative, second)
    }
}

/// `G(Δ) = Δ - (2/g)(w + f[t1, t1 - Δ])` with `w = v1 - 2 ḟ(t1)`, unknown `Δ`.
struct BackwardGap<'a, R> {
    f: &'a TrigPoly2<R>,
    t1: &'a R,
    f_t1: R,
    two_w_over_g: R,
    two_over_g: R,
}

impl<R: Real> Equation<R> for BackwardGap<'_, R> {
    fn eval(&self, gap: &R) -> (R, R) {
        let t0 = self.t1.clone() - gap.clone();
        let (value, slope) = self.f.value_and_first(&t0);
        let dd = (self.f_t1.clone() - value) / gap.clone();
        let residual = gap.clone() - self.two_w_over_g.clone() - self.two_over_g.clone() * dd.clone();
        let derivative = -(self.two_over_g.clone() * (slope - dd) / gap.clone()) + 1.0;
        (residual, derivative)
    }

    fn eval2(&self, gap: &R) -> (R, R, R) {
        let t0 = self.t1.clone() - gap.clone();
        let (value, slope, curv) = self.f.value_first_second(&t0);
        let dd = (self.f_t1.clone() - value) / gap.clone();
        let excess = (slope - dd.clone()) / gap.clone();
        let residual = gap.clone() - self.two_w_over_g.clone() - self.two_over_g.clone() * dd;
        let derivative = -(self.two_over_g.clone() * excess.clone()) + 1.0;
        let second = self.two_over_g.clone() * ((curv + excess * 2.0) / gap.clone());
        (residual, derivative, second)
    }
}

/// Root of an increasing-through-zero equation above `lo`.
///
/// Halley's method from `guess`, confined to `[lo, hi_cap]`; it falls back
/// to a Newton step where the Halley denominator is not positive. When it stalls,
/// leaves that range or runs out of iterations, `bracket` supplies an upper
/// end `hi` with a positive residual and the root is bisected on `[lo, hi]`.
/// `scale` converts the relative tolerance into an absolute one.
fn solve_bracketed<R: Real, E: Equation<R>>(
    eq: &E,
    guess: R,
    lo: R,
    hi_cap: &R,
    bracket: impl FnOnce() -> R,
    scale: &R,
    cfg: &SolverConfig<R>,
) -> Result<R> {
    let tol = cfg.newton_tol.clone() * scale.clone();
    let step_floor = R::epsilon() * scale.clone() * 4.0;
    let mut x = guess;
    let mut last = f64::INFINITY;
    for _ in 0..cfg.max_newton_iters {
        let (r, dr, d2r) = eq.eval2(&x);
        last = r.to_f64();
        if r.abs() <= tol {
            return Ok(x);
        }
        if !(dr > R::zero()) || !r.is_finite() {
            break;
        }
        let denom = dr.square() * 2.0 - r.clone() * d2r;
        let step = if denom > R::zero() {
            r * dr * 2.0 / denom
        } else {
            r / dr
        };
        let next = x.clone() - step.clone();
        if next < lo || next > *hi_cap {
            break;
        }
        x = next;
        if step.abs() <= step_floor {
            let (r, _) = eq.eval(&x);
            last = r.to_f64();
            if r.abs() <= tol {
                return Ok(x);
            }
            break;
        }
    }
    if !cfg.bisection_fallback {
        return Err(Error::NoConvergence { residual: last });
    }
    bisect(eq, lo, bracket(), &tol)
}

fn bisect<R: Real, E: Equation<R>>(eq: &E, mut lo: R, mut hi: R, tol: &R) -> Result<R> {
    let (r_lo, _) = eq.eval(&lo);
    let (r_hi, _) = eq.eval(&hi);
    if !(r_lo < R::zero() && r_hi > R::zero()) {
        return Err(Error::NoConvergence {
            residual: r_lo.to_f64(),
        });
    }
    let mut best = lo.clone();
    let mut best_r = r_lo.abs();
    for _ in 0..(R::MANTISSA_BITS as usize + 64) {
        let mid = (lo.clone() + hi.clone()) / 2.0;
        if mid == lo || mid == hi {
            break;
        }
        let (r, _) = eq.eval(&mid);
        if r.abs() < best_r {
            best = mid.clone();
            best_r = r.abs();
        }
        if r.abs() <= *tol {
            return Ok(mid);
        }
        if r < R::zero() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    // Adjacent floats: accept when the residual is within rounding of the
    // tolerance.
    if best_r <= tol.clone() * 4.0 {
        return Ok(best);
    }
    Err(Error::NoConvergence {
        residual: best_r.to_f64(),
    })
}

/// Earliest sign change of `eq` on `[lo, hi]`, scanned at `pieces` points.
fn first_sign_change<R: Real, E: Equation<R>>(eq: &E, lo: &R, hi: &R, pieces: usize) -> Option<(R, R)> {
    let width = hi.clone() - lo.clone();
    let mut prev_x = lo.clone();
    let (mut prev_r, _) = eq.eval(lo);
    for i in 1..=pieces {
        let x = lo.clone() + width.clone() * (i as f64 / pieces as f64);
        let (r, _) = eq.eval(&x);
        if (prev_r < R::zero()) != (r < R::zero()) {
            return Some((prev_x, x));
        }
        prev_x = x;
        prev_r = r;
    }
    None
}

/// Flight time beyond which the time equation is strictly monotone.
///
/// `|d f[T,t] / dT| ≤ 2 max|ḟ| / (T - t)`, so the slope of the time equation
/// stays positive once `T - t > 4 max|ḟ| / g`.
fn monotone_gap<R: Real>(f: &TrigPoly2<R>, g: &R) -> R {
    f.derivative_amplitude() * 4.0 / g.clone()
}

/// Next impact time `T ≥ t + 1` from `state`.
///
/// The iteration starts at the free-flight time `t + 2v/g`; the fallback bracket is
/// `[t + 1, t + 4v/g]`, doubled at most three times if it does not straddle
/// the root. If the time equation is not known to be monotone on the bracket
/// the smallest root is selected.
pub fn impact_time<R: Real>(
    f: &TrigPoly2<R>,
    state: &ImpactState<R>,
    cfg: &SolverConfig<R>,
    g: &R,
) -> Result<R> {
    check_gravity(g)?;
    check_velocity(&state.v, cfg)?;
    let eq = ForwardTime::new(f, state, g);
    solve_forward(&eq, state, cfg, g)
}

fn solve_forward<R: Real>(
    eq: &ForwardTime<'_, R>,
    state: &ImpactState<R>,
    cfg: &SolverConfig<R>,
    g: &R,
) -> Result<R> {
    let f = eq.f;
    let two_over_g = eq.two_over_g.clone();
    let lo = state.t.clone() + 1.0;
    let reach = two_over_g.clone() * state.v.clone() * 2.0;
    let hi_cap = state.t.clone() + reach.clone() * 8.0;
    let bracket = || {
        let mut reach = reach.clone();
        let mut hi = state.t.clone() + reach.clone();
        for _ in 0..3 {
            if eq.eval(&hi).0 > R::zero() {
                break;
            }
            reach = reach * 2.0;
            hi = state.t.clone() + reach.clone();
        }
        hi
    };
    let guess = state.t.clone() + eq.two_v_over_g.clone();
    let scale = (state.t.abs() + eq.two_v_over_g.clone()).max_of(R::one());
    let guess = guess.max_of(lo.clone()).min_of(hi_cap.clone());

    let gap_m = monotone_gap(f, g);
    if gap_m > R::one() {
        let upto = (state.t.clone() + gap_m.clone() + 1.0).min_of(hi_cap.clone());
        let pieces = 64 * (gap_m.to_f64().ceil() as usize).max(1);
        if let Some((a, b)) = first_sign_change(eq, &lo, &upto, pieces) {
            return bisect(eq, a, b, &(cfg.newton_tol.clone() * scale));
        }
    }
    solve_bracketed(eq, guess, lo, &hi_cap, bracket, &scale, cfg)
}

/// One application of the impact map.
pub fn step_forward<R: Real>(
    f: &TrigPoly2<R>,
    state: &ImpactState<R>,
    cfg: &SolverConfig<R>,
    g: &R,
) -> Result<ImpactState<R>> {
    check_gravity(g)?;
    check_velocity(&state.v, cfg)?;
    let eq = ForwardTime::new(f, state, g);
    let t1 = solve_forward(&eq, state, cfg, g)?;
    let gap = t1.clone() - state.t.clone();
    let (f1, df1) = eq.racket_at(&t1);
    let dd = if gap.abs() < R::from_f64(COINCIDENT_TIMES) {
        divided_difference(f, &t1, &state.t)
    } else {
        (f1 - eq.f_t.clone()) / gap
    };
    let v1 = state.v.clone() + df1 * 2.0 - dd * 2.0;
    Ok(ImpactState::new(t1, v1))
}

/// Inverse of [`step_forward`].
///
/// Solves for the flight time `Δ = t1 - t0` with `w = v1 - 2ḟ(t1)` the
/// incoming speed: `Δ = (2/g)(w + f[t1, t1-Δ])`, then `v0 = w + 2 f[t1, t0]`.
pub fn step_backward<R: Real>(
    f: &TrigPoly2<R>,
    state: &ImpactState<R>,
    cfg: &SolverConfig<R>,
    g: &R,
) -> Result<ImpactState<R>> {
    check_gravity(g)?;
    let two_over_g = R::from_f64(2.0) / g.clone();
    let (f_t1, df_t1) = f.value_and_first(&state.t);
    let w = state.v.clone() - df_t1 * 2.0;
    if !(w > R::zero()) {
        return Err(Error::VelocityTooLow {
            v: w.to_f64(),
            floor: cfg.velocity_floor.to_f64(),
        });
    }
    let eq = BackwardGap {
        f,
        t1: &state.t,
        f_t1,
        two_w_over_g: two_over_g.clone() * w.clone(),
        two_over_g,
    };
    let lo = R::one();
    let hi_cap = eq.two_w_over_g.clone() * 16.0;
    if !(hi_cap > lo) {
        return Err(Error::VelocityTooLow {
            v: w.to_f64(),
            floor: cfg.velocity_floor.to_f64(),
        });
    }
    let bracket = || {
        let mut hi = eq.two_w_over_g.clone() * 2.0;
        for _ in 0..3 {
            if eq.eval(&hi).0 > R::zero() {
                break;
            }
            hi = hi * 2.0;
        }
        hi
    };
    let scale = state.t.abs().max_of(R::one());
    let guess = eq.two_w_over_g.clone().max_of(lo.clone()).min_of(hi_cap.clone());
    let gap = solve_bracketed(&eq, guess, lo.clone(), &hi_cap, bracket, &scale, cfg)?;

    let gap_m = monotone_gap(f, g);
    if gap_m > R::one() {
        let upto = (gap_m.clone() + 1.0).min_of(hi_cap);
        let pieces = 64 * (gap_m.to_f64().ceil() as usize).max(1);
        if let Some((a, b)) = first_sign_change(&eq, &lo, &upto, pieces) {
            let other = bisect(&eq, a, b, &(cfg.newton_tol.clone() * scale.clone()))?;
            let sep = (other.clone() - gap.clone()).abs();
            if sep > cfg.newton_tol.clone() * scale * 1e3 {
                return Err(Error::AmbiguousPreimage {
                    first: (state.t.clone() - other).to_f64(),
                    second: (state.t.clone() - gap).to_f64(),
                });
            }
        }
    }

    let t0 = state.t.clone() - gap;
    let dd = divided_difference(f, &state.t, &t0);
    let v0 = w + dd * 2.0;
    check_velocity(&v0, cfg)?;
    Ok(ImpactState::new(t0, v0))
}

/// Generalized standard map: `t1 = t0 + (2/g) v0`, `v1 = v0 + 2 ḟ(t1)`.
pub fn gs_step<R: Real>(f: &TrigPoly2<R>, state: &ImpactState<R>, g: &R) -> ImpactState<R> {
    let t1 = state.t.clone() + state.v.clone() * 2.0 / g.clone();
    let v1 = state.v.clone() + f.first(&t1) * 2.0;
    ImpactState::new(t1, v1)
}

/// Which map [`iterate`] applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MapKind {
    /// The implicit impact map.
    Full,
    /// The explicit generalized standard map.
    Standard,
}

/// Orbit prefix computed before a step failed.
#[derive(Debug)]
pub struct PartialOrbit<R> {
    pub states: Vec<ImpactState<R>>,
    pub error: Error,
}

impl<R> From<PartialOrbit<R>> for Error {
    fn from(p: PartialOrbit<R>) -> Self {
        p.error
    }
}

/// `[state0, P(state0), ..., P^n(state0)]`.
///
/// On failure the error carries the index of the failing step and the states
/// computed so far.
pub fn iterate<R: Real>(
    f: &TrigPoly2<R>,
    state0: &ImpactState<R>,
    n_steps: usize,
    cfg: &SolverConfig<R>,
    g: &R,
    kind: MapKind,
) -> std::result::Result<Vec<ImpactState<R>>, PartialOrbit<R>> {
    let mut states = Vec::with_capacity(n_steps + 1);
    states.push(state0.clone());
    for index in 0..n_steps {
        let current = &states[index];
        let next = match kind {
            MapKind::Full => step_forward(f, current, cfg, g),
            MapKind::Standard => Ok(gs_step(f, current, g)),
        };
        match next {
            Ok(s) => states.push(s),
            Err(e) => {
                return Err(PartialOrbit {
                    states,
                    error: e.at_step(index),
                })
            }
        }
    }
    Ok(states)
}

/// Jacobian of [`step_forward`] at `state`, by implicit differentiation of
/// the time equation.
pub fn step_jacobian<R: Real>(
    f: &TrigPoly2<R>,
    state: &ImpactState<R>,
    cfg: &SolverConfig<R>,
    g: &R,
) -> Result<Mat2<R>> {
    let t1 = impact_time(f, state, cfg, g)?;
    let t0 = &state.t;
    let gap = t1.clone() - t0.clone();
    let dd = divided_difference(f, &t1, t0);
    let j1 = f.jet(&t1);
    let df0 = f.first(t0);
    let two_over_g = R::from_f64(2.0) / g.clone();

    let dd_dt1 = (j1.first.clone() - dd.clone()) / gap.clone();
    let dd_dt0 = (dd - df0) / gap;
    // F(t1; t0, v0) = t1 - t0 - (2/g) v0 + (2/g) f[t1, t0]
    let f_t1 = two_over_g.clone() * dd_dt1.clone() + 1.0;
    let f_t0 = two_over_g.clone() * dd_dt0.clone() - 1.0;
    let t1_t0 = -f_t0 / f_t1.clone();
    let t1_v0 = two_over_g / f_t1;

    let kick = (j1.second - dd_dt1) * 2.0;
    let v1_t0 = kick.clone() * t1_t0.clone() - dd_dt0 * 2.0;
    let v1_v0 = kick * t1_v0.clone() + 1.0;
    Ok(Mat2::new(t1_t0, t1_v0, v1_t0, v1_v0))
}
