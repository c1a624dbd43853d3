//! Cycle schedules of unbounded orbits and their certification.
//!
//! An N-cycle schedule is an orbit of the generalized standard map along
//! which `f[t*_{n+1}, t*_n] = 0`, the times advance by an integer every N
//! impacts and the velocity gains `gV/2` per cycle. Such an orbit is also an
//! orbit of the full impact map, and its velocities grow without bound.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::impact::{check_gravity, divided_difference, iterate, ImpactState, MapKind, SolverConfig};
use crate::racket::{TrigPoly2, CYCLE_PHASE};
use crate::real::Real;

#[derive(Debug, Clone)]
pub struct OrbitSchedule<R = f64> {
    /// Cycle length N.
    pub period: usize,
    /// Time advance W over the first cycle.
    pub advance: u64,
    /// Velocity quanta V gained per cycle, in units of `g/2`.
    pub quanta: u64,
    /// Gap offset k.
    pub offset: u64,
    pub t_star: Vec<R>,
    pub v0_star: R,
    pub g: R,
}

impl<R: Real> OrbitSchedule<R> {
    pub fn validate(&self) -> Result<()> {
        if self.period == 0 || self.t_star.len() != self.period {
            return Err(Error::invalid("t_star", "must hold one time per cycle step"));
        }
        if self.advance == 0 || self.quanta == 0 {
            return Err(Error::invalid("schedule", "W and V must be positive"));
        }
        check_gravity(&self.g)?;
        if !(self.v0_star > R::zero()) {
            return Err(Error::invalid("v0_star", "must be positive"));
        }
        Ok(())
    }

    pub fn start(&self) -> ImpactState<R> {
        ImpactState::new(self.t_star[0].clone(), self.v0_star.clone())
    }

    /// `gV/2`.
    pub fn velocity_gain_per_cycle(&self) -> R {
        self.g.clone() * (self.quanta as f64) / 2.0
    }

    /// Velocity increments `2ḟ(t*_j)` for `j = 1..N`, the last one at `t*_0`.
    fn kicks(&self, f: &TrigPoly2<R>) -> Vec<R> {
        (1..=self.period)
            .map(|j| f.first(&self.t_star[j % self.period]) * 2.0)
            .collect()
    }

    /// Reference states `x*_0 .. x*_{count-1}` from the schedule in closed form:
    ///
    /// ```text
    /// t*_{mN+j} = t*_j + mW + NV m(m-1)/2 + jVm
    /// v*_{mN+j} = v*_0 + m gV/2 + 2ḟ(t*_1) + ... + 2ḟ(t*_j)
    /// ```
    pub fn reference_states(&self, f: &TrigPoly2<R>, count: usize) -> Vec<ImpactState<R>> {
        let n = self.period;
        let kicks = self.kicks(f);
        let gain = self.velocity_gain_per_cycle();
        let mut within = Vec::with_capacity(n);
        let mut acc = R::zero();
        for kick in kicks.iter().take(n) {
            within.push(acc.clone());
            acc = acc + kick.clone();
        }
        let (w, v) = (self.advance as i64, self.quanta as i64);
        (0..count)
            .map(|idx| {
                let (m, j) = ((idx / n) as i64, idx % n);
                let shift = m * w + (n as i64) * v * m * (m - 1) / 2 + (j as i64) * v * m;
                let t = self.t_star[j].clone() + shift as f64;
                let vel = self.v0_star.clone() + gain.clone() * (m as f64) + within[j].clone();
                ImpactState::new(t, vel)
            })
            .collect()
    }
}

/// The N = 2 schedule of the family `p_s`: `t*_0 = 0`, `t*_1 = 5/12 + k`,
/// `W = 2k + 1`, `V = 1`, `v*_0 = g(5/12 + k)/2`.
pub fn build_n2_schedule<R: Real>(g: &R, k: u64) -> Result<OrbitSchedule<R>> {
    check_gravity(g)?;
    if k == 0 {
        return Err(Error::invalid("k", "must be at least 1"));
    }
    let t1 = R::ratio(CYCLE_PHASE.0, CYCLE_PHASE.1) + k as f64;
    Ok(OrbitSchedule {
        period: 2,
        advance: 2 * k + 1,
        quanta: 1,
        offset: k,
        v0_star: g.clone() * t1.clone() / 2.0,
        t_star: vec![R::zero(), t1],
        g: g.clone(),
    })
}

/// Tolerance on `|ḟ(t0) - g/4|` in [`build_pustylnikov_ladder`], relative to `max(1, g)`.
pub const LADDER_PHASE_TOL: f64 = 1e-12;

/// The step-1 ladder through a phase with `ḟ(t0) = g/4`: N = 1, `v*_0 = mg/2`,
/// gaps `t*_{n+1} - t*_n = n + m` and velocity increments `g/2`.
pub fn build_pustylnikov_ladder<R: Real>(
    f: &TrigPoly2<R>,
    t0: R,
    m: u64,
    g: &R,
) -> Result<OrbitSchedule<R>> {
    check_gravity(g)?;
    if m == 0 {
        return Err(Error::invalid("m", "must be at least 1"));
    }
    let miss = (f.first(&t0) - g.clone() / 4.0).abs().to_f64();
    if !(miss < LADDER_PHASE_TOL * g.to_f64().max(1.0)) {
        return Err(Error::PreconditionFailed(format!(
            "racket speed at t0 differs from g/4 by {miss:e}"
        )));
    }
    Ok(OrbitSchedule {
        period: 1,
        advance: m,
        quanta: 1,
        offset: m,
        v0_star: g.clone() * (m as f64) / 2.0,
        t_star: vec![t0],
        g: g.clone(),
    })
}

/// A phase `t0 ∈ [0, 1)` with `ḟ(t0) = g/4`, if there is one.
pub fn locate_ladder_phase(f: &TrigPoly2<f64>, g: f64) -> Option<f64> {
    const GRID: usize = 4096;
    let target = g / 4.0;
    let h = |t: f64| f.first(&t) - target;
    let tol = LADDER_PHASE_TOL * g.max(1.0);
    let at = |i: usize| i as f64 / GRID as f64;
    for i in 0..GRID {
        let (a, b) = (at(i), at(i + 1));
        let (ha, hb) = (h(a), h(b));
        if ha.abs() < tol {
            return Some(a);
        }
        if ha < 0.0 && hb > 0.0 || ha > 0.0 && hb < 0.0 {
            return Some(bisect_sign(&h, a, b));
        }
    }
    // Tangential contact: a local maximum of ḟ equal to g/4.
    let acc = |t: f64| f.second(&t);
    for i in 0..GRID {
        let (a, b) = (at(i), at(i + 1));
        if acc(a) > 0.0 && acc(b) <= 0.0 {
            let peak = bisect_sign(&acc, a, b);
            if h(peak).abs() < tol {
                return Some(peak.rem_euclid(1.0));
            }
        }
    }
    None
}

fn bisect_sign(h: &dyn Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let sa = h(a) > 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (a + b);
        if mid <= a || mid >= b {
            break;
        }
        if (h(mid) > 0.0) == sa {
            a = mid;
        } else {
            b = mid;
        }
    }
    0.5 * (a + b)
}

/// Residuals of the cycle conditions. The reduced forms `c2p`, `c3` and `c4p`
/// are only defined for two-step cycles.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CycleResiduals {
    /// `t*_N - t*_0 - W` along the standard map.
    pub c1: f64,
    /// `2(t*_1 - t*_0) + (4/g) ṗ(t*_1) - W`.
    pub c2p: Option<f64>,
    /// `p(t*_0) - p(t*_1)`.
    pub c3: Option<f64>,
    /// `(4/g)(ṗ(t*_0) + ṗ(t*_1)) - V`.
    pub c4p: Option<f64>,
    /// `v*_0 - g(t*_1 - t*_0)/2`.
    #[serde(skip)]
    pub c2: Option<f64>,
    /// Largest `|ṗ(t*_k) - (g/4)(t*_{k+1} - 2t*_k + t*_{k-1})|` over `k = 1..N`.
    #[serde(skip)]
    pub c4: f64,
}

/// Cycle conditions hold when every residual is below this, relative to
/// `max(1, W)` for times and `max(1, g)` for lengths and velocities.
pub const CONDITION_TOL: f64 = 1e-12;

impl CycleResiduals {
    pub fn hold(&self, advance: u64, g: f64) -> bool {
        let tt = CONDITION_TOL * (advance as f64).max(1.0);
        let tg = CONDITION_TOL * g.max(1.0);
        let ok = |x: Option<f64>, tol: f64| x.is_none_or(|x| x.abs() < tol);
        ok(Some(self.c1), tt)
            && ok(self.c2p, tt)
            && ok(self.c3, tg)
            && ok(self.c4p, CONDITION_TOL)
            && ok(self.c2, tg * (advance as f64).max(1.0))
            && ok(Some(self.c4), tg)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OrbitResiduals {
    pub horizon: usize,
    /// Largest `|x - round(x)|` with `x = t_{n+N} - t_n`.
    pub max_integrality: f64,
    /// Largest `|v_{n+N} - v_n - gV/2|`.
    pub max_velocity_residual: f64,
    /// Largest `|f[t_{n+1}, t_n]|`.
    pub max_divdiff: f64,
}

/// Tolerance of the orbit-following residuals.
pub const ORBIT_TOL: f64 = 1e-8;

impl OrbitResiduals {
    pub fn hold(&self, g: f64) -> bool {
        self.max_integrality < ORBIT_TOL
            && self.max_velocity_residual < ORBIT_TOL * g.max(1.0)
            && self.max_divdiff < ORBIT_TOL * g.max(1.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CertificateReport {
    pub conditions: CycleResiduals,
    pub orbit: Option<OrbitResiduals>,
    pub certified: bool,
}

/// Evaluates the cycle conditions of `sched` for racket `f`.
pub fn check_cycle_conditions<R: Real>(
    f: &TrigPoly2<R>,
    sched: &OrbitSchedule<R>,
    g: &R,
) -> CertificateReport {
    let conditions = cycle_residuals(f, sched, g);
    let certified = conditions.hold(sched.advance, g.to_f64());
    CertificateReport {
        conditions,
        orbit: None,
        certified,
    }
}

fn cycle_residuals<R: Real>(f: &TrigPoly2<R>, sched: &OrbitSchedule<R>, g: &R) -> CycleResiduals {
    let n = sched.period;
    let ts = &sched.t_star;
    let two_over_g = R::from_f64(2.0) / g.clone();
    let mut state = sched.start();
    for _ in 0..n {
        let t = state.t.clone() + two_over_g.clone() * state.v.clone();
        let v = state.v.clone() + f.first(&t) * 2.0;
        state = ImpactState::new(t, v);
    }
    let c1 = (state.t - ts[0].clone() - sched.advance as f64).to_f64();

    let times: Vec<R> = sched
        .reference_states(f, n + 2)
        .into_iter()
        .map(|s| s.t)
        .collect();
    let c4 = (1..=n)
        .map(|k| {
            let curv = times[k + 1].clone() - times[k].clone() * 2.0 + times[k - 1].clone();
            (f.first(&times[k]) - g.clone() / 4.0 * curv).abs().to_f64()
        })
        .fold(0.0, f64::max);

    if n != 2 {
        return CycleResiduals {
            c1,
            c2p: None,
            c3: None,
            c4p: None,
            c2: None,
            c4,
        };
    }
    let (t0, t1) = (&ts[0], &ts[1]);
    let w = sched.advance as f64;
    let gap = t1.clone() - t0.clone();
    let (p0, dp0) = f.value_and_first(t0);
    let (p1, dp1) = f.value_and_first(t1);
    let four_over_g = two_over_g.clone() * 2.0;
    CycleResiduals {
        c1,
        c2p: Some((gap.clone() * 2.0 + four_over_g.clone() * dp1.clone() - w).to_f64()),
        c3: Some((p0 - p1).to_f64()),
        c4p: Some((four_over_g * (dp0 + dp1) - sched.quanta as f64).to_f64()),
        c2: Some((sched.v0_star.clone() - g.clone() * gap / 2.0).to_f64()),
        c4,
    }
}

/// Residuals of an orbit against the cycle structure of `sched`.
pub fn orbit_residuals<R: Real>(
    f: &TrigPoly2<R>,
    sched: &OrbitSchedule<R>,
    states: &[ImpactState<R>],
) -> OrbitResiduals {
    let n = sched.period;
    let gain = sched.velocity_gain_per_cycle();
    let mut out = OrbitResiduals {
        horizon: states.len().saturating_sub(1),
        max_integrality: 0.0,
        max_velocity_residual: 0.0,
        max_divdiff: 0.0,
    };
    for w in states.windows(n + 1) {
        let (a, b) = (&w[0], &w[n]);
        let x = b.t.clone() - a.t.clone();
        let frac = (x.clone() - x.round()).abs().to_f64();
        let dv = (b.v.clone() - a.v.clone() - gain.clone()).abs().to_f64();
        out.max_integrality = out.max_integrality.max(frac);
        out.max_velocity_residual = out.max_velocity_residual.max(dv);
    }
    for w in states.windows(2) {
        let dd = divided_difference(f, &w[1].t, &w[0].t).abs().to_f64();
        out.max_divdiff = out.max_divdiff.max(dd);
    }
    out
}

/// Iterates the full impact map from the schedule start for `horizon` steps
/// and checks that the orbit follows the cycle structure.
pub fn certify_unbounded<R: Real>(
    f: &TrigPoly2<R>,
    sched: &OrbitSchedule<R>,
    horizon: usize,
    cfg: &SolverConfig<R>,
    g: &R,
) -> Result<(CertificateReport, Vec<ImpactState<R>>)> {
    sched.validate()?;
    if horizon < 2 * sched.period {
        return Err(Error::invalid("horizon", "must cover at least two cycles"));
    }
    let states = iterate(f, &sched.start(), horizon, cfg, g, MapKind::Full)?;
    let conditions = cycle_residuals(f, sched, g);
    let orbit = orbit_residuals(f, sched, &states);
    let gf = g.to_f64();
    let certified = conditions.hold(sched.advance, gf) && orbit.hold(gf);
    Ok((
        CertificateReport {
            conditions,
            orbit: Some(orbit),
            certified,
        },
        states,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::impact::gs_step;
    use crate::racket::{family_coefficients, FamilyParams, OPTIMAL_S};
    use crate::real::Precise;

    fn family(s: f64, g: f64) -> TrigPoly2 {
        family_coefficients(&FamilyParams { s, g }).unwrap()
    }

    #[test]
    fn n2_schedule_values() {
        let s = build_n2_schedule::<f64>(&1.0, 20).unwrap();
        assert_eq!(s.advance, 41);
        assert_eq!(s.quanta, 1);
        assert!((s.t_star[1] - 20.416666666666668).abs() < 1e-14);
        assert!((s.v0_star - 10.208333333333334).abs() < 1e-14);
        let s9 = build_n2_schedule::<f64>(&9.81, 20).unwrap();
        assert!((s9.v0_star - 9.81 * s.v0_star).abs() < 1e-12);
        assert!(build_n2_schedule::<f64>(&1.0, 0).is_err());
    }

    #[test]
    fn family_satisfies_cycle_conditions() {
        for s in [0.006, OPTIMAL_S, -0.03] {
            for g in [1.0, 9.81] {
                let f = family(s, g);
                let sched = build_n2_schedule::<f64>(&g, 20).unwrap();
                let rep = check_cycle_conditions(&f, &sched, &g);
                assert!(rep.certified, "s={s} g={g}: {:?}", rep.conditions);
            }
        }
    }

    #[test]
    fn flat_racket_fails_velocity_condition() {
        let f = TrigPoly2::<f64>::zero();
        let sched = build_n2_schedule::<f64>(&1.0, 20).unwrap();
        let rep = check_cycle_conditions(&f, &sched, &1.0);
        assert_eq!(rep.conditions.c4p, Some(-1.0));
        assert!(!rep.certified);
    }

    #[test]
    fn reference_states_follow_standard_map() {
        let sched = build_n2_schedule::<Precise>(&Precise::one(), 20).unwrap();
        let fp = family_coefficients::<Precise>(&FamilyParams { s: OPTIMAL_S, g: 1.0 }).unwrap();
        let refs = sched.reference_states(&fp, 60);
        let g = Precise::one();
        for w in refs.windows(2) {
            let next = gs_step(&fp, &w[0], &g);
            assert!((next.t - w[1].t.clone()).abs().to_f64() < 1e-100);
            assert!((next.v - w[1].v.clone()).abs().to_f64() < 1e-100);
        }
    }

    #[test]
    fn certify_family_orbit() {
        let g = Precise::one();
        let f = family_coefficients::<Precise>(&FamilyParams { s: OPTIMAL_S, g: 1.0 }).unwrap();
        let sched = build_n2_schedule(&g, 20).unwrap();
        let cfg = SolverConfig::for_racket(&f, &g);
        let (rep, states) = certify_unbounded(&f, &sched, 200, &cfg, &g).unwrap();
        assert!(rep.certified, "{rep:?}");
        assert_eq!(states.len(), 201);
        assert!(certify_unbounded(&f, &sched, 3, &cfg, &g).is_err());
    }

    #[test]
    fn ladder_for_sine_racket() {
        let g = 1.0;
        let f = TrigPoly2::sine(g / (8.0 * std::f64::consts::PI));
        let t0 = locate_ladder_phase(&f, g).unwrap();
        assert!(t0.abs() < 1e-9 || (t0 - 1.0).abs() < 1e-9);
        let sched = build_pustylnikov_ladder(&f, 0.0, 10, &g).unwrap();
        assert_eq!(sched.v0_star, 5.0);
        let refs = sched.reference_states(&f, 5);
        let gaps: Vec<f64> = refs.windows(2).map(|w| w[1].t - w[0].t).collect();
        assert_eq!(gaps, vec![10.0, 11.0, 12.0, 13.0]);
        let rep = check_cycle_conditions(&f, &sched, &g);
        assert!(rep.certified, "{rep:?}");
        assert!(rep.conditions.c2p.is_none());
    }

    #[test]
    fn ladder_refused_below_threshold() {
        let f = family(OPTIMAL_S, 1.0);
        assert!(locate_ladder_phase(&f, 1.0).is_none());
        assert!(matches!(
            build_pustylnikov_ladder(&f, 0.0, 10, &1.0),
            Err(Error::PreconditionFailed(_))
        ));
    }
}
