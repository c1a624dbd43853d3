//! The stable manifold of the cycle map around an unbounded orbit.
//!
//! In deviation coordinates `y_m = x_{mN} - x*_{mN}` the N-step map reads
//! `y_{m+1} = A y_m + R_m(y_m)`. With `z = P y` the cycle matrix becomes
//! `B = diag(λ_s, λ_u)` and orbits converging to the reference orbit solve
//!
//! ```text
//! θ_n = U_1^{n-n0} a + Σ_{s=n0}^{n-1} U_1^{n-s-1} g_s(θ_s) - Σ_{s=n}^{∞} U_2^{n-s-1} g_s(θ_s)
//! ```
//!
//! with `g_s(z) = P R_s(P⁻¹ z)`. The sum is truncated at a horizon `H` and
//! the equation is solved by successive approximation from `θ = 0`. Each
//! `a` gives one point of the manifold at cycle `n0`, which is pulled back to
//! cycle zero with the inverse map.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::impact::{step_backward, step_forward, ImpactState, SolverConfig};
use crate::linear::{cycle_matrix_at, linspace, spectral_split, Mat2, SpectralSplit};
use crate::orbit::OrbitSchedule;
use crate::racket::TrigPoly2;
use crate::real::Real;

#[derive(Debug, Clone, Serialize)]
pub struct ManifoldConfig {
    /// First cycle index of the manifold.
    pub n0: usize,
    /// Last cycle index kept in the tail sum.
    pub horizon: usize,
    /// Cap on the number of sweeps.
    pub iters: usize,
    /// Sweeps stop once the update is below `sweep_tol · a_max`.
    pub sweep_tol: f64,
    pub a_max: f64,
    /// Number of sample parameters, symmetric about zero.
    pub samples: usize,
    /// How often `a_max` may be halved after a divergent solve.
    pub max_halvings: u32,
    /// Cycles `[decay_from, decay_to]` used to fit the contraction ratio.
    pub decay_from: usize,
    pub decay_to: usize,
}

impl ManifoldConfig {
    /// Defaults at the precision of `R`.
    pub fn for_precision<R: Real>() -> Self {
        ManifoldConfig {
            n0: 0,
            horizon: 60,
            iters: 200,
            sweep_tol: sweep_tol_for::<R>(),
            a_max: 1e-3,
            samples: 41,
            max_halvings: 6,
            decay_from: 10,
            decay_to: 40,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.horizon <= self.n0 {
            return Err(Error::invalid("horizon", "must exceed n0"));
        }
        if self.iters == 0 {
            return Err(Error::invalid("iters", "must be at least 1"));
        }
        if !(self.a_max > 0.0 && self.a_max.is_finite()) {
            return Err(Error::invalid("a_max", "must be positive and finite"));
        }
        if self.samples.is_multiple_of(2) {
            return Err(Error::invalid("samples", "must be odd so that a = 0 is sampled"));
        }
        if !(self.sweep_tol > 0.0) {
            return Err(Error::invalid("sweep_tol", "must be positive"));
        }
        if self.decay_to <= self.decay_from {
            return Err(Error::invalid("decay_to", "must exceed decay_from"));
        }
        if self.decay_to > self.horizon {
            return Err(Error::invalid("decay_to", "must not pass the truncation horizon"));
        }
        Ok(())
    }
}

/// `2^(-3(p-1)/4)` for a `p`-bit significand.
fn sweep_tol_for<R: Real>() -> f64 {
    2f64.powf(-(R::MANTISSA_BITS as f64 - 1.0) * 0.75)
}

/// Below `2^(-5(p-1)/8) · a_max` a stalled update counts as converged.
fn stall_floor_for<R: Real>() -> f64 {
    2f64.powf(-(R::MANTISSA_BITS as f64 - 1.0) * 0.625)
}

/// Largest tail term accepted by [`solve_theta`].
pub const TAIL_TOL: f64 = 1e-12;

/// Orbit data and linearization shared by all manifold samples.
#[derive(Debug, Clone)]
pub struct ManifoldContext<R = f64> {
    pub f: TrigPoly2<R>,
    pub sched: OrbitSchedule<R>,
    pub solver: SolverConfig<R>,
    pub matrix: Mat2<R>,
    pub split: SpectralSplit<R>,
    refs: Vec<ImpactState<R>>,
}

impl<R: Real> ManifoldContext<R> {
    /// Builds the cycle matrix and its splitting, and tabulates the reference
    /// orbit over `cycles + 1` cycles from the schedule.
    pub fn new(
        f: TrigPoly2<R>,
        sched: OrbitSchedule<R>,
        solver: SolverConfig<R>,
        cycles: usize,
    ) -> Result<Self> {
        sched.validate()?;
        solver.validate()?;
        let matrix = cycle_matrix_at(&f, &sched, &sched.g);
        let split = spectral_split(&matrix)?;
        let refs = sched.reference_states(&f, (cycles + 2) * sched.period);
        Ok(ManifoldContext {
            f,
            sched,
            solver,
            matrix,
            split,
            refs,
        })
    }

    pub fn g(&self) -> &R {
        &self.sched.g
    }

    pub fn period(&self) -> usize {
        self.sched.period
    }

    /// Number of whole cycles covered by the reference table.
    pub fn cycles(&self) -> usize {
        self.refs.len() / self.period() - 2
    }

    /// `x*_n`.
    pub fn reference(&self, n: usize) -> Result<&ImpactState<R>> {
        self.refs.get(n).ok_or_else(|| {
            Error::invalid("cycle", format!("reference orbit tabulated up to index {}", self.refs.len() - 1))
        })
    }

    /// `R_m(y) = Φ_N(x*_{mN} + y) - x*_{(m+1)N} - A y` in deviation coordinates.
    pub fn remainder(&self, m: usize, y: &[R; 2]) -> Result<[R; 2]> {
        let n = self.period();
        let base = self.reference(m * n)?;
        let target = self.reference((m + 1) * n)?;
        let mut x = ImpactState::new(base.t.clone() + y[0].clone(), base.v.clone() + y[1].clone());
        for i in 0..n {
            x = step_forward(&self.f, &x, &self.solver, self.g()).map_err(|e| e.at_step(m * n + i))?;
        }
        let ay = self.matrix.apply(y);
        Ok([
            x.t - target.t.clone() - ay[0].clone(),
            x.v - target.v.clone() - ay[1].clone(),
        ])
    }

    /// `g_m(z) = P R_m(P⁻¹ z)`.
    pub fn eigen_remainder(&self, m: usize, z: &[R; 2]) -> Result<[R; 2]> {
        let y = self.split.from_eigen.apply(z);
        Ok(self.split.to_eigen.apply(&self.remainder(m, &y)?))
    }

    /// `x - x*_n`.
    pub fn deviation(&self, n: usize, x: &ImpactState<R>) -> Result<[R; 2]> {
        let r = self.reference(n)?;
        Ok([x.t.clone() - r.t.clone(), x.v.clone() - r.v.clone()])
    }
}

/// Converged solution of the truncated integral equation.
#[derive(Debug, Clone)]
pub struct ThetaSolution<R = f64> {
    pub n0: usize,
    /// `θ_n` in eigen-coordinates for `n = n0..=H`.
    pub theta: Vec<[R; 2]>,
    pub sweeps: usize,
    /// Sup-norm update of every sweep.
    pub updates: Vec<f64>,
    /// Sup-norm defect of the integral equation at the returned `θ`.
    pub integral_residual: f64,
    /// Sup-norm defect of `θ_{n+1} = B θ_n + g_n(θ_n)`.
    pub difference_residual: f64,
    /// Largest term `|λ_u^{n-H-1} g_H(θ_H)|` dropped by the truncation is below this.
    pub tail: f64,
}

impl<R: Real> ThetaSolution<R> {
    /// `θ_{n0}`.
    pub fn start(&self) -> &[R; 2] {
        &self.theta[0]
    }
}

/// One sweep `θ ↦ T(θ)` given `G_s = g_s(θ_s)`.
fn sweep<R: Real>(split: &SpectralSplit<R>, a: &R, gs: &[[R; 2]]) -> Vec<[R; 2]> {
    let len = gs.len();
    let mut out: Vec<[R; 2]> = vec![[R::zero(), R::zero()]; len];
    let mut stable = a.clone();
    for n in 0..len {
        out[n][0] = stable.clone();
        stable = split.stable.clone() * stable + gs[n][0].clone();
    }
    let mut acc = R::zero();
    for n in (0..len).rev() {
        acc = (acc - gs[n][1].clone()) / split.unstable.clone();
        out[n][1] = acc.clone();
    }
    out
}

fn sup_diff<R: Real>(a: &[[R; 2]], b: &[[R; 2]]) -> f64 {
    a.iter()
        .zip(b)
        .flat_map(|(x, y)| [(x[0].clone() - y[0].clone()).abs(), (x[1].clone() - y[1].clone()).abs()])
        .map(|d| d.to_f64())
        .fold(0.0, f64::max)
}

/// `g(n, z)`: the nonlinear part of the map in eigen coordinates at cycle `n`.
pub type Remainder<'a, R> = dyn Fn(usize, &[R; 2]) -> Result<[R; 2]> + 'a;

/// Successive approximation for `θ_n`, `n = n0..=H`, with the remainder
/// `g(s, z)` supplied by the caller.
pub fn solve_theta_with<R: Real>(
    g: &Remainder<'_, R>,
    split: &SpectralSplit<R>,
    a: f64,
    cfg: &ManifoldConfig,
) -> Result<ThetaSolution<R>> {
    cfg.validate()?;
    if !(a.abs() <= cfg.a_max) {
        return Err(Error::invalid("a", format!("|a| must not exceed a_max = {}", cfg.a_max)));
    }
    let len = cfg.horizon - cfg.n0 + 1;
    let av = R::from_f64(a);
    let eval = |theta: &[[R; 2]]| -> Result<Vec<[R; 2]>> {
        theta
            .iter()
            .enumerate()
            .map(|(i, z)| g(cfg.n0 + i, z))
            .collect()
    };
    let scale = cfg.a_max;
    let tol = cfg.sweep_tol * scale;
    let floor = stall_floor_for::<R>() * scale;

    let mut theta: Vec<[R; 2]> = vec![[R::zero(), R::zero()]; len];
    let mut updates = Vec::new();
    let mut strikes = 0;
    let mut gs = eval(&theta)?;
    for sweep_idx in 0..cfg.iters {
        let next = sweep(split, &av, &gs);
        let update = sup_diff(&next, &theta);
        theta = next;
        gs = eval(&theta)?;
        let prev = updates.last().copied();
        updates.push(update);
        if !update.is_finite() {
            return Err(Error::DivergenceDetected { sweep: sweep_idx, update });
        }
        if update <= tol {
            break;
        }
        if let Some(prev) = prev {
            if update > 0.5 * prev {
                if update <= floor {
                    break;
                }
                strikes += 1;
                if strikes >= 3 {
                    return Err(Error::DivergenceDetected { sweep: sweep_idx, update });
                }
            } else {
                strikes = 0;
            }
        }
    }

    let check = sweep(split, &av, &gs);
    let integral_residual = sup_diff(&check, &theta);
    let mut difference_residual: f64 = 0.0;
    for n in 0..len - 1 {
        let s = split.stable.clone() * theta[n][0].clone() + gs[n][0].clone();
        let u = split.unstable.clone() * theta[n][1].clone() + gs[n][1].clone();
        let d0 = (s - theta[n + 1][0].clone()).abs().to_f64();
        let d1 = (u - theta[n + 1][1].clone()).abs().to_f64();
        difference_residual = difference_residual.max(d0).max(d1);
    }
    let tail = (gs[len - 1][1].clone() / split.unstable.clone()).abs().to_f64();
    if !(tail <= TAIL_TOL) {
        return Err(Error::TailTruncationTooCoarse { tail });
    }
    Ok(ThetaSolution {
        n0: cfg.n0,
        theta,
        sweeps: updates.len(),
        updates,
        integral_residual,
        difference_residual,
        tail,
    })
}

/// [`solve_theta_with`] for the remainder of the full impact map.
pub fn solve_theta<R: Real>(
    ctx: &ManifoldContext<R>,
    a: f64,
    cfg: &ManifoldConfig,
) -> Result<ThetaSolution<R>> {
    if cfg.horizon > ctx.cycles() {
        return Err(Error::invalid("horizon", "exceeds the tabulated reference orbit"));
    }
    solve_theta_with(&|m, z| ctx.eigen_remainder(m, z), &ctx.split, a, cfg)
}

#[derive(Debug, Clone)]
pub struct ManifoldSample<R = f64> {
    pub a: f64,
    /// Pulled back to cycle zero.
    pub state: ImpactState<R>,
    /// The manifold point at cycle `n0`.
    pub state_at_n0: ImpactState<R>,
    pub theta_residual: f64,
    pub difference_residual: f64,
    pub sweeps: usize,
    /// Fitted per-cycle contraction of the distance to the orbit; zero on the orbit itself.
    pub decay_ratio: f64,
}

impl<R: Real> ManifoldSample<R> {
    /// Accepted if the integral equation holds to [`THETA_RESIDUAL_TOL`] and the
    /// orbit contracts to within [`DECAY_RATIO_TOL`] of `λ_s` (or is on the orbit).
    pub fn accepted(&self, lambda_s: f64) -> bool {
        let decay_ok = if self.a == 0.0 {
            self.decay_ratio == 0.0
        } else {
            (self.decay_ratio / lambda_s.abs() - 1.0).abs() < DECAY_RATIO_TOL
        };
        self.theta_residual < THETA_RESIDUAL_TOL && decay_ok
    }
}

pub const THETA_RESIDUAL_TOL: f64 = 1e-10;
pub const DECAY_RATIO_TOL: f64 = 0.2;

#[derive(Debug, Clone, Serialize)]
pub struct SampleFailure {
    pub a: f64,
    pub reason: String,
}

#[derive(Debug, Clone)]
pub struct ManifoldRun<R = f64> {
    pub samples: Vec<ManifoldSample<R>>,
    pub failures: Vec<SampleFailure>,
    /// `a_max` after halvings.
    pub a_max: f64,
    pub halvings: u32,
}

/// Samples the manifold at cycle `n0` for `a` evenly spaced in `[-a_max, a_max]`
/// and pulls each point back to cycle zero.
pub fn manifold_at_n0<R: Real>(ctx: &ManifoldContext<R>, cfg: &ManifoldConfig) -> Result<ManifoldRun<R>> {
    cfg.validate()?;
    if cfg.decay_to > ctx.cycles() {
        return Err(Error::invalid("decay_to", "exceeds the tabulated reference orbit"));
    }
    let mut cfg = cfg.clone();
    let mut halvings = 0;
    'attempt: loop {
        let mut samples = Vec::new();
        let mut failures = Vec::new();
        for a in linspace(-cfg.a_max, cfg.a_max, cfg.samples) {
            match manifold_sample(ctx, a, &cfg) {
                Ok(s) => samples.push(s),
                Err(Error::DivergenceDetected { .. }) if halvings < cfg.max_halvings => {
                    halvings += 1;
                    cfg.a_max /= 2.0;
                    continue 'attempt;
                }
                Err(e) => failures.push(SampleFailure {
                    a,
                    reason: e.to_string(),
                }),
            }
        }
        return Ok(ManifoldRun {
            samples,
            failures,
            a_max: cfg.a_max,
            halvings,
        });
    }
}

/// One point of the manifold, see [`manifold_at_n0`].
pub fn manifold_sample<R: Real>(
    ctx: &ManifoldContext<R>,
    a: f64,
    cfg: &ManifoldConfig,
) -> Result<ManifoldSample<R>> {
    let n = ctx.period();
    let sol = solve_theta(ctx, a, cfg)?;
    let y = ctx.split.from_eigen.apply(sol.start());
    let base = ctx.reference(cfg.n0 * n)?;
    let at_n0 = ImpactState::new(base.t.clone() + y[0].clone(), base.v.clone() + y[1].clone());
    let mut state = at_n0.clone();
    for i in 0..cfg.n0 * n {
        state = step_backward(&ctx.f, &state, &ctx.solver, ctx.g()).map_err(|e| e.at_step(i))?;
    }
    let decay_ratio = if a == 0.0 {
        0.0
    } else {
        decay_ratio(ctx, &state, cfg.decay_from, cfg.decay_to)?
    };
    Ok(ManifoldSample {
        a,
        state,
        state_at_n0: at_n0,
        theta_residual: sol.integral_residual,
        difference_residual: sol.difference_residual,
        sweeps: sol.sweeps,
        decay_ratio,
    })
}

/// Euclidean distances `|x_{mN} - x*_{mN}|` for `m = 0..=cycles` along the
/// forward orbit of `start`, taken to be at cycle zero.
pub fn orbit_distances<R: Real>(
    ctx: &ManifoldContext<R>,
    start: &ImpactState<R>,
    cycles: usize,
) -> Result<Vec<f64>> {
    let n = ctx.period();
    let mut x = start.clone();
    let mut out = Vec::with_capacity(cycles + 1);
    for m in 0..=cycles {
        if m > 0 {
            for i in 0..n {
                x = step_forward(&ctx.f, &x, &ctx.solver, ctx.g()).map_err(|e| e.at_step((m - 1) * n + i))?;
            }
        }
        let d = ctx.deviation(m * n, &x)?;
        out.push((d[0].square() + d[1].square()).sqrt().to_f64());
    }
    Ok(out)
}

/// `(d_to / d_from)^(1/(to - from))` of [`orbit_distances`].
pub fn decay_ratio<R: Real>(
    ctx: &ManifoldContext<R>,
    start: &ImpactState<R>,
    from: usize,
    to: usize,
) -> Result<f64> {
    let d = orbit_distances(ctx, start, to)?;
    Ok((d[to] / d[from]).powf(1.0 / (to - from) as f64))
}

/// Velocity-ladder check of one orbit.
#[derive(Debug, Clone, Serialize)]
pub struct ContinuumRow {
    pub a: f64,
    /// `v_{cycles·N} - v_0`, if the orbit could be followed.
    pub gain: Option<f64>,
    /// Largest `|v_{mN} - v_0 - m gV/2|` over the computed cycles.
    pub max_ladder_deviation: f64,
    pub pass: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub failure: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ContinuumReport {
    pub cycles: usize,
    pub expected_gain: f64,
    pub tolerance: f64,
    pub rows: Vec<ContinuumRow>,
    pub min_gain: Option<f64>,
    pub max_ladder_deviation: f64,
    pub all_pass: bool,
}

/// Tolerance on the velocity gain over the whole run, in units of `g`.
pub const GAIN_TOL: f64 = 1e-3;

/// Follows `start` for `cycles` cycles with the full map and compares its
/// velocities with the ladder `v_0 + m gV/2`.
pub fn ladder_check<R: Real>(
    ctx: &ManifoldContext<R>,
    a: f64,
    start: &ImpactState<R>,
    cycles: usize,
    tolerance: f64,
) -> ContinuumRow {
    let n = ctx.period();
    let gain = ctx.sched.velocity_gain_per_cycle();
    let mut x = start.clone();
    let mut worst: f64 = 0.0;
    for m in 1..=cycles {
        for i in 0..n {
            match step_forward(&ctx.f, &x, &ctx.solver, ctx.g()) {
                Ok(next) => x = next,
                Err(e) => {
                    return ContinuumRow {
                        a,
                        gain: None,
                        max_ladder_deviation: worst,
                        pass: false,
                        failure: Some(e.at_step((m - 1) * n + i).to_string()),
                    }
                }
            }
        }
        let dev = (x.v.clone() - start.v.clone() - gain.clone() * (m as f64)).abs().to_f64();
        worst = worst.max(dev);
    }
    let total = (x.v - start.v.clone()).to_f64();
    let expected = (gain * (cycles as f64)).to_f64();
    ContinuumRow {
        a,
        gain: Some(total),
        max_ladder_deviation: worst,
        pass: (total - expected).abs() < tolerance && worst.is_finite(),
        failure: None,
    }
}

/// Runs [`ladder_check`] on every sample over `cycles` cycles with tolerance
/// `GAIN_TOL · g`.
pub fn verify_continuum<R: Real>(
    ctx: &ManifoldContext<R>,
    samples: &[ManifoldSample<R>],
    cycles: usize,
) -> ContinuumReport {
    let tolerance = GAIN_TOL * ctx.g().to_f64();
    let rows: Vec<ContinuumRow> = samples
        .iter()
        .map(|s| ladder_check(ctx, s.a, &s.state, cycles, tolerance))
        .collect();
    let min_gain = rows
        .iter()
        .filter_map(|r| r.gain)
        .fold(None, |m: Option<f64>, g| Some(m.map_or(g, |m| m.min(g))));
    let max_ladder_deviation = rows.iter().map(|r| r.max_ladder_deviation).fold(0.0, f64::max);
    ContinuumReport {
        cycles,
        expected_gain: (ctx.sched.velocity_gain_per_cycle() * (cycles as f64)).to_f64(),
        tolerance,
        all_pass: !rows.is_empty() && rows.iter().all(|r| r.pass),
        rows,
        min_gain,
        max_ladder_deviation,
    }
}

/// The orbit start displaced by `distance` along the unstable eigenvector.
pub fn unstable_control_point<R: Real>(ctx: &ManifoldContext<R>, distance: f64) -> ImpactState<R> {
    let e = &ctx.split.unstable_vector;
    let x = ctx.sched.start();
    ImpactState::new(
        x.t + e[0].clone() * distance,
        x.v + e[1].clone() * distance,
    )
}

#[derive(Debug, Clone, Serialize)]
pub struct ManifoldSummary {
    pub lambda_s: f64,
    pub lambda_u: f64,
    pub trace: f64,
    pub n0: usize,
    pub horizon: usize,
    pub a_max: f64,
    pub halvings: u32,
    pub samples: usize,
    pub accepted: usize,
    pub failed: usize,
    pub continuum_cycles: usize,
    pub continuum_passed: usize,
    pub min_gain: Option<f64>,
    pub max_ladder_deviation: f64,
}

impl ManifoldSummary {
    pub fn new<R: Real>(
        ctx: &ManifoldContext<R>,
        cfg: &ManifoldConfig,
        run: &ManifoldRun<R>,
        continuum: &ContinuumReport,
    ) -> Self {
        let lambda_s = ctx.split.stable.to_f64();
        ManifoldSummary {
            lambda_s,
            lambda_u: ctx.split.unstable.to_f64(),
            trace: ctx.matrix.trace().to_f64(),
            n0: cfg.n0,
            horizon: cfg.horizon,
            a_max: run.a_max,
            halvings: run.halvings,
            samples: run.samples.len() + run.failures.len(),
            accepted: run.samples.iter().filter(|s| s.accepted(lambda_s)).count(),
            failed: run.failures.len(),
            continuum_cycles: continuum.cycles,
            continuum_passed: continuum.rows.iter().filter(|r| r.pass).count(),
            min_gain: continuum.min_gain,
            max_ladder_deviation: continuum.max_ladder_deviation,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::orbit::build_n2_schedule;
    use crate::racket::{family_coefficients, FamilyParams, OPTIMAL_S};
    use crate::real::Precise;

    fn context() -> ManifoldContext<Precise> {
        let g = Precise::one();
        let f = family_coefficients::<Precise>(&FamilyParams { s: OPTIMAL_S, g: 1.0 }).unwrap();
        let sched = build_n2_schedule(&g, 20).unwrap();
        let solver = SolverConfig::for_racket(&f, &g);
        ManifoldContext::new(f, sched, solver, 100).unwrap()
    }

    fn small_cfg() -> ManifoldConfig {
        ManifoldConfig {
            horizon: 30,
            decay_from: 5,
            decay_to: 25,
            ..ManifoldConfig::for_precision::<Precise>()
        }
    }

    #[test]
    fn config_validation() {
        let ok = ManifoldConfig::for_precision::<f64>();
        assert!(ok.validate().is_ok());
        assert!(ManifoldConfig { samples: 40, ..ok.clone() }.validate().is_err());
        assert!(ManifoldConfig { horizon: 0, ..ok.clone() }.validate().is_err());
        assert!(ManifoldConfig { a_max: 0.0, ..ok }.validate().is_err());
    }

    #[test]
    fn remainder_vanishes_on_orbit() {
        let ctx = context();
        for m in [0, 7, 30] {
            let r = ctx.remainder(m, &[Precise::zero(), Precise::zero()]).unwrap();
            assert!(r[0].abs().to_f64() < 1e-100 && r[1].abs().to_f64() < 1e-100);
        }
    }

    #[test]
    fn remainder_is_superlinear() {
        let ctx = context();
        let ratio = |h: f64| {
            let y = [Precise::from_f64(h), Precise::from_f64(-h)];
            let r = ctx.remainder(3, &y).unwrap();
            (r[0].square() + r[1].square()).sqrt().to_f64() / (h * 2f64.sqrt())
        };
        let (r3, r4) = (ratio(1e-3), ratio(1e-4));
        assert!(r4 < r3 * 10.0);
        assert!(r4 < r3);
    }

    #[test]
    fn zero_parameter_is_the_orbit() {
        let ctx = context();
        let sol = solve_theta(&ctx, 0.0, &small_cfg()).unwrap();
        assert!(sol.theta.iter().all(|z| z[0].abs().to_f64() < 1e-100 && z[1].abs().to_f64() < 1e-100));
    }

    #[test]
    fn linear_problem_decays_geometrically() {
        let ctx = context();
        let zero = |_: usize, _: &[Precise; 2]| Ok([Precise::zero(), Precise::zero()]);
        let cfg = small_cfg();
        let sol = solve_theta_with(&zero, &ctx.split, 1e-4, &cfg).unwrap();
        let ls = ctx.split.stable.to_f64();
        for (i, z) in sol.theta.iter().enumerate() {
            assert!((z[0].to_f64() - 1e-4 * ls.powi(i as i32)).abs() < 1e-18);
            assert_eq!(z[1].to_f64(), 0.0);
        }
    }

    #[test]
    fn sweeps_contract_and_residuals_small() {
        let ctx = context();
        let sol = solve_theta(&ctx, 1e-4, &small_cfg()).unwrap();
        assert!(sol.integral_residual < 1e-10);
        assert!(sol.difference_residual < 1e-9);
        let u = &sol.updates;
        for l in 3..u.len().min(40) {
            assert!(u[l] <= u[l - 1] * 0.5 || u[l] < 1e-100, "sweep {l}: {} vs {}", u[l], u[l - 1]);
        }
    }

    #[test]
    fn pullback_is_consistent() {
        let ctx = context();
        let cfg = ManifoldConfig { n0: 2, ..small_cfg() };
        let sample = manifold_sample(&ctx, 1e-4, &cfg).unwrap();
        let mut x = sample.state.clone();
        for _ in 0..cfg.n0 * ctx.period() {
            x = step_forward(&ctx.f, &x, &ctx.solver, ctx.g()).unwrap();
        }
        let (dt, dv) = (x.t - sample.state_at_n0.t.clone(), x.v - sample.state_at_n0.v.clone());
        assert!(dt.abs().to_f64() < 1e-8 && dv.abs().to_f64() < 1e-8);
        assert!(sample.accepted(ctx.split.stable.to_f64()));
    }

    #[test]
    fn divergent_remainder_is_detected() {
        let ctx = context();
        let grow = |_: usize, z: &[Precise; 2]| Ok([z[0].clone() * 3.0 + 1e-6, z[1].clone() * 30.0 + 1e-6]);
        let err = solve_theta_with(&grow, &ctx.split, 1e-4, &small_cfg()).unwrap_err();
        assert!(matches!(err, Error::DivergenceDetected { .. }));
    }
}
