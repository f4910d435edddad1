//! Orbit integration and surface-crossing detection.

use serde::{Deserialize, Serialize};

use crate::dynsys::{Point, VectorField};
use crate::error::{Error, Result};
use crate::numeric::dot;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Method {
    /// Classical fixed-step fourth order Runge–Kutta.
    Rk4 { step: f64 },
    /// Dormand–Prince 5(4) with mixed absolute/relative error control.
    Rk45 { abs_tol: f64, rel_tol: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IntegratorConfig {
    pub method: Method,
    pub max_steps: usize,
    pub horizon: f64,
    /// Target `|level|` for refined crossings.
    pub event_tol: f64,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        IntegratorConfig {
            method: Method::Rk45 {
                abs_tol: 1e-9,
                rel_tol: 1e-9,
            },
            max_steps: 1_000_000,
            horizon: 50.0,
            event_tol: 1e-12,
        }
    }
}

impl IntegratorConfig {
    pub fn rk45(tol: f64) -> Self {
        IntegratorConfig {
            method: Method::Rk45 {
                abs_tol: tol,
                rel_tol: tol,
            },
            ..Default::default()
        }
    }

    pub fn rk4(step: f64) -> Self {
        IntegratorConfig {
            method: Method::Rk4 { step },
            ..Default::default()
        }
    }

    pub fn with_horizon(mut self, horizon: f64) -> Self {
        self.horizon = horizon;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64| v > 0.0 && v.is_finite();
        match self.method {
            Method::Rk4 { step } if !positive(step) => {
                return Err(Error::Config(format!("RK4 step must be positive, got {step}")))
            }
            Method::Rk45 { abs_tol, rel_tol } if !positive(abs_tol) || !positive(rel_tol) => {
                return Err(Error::Config(format!(
                    "tolerances must be positive, got abs {abs_tol}, rel {rel_tol}"
                )))
            }
            _ => {}
        }
        if self.max_steps == 0 {
            return Err(Error::Config("max_steps must be positive".into()));
        }
        if !positive(self.horizon) {
            return Err(Error::Config(format!("horizon must be positive, got {}", self.horizon)));
        }
        if !positive(self.event_tol) {
            return Err(Error::Config("event tolerance must be positive".into()));
        }
        Ok(())
    }

    /// Nominal accuracy, used to scale tolerances in checks.
    pub fn tolerance(&self) -> f64 {
        match self.method {
            Method::Rk4 { step } => step.powi(4),
            Method::Rk45 { abs_tol, rel_tol } => abs_tol.max(rel_tol),
        }
    }
}

/// A sampled solution curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Orbit {
    pub field_name: String,
    pub x0: Point,
    pub samples: Vec<(f64, Point)>,
}

impl Orbit {
    pub fn end(&self) -> &(f64, Point) {
        self.samples.last().expect("orbit has at least one sample")
    }
}

// Dormand–Prince tableau.
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
// error weights: b5 - b4
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum StepOutcome {
    Inside,
    Left,
}

/// Integrates `ẋ = sign · P(x)` in internal time `tau ≥ 0`.
struct Stepper<'a> {
    field: &'a VectorField,
    sign: f64,
    cfg: &'a IntegratorConfig,
    tau: f64,
    x: Point,
    fx: Point,
    h: f64,
    steps: usize,
}

impl<'a> Stepper<'a> {
    fn new(field: &'a VectorField, x0: &[f64], sign: f64, cfg: &'a IntegratorConfig) -> Result<Self> {
        let p = field.eval(x0)?;
        let fx: Point = p.iter().map(|v| sign * v).collect();
        let h = match cfg.method {
            Method::Rk4 { step } => step,
            Method::Rk45 { abs_tol, rel_tol } => initial_step(field, sign, x0, &fx, abs_tol, rel_tol),
        };
        Ok(Stepper {
            field,
            sign,
            cfg,
            tau: 0.0,
            x: x0.to_vec(),
            fx,
            h,
            steps: 0,
        })
    }

    fn signed_time(&self) -> f64 {
        self.sign * self.tau
    }

    fn rhs(&self, x: &[f64], out: &mut [f64]) -> bool {
        if self.field.velocity(x, out).is_err() {
            return false;
        }
        let mut ok = true;
        for o in out.iter_mut() {
            *o *= self.sign;
            ok &= o.is_finite();
        }
        ok
    }

    /// One explicit step of size `h` from `(x, fx)`; returns the new state and the
    /// scaled error estimate (zero for RK4).
    fn trial(&self, x: &[f64], fx: &[f64], h: f64) -> Option<(Point, f64)> {
        let n = x.len();
        match self.cfg.method {
            Method::Rk4 { .. } => {
                let mut k2 = vec![0.0; n];
                let mut k3 = vec![0.0; n];
                let mut k4 = vec![0.0; n];
                let mut tmp: Point = (0..n).map(|i| x[i] + 0.5 * h * fx[i]).collect();
                if !self.rhs(&tmp, &mut k2) {
                    return None;
                }
                for i in 0..n {
                    tmp[i] = x[i] + 0.5 * h * k2[i];
                }
                if !self.rhs(&tmp, &mut k3) {
                    return None;
                }
                for i in 0..n {
                    tmp[i] = x[i] + h * k3[i];
                }
                if !self.rhs(&tmp, &mut k4) {
                    return None;
                }
                let out: Point = (0..n)
                    .map(|i| x[i] + h / 6.0 * (fx[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
                    .collect();
                out.iter().all(|v| v.is_finite()).then_some((out, 0.0))
            }
            Method::Rk45 { abs_tol, rel_tol } => {
                let mut k = vec![vec![0.0; n]; 7];
                k[0].copy_from_slice(fx);
                let mut tmp = vec![0.0; n];
                for s in 1..7 {
                    for i in 0..n {
                        let mut acc = 0.0;
                        for (j, kj) in k.iter().enumerate().take(s) {
                            acc += A[s][j] * kj[i];
                        }
                        tmp[i] = x[i] + h * acc;
                    }
                    if !self.rhs(&tmp, &mut k[s]) {
                        return None;
                    }
                }
                // stage 7 is evaluated at the 5th-order solution (FSAL)
                let mut x5 = vec![0.0; n];
                for i in 0..n {
                    let mut acc = 0.0;
                    for j in 0..6 {
                        acc += A[6][j] * k[j][i];
                    }
                    x5[i] = x[i] + h * acc;
                }
                let mut err = 0.0;
                for i in 0..n {
                    let mut e = 0.0;
                    for j in 0..7 {
                        e += E[j] * k[j][i];
                    }
                    let sc = abs_tol + rel_tol * x[i].abs().max(x5[i].abs());
                    err += (h * e / sc).powi(2);
                }
                let err = (err / n as f64).sqrt();
                (err.is_finite() && x5.iter().all(|v| v.is_finite())).then_some((x5, err))
            }
        }
    }

    /// Takes one accepted step without passing `tau_end`.
    fn advance(&mut self, tau_end: f64) -> Result<StepOutcome> {
        let min_h = 1e-14 * self.tau.abs().max(1.0);
        loop {
            if self.steps >= self.cfg.max_steps {
                return Err(Error::StepBudget {
                    max_steps: self.cfg.max_steps,
                    t: self.signed_time(),
                });
            }
            let remaining = tau_end - self.tau;
            let clamped = self.h >= remaining;
            let h = if clamped { remaining } else { self.h };
            let trial = self.trial(&self.x, &self.fx, h);
            let (x_new, err) = match (trial, self.cfg.method) {
                (Some(t), _) => t,
                (None, Method::Rk4 { .. }) => {
                    return Err(Error::NonFinite { point: self.x.clone() });
                }
                (None, Method::Rk45 { .. }) => {
                    self.h = 0.25 * h;
                    if self.h < min_h {
                        return Err(Error::StepUnderflow { t: self.signed_time() });
                    }
                    continue;
                }
            };
            if err > 1.0 {
                self.h = h * (0.9 * err.powf(-0.2)).max(0.2);
                if self.h < min_h {
                    return Err(Error::StepUnderflow { t: self.signed_time() });
                }
                continue;
            }
            let mut f_new = vec![0.0; x_new.len()];
            if !self.rhs(&x_new, &mut f_new) {
                return Err(Error::NonFinite { point: x_new });
            }
            self.steps += 1;
            self.tau = if clamped { tau_end } else { self.tau + h };
            self.x = x_new;
            self.fx = f_new;
            if let Method::Rk45 { .. } = self.cfg.method {
                let factor = if err == 0.0 {
                    5.0
                } else {
                    (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
                };
                let proposal = h * factor;
                self.h = if clamped { proposal.max(self.h) } else { proposal };
            }
            return Ok(if self.field.domain().contains(&self.x) {
                StepOutcome::Inside
            } else {
                StepOutcome::Left
            });
        }
    }

    /// Re-integrates one step of length `s` from a saved bracket start.
    fn substep(&self, x: &[f64], s: f64) -> Option<Point> {
        if s == 0.0 {
            return Some(x.to_vec());
        }
        let mut fx = vec![0.0; x.len()];
        if !self.rhs(x, &mut fx) {
            return None;
        }
        self.trial(x, &fx, s).map(|(p, _)| p)
    }
}

fn initial_step(field: &VectorField, sign: f64, x0: &[f64], f0: &[f64], atol: f64, rtol: f64) -> f64 {
    let n = x0.len() as f64;
    let sc: Vec<f64> = x0.iter().map(|v| atol + rtol * v.abs()).collect();
    let rms = |v: &[f64]| (v.iter().zip(&sc).map(|(a, s)| (a / s).powi(2)).sum::<f64>() / n).sqrt();
    let d0 = rms(x0);
    let d1 = rms(f0);
    let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    let x1: Vec<f64> = x0.iter().zip(f0).map(|(x, f)| x + h0 * f).collect();
    let mut f1 = vec![0.0; x0.len()];
    if field.velocity(&x1, &mut f1).is_err() {
        return h0;
    }
    let diff: Vec<f64> = f1.iter().zip(f0).map(|(a, b)| sign * a - b).collect();
    let d2 = rms(&diff) / h0;
    let h1 = if d1.max(d2) <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / d1.max(d2)).powf(0.2)
    };
    let h = (100.0 * h0).min(h1);
    if h.is_finite() && h > 0.0 {
        h
    } else {
        1e-6
    }
}

fn check_horizon(t: f64, cfg: &IntegratorConfig) -> Result<()> {
    cfg.validate()?;
    if !t.is_finite() || t.abs() > cfg.horizon {
        return Err(Error::Horizon {
            t,
            horizon: cfg.horizon,
        });
    }
    Ok(())
}

fn direction_sign(t: f64) -> f64 {
    if t < 0.0 {
        -1.0
    } else {
        1.0
    }
}

/// `x(t)` for the IVP started at `x0`. Negative `t` integrates `-P`.
pub fn flow(field: &VectorField, x0: &[f64], t: f64, cfg: &IntegratorConfig) -> Result<Point> {
    check_horizon(t, cfg)?;
    let mut st = Stepper::new(field, x0, direction_sign(t), cfg)?;
    let tau_end = t.abs();
    while st.tau < tau_end {
        if st.advance(tau_end)? == StepOutcome::Left {
            return Err(Error::LeftDomain {
                t: st.signed_time(),
                x: st.x,
            });
        }
    }
    Ok(st.x)
}

/// Samples at every accepted step over `t_span`, where `x0` is the state at `t_span.0`.
pub fn trace_orbit(
    field: &VectorField,
    x0: &[f64],
    t_span: (f64, f64),
    cfg: &IntegratorConfig,
) -> Result<Orbit> {
    let (t0, t1) = t_span;
    let dt = t1 - t0;
    check_horizon(dt, cfg)?;
    let sign = direction_sign(dt);
    let mut st = Stepper::new(field, x0, sign, cfg)?;
    let mut samples = vec![(t0, x0.to_vec())];
    let tau_end = dt.abs();
    while st.tau < tau_end {
        let out = st.advance(tau_end)?;
        samples.push((t0 + sign * st.tau, st.x.clone()));
        if out == StepOutcome::Left {
            return Err(Error::LeftDomain {
                t: t0 + st.signed_time(),
                x: st.x,
            });
        }
    }
    Ok(Orbit {
        field_name: field.name().to_string(),
        x0: x0.to_vec(),
        samples,
    })
}

/// Samples at `n + 1` uniformly spaced times over `t_span`; the integrator stops exactly
/// at each sample time.
pub fn trace_orbit_uniform(
    field: &VectorField,
    x0: &[f64],
    t_span: (f64, f64),
    n: usize,
    cfg: &IntegratorConfig,
) -> Result<Orbit> {
    let (t0, t1) = t_span;
    let dt = t1 - t0;
    check_horizon(dt, cfg)?;
    let sign = direction_sign(dt);
    let mut st = Stepper::new(field, x0, sign, cfg)?;
    let mut samples = vec![(t0, x0.to_vec())];
    let n = n.max(1);
    if dt != 0.0 {
        for k in 1..=n {
            let tau_k = dt.abs() * k as f64 / n as f64;
            while st.tau < tau_k {
                if st.advance(tau_k)? == StepOutcome::Left {
                    return Err(Error::LeftDomain {
                        t: t0 + st.signed_time(),
                        x: st.x,
                    });
                }
            }
            samples.push((t0 + sign * tau_k, st.x.clone()));
        }
    }
    Ok(Orbit {
        field_name: field.name().to_string(),
        x0: x0.to_vec(),
        samples,
    })
}

/// A hypersurface given by a level function with a parameter map.
pub trait Section: Sync {
    fn level(&self, x: &[f64]) -> f64;
    /// Surface parameters of a point on (or near) the level set.
    fn params(&self, x: &[f64]) -> Vec<f64>;
    /// Whether the parameters lie in the parameterized patch.
    fn in_patch(&self, params: &[f64]) -> bool {
        params.iter().all(|t| *t > 0.0 && *t < 1.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossingEvent {
    pub t: f64,
    pub x: Point,
    pub params: Vec<f64>,
    /// Sign of `⟨∇L, P⟩` at the crossing; `0` for a grazing contact.
    pub direction: i8,
    pub grazing: bool,
    pub in_patch: bool,
}

fn level_gradient(section: &dyn Section, x: &[f64]) -> Vec<f64> {
    let mut xp = x.to_vec();
    (0..x.len())
        .map(|j| {
            let h = 1e-6 * x[j].abs().max(1.0);
            xp[j] = x[j] + h;
            let lp = section.level(&xp);
            xp[j] = x[j] - h;
            let lm = section.level(&xp);
            xp[j] = x[j];
            (lp - lm) / (2.0 * h)
        })
        .collect()
}

fn make_event(field: &VectorField, section: &dyn Section, t: f64, x: Point, grazing: bool) -> CrossingEvent {
    let params = section.params(&x);
    let in_patch = section.in_patch(&params);
    let direction = if grazing {
        0
    } else {
        let mut p = vec![0.0; x.len()];
        let _ = field.velocity(&x, &mut p);
        let d = dot(&level_gradient(section, &x), &p);
        if d > 0.0 {
            1
        } else if d < 0.0 {
            -1
        } else {
            0
        }
    };
    CrossingEvent {
        t,
        x,
        params,
        direction,
        grazing,
        in_patch,
    }
}

fn bisect(st: &Stepper, section: &dyn Section, tau_a: f64, x_a: &[f64], l_a: f64, h: f64) -> (f64, Point) {
    let tol = st.cfg.event_tol;
    let (mut lo, mut hi) = (0.0, h);
    let mut best = (h, st.substep(x_a, h).unwrap_or_else(|| x_a.to_vec()));
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let Some(xm) = st.substep(x_a, mid) else { break };
        let lm = section.level(&xm);
        best = (mid, xm);
        if lm.abs() <= tol {
            break;
        }
        if (lm > 0.0) == (l_a > 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    (tau_a + best.0, best.1)
}

/// Options bounding a one-sided crossing search.
#[derive(Debug, Clone, Copy)]
struct SearchLimits {
    horizon: f64,
    max_in_patch: usize,
}

fn search_direction(
    field: &VectorField,
    x0: &[f64],
    section: &dyn Section,
    sign: f64,
    limits: SearchLimits,
    cfg: &IntegratorConfig,
    events: &mut Vec<CrossingEvent>,
) -> Result<()> {
    let tol = cfg.event_tol;
    let mut st = Stepper::new(field, x0, sign, cfg)?;
    let mut prev_tau = 0.0;
    let mut prev_x = x0.to_vec();
    let mut prev_l = section.level(x0);
    // sign of the last level value not on the surface, and a pending touch point
    let mut last_sign = if prev_l.abs() <= tol { 0.0 } else { prev_l.signum() };
    let mut pending: Option<(f64, Point, f64)> = None;
    let mut found = 0usize;
    let at_start_on_surface = prev_l.abs() <= tol;
    while st.tau < limits.horizon {
        let h_before = st.tau;
        let outcome = match st.advance(limits.horizon) {
            Ok(o) => o,
            Err(e) => return Err(e),
        };
        let h = st.tau - h_before;
        let l = section.level(&st.x);
        if l.abs() <= tol {
            if pending.is_none() && !(at_start_on_surface && prev_tau == 0.0 && last_sign == 0.0) {
                pending = Some((st.tau, st.x.clone(), last_sign));
            }
        } else {
            let s = l.signum();
            if let Some((tau_p, x_p, before)) = pending.take() {
                let grazing = before != 0.0 && before == s;
                let ev = make_event(field, section, sign * tau_p, x_p, grazing);
                found += usize::from(ev.in_patch && !grazing);
                events.push(ev);
            } else if prev_l.abs() > tol && s != prev_l.signum() {
                let (tau_c, x_c) = bisect(&st, section, prev_tau, &prev_x, prev_l, h);
                let ev = make_event(field, section, sign * tau_c, x_c, false);
                found += usize::from(ev.in_patch);
                events.push(ev);
            }
            last_sign = s;
        }
        prev_tau = st.tau;
        prev_x.clone_from(&st.x);
        prev_l = l;
        if outcome == StepOutcome::Left || found >= limits.max_in_patch {
            break;
        }
    }
    if let Some((tau_p, x_p, _)) = pending {
        events.push(make_event(field, section, sign * tau_p, x_p, false));
    }
    Ok(())
}

pub(crate) fn find_crossings_limited(
    field: &VectorField,
    x0: &[f64],
    section: &dyn Section,
    horizon: f64,
    max_in_patch: usize,
    cfg: &IntegratorConfig,
) -> Result<Vec<CrossingEvent>> {
    cfg.validate()?;
    if !(horizon > 0.0) {
        return Err(Error::Config(format!("horizon must be positive, got {horizon}")));
    }
    field.eval(x0)?;
    let mut events = Vec::new();
    if section.level(x0).abs() <= cfg.event_tol {
        events.push(make_event(field, section, 0.0, x0.to_vec(), false));
    }
    let limits = SearchLimits {
        horizon,
        max_in_patch,
    };
    for sign in [1.0, -1.0] {
        search_direction(field, x0, section, sign, limits, cfg, &mut events)?;
    }
    events.sort_by(|a, b| a.t.total_cmp(&b.t));
    Ok(events)
}

/// All crossings of the level set along the orbit of `x0` within `±horizon`, sorted by `t`.
///
/// Leaving the domain ends the search in that direction; other integration errors propagate.
pub fn find_crossings(
    field: &VectorField,
    x0: &[f64],
    section: &dyn Section,
    horizon: f64,
    cfg: &IntegratorConfig,
) -> Result<Vec<CrossingEvent>> {
    find_crossings_limited(field, x0, section, horizon, usize::MAX, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynsys::builtin;
    use std::f64::consts::{FRAC_PI_2, LN_2, PI};

    struct Line {
        axis: usize,
        value: f64,
        lo: f64,
        hi: f64,
    }

    impl Section for Line {
        fn level(&self, x: &[f64]) -> f64 {
            x[self.axis] - self.value
        }
        fn params(&self, x: &[f64]) -> Vec<f64> {
            vec![(x[1 - self.axis] - self.lo) / (self.hi - self.lo)]
        }
    }

    #[test]
    fn source_doubles_in_ln2() {
        let f = builtin("source-a").unwrap();
        let x = flow(&f, &[1.0, 0.0], LN_2, &IntegratorConfig::default()).unwrap();
        assert!((x[0] - 2.0).abs() < 1e-8 && x[1].abs() < 1e-12);
    }

    #[test]
    fn rotation_quarter_turn() {
        let f = builtin("rotation-c").unwrap();
        let x = flow(&f, &[1.0, 0.0], FRAC_PI_2, &IntegratorConfig::default()).unwrap();
        assert!(x[0].abs() < 1e-8 && (x[1] + 1.0).abs() < 1e-8, "{x:?}");
    }

    #[test]
    fn zero_time_is_identity() {
        let f = builtin("limit-cycle").unwrap();
        assert_eq!(flow(&f, &[0.3, 0.2], 0.0, &IntegratorConfig::default()).unwrap(), vec![0.3, 0.2]);
        let o = trace_orbit(&f, &[0.3, 0.2], (0.0, 0.0), &IntegratorConfig::default()).unwrap();
        assert_eq!(o.samples.len(), 1);
    }

    #[test]
    fn horizon_and_domain_errors() {
        let f = builtin("source-a").unwrap();
        let cfg = IntegratorConfig::default();
        assert!(matches!(flow(&f, &[1.0, 0.0], 51.0, &cfg), Err(Error::Horizon { .. })));
        match flow(&f, &[1.0, 0.0], 5.0, &cfg) {
            Err(Error::LeftDomain { t, x }) => {
                assert!(t > 0.0 && t < 5.0);
                assert!(x[0] > 10.0);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn step_budget() {
        let f = builtin("rotation-c").unwrap();
        let cfg = IntegratorConfig {
            max_steps: 3,
            ..Default::default()
        };
        assert!(matches!(flow(&f, &[1.0, 0.0], 10.0, &cfg), Err(Error::StepBudget { .. })));
    }

    #[test]
    fn rk4_matches_rk45() {
        let f = builtin("limit-cycle").unwrap();
        let a = flow(&f, &[0.5, 0.5], 1.0, &IntegratorConfig::default()).unwrap();
        let b = flow(&f, &[0.5, 0.5], 1.0, &IntegratorConfig::rk4(1e-3)).unwrap();
        assert!((a[0] - b[0]).abs() < 1e-9 && (a[1] - b[1]).abs() < 1e-9);
    }

    #[test]
    fn hyperbolic_backward_crossing() {
        let f = builtin("hyperbolic-b").unwrap();
        let s = Line {
            axis: 0,
            value: 1.0,
            lo: 0.0,
            hi: 4.0,
        };
        let ev = find_crossings(&f, &[0.5, 2.0], &s, 50.0, &IntegratorConfig::default()).unwrap();
        assert_eq!(ev.len(), 1);
        assert!((ev[0].t + LN_2).abs() < 1e-9, "{}", ev[0].t);
        assert!((ev[0].x[1] - 1.0).abs() < 1e-9);
        assert!((ev[0].params[0] - 0.25).abs() < 1e-9);
        assert_eq!(ev[0].direction, -1);
    }

    #[test]
    fn rotation_recurs() {
        let f = builtin("rotation-c").unwrap();
        let s = Line {
            axis: 0,
            value: 1.0,
            lo: 0.0,
            hi: 1.0,
        };
        let ev = find_crossings(&f, &[1.0, 0.5], &s, 4.0 * PI, &IntegratorConfig::default()).unwrap();
        assert!(ev.iter().filter(|e| e.in_patch).count() >= 2, "{ev:?}");
    }

    #[test]
    fn start_on_surface() {
        let f = builtin("hyperbolic-b").unwrap();
        let s = Line {
            axis: 0,
            value: 1.0,
            lo: 0.0,
            hi: 4.0,
        };
        let ev = find_crossings(&f, &[1.0, 1.2], &s, 50.0, &IntegratorConfig::default()).unwrap();
        assert_eq!(ev.len(), 1);
        assert_eq!(ev[0].t, 0.0);
        assert!((ev[0].params[0] - 0.3).abs() < 1e-12);
    }
}
