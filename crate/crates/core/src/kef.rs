//! Koopman eigenfunctions built on a chart, minimal sets and residual checks.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::chart::Chart;
use crate::dynsys::{Point, VectorField};
use crate::error::{Error, Result};
use crate::numeric::{halton, numerical_rank, singular_values};
use crate::odeint::{self, IntegratorConfig};

type Profile = dyn Fn(&[f64]) -> Complex64 + Send + Sync;

/// `Φ(x) = f(h(x)) e^{λ m(x)}`.
#[derive(Clone)]
pub struct KoopmanEigenfunction {
    lambda: Complex64,
    profile: Arc<Profile>,
    chart: Arc<Chart>,
}

impl fmt::Debug for KoopmanEigenfunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("KoopmanEigenfunction")
            .field("lambda", &self.lambda)
            .field("field", &self.chart.field().name())
            .finish_non_exhaustive()
    }
}

pub fn build_kef<F>(chart: Arc<Chart>, lambda: Complex64, profile: F) -> KoopmanEigenfunction
where
    F: Fn(&[f64]) -> Complex64 + Send + Sync + 'static,
{
    KoopmanEigenfunction {
        lambda,
        profile: Arc::new(profile),
        chart,
    }
}

impl KoopmanEigenfunction {
    pub fn lambda(&self) -> Complex64 {
        self.lambda
    }

    pub fn chart(&self) -> &Chart {
        &self.chart
    }

    pub fn profile(&self, tau: &[f64]) -> Complex64 {
        (self.profile)(tau)
    }

    /// Evaluates from an already located chart point.
    pub fn from_chart_values(&self, h: &[f64], m: f64) -> Complex64 {
        (self.profile)(h) * (self.lambda * m).exp()
    }

    pub fn eval(&self, x: &[f64]) -> Result<Complex64> {
        let p = self.chart.locate(x)?;
        let v = self.from_chart_values(&p.h, p.m);
        if !v.is_finite() {
            return Err(Error::NonFinite { point: x.to_vec() });
        }
        Ok(v)
    }

    /// Product eigenfunction with eigenvalue `λ1 + λ2` on the same chart.
    pub fn product(&self, other: &KoopmanEigenfunction) -> KoopmanEigenfunction {
        let (f, g) = (self.profile.clone(), other.profile.clone());
        KoopmanEigenfunction {
            lambda: self.lambda + other.lambda,
            profile: Arc::new(move |t| f(t) * g(t)),
            chart: self.chart.clone(),
        }
    }
}

fn check_stencil(field: &VectorField, x: &[f64]) -> Result<()> {
    if !field.domain().contains(x) {
        return Err(Error::OutOfDomain { point: x.to_vec() });
    }
    Ok(())
}

/// `∇φ(x)·P(x) − λ φ(x)` with a central-difference gradient of step `fd_step`.
pub fn kpde_residual<F>(phi: F, lambda: Complex64, field: &VectorField, x: &[f64], fd_step: f64) -> Result<Complex64>
where
    F: Fn(&[f64]) -> Result<Complex64>,
{
    if !(fd_step > 0.0) {
        return Err(Error::Config("finite-difference step must be positive".into()));
    }
    let finite = |v: Complex64, at: &[f64]| {
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::NonFinite { point: at.to_vec() })
        }
    };
    let p = field.eval(x)?;
    let center = finite(phi(x)?, x)?;
    let mut xp = x.to_vec();
    let mut directional = Complex64::new(0.0, 0.0);
    for j in 0..x.len() {
        xp[j] = x[j] + fd_step;
        check_stencil(field, &xp)?;
        let fp = finite(phi(&xp)?, &xp)?;
        xp[j] = x[j] - fd_step;
        check_stencil(field, &xp)?;
        let fm = finite(phi(&xp)?, &xp)?;
        xp[j] = x[j];
        directional += (fp - fm) / (2.0 * fd_step) * p[j];
    }
    Ok(directional - lambda * center)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrbitEigenReport {
    pub max_deviation: f64,
    /// Times at which the phase of `φ(x(t))/φ(x0)` jumps by more than `π` between samples.
    pub branch_jumps: Vec<f64>,
    pub samples: usize,
}

/// Compares `φ(x(t))` with `φ(x0) e^{λt}` on 200 uniform samples of `[0, T]`.
pub fn orbit_eigen_check<F>(
    phi: F,
    lambda: Complex64,
    field: &VectorField,
    x0: &[f64],
    t_end: f64,
    cfg: &IntegratorConfig,
) -> Result<OrbitEigenReport>
where
    F: Fn(&[f64]) -> Result<Complex64>,
{
    let phi0 = phi(x0)?;
    if !(phi0.norm() > 0.0) || !phi0.is_finite() {
        return Err(Error::VanishingEigenfunction { x: x0.to_vec() });
    }
    if t_end == 0.0 {
        return Ok(OrbitEigenReport {
            max_deviation: 0.0,
            branch_jumps: Vec::new(),
            samples: 1,
        });
    }
    let orbit = odeint::trace_orbit_uniform(field, x0, (0.0, t_end), 200, cfg)?;
    let mut max_deviation: f64 = 0.0;
    let mut branch_jumps = Vec::new();
    let mut prev_phase = 0.0;
    for (t, x) in &orbit.samples {
        let v = phi(x)?;
        let expected = phi0 * (lambda * *t).exp();
        max_deviation = max_deviation.max((v - expected).norm() / expected.norm());
        let phase = (v / phi0).arg();
        if (phase - prev_phase).abs() > PI {
            branch_jumps.push(*t);
        }
        prev_phase = phase;
    }
    Ok(OrbitEigenReport {
        max_deviation,
        branch_jumps,
        samples: orbit.samples.len(),
    })
}

/// `g(flow(x, τ))`.
pub fn koopman_advance<G, T>(g: G, field: &VectorField, x: &[f64], tau: f64, cfg: &IntegratorConfig) -> Result<T>
where
    G: Fn(&[f64]) -> T,
{
    Ok(g(&odeint::flow(field, x, tau, cfg)?))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankSample {
    pub x: Point,
    pub singular_values: Vec<f64>,
    pub rank: usize,
}

/// `Φ_i = h_i e^m` for `i < N` and `Φ_N = e^m`, all with eigenvalue 1.
#[derive(Debug, Clone)]
pub struct MinimalSet {
    pub members: Vec<KoopmanEigenfunction>,
    pub rank_report: Vec<RankSample>,
    chart: Arc<Chart>,
}

/// Relative singular-value threshold of the rank audit.
pub const RANK_TOL: f64 = 1e-8;
/// Finite-difference step of the minimal-set Jacobian.
pub const JACOBIAN_STEP: f64 = 1e-5;

impl MinimalSet {
    /// Members without the rank audit.
    pub fn unaudited(chart: Arc<Chart>) -> MinimalSet {
        let n = chart.dim();
        let one = Complex64::new(1.0, 0.0);
        let members = (0..n)
            .map(|i| {
                if i + 1 < n {
                    build_kef(chart.clone(), one, move |t: &[f64]| Complex64::new(t[i], 0.0))
                } else {
                    build_kef(chart.clone(), one, move |_: &[f64]| one)
                }
            })
            .collect();
        MinimalSet {
            members,
            rank_report: Vec::new(),
            chart,
        }
    }

    pub fn dim(&self) -> usize {
        self.members.len()
    }

    /// All member values from a single chart evaluation.
    pub fn values(&self, x: &[f64]) -> Result<Vec<f64>> {
        let p = self.chart.locate(x)?;
        let e = p.m.exp();
        let mut out: Vec<f64> = p.h.iter().map(|h| h * e).collect();
        out.push(e);
        Ok(out)
    }

    /// `J[i][j] = ∂Φ_i/∂x_j` by central differences.
    pub fn jacobian(&self, x: &[f64], step: f64) -> Result<Vec<Vec<f64>>> {
        let n = self.dim();
        let mut jac = vec![vec![0.0; n]; n];
        let mut xp = x.to_vec();
        for j in 0..n {
            xp[j] = x[j] + step;
            let fp = self.values(&xp)?;
            xp[j] = x[j] - step;
            let fm = self.values(&xp)?;
            xp[j] = x[j];
            for i in 0..n {
                jac[i][j] = (fp[i] - fm[i]) / (2.0 * step);
            }
        }
        Ok(jac)
    }

    pub fn rank_at(&self, x: &[f64]) -> Result<RankSample> {
        let jac = self.jacobian(x, JACOBIAN_STEP)?;
        let sv = singular_values(&jac);
        Ok(RankSample {
            x: x.to_vec(),
            rank: numerical_rank(&sv, RANK_TOL),
            singular_values: sv,
        })
    }
}

/// Audit points: `flow(X(τ), t)` with `τ` in `[0.1, 0.9]^{N-1}` and `t ∈ {-0.1, 0, 0.1}`.
pub fn audit_points(chart: &Chart, n_params: usize) -> Result<Vec<Point>> {
    let k = chart.dim() - 1;
    let count = if k == 0 { 1 } else { n_params };
    let mut out = Vec::new();
    for i in 1..=count {
        let tau: Vec<f64> = halton(i, k).iter().map(|u| 0.1 + 0.8 * u).collect();
        for t in [-0.1, 0.0, 0.1] {
            out.push(chart.point_of(&tau, t)?);
        }
    }
    Ok(out)
}

/// Minimal set with a rank audit on sampled interior points.
pub fn minimal_set(chart: Arc<Chart>) -> Result<MinimalSet> {
    let mut set = MinimalSet::unaudited(chart.clone());
    for x in audit_points(&chart, 16)? {
        let sample = set.rank_at(&x)?;
        if sample.rank < set.dim() {
            return Err(Error::RankDeficient {
                x: sample.x,
                singular_values: sample.singular_values,
            });
        }
        set.rank_report.push(sample);
    }
    Ok(set)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chart::{Surface, SurfaceSpec};
    use crate::dynsys::builtin;
    use std::f64::consts::SQRT_2;

    fn b_chart() -> Arc<Chart> {
        let field = builtin("hyperbolic-b").unwrap();
        Arc::new(
            Chart::new(field, Surface::segment([1.0, 0.0], [1.0, 4.0]).unwrap(), IntegratorConfig::default())
                .unwrap(),
        )
    }

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn built_kefs() {
        let chart = b_chart();
        let phi = build_kef(chart.clone(), c(1.0, 0.0), |_| c(1.0, 0.0));
        assert!((phi.eval(&[0.5, 2.0]).unwrap() - c(2.0, 0.0)).norm() < 1e-8);
        let x2 = build_kef(chart.clone(), c(1.0, 0.0), |t| c(4.0 * t[0], 0.0));
        assert!((x2.eval(&[0.5, 2.0]).unwrap() - c(2.0, 0.0)).norm() < 1e-8);
        let h = build_kef(chart, c(0.0, 0.0), |t| c(t[0], 0.0));
        assert!((h.eval(&[0.5, 2.0]).unwrap() - c(0.25, 0.0)).norm() < 1e-9);
    }

    #[test]
    fn residual_examples() {
        let ar = builtin("linear-ar").unwrap();
        let r = kpde_residual(|x| Ok(c((x[0] + x[1]) / SQRT_2, 0.0)), c(3.0, 0.0), &ar, &[5.0, 2.0], 1e-5).unwrap();
        assert!(r.norm() < 1e-9);
        let app = builtin("appendix").unwrap();
        let r = kpde_residual(|x| Ok(c(x[1], 0.0)), c(2.0, 0.0), &app, &[1.0, 1.0], 1e-5).unwrap();
        assert!((r - c(-2.0, 0.0)).norm() < 1e-9);
        let rot = builtin("rotation-c").unwrap();
        let phi = |x: &[f64]| {
            Ok(c(x[0] * x[0] + x[1] * x[1], 0.0) * (c(0.0, 2.0) * x[0].atan2(x[1])).exp())
        };
        let r = kpde_residual(phi, c(0.0, 2.0), &rot, &[1.0, 1.0], 1e-5).unwrap();
        assert!(r.norm() < 1e-8, "{r}");
    }

    #[test]
    fn orbit_checks() {
        let ar = builtin("linear-ar").unwrap();
        let cfg = IntegratorConfig::default();
        let phi = |x: &[f64]| Ok(c((x[0] + x[1]) / SQRT_2, 0.0));
        let rep = orbit_eigen_check(phi, c(3.0, 0.0), &ar, &[5.0, 2.0], 0.1, &cfg).unwrap();
        assert!(rep.max_deviation < 1e-6);
        assert_eq!(orbit_eigen_check(phi, c(3.0, 0.0), &ar, &[5.0, 2.0], 0.0, &cfg).unwrap().max_deviation, 0.0);
        assert!(matches!(
            orbit_eigen_check(phi, c(3.0, 0.0), &ar, &[1.0, -1.0], 0.1, &cfg),
            Err(Error::VanishingEigenfunction { .. })
        ));
    }

    #[test]
    fn minimal_set_on_b() {
        let set = minimal_set(b_chart()).unwrap();
        let v = set.values(&[0.5, 2.0]).unwrap();
        assert!((v[0] - 0.5).abs() < 1e-8 && (v[1] - 2.0).abs() < 1e-8);
        assert_eq!(set.rank_at(&[0.5, 2.0]).unwrap().rank, 2);
        assert!(set.rank_report.iter().all(|r| r.rank == 2));
    }

    #[test]
    fn minimal_set_one_dimensional() {
        let field = builtin("growth-1d").unwrap();
        let s = Surface::from_spec(&SurfaceSpec::Point { value: 1.0 }).unwrap();
        let chart = Arc::new(Chart::new(field, s, IntegratorConfig::default()).unwrap());
        let set = minimal_set(chart).unwrap();
        assert_eq!(set.dim(), 1);
        for x in [0.3, 1.0, 2.5] {
            assert!((set.values(&[x]).unwrap()[0] - x).abs() < 1e-8);
        }
    }

    #[test]
    fn advance_zero_time() {
        let ar = builtin("linear-ar").unwrap();
        let v = koopman_advance(|x| x[0] * 2.0, &ar, &[5.0, 2.0], 0.0, &IntegratorConfig::default()).unwrap();
        assert_eq!(v, 10.0);
    }
}
