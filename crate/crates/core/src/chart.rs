//! Initial surfaces, audits and the characteristics chart `x ↦ (h(x), m(x))`.

use std::f64::consts::{FRAC_PI_2, PI, TAU};
use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::dynsys::{Point, VectorField};
use crate::error::{Error, Result};
use crate::expr::{self, Expr};
use crate::numeric::{dot, halton, norm, solve_dense};
use crate::odeint::{self, CrossingEvent, IntegratorConfig, Section};

/// Serializable description of a surface.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SurfaceSpec {
    /// Open segment from `a` to `b` in the plane.
    Segment { a: [f64; 2], b: [f64; 2] },
    /// Circle minus the point at `start_angle`.
    Circle {
        center: [f64; 2],
        radius: f64,
        #[serde(default)]
        start_angle: f64,
    },
    /// Box piece of the hyperplane `x[axis] = value`; `lo`/`hi` bound the other coordinates.
    Plane {
        axis: usize,
        value: f64,
        lo: Vec<f64>,
        hi: Vec<f64>,
    },
    /// A single point, for one-dimensional systems.
    Point { value: f64 },
    /// `X(t1..t{N-1})` given by expressions, with a level expression in `x1..xN`.
    Parametric {
        dim: usize,
        param: Vec<String>,
        level: String,
    },
}

impl SurfaceSpec {
    /// The surface used when none is given for a built-in system.
    pub fn default_for(system: &str) -> Option<SurfaceSpec> {
        let spec = match system {
            "source-a" | "linear-ar" => SurfaceSpec::Circle {
                center: [0.0, 0.0],
                radius: 1.0,
                start_angle: -FRAC_PI_2,
            },
            "linear-ac" => SurfaceSpec::Circle {
                center: [0.0, 0.0],
                radius: 1.0,
                start_angle: 0.0,
            },
            "hyperbolic-b" => SurfaceSpec::Segment {
                a: [1.0, -10.0],
                b: [1.0, 10.0],
            },
            "appendix" => SurfaceSpec::Segment {
                a: [1.0, -10.0],
                b: [1.0, 10.0],
            },
            "rotation-c" | "linear-ai" | "limit-cycle" => SurfaceSpec::Segment {
                a: [0.1, 0.0],
                b: [2.0, 0.0],
            },
            "growth-1d" => SurfaceSpec::Point { value: 1.0 },
            "translation" => SurfaceSpec::Segment {
                a: [0.0, -10.0],
                b: [0.0, 10.0],
            },
            _ => return None,
        };
        Some(spec)
    }

    /// Parses the command-line shorthand `segment:a1,a2,b1,b2`, `circle:cx,cy,r[,theta0]`,
    /// `point:c` or `plane:axis,value,lo1,hi1,...` (axis is 1-based).
    pub fn parse_shorthand(text: &str) -> Result<SurfaceSpec> {
        let (kind, rest) = text
            .split_once(':')
            .ok_or_else(|| Error::Config(format!("surface `{text}`: expected KIND:VALUES")))?;
        let nums = rest
            .split(',')
            .map(|v| {
                v.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::Config(format!("surface `{text}`: bad number `{v}`")))
            })
            .collect::<Result<Vec<f64>>>()?;
        let bad = || Error::Config(format!("surface `{text}`: wrong number of values"));
        match kind {
            "segment" if nums.len() == 4 => Ok(SurfaceSpec::Segment {
                a: [nums[0], nums[1]],
                b: [nums[2], nums[3]],
            }),
            "circle" if nums.len() == 3 || nums.len() == 4 => Ok(SurfaceSpec::Circle {
                center: [nums[0], nums[1]],
                radius: nums[2],
                start_angle: nums.get(3).copied().unwrap_or(0.0),
            }),
            "point" if nums.len() == 1 => Ok(SurfaceSpec::Point { value: nums[0] }),
            "plane" if nums.len() >= 2 && nums.len() % 2 == 0 => {
                let axis = nums[0];
                if axis < 1.0 || axis.fract() != 0.0 {
                    return Err(Error::Config(format!("surface `{text}`: axis must be a positive integer")));
                }
                let (lo, hi): (Vec<f64>, Vec<f64>) = nums[2..].chunks(2).map(|c| (c[0], c[1])).unzip();
                Ok(SurfaceSpec::Plane {
                    axis: axis as usize - 1,
                    value: nums[1],
                    lo,
                    hi,
                })
            }
            "segment" | "circle" | "point" | "plane" => Err(bad()),
            _ => Err(Error::Config(format!("unknown surface kind `{kind}`"))),
        }
    }

    pub fn from_json(text: &str) -> Result<SurfaceSpec> {
        serde_json::from_str(text).map_err(|e| Error::Config(format!("surface spec: {e}")))
    }
}

#[derive(Debug)]
struct Parametric {
    param: Vec<Expr>,
    level: Expr,
    seeds: Vec<(Vec<f64>, Point)>,
}

/// A candidate initial hypersurface `S` with parameterization `X: (0,1)^{N-1} → R^N`.
#[derive(Debug, Clone)]
pub struct Surface {
    dim: usize,
    spec: SurfaceSpec,
    parametric: Option<Arc<Parametric>>,
}

const SEEDS_PER_AXIS: usize = 32;

impl Surface {
    pub fn from_spec(spec: &SurfaceSpec) -> Result<Surface> {
        let dim = match spec {
            SurfaceSpec::Segment { a, b } => {
                if a == b {
                    return Err(Error::DegenerateSurface { tau: vec![] });
                }
                2
            }
            SurfaceSpec::Circle { radius, .. } => {
                if !(*radius > 0.0) {
                    return Err(Error::Config(format!("circle radius must be positive, got {radius}")));
                }
                2
            }
            SurfaceSpec::Plane { axis, lo, hi, .. } => {
                let dim = lo.len() + 1;
                if hi.len() != lo.len() || *axis >= dim {
                    return Err(Error::Config("plane: axis or bounds inconsistent".into()));
                }
                if lo.iter().zip(hi).any(|(l, h)| !(l < h)) {
                    return Err(Error::Config("plane: bounds must satisfy lo < hi".into()));
                }
                dim
            }
            SurfaceSpec::Point { .. } => 1,
            SurfaceSpec::Parametric { dim, param, .. } => {
                if param.len() != *dim || *dim < 2 {
                    return Err(Error::Arity {
                        expected: *dim,
                        found: param.len(),
                    });
                }
                *dim
            }
        };
        let parametric = match spec {
            SurfaceSpec::Parametric { dim, param, level } => {
                let tnames = expr::indexed_names("t", dim - 1);
                let xnames = expr::indexed_names("x", *dim);
                let param = param
                    .iter()
                    .map(|p| expr::parse(p, &tnames))
                    .collect::<std::result::Result<Vec<_>, _>>()?;
                let level = expr::parse(level, &xnames)?;
                let mut p = Parametric {
                    param,
                    level,
                    seeds: Vec::new(),
                };
                p.seeds = seed_grid(dim - 1)
                    .into_iter()
                    .filter_map(|tau| {
                        let x = eval_param(&p.param, &tau).ok()?;
                        Some((tau, x))
                    })
                    .collect();
                Some(Arc::new(p))
            }
            _ => None,
        };
        Ok(Surface {
            dim,
            spec: spec.clone(),
            parametric,
        })
    }

    pub fn segment(a: [f64; 2], b: [f64; 2]) -> Result<Surface> {
        Surface::from_spec(&SurfaceSpec::Segment { a, b })
    }

    pub fn circle(center: [f64; 2], radius: f64, start_angle: f64) -> Result<Surface> {
        Surface::from_spec(&SurfaceSpec::Circle {
            center,
            radius,
            start_angle,
        })
    }

    pub fn spec(&self) -> &SurfaceSpec {
        &self.spec
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// `X(τ)`.
    pub fn param(&self, tau: &[f64]) -> Result<Point> {
        if tau.len() + 1 != self.dim {
            return Err(Error::Dimension {
                expected: self.dim - 1,
                got: tau.len(),
            });
        }
        Ok(match &self.spec {
            SurfaceSpec::Segment { a, b } => {
                vec![a[0] + tau[0] * (b[0] - a[0]), a[1] + tau[0] * (b[1] - a[1])]
            }
            SurfaceSpec::Circle {
                center,
                radius,
                start_angle,
            } => {
                let th = start_angle + TAU * tau[0];
                vec![center[0] + radius * th.cos(), center[1] + radius * th.sin()]
            }
            SurfaceSpec::Plane { axis, value, lo, hi } => {
                let mut x = Vec::with_capacity(self.dim);
                let mut k = 0;
                for j in 0..self.dim {
                    if j == *axis {
                        x.push(*value);
                    } else {
                        x.push(lo[k] + tau[k] * (hi[k] - lo[k]));
                        k += 1;
                    }
                }
                x
            }
            SurfaceSpec::Point { value } => vec![*value],
            SurfaceSpec::Parametric { .. } => {
                let p = self.parametric.as_ref().expect("compiled parametric surface");
                eval_param(&p.param, tau)?
            }
        })
    }

    /// Level function `L` with `S ⊂ {L = 0}`.
    pub fn level(&self, x: &[f64]) -> f64 {
        match &self.spec {
            SurfaceSpec::Segment { a, b } => {
                let t = [b[0] - a[0], b[1] - a[1]];
                let len = norm(&t);
                ((x[0] - a[0]) * t[1] - (x[1] - a[1]) * t[0]) / len
            }
            SurfaceSpec::Circle { center, radius, .. } => {
                (x[0] - center[0]).hypot(x[1] - center[1]) - radius
            }
            SurfaceSpec::Plane { axis, value, .. } => x[*axis] - value,
            SurfaceSpec::Point { value } => x[0] - value,
            SurfaceSpec::Parametric { .. } => {
                let p = self.parametric.as_ref().expect("compiled parametric surface");
                p.level.eval(x).unwrap_or(f64::NAN)
            }
        }
    }

    /// Surface parameters of a point on or near `S`. Values outside `(0,1)` mean the
    /// point projects outside the parameterized patch.
    pub fn param_inverse(&self, x: &[f64]) -> Vec<f64> {
        match &self.spec {
            SurfaceSpec::Segment { a, b } => {
                let t = [b[0] - a[0], b[1] - a[1]];
                vec![((x[0] - a[0]) * t[0] + (x[1] - a[1]) * t[1]) / dot(&t, &t)]
            }
            SurfaceSpec::Circle {
                center,
                start_angle,
                ..
            } => {
                let th = (x[1] - center[1]).atan2(x[0] - center[0]);
                let mut u = (th - start_angle) / TAU;
                u -= u.floor();
                vec![u]
            }
            SurfaceSpec::Plane { axis, lo, hi, .. } => {
                let mut k = 0;
                let mut out = Vec::with_capacity(self.dim - 1);
                for (j, xj) in x.iter().enumerate() {
                    if j != *axis {
                        out.push((xj - lo[k]) / (hi[k] - lo[k]));
                        k += 1;
                    }
                }
                out
            }
            SurfaceSpec::Point { .. } => Vec::new(),
            SurfaceSpec::Parametric { .. } => self.gauss_newton_inverse(x),
        }
    }

    fn gauss_newton_inverse(&self, x: &[f64]) -> Vec<f64> {
        let p = self.parametric.as_ref().expect("compiled parametric surface");
        let k = self.dim - 1;
        let dist2 = |y: &[f64]| y.iter().zip(x).map(|(a, b)| (a - b).powi(2)).sum::<f64>();
        let Some((mut tau, _)) = p
            .seeds
            .iter()
            .min_by(|a, b| dist2(&a.1).total_cmp(&dist2(&b.1)))
            .cloned()
        else {
            return vec![f64::NAN; k];
        };
        for _ in 0..50 {
            let Ok(xt) = self.param(&tau) else { break };
            let Ok(jt) = self.tangents(&tau) else { break };
            let r: Vec<f64> = x.iter().zip(&xt).map(|(a, b)| a - b).collect();
            let jtj: Vec<Vec<f64>> = (0..k)
                .map(|a| (0..k).map(|b| dot(&jt[a], &jt[b])).collect())
                .collect();
            let jtr: Vec<f64> = (0..k).map(|a| dot(&jt[a], &r)).collect();
            let Some(delta) = solve_dense(&jtj, &jtr) else { break };
            for (t, d) in tau.iter_mut().zip(&delta) {
                *t += d;
            }
            if norm(&delta) < 1e-10 {
                break;
            }
        }
        tau
    }

    /// Tangent vectors `∂X/∂τ_k`.
    pub fn tangents(&self, tau: &[f64]) -> Result<Vec<Vec<f64>>> {
        Ok(match &self.spec {
            SurfaceSpec::Segment { a, b } => vec![vec![b[0] - a[0], b[1] - a[1]]],
            SurfaceSpec::Circle {
                radius,
                start_angle,
                ..
            } => {
                let th = start_angle + TAU * tau[0];
                vec![vec![-TAU * radius * th.sin(), TAU * radius * th.cos()]]
            }
            SurfaceSpec::Plane { axis, lo, hi, .. } => {
                let mut out = Vec::new();
                let mut k = 0;
                for j in 0..self.dim {
                    if j != *axis {
                        let mut t = vec![0.0; self.dim];
                        t[j] = hi[k] - lo[k];
                        out.push(t);
                        k += 1;
                    }
                }
                out
            }
            SurfaceSpec::Point { .. } => Vec::new(),
            SurfaceSpec::Parametric { .. } => {
                let mut tp = tau.to_vec();
                let h = 1e-6;
                (0..tau.len())
                    .map(|k| {
                        tp[k] = tau[k] + h;
                        let xp = self.param(&tp)?;
                        tp[k] = tau[k] - h;
                        let xm = self.param(&tp)?;
                        tp[k] = tau[k];
                        Ok(xp.iter().zip(&xm).map(|(a, b)| (a - b) / (2.0 * h)).collect())
                    })
                    .collect::<Result<Vec<_>>>()?
            }
        })
    }

    /// Unit normal from the cofactors of the tangent frame, oriented so that
    /// `det[n, t_1, .., t_{N-1}] > 0`.
    pub fn normal(&self, tau: &[f64]) -> Result<Vec<f64>> {
        let t = self.tangents(tau)?;
        let n = self.dim;
        let scale: f64 = t.iter().map(|v| norm(v)).product();
        let normal: Vec<f64> = (0..n)
            .map(|k| {
                let m = DMatrix::from_fn(n, n, |i, j| {
                    if i == 0 {
                        f64::from(j == k)
                    } else {
                        t[i - 1][j]
                    }
                });
                m.determinant()
            })
            .collect();
        let len = norm(&normal);
        if !(len > 1e-12 * scale.max(f64::MIN_POSITIVE)) || !len.is_finite() {
            return Err(Error::DegenerateSurface { tau: tau.to_vec() });
        }
        Ok(normal.iter().map(|v| v / len).collect())
    }
}

impl Section for Surface {
    fn level(&self, x: &[f64]) -> f64 {
        Surface::level(self, x)
    }

    fn params(&self, x: &[f64]) -> Vec<f64> {
        self.param_inverse(x)
    }
}

fn eval_param(param: &[Expr], tau: &[f64]) -> Result<Point> {
    Ok(param.iter().map(|e| e.eval(tau)).collect::<std::result::Result<Vec<_>, _>>()?)
}

fn seed_grid(k: usize) -> Vec<Vec<f64>> {
    let total = SEEDS_PER_AXIS.pow(k as u32);
    (0..total)
        .map(|mut idx| {
            (0..k)
                .map(|_| {
                    let i = idx % SEEDS_PER_AXIS;
                    idx /= SEEDS_PER_AXIS;
                    (i as f64 + 0.5) / SEEDS_PER_AXIS as f64
                })
                .collect()
        })
        .collect()
}

/// Low-discrepancy parameter sample `k` (1-based) in `(0,1)^{dim}`.
fn sample_tau(k: usize, dim: usize) -> Vec<f64> {
    halton(k, dim)
}

/// `⟨n(τ), P(X(τ))⟩` on `n_samples` low-discrepancy parameter values.
pub fn check_transversal(
    surface: &Surface,
    field: &VectorField,
    n_samples: usize,
) -> Result<Vec<(Vec<f64>, f64)>> {
    if n_samples == 0 {
        return Err(Error::Config("n_samples must be at least 1".into()));
    }
    if surface.dim() != field.dim() {
        return Err(Error::Dimension {
            expected: field.dim(),
            got: surface.dim(),
        });
    }
    let k = surface.dim() - 1;
    let count = if k == 0 { 1 } else { n_samples };
    (1..=count)
        .map(|i| {
            let tau = sample_tau(i, k);
            let x = surface.param(&tau)?;
            let n = surface.normal(&tau)?;
            let p = field.eval(&x)?;
            Ok((tau, dot(&n, &p)))
        })
        .collect()
}

/// Threshold below which `|⟨n, P⟩|` counts as tangential.
pub const TRANSVERSALITY_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NonRecurrenceReport {
    pub tested_points: usize,
    pub violations: Vec<(Point, Vec<f64>)>,
    pub transversality_failures: Vec<(Vec<f64>, f64)>,
    /// Orbits whose integration failed, with the error text. Not counted as violations.
    pub integration_failures: Vec<(Point, String)>,
    pub verdict: Verdict,
}

impl NonRecurrenceReport {
    pub fn passed(&self) -> bool {
        self.verdict == Verdict::Pass
    }
}

/// Seeds orbits on `S`, integrates `±horizon` and flags orbits meeting the patch more than once.
pub fn check_nonrecurrent(
    surface: &Surface,
    field: &VectorField,
    n_orbits: usize,
    horizon: f64,
    cfg: &IntegratorConfig,
) -> Result<NonRecurrenceReport> {
    let transversal = check_transversal(surface, field, n_orbits)?;
    let transversality_failures: Vec<(Vec<f64>, f64)> = transversal
        .into_iter()
        .filter(|(_, v)| !(v.abs() >= TRANSVERSALITY_TOL))
        .collect();
    let k = surface.dim() - 1;
    let count = if k == 0 { 1 } else { n_orbits };
    let mut violations = Vec::new();
    let mut integration_failures = Vec::new();
    for i in 1..=count {
        let x0 = surface.param(&sample_tau(i, k))?;
        match odeint::find_crossings(field, &x0, surface, horizon, cfg) {
            Ok(events) => {
                let times: Vec<f64> = events
                    .iter()
                    .filter(|e| e.in_patch && !e.grazing)
                    .map(|e| e.t)
                    .collect();
                if times.len() > 1 {
                    violations.push((x0, times));
                }
            }
            Err(e) => integration_failures.push((x0, e.to_string())),
        }
    }
    let verdict = if violations.is_empty() && transversality_failures.is_empty() {
        Verdict::Pass
    } else {
        Verdict::Fail
    };
    Ok(NonRecurrenceReport {
        tested_points: count,
        violations,
        transversality_failures,
        integration_failures,
        verdict,
    })
}

/// Result of locating a point in the chart.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChartPoint {
    pub x: Point,
    pub m: f64,
    pub h: Vec<f64>,
    /// Where the orbit of `x` meets `S`.
    pub crossing: Point,
}

impl ChartPoint {
    /// `(h_1, .., h_{N-1}, m)`.
    pub fn flowbox(&self) -> Vec<f64> {
        let mut z = self.h.clone();
        z.push(self.m);
        z
    }
}

/// Characteristics chart of a field over a non-recurrent surface.
#[derive(Debug, Clone)]
pub struct Chart {
    field: VectorField,
    surface: Surface,
    cfg: IntegratorConfig,
    horizon: f64,
}

impl Chart {
    /// Builds the chart after checking transversality on 64 sampled parameters.
    pub fn new(field: VectorField, surface: Surface, cfg: IntegratorConfig) -> Result<Chart> {
        let checks = check_transversal(&surface, &field, 64)?;
        if let Some((tau, value)) = checks
            .into_iter()
            .filter(|(_, v)| !(v.abs() >= TRANSVERSALITY_TOL))
            .min_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
        {
            return Err(Error::NotTransversal { tau, value });
        }
        Chart::new_unchecked(field, surface, cfg)
    }

    /// Builds the chart without the transversality audit.
    pub fn new_unchecked(field: VectorField, surface: Surface, cfg: IntegratorConfig) -> Result<Chart> {
        cfg.validate()?;
        if surface.dim() != field.dim() {
            return Err(Error::Dimension {
                expected: field.dim(),
                got: surface.dim(),
            });
        }
        let horizon = cfg.horizon;
        Ok(Chart {
            field,
            surface,
            cfg,
            horizon,
        })
    }

    pub fn field(&self) -> &VectorField {
        &self.field
    }

    pub fn surface(&self) -> &Surface {
        &self.surface
    }

    pub fn config(&self) -> &IntegratorConfig {
        &self.cfg
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn dim(&self) -> usize {
        self.field.dim()
    }

    /// Crossings of the orbit of `x` with the level set, stopping after two hits on the patch.
    pub fn crossings(&self, x: &[f64]) -> Result<Vec<CrossingEvent>> {
        odeint::find_crossings_limited(&self.field, x, &self.surface, self.horizon, 2, &self.cfg)
    }

    pub fn locate(&self, x: &[f64]) -> Result<ChartPoint> {
        let events = self.crossings(x)?;
        let (inside, outside): (Vec<&CrossingEvent>, Vec<&CrossingEvent>) =
            events.iter().filter(|e| !e.grazing).partition(|e| e.in_patch);
        match inside.as_slice() {
            [hit] => Ok(ChartPoint {
                x: x.to_vec(),
                m: 0.0 - hit.t,
                h: hit.params.clone(),
                crossing: hit.x.clone(),
            }),
            [] => match outside.iter().min_by(|a, b| a.t.abs().total_cmp(&b.t.abs())) {
                Some(e) => Err(Error::OutsidePatch {
                    x: x.to_vec(),
                    params: e.params.clone(),
                }),
                None => Err(Error::NotInOmega { x: x.to_vec() }),
            },
            many => Err(Error::AmbiguousChart {
                x: x.to_vec(),
                times: many.iter().map(|e| e.t).collect(),
            }),
        }
    }

    /// Unit-velocity measurement: the `t*` with `flow(x, -t*) ∈ S`.
    pub fn evaluate_m(&self, x: &[f64]) -> Result<f64> {
        self.locate(x).map(|p| p.m)
    }

    /// Invariants: surface parameters of the point where the orbit of `x` meets `S`.
    pub fn evaluate_h(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.locate(x).map(|p| p.h)
    }

    pub fn flowbox(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.locate(x).map(|p| p.flowbox())
    }

    /// Inverse of the flowbox map: `flow(X(h), m)`.
    pub fn point_of(&self, h: &[f64], m: f64) -> Result<Point> {
        let x0 = self.surface.param(h)?;
        odeint::flow(&self.field, &x0, m, &self.cfg)
    }
}

/// `∇h(x)·P(x)` by central differences of step `fd_step`.
pub fn conservation_residual<F>(h: F, field: &VectorField, x: &[f64], fd_step: f64) -> Result<f64>
where
    F: Fn(&[f64]) -> Result<f64>,
{
    let grad = fd_gradient(&h, field, x, fd_step)?;
    Ok(dot(&grad, &field.eval(x)?))
}

pub(crate) fn fd_gradient<F>(h: &F, field: &VectorField, x: &[f64], fd_step: f64) -> Result<Vec<f64>>
where
    F: Fn(&[f64]) -> Result<f64>,
{
    if !(fd_step > 0.0) {
        return Err(Error::Config("finite-difference step must be positive".into()));
    }
    let mut xp = x.to_vec();
    (0..x.len())
        .map(|j| {
            xp[j] = x[j] + fd_step;
            if !field.domain().contains(&xp) {
                return Err(Error::OutOfDomain { point: xp.clone() });
            }
            let hp = h(&xp)?;
            xp[j] = x[j] - fd_step;
            if !field.domain().contains(&xp) {
                return Err(Error::OutOfDomain { point: xp.clone() });
            }
            let hm = h(&xp)?;
            xp[j] = x[j];
            Ok((hp - hm) / (2.0 * fd_step))
        })
        .collect()
}

/// Angle on the unit circle measured as in the default source surface, in `(0,1)`.
pub fn default_circle_param(x: &[f64]) -> f64 {
    (PI - x[0].atan2(x[1])) / TAU
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynsys::builtin;
    use std::f64::consts::LN_2;

    fn b_chart() -> Chart {
        let field = builtin("hyperbolic-b").unwrap();
        Chart::new(field, Surface::segment([1.0, 0.0], [1.0, 4.0]).unwrap(), IntegratorConfig::default())
            .unwrap()
    }

    #[test]
    fn transversality_examples() {
        let b = builtin("hyperbolic-b").unwrap();
        let s = Surface::segment([1.0, 0.0], [1.0, 4.0]).unwrap();
        for (_, v) in check_transversal(&s, &b, 16).unwrap() {
            assert!((v + 1.0).abs() < 1e-12);
        }
        let circle = Surface::circle([0.0, 0.0], 1.0, -FRAC_PI_2).unwrap();
        let a = builtin("source-a").unwrap();
        for (_, v) in check_transversal(&circle, &a, 16).unwrap() {
            assert!((v - 1.0).abs() < 1e-12);
        }
        let c = builtin("rotation-c").unwrap();
        for (_, v) in check_transversal(&circle, &c, 16).unwrap() {
            assert!(v.abs() < 1e-12);
        }
        assert!(matches!(
            Chart::new(c, circle, IntegratorConfig::default()),
            Err(Error::NotTransversal { .. })
        ));
    }

    #[test]
    fn hyperbolic_chart_values() {
        let chart = b_chart();
        let p = chart.locate(&[0.5, 2.0]).unwrap();
        assert!((p.m - LN_2).abs() < 1e-9);
        assert!((p.h[0] - 0.25).abs() < 1e-9);
        let on_s = chart.surface().param(&[0.3]).unwrap();
        let z = chart.flowbox(&on_s).unwrap();
        assert!((z[0] - 0.3).abs() < 1e-12 && z[1] == 0.0);
    }

    #[test]
    fn source_chart_m() {
        let field = builtin("source-a").unwrap();
        let s = Surface::circle([0.0, 0.0], 1.0, -FRAC_PI_2).unwrap();
        let chart = Chart::new(field, s, IntegratorConfig::default()).unwrap();
        let p = chart.locate(&[2.0, 0.0]).unwrap();
        assert!((p.m - LN_2).abs() < 1e-9, "{}", p.m);
        assert!((p.h[0] - default_circle_param(&[2.0, 0.0])).abs() < 1e-9);
    }

    #[test]
    fn chart_errors() {
        let chart = b_chart();
        // x2 < 0 meets the line x1 = 1 below the segment
        assert!(matches!(chart.locate(&[0.5, -2.0]), Err(Error::OutsidePatch { .. })));
        // left half plane never reaches x1 = 1
        assert!(matches!(chart.locate(&[-0.5, 2.0]), Err(Error::NotInOmega { .. })));
        let c = builtin("rotation-c").unwrap();
        let s = Surface::segment([0.1, 0.0], [2.0, 0.0]).unwrap();
        let rc = Chart::new(c, s, IntegratorConfig::default().with_horizon(4.0 * PI)).unwrap();
        assert!(matches!(rc.locate(&[0.0, 1.0]), Err(Error::AmbiguousChart { .. })));
    }

    #[test]
    fn conservation_examples() {
        let b = builtin("hyperbolic-b").unwrap();
        let r = conservation_residual(|x| Ok(x[0] * x[1]), &b, &[0.5, 2.0], 1e-5).unwrap();
        assert!(r.abs() < 1e-9);
        let r = conservation_residual(|x| Ok(x[0]), &b, &[0.5, 2.0], 1e-5).unwrap();
        assert!((r + 0.5).abs() < 1e-9);
        let a = builtin("source-a").unwrap();
        let r = conservation_residual(|x| Ok((x[0] / x[1]).atan()), &a, &[2.0, 1.0], 1e-5).unwrap();
        assert!(r.abs() < 1e-9);
        assert!(matches!(
            conservation_residual(|x| Ok(x[0]), &b, &[10.0, 0.0], 1e-5),
            Err(Error::OutOfDomain { .. })
        ));
    }

    #[test]
    fn nonrecurrence_examples() {
        let cfg = IntegratorConfig::default();
        let b = builtin("hyperbolic-b").unwrap();
        let s = Surface::segment([1.0, -10.0], [1.0, 10.0]).unwrap();
        assert!(check_nonrecurrent(&s, &b, 32, 50.0, &cfg).unwrap().passed());
        let c = builtin("rotation-c").unwrap();
        let s = Surface::segment([0.1, 0.0], [2.0, 0.0]).unwrap();
        let rep = check_nonrecurrent(&s, &c, 8, 4.0 * PI, &cfg).unwrap();
        assert!(!rep.passed());
        assert_eq!(rep.violations.len(), 8);
    }

    #[test]
    fn parametric_surface_inverse() {
        let spec = SurfaceSpec::Parametric {
            dim: 2,
            param: vec!["1 + 0.5*sin(3*t1)".into(), "4*t1 - 2".into()],
            level: "x1 - 1 - 0.5*sin(3*(x2 + 2)/4)".into(),
        };
        let s = Surface::from_spec(&spec).unwrap();
        for tau in [0.05, 0.31, 0.5, 0.97] {
            let x = s.param(&[tau]).unwrap();
            assert!(s.level(&x).abs() < 1e-12);
            assert!((s.param_inverse(&x)[0] - tau).abs() < 1e-8);
        }
    }

    #[test]
    fn shorthand() {
        assert_eq!(
            SurfaceSpec::parse_shorthand("segment:1,0,1,4").unwrap(),
            SurfaceSpec::Segment {
                a: [1.0, 0.0],
                b: [1.0, 4.0]
            }
        );
        assert!(SurfaceSpec::parse_shorthand("circle:0,0").is_err());
        assert!(SurfaceSpec::parse_shorthand("blob:1").is_err());
        let p = SurfaceSpec::parse_shorthand("plane:1,0.5,-1,1,-2,2").unwrap();
        let s = Surface::from_spec(&p).unwrap();
        assert_eq!(s.dim(), 3);
        assert_eq!(s.param(&[0.5, 0.25]).unwrap(), vec![0.5, 0.0, -1.0]);
    }
}
