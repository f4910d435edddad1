//! Closed-form eigenfunctions, unit-velocity coordinates and flowbox maps for the
//! built-in systems.

use std::f64::consts::{PI, SQRT_2, TAU};
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dynsys::Point;
use crate::error::{Error, Result};

type CFn = Arc<dyn Fn(&[f64]) -> Complex64 + Send + Sync>;
type VFn = Arc<dyn Fn(&[f64]) -> Vec<Complex64> + Send + Sync>;
type Validity = Arc<dyn Fn(&[f64]) -> std::result::Result<(), &'static str> + Send + Sync>;

/// Which argument order the two-argument angle uses in the rotation families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ArgConvention {
    /// `arg(x1, x2) = atan2(x1, x2)`, the angle whose tangent is `x1/x2`.
    #[default]
    Standard,
    /// `atan2(x2, x1)`; only useful to show that the checks detect the wrong convention.
    Swapped,
}

impl ArgConvention {
    fn arg(self, x1: f64, x2: f64) -> f64 {
        match self {
            ArgConvention::Standard => x1.atan2(x2),
            ArgConvention::Swapped => x2.atan2(x1),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Eigenpair {
    pub lambda: Complex64,
    pub vector: Vec<Complex64>,
}

#[derive(Clone)]
pub struct RefEigenfunction {
    pub name: String,
    pub lambda: Complex64,
    pub phi: CFn,
}

impl RefEigenfunction {
    pub fn eval(&self, x: &[f64]) -> Complex64 {
        (self.phi)(x)
    }
}

impl fmt::Debug for RefEigenfunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("RefEigenfunction")
            .field("name", &self.name)
            .field("lambda", &self.lambda)
            .finish_non_exhaustive()
    }
}

/// Closed forms for one built-in system.
#[derive(Clone)]
pub struct ReferenceSolution {
    pub system_id: String,
    pub eigenpairs: Vec<Eigenpair>,
    /// Eigenfunctions checked against the eigenfunction PDE.
    pub eigenfunctions: Vec<RefEigenfunction>,
    /// Unit-velocity coordinates `y_i` (complex for complex eigenvalues).
    unit: VFn,
    /// `(z_1, z_2)` in the worked-example order, time coordinate first.
    example_z: VFn,
    complex_pair: bool,
    valid: Validity,
    pub validity: &'static str,
    /// Box from which test points are drawn; points are filtered with [`Self::check`].
    pub sample_box: Vec<(f64, f64)>,
}

impl fmt::Debug for ReferenceSolution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ReferenceSolution")
            .field("system_id", &self.system_id)
            .field("eigenpairs", &self.eigenpairs)
            .field("eigenfunctions", &self.eigenfunctions)
            .field("validity", &self.validity)
            .finish_non_exhaustive()
    }
}

impl ReferenceSolution {
    pub fn dim(&self) -> usize {
        self.sample_box.len()
    }

    pub fn check(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::Dimension {
                expected: self.dim(),
                got: x.len(),
            });
        }
        (self.valid)(x).map_err(|reason| Error::Excluded {
            system: self.system_id.clone(),
            point: x.to_vec(),
            reason,
        })
    }

    pub fn is_valid(&self, x: &[f64]) -> bool {
        self.check(x).is_ok()
    }

    pub fn unit_coords(&self, x: &[f64]) -> Result<Vec<Complex64>> {
        self.check(x)?;
        Ok((self.unit)(x))
    }

    /// Flowbox coordinates in the worked-example order `(z_1, z_2)`, time first.
    pub fn example_flowbox(&self, x: &[f64]) -> Result<Vec<Complex64>> {
        self.check(x)?;
        Ok((self.example_z)(x))
    }

    /// Real flowbox coordinates `(invariant, time)`.
    pub fn flowbox(&self, x: &[f64]) -> Result<Vec<f64>> {
        let z = self.example_flowbox(x)?;
        Ok(if z.len() == 1 {
            vec![z[0].re]
        } else if self.complex_pair {
            vec![z[1].im, z[0].re]
        } else {
            vec![z[1].re, z[0].re]
        })
    }
}

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn real(v: f64) -> Complex64 {
    c(v, 0.0)
}

fn r2(x: &[f64]) -> f64 {
    x[0] * x[0] + x[1] * x[1]
}

fn example_z_from_y(unit: VFn) -> VFn {
    Arc::new(move |x| {
        let y = unit(x);
        vec![(y[0] + y[1]) / 2.0, (y[0] - y[1]) / 2.0]
    })
}

/// Rotated unit coordinates from a real invariant `h` and time coordinate `m`:
/// `y = (m + h, m − h)`, so that `(y1+y2)/2 = m` and `(y1−y2)/2 = h`.
fn unit_from_flowbox(h: fn(&[f64]) -> f64, m: fn(&[f64]) -> f64) -> VFn {
    Arc::new(move |x| vec![real(m(x) + h(x)), real(m(x) - h(x))])
}

fn family(name: &str, lambda: Complex64, phi: impl Fn(&[f64]) -> Complex64 + Send + Sync + 'static) -> RefEigenfunction {
    RefEigenfunction {
        name: name.to_string(),
        lambda,
        phi: Arc::new(phi),
    }
}

fn eig(lambda: Complex64, v: &[Complex64]) -> Eigenpair {
    Eigenpair {
        lambda,
        vector: v.to_vec(),
    }
}

/// Angular distance of the angle `a` to the branch angle `cut`.
fn angle_gap(a: f64, cut: f64) -> f64 {
    let d = (a - cut).rem_euclid(TAU);
    d.min(TAU - d)
}

/// Default identifiers with closed forms.
pub const REFERENCE_IDS: &[&str] = &[
    "source-a",
    "hyperbolic-b",
    "rotation-c",
    "linear-ar",
    "linear-ac",
    "linear-ai",
    "limit-cycle",
    "appendix",
];

pub fn reference(system_id: &str) -> Result<ReferenceSolution> {
    reference_with(system_id, ArgConvention::Standard)
}

pub fn reference_with(system_id: &str, conv: ArgConvention) -> Result<ReferenceSolution> {
    let one = real(1.0);
    let sol = match system_id {
        "source-a" => {
            let mut efs = Vec::new();
            for n in 1..=3 {
                efs.push(family(&format!("arg(x1,x2)·r^{n}"), real(n as f64), move |x| {
                    real(conv.arg(x[0], x[1]) * r2(x).powf(n as f64 / 2.0))
                }));
            }
            let unit = unit_from_flowbox(crate::chart::default_circle_param, |x| 0.5 * r2(x).ln());
            ReferenceSolution {
                system_id: system_id.into(),
                eigenpairs: vec![eig(one, &[one, real(0.0)]), eig(one, &[real(0.0), one])],
                eigenfunctions: efs,
                unit: unit.clone(),
                example_z: example_z_from_y(unit),
                complex_pair: false,
                valid: Arc::new(|x| {
                    if r2(x) < 0.25 {
                        Err("within 0.5 of the equilibrium at the origin")
                    } else if angle_gap(x[0].atan2(x[1]), PI) < 0.3 {
                        Err("near the branch cut x1 = 0, x2 < 0 of arg(x1, x2)")
                    } else {
                        Ok(())
                    }
                }),
                validity: "r ≥ 0.5, angle ≥ 0.3 from the cut {x1 = 0, x2 < 0}",
                sample_box: vec![(-2.0, 2.0), (-2.0, 2.0)],
            }
        }
        "hyperbolic-b" => {
            let mut efs = Vec::new();
            for n in 1..=3 {
                efs.push(family(&format!("x1 x2 · x1^-{n}"), real(n as f64), move |x| {
                    real(x[0] * x[1] * x[0].powi(-n))
                }));
            }
            let unit = unit_from_flowbox(|x| x[0] * x[1], |x| -x[0].ln());
            ReferenceSolution {
                system_id: system_id.into(),
                eigenpairs: vec![eig(real(-1.0), &[one, real(0.0)]), eig(one, &[real(0.0), one])],
                eigenfunctions: efs,
                unit: unit.clone(),
                example_z: example_z_from_y(unit),
                complex_pair: false,
                valid: Arc::new(|x| {
                    if !(0.8..=3.0).contains(&x[0]) {
                        Err("x1 outside [0.8, 3]")
                    } else if x[1].abs() > 2.0 {
                        Err("|x2| > 2")
                    } else {
                        Ok(())
                    }
                }),
                validity: "x1 ∈ [0.8, 3], |x2| ≤ 2",
                sample_box: vec![(0.8, 3.0), (-2.0, 2.0)],
            }
        }
        "rotation-c" => {
            let mut efs = Vec::new();
            for n in 1..=3 {
                let lambda = c(0.0, n as f64);
                efs.push(family(&format!("r² e^(i{n} arg(x1,x2))"), lambda, move |x| {
                    real(r2(x)) * (lambda * conv.arg(x[0], x[1])).exp()
                }));
            }
            let unit: VFn = Arc::new(move |x| {
                let (h, m) = (r2(x), conv.arg(x[0], x[1]));
                vec![real(m + h), real(m - h)]
            });
            ReferenceSolution {
                system_id: system_id.into(),
                eigenpairs: vec![
                    eig(c(0.0, 1.0), &[real(1.0 / SQRT_2), c(0.0, 1.0 / SQRT_2)]),
                    eig(c(0.0, -1.0), &[real(1.0 / SQRT_2), c(0.0, -1.0 / SQRT_2)]),
                ],
                eigenfunctions: efs,
                unit: unit.clone(),
                example_z: example_z_from_y(unit),
                complex_pair: false,
                valid: Arc::new(|x| {
                    if r2(x) < 0.25 {
                        Err("within 0.5 of the equilibrium at the origin")
                    } else if angle_gap(x[0].atan2(x[1]), PI) < 0.3 {
                        Err("near the branch cut x1 = 0, x2 < 0 of arg(x1, x2)")
                    } else {
                        Ok(())
                    }
                }),
                validity: "r ≥ 0.5, angle ≥ 0.3 from the cut {x1 = 0, x2 < 0}",
                sample_box: vec![(-2.0, 2.0), (-2.0, 2.0)],
            }
        }
        "linear-ar" => {
            let phi1 = |x: &[f64]| (x[0] + x[1]) / SQRT_2;
            let phi2 = |x: &[f64]| (x[0] - x[1]) / SQRT_2;
            let unit: VFn = Arc::new(move |x| vec![real(phi1(x).abs().ln() / 3.0), real(phi2(x).abs().ln() / 8.0)]);
            ReferenceSolution {
                system_id: system_id.into(),
                eigenpairs: vec![
                    eig(real(8.0), &[real(1.0 / SQRT_2), real(-1.0 / SQRT_2)]),
                    eig(real(3.0), &[real(1.0 / SQRT_2), real(1.0 / SQRT_2)]),
                ],
                eigenfunctions: vec![
                    family("(x1+x2)/√2", real(3.0), move |x| real(phi1(x))),
                    family("(x1-x2)/√2", real(8.0), move |x| real(phi2(x))),
                ],
                unit: unit.clone(),
                example_z: example_z_from_y(unit),
                complex_pair: false,
                valid: Arc::new(move |x| {
                    if phi2(x).abs() < 0.1 {
                        Err("Φ2 = (x1-x2)/√2 vanishes on the line x1 = x2")
                    } else if phi1(x).abs() < 0.1 {
                        Err("Φ1 = (x1+x2)/√2 vanishes on the line x1 = -x2")
                    } else {
                        Ok(())
                    }
                }),
                validity: "|x1 - x2| and |x1 + x2| at least 0.1·√2",
                sample_box: vec![(-1.0, 1.0), (-1.0, 1.0)],
            }
        }
        "linear-ac" => {
            let l1 = c(-9.0 / 20.0, 15f64.sqrt() / 20.0);
            let l2 = l1.conj();
            let s5 = 5f64.sqrt();
            let s3 = 3f64.sqrt();
            let v1p = [c(0.0, -2.0 / s5), c(s3 / 4.0, -s5 / 20.0)];
            // ⟨v, x⟩ conjugates the first argument
            let phi1 = move |x: &[f64]| v1p[0].conj() * x[0] + v1p[1].conj() * x[1];
            let phi2 = move |x: &[f64]| phi1(x).conj();
            let unit: VFn = Arc::new(move |x| vec![phi1(x).ln() / l1, phi2(x).ln() / l2]);
            ReferenceSolution {
                system_id: system_id.into(),
                eigenpairs: vec![
                    eig(l1, &[c(-s5 / 20.0, -s3 / 4.0), real(2.0 * s5 / 5.0)]),
                    eig(l2, &[c(-s5 / 20.0, s3 / 4.0), real(2.0 * s5 / 5.0)]),
                ],
                eigenfunctions: vec![
                    family("⟨v1⊥, x⟩", l1, phi1),
                    family("⟨v2⊥, x⟩", l2, phi2),
                ],
                unit: unit.clone(),
                example_z: example_z_from_y(unit),
                complex_pair: true,
                valid: Arc::new(move |x| {
                    let p = phi1(x);
                    if r2(x) < 0.09 {
                        Err("within 0.3 of the equilibrium at the origin")
                    } else if angle_gap(p.arg(), PI) < 0.3 {
                        Err("near the principal-log branch cut of Φ1")
                    } else {
                        Ok(())
                    }
                }),
                validity: "r ≥ 0.3, arg Φ1 at least 0.3 from π",
                sample_box: vec![(-3.0, 3.0), (-3.0, 3.0)],
            }
        }
        "linear-ai" => {
            let i = c(0.0, 1.0);
            let phi1 = |x: &[f64]| c(x[0], -x[1]) / SQRT_2;
            let phi2 = |x: &[f64]| c(x[0], x[1]) / SQRT_2;
            let unit: VFn = Arc::new(move |x| vec![-i * phi1(x).ln(), i * phi2(x).ln()]);
            ReferenceSolution {
                system_id: system_id.into(),
                eigenpairs: vec![
                    eig(i, &[real(1.0 / SQRT_2), c(0.0, 1.0 / SQRT_2)]),
                    eig(-i, &[real(1.0 / SQRT_2), c(0.0, -1.0 / SQRT_2)]),
                ],
                eigenfunctions: vec![family("(x1 - i x2)/√2", i, phi1), family("(x1 + i x2)/√2", -i, phi2)],
                unit: unit.clone(),
                example_z: example_z_from_y(unit),
                complex_pair: true,
                valid: Arc::new(move |x| {
                    if r2(x) < 0.09 {
                        Err("within 0.3 of the equilibrium at the origin")
                    } else if angle_gap(phi1(x).arg(), PI) < 0.3 {
                        Err("near the branch cut x2 = 0, x1 < 0 of the principal log")
                    } else {
                        Ok(())
                    }
                }),
                validity: "r ≥ 0.3, angle ≥ 0.3 from the negative x1-axis",
                sample_box: vec![(-2.0, 2.0), (-2.0, 2.0)],
            }
        }
        "limit-cycle" => {
            let i = c(0.0, 1.0);
            let y1 = |x: &[f64]| (r2(x).sqrt() / (1.0 - r2(x)).abs().sqrt()).ln();
            let y2 = move |x: &[f64]| (c(x[0], x[1]) / c(x[0], -x[1])).ln() / (2.0 * i);
            let unit: VFn = Arc::new(move |x| vec![real(y1(x)), y2(x)]);
            ReferenceSolution {
                system_id: system_id.into(),
                eigenpairs: vec![
                    eig(c(1.0, 1.0), &[real(1.0 / SQRT_2), c(0.0, -1.0 / SQRT_2)]),
                    eig(c(1.0, -1.0), &[real(1.0 / SQRT_2), c(0.0, 1.0 / SQRT_2)]),
                ],
                eigenfunctions: vec![
                    family("r/√|1-r²|", real(1.0), move |x| real(y1(x).exp())),
                    family("(x1 + i x2)/r", i, |x| c(x[0], x[1]) / r2(x).sqrt()),
                ],
                unit: unit.clone(),
                example_z: example_z_from_y(unit),
                complex_pair: false,
                valid: Arc::new(|x| {
                    let r = r2(x).sqrt();
                    if r < 0.2 {
                        Err("within 0.2 of the equilibrium at the origin")
                    } else if (r - 1.0).abs() < 0.2 {
                        Err("within 0.2 of the limit cycle r = 1")
                    } else if x[0].abs() < 0.3 * r {
                        Err("near the branch cut x1 = 0 of y2")
                    } else {
                        Ok(())
                    }
                }),
                validity: "r ∈ [0.2, 0.8] ∪ [1.2, ∞), |x1| ≥ 0.3 r",
                sample_box: vec![(-2.0, 2.0), (-2.0, 2.0)],
            }
        }
        "appendix" => {
            let unit = unit_from_flowbox(|x| x[0] * x[1] - x[0].powi(3) / 3.0, |x| x[0].ln());
            ReferenceSolution {
                system_id: system_id.into(),
                eigenpairs: vec![eig(one, &[one, real(0.0)]), eig(real(-1.0), &[real(0.0), one])],
                eigenfunctions: vec![
                    family("x1", one, |x| real(x[0])),
                    family("x2 - x1²/3", real(-1.0), |x| real(x[1] - x[0] * x[0] / 3.0)),
                    family("x1²", real(2.0), |x| real(x[0] * x[0])),
                ],
                unit: unit.clone(),
                example_z: example_z_from_y(unit),
                complex_pair: false,
                valid: Arc::new(|x| {
                    if x[0] < 0.5 {
                        Err("x1 < 0.5 (log of x1)")
                    } else {
                        Ok(())
                    }
                }),
                validity: "x1 ≥ 0.5",
                sample_box: vec![(0.5, 2.0), (-2.0, 2.0)],
            }
        }
        _ => return Err(Error::UnknownSystem(system_id.to_string())),
    };
    Ok(sol)
}

/// Canonical real flowbox `(invariants.., time)` of a reference system.
pub fn evaluate_reference_flowbox(system_id: &str, x: &[f64]) -> Result<Point> {
    reference(system_id)?.flowbox(x)
}

/// Flowbox in the worked-example order `(z_1, z_2)`, complex where the example is.
pub fn evaluate_example_flowbox(system_id: &str, x: &[f64]) -> Result<Vec<Complex64>> {
    reference(system_id)?.example_flowbox(x)
}
