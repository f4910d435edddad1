//! Autonomous vector fields `ẋ = P(x)` and the built-in registry.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::{self, EvalError, Expr};

pub type Point = Vec<f64>;

/// Axis-aligned box; membership is inclusive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainBox {
    pub bounds: Vec<(f64, f64)>,
}

impl DomainBox {
    pub fn new(bounds: Vec<(f64, f64)>) -> Self {
        DomainBox { bounds }
    }

    pub fn cube(dim: usize, lo: f64, hi: f64) -> Self {
        DomainBox {
            bounds: vec![(lo, hi); dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.bounds.len()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.bounds.len()
            && x.iter()
                .zip(&self.bounds)
                .all(|(v, (lo, hi))| *v >= *lo && *v <= *hi)
    }
}

type RhsFn = dyn Fn(&[f64], &mut [f64]) + Send + Sync;
type JacFn = dyn Fn(&[f64]) -> Vec<Vec<f64>> + Send + Sync;

#[derive(Clone)]
enum Rhs {
    Closed(Arc<RhsFn>),
    Parsed(Arc<Vec<Expr>>),
}

/// A smooth autonomous vector field on a box in `R^N`.
///
/// Cloning is cheap; the components are shared.
#[derive(Clone)]
pub struct VectorField {
    name: String,
    dim: usize,
    rhs: Rhs,
    jacobian: Option<Arc<JacFn>>,
    domain: DomainBox,
    equilibria: Vec<Point>,
}

impl fmt::Debug for VectorField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("VectorField")
            .field("name", &self.name)
            .field("dim", &self.dim)
            .field("domain", &self.domain)
            .finish_non_exhaustive()
    }
}

impl VectorField {
    /// Field from a closure writing `P(x)` into the output slice.
    pub fn from_fn<F>(name: impl Into<String>, dim: usize, f: F) -> Self
    where
        F: Fn(&[f64], &mut [f64]) + Send + Sync + 'static,
    {
        VectorField {
            name: name.into(),
            dim,
            rhs: Rhs::Closed(Arc::new(f)),
            jacobian: None,
            domain: DomainBox::cube(dim, -10.0, 10.0),
            equilibria: Vec::new(),
        }
    }

    pub fn from_exprs(name: impl Into<String>, components: Vec<Expr>) -> Self {
        let dim = components.len();
        VectorField {
            name: name.into(),
            dim,
            rhs: Rhs::Parsed(Arc::new(components)),
            jacobian: None,
            domain: DomainBox::cube(dim, -10.0, 10.0),
            equilibria: Vec::new(),
        }
    }

    pub fn linear(name: impl Into<String>, a: Vec<Vec<f64>>) -> Self {
        let dim = a.len();
        let jac = a.clone();
        let mut field = VectorField::from_fn(name, dim, move |x, out| {
            for (o, row) in out.iter_mut().zip(&a) {
                *o = row.iter().zip(x).map(|(r, v)| r * v).sum();
            }
        });
        field.jacobian = Some(Arc::new(move |_| jac.clone()));
        field.equilibria = vec![vec![0.0; dim]];
        field
    }

    pub fn with_domain(mut self, domain: DomainBox) -> Self {
        assert_eq!(domain.dim(), self.dim, "domain dimension mismatch");
        self.domain = domain;
        self
    }

    pub fn with_equilibria(mut self, eq: Vec<Point>) -> Self {
        self.equilibria = eq;
        self
    }

    pub fn with_jacobian<F>(mut self, jac: F) -> Self
    where
        F: Fn(&[f64]) -> Vec<Vec<f64>> + Send + Sync + 'static,
    {
        self.jacobian = Some(Arc::new(jac));
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn domain(&self) -> &DomainBox {
        &self.domain
    }

    pub fn equilibria(&self) -> &[Point] {
        &self.equilibria
    }

    /// `P(x)` without the domain check. Used inside integrator stages.
    pub fn velocity(&self, x: &[f64], out: &mut [f64]) -> std::result::Result<(), EvalError> {
        match &self.rhs {
            Rhs::Closed(f) => {
                f(x, out);
                Ok(())
            }
            Rhs::Parsed(exprs) => {
                for (o, e) in out.iter_mut().zip(exprs.iter()) {
                    *o = e.eval(x)?;
                }
                Ok(())
            }
        }
    }

    pub fn eval(&self, x: &[f64]) -> Result<Point> {
        if x.len() != self.dim {
            return Err(Error::Dimension {
                expected: self.dim,
                got: x.len(),
            });
        }
        if !self.domain.contains(x) {
            return Err(Error::OutOfDomain { point: x.to_vec() });
        }
        let mut out = vec![0.0; self.dim];
        self.velocity(x, &mut out)?;
        if out.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { point: x.to_vec() });
        }
        Ok(out)
    }

    pub fn is_equilibrium(&self, x: &[f64], tol: f64) -> Result<bool> {
        if tol <= 0.0 {
            return Err(Error::Config("equilibrium tolerance must be positive".into()));
        }
        let p = self.eval(x)?;
        Ok(crate::numeric::norm(&p) <= tol)
    }

    pub fn analytic_jacobian(&self, x: &[f64]) -> Option<Vec<Vec<f64>>> {
        self.jacobian.as_ref().map(|j| j(x))
    }

    /// Central-difference Jacobian `J[i][j] = ∂P_i/∂x_j`.
    pub fn jacobian_fd(&self, x: &[f64], step: f64) -> Result<Vec<Vec<f64>>> {
        let n = self.dim;
        let mut jac = vec![vec![0.0; n]; n];
        let mut xp = x.to_vec();
        for j in 0..n {
            xp[j] = x[j] + step;
            let fp = self.eval(&xp)?;
            xp[j] = x[j] - step;
            let fm = self.eval(&xp)?;
            xp[j] = x[j];
            for i in 0..n {
                jac[i][j] = (fp[i] - fm[i]) / (2.0 * step);
            }
        }
        Ok(jac)
    }

    /// Field with the time direction reversed, `ẋ = -P(x)`.
    pub fn reversed(&self) -> VectorField {
        let inner = self.clone();
        let mut f = VectorField::from_fn(format!("{}-reversed", self.name), self.dim, move |x, out| {
            if inner.velocity(x, out).is_err() {
                out.iter_mut().for_each(|o| *o = f64::NAN);
                return;
            }
            out.iter_mut().for_each(|o| *o = -*o);
        });
        f.domain = self.domain.clone();
        f.equilibria = self.equilibria.clone();
        f
    }

    /// Source text of parsed components, if this field was parsed.
    pub fn component_text(&self) -> Option<Vec<String>> {
        match &self.rhs {
            Rhs::Parsed(exprs) => {
                let names = expr::indexed_names("x", self.dim);
                Some(exprs.iter().map(|e| e.render(&names)).collect())
            }
            Rhs::Closed(_) => None,
        }
    }
}

/// Parses `dim` comma-separated component expressions over `x1..x{dim}`.
pub fn parse_system(text: &str, dim: usize) -> Result<VectorField> {
    let names = expr::indexed_names("x", dim);
    let components = expr::parse_list(text, &names)?;
    if components.len() != dim {
        return Err(Error::Arity {
            expected: dim,
            found: components.len(),
        });
    }
    Ok(VectorField::from_exprs("user", components))
}

/// JSON description of a user system.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemSpec {
    pub name: String,
    pub dim: usize,
    pub components: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub domain: Option<Vec<(f64, f64)>>,
}

impl SystemSpec {
    pub fn build(&self) -> Result<VectorField> {
        if self.components.len() != self.dim {
            return Err(Error::Arity {
                expected: self.dim,
                found: self.components.len(),
            });
        }
        let names = expr::indexed_names("x", self.dim);
        let components = self
            .components
            .iter()
            .map(|c| expr::parse(c, &names))
            .collect::<std::result::Result<Vec<_>, _>>()?;
        let mut field = VectorField::from_exprs(self.name.clone(), components);
        if let Some(bounds) = &self.domain {
            if bounds.len() != self.dim {
                return Err(Error::Dimension {
                    expected: self.dim,
                    got: bounds.len(),
                });
            }
            if bounds.iter().any(|(lo, hi)| !(lo < hi)) {
                return Err(Error::Config("domain bounds must satisfy lo < hi".into()));
            }
            field = field.with_domain(DomainBox::new(bounds.clone()));
        }
        Ok(field)
    }

    pub fn from_json(text: &str) -> Result<VectorField> {
        let spec: SystemSpec =
            serde_json::from_str(text).map_err(|e| Error::Config(format!("system spec: {e}")))?;
        spec.build()
    }
}

/// Registry entry for a built-in system.
#[derive(Debug, Clone, Copy)]
pub struct BuiltinInfo {
    pub name: &'static str,
    pub dim: usize,
    pub description: &'static str,
    /// Set when no surface is non-recurrent for this field.
    pub recurrent: bool,
}

pub const BUILTINS: &[BuiltinInfo] = &[
    BuiltinInfo {
        name: "source-a",
        dim: 2,
        description: "source P = (x1, x2)",
        recurrent: false,
    },
    BuiltinInfo {
        name: "hyperbolic-b",
        dim: 2,
        description: "saddle P = (-x1, x2)",
        recurrent: false,
    },
    BuiltinInfo {
        name: "rotation-c",
        dim: 2,
        description: "rotation P = (x2, -x1)",
        recurrent: true,
    },
    BuiltinInfo {
        name: "linear-ar",
        dim: 2,
        description: "linear, real eigenvalues 8 and 3: A = [[11,-5],[-5,11]]/2",
        recurrent: false,
    },
    BuiltinInfo {
        name: "linear-ac",
        dim: 2,
        description: "linear, complex eigenvalues: A = [[-4,1],[-4,-5]]/10",
        recurrent: false,
    },
    BuiltinInfo {
        name: "linear-ai",
        dim: 2,
        description: "linear, imaginary eigenvalues ±i: A = [[0,1],[-1,0]]",
        recurrent: true,
    },
    BuiltinInfo {
        name: "limit-cycle",
        dim: 2,
        description: "stable limit cycle r = 1: P = (-x2 + x1(1-r²), x1 + x2(1-r²))",
        recurrent: true,
    },
    BuiltinInfo {
        name: "appendix",
        dim: 2,
        description: "P = (x1, -x2 + x1²); x2 is an orbit-wise eigenfunction only",
        recurrent: false,
    },
    BuiltinInfo {
        name: "growth-1d",
        dim: 1,
        description: "scalar growth P = x",
        recurrent: false,
    },
    BuiltinInfo {
        name: "translation",
        dim: 2,
        description: "constant field P = (1, 0)",
        recurrent: false,
    },
];

pub fn builtin_info(name: &str) -> Option<&'static BuiltinInfo> {
    BUILTINS.iter().find(|b| b.name == name)
}

fn ar_matrix() -> Vec<Vec<f64>> {
    vec![vec![5.5, -2.5], vec![-2.5, 5.5]]
}

fn ac_matrix() -> Vec<Vec<f64>> {
    vec![vec![-0.4, 0.1], vec![-0.4, -0.5]]
}

/// Looks up a built-in field by registry name.
pub fn builtin(name: &str) -> Result<VectorField> {
    let field = match name {
        "source-a" => VectorField::linear(name, vec![vec![1.0, 0.0], vec![0.0, 1.0]]),
        "hyperbolic-b" => VectorField::linear(name, vec![vec![-1.0, 0.0], vec![0.0, 1.0]]),
        "rotation-c" | "linear-ai" => {
            VectorField::linear(name, vec![vec![0.0, 1.0], vec![-1.0, 0.0]])
        }
        "linear-ar" => VectorField::linear(name, ar_matrix()),
        "linear-ac" => VectorField::linear(name, ac_matrix()),
        "limit-cycle" => VectorField::from_fn(name, 2, |x, out| {
            let s = 1.0 - x[0] * x[0] - x[1] * x[1];
            out[0] = -x[1] + x[0] * s;
            out[1] = x[0] + x[1] * s;
        })
        .with_jacobian(|x| {
            let (a, b) = (x[0], x[1]);
            let s = 1.0 - a * a - b * b;
            vec![
                vec![s - 2.0 * a * a, -1.0 - 2.0 * a * b],
                vec![1.0 - 2.0 * a * b, s - 2.0 * b * b],
            ]
        })
        .with_equilibria(vec![vec![0.0, 0.0]]),
        "appendix" => VectorField::from_fn(name, 2, |x, out| {
            out[0] = x[0];
            out[1] = -x[1] + x[0] * x[0];
        })
        .with_jacobian(|x| vec![vec![1.0, 0.0], vec![2.0 * x[0], -1.0]])
        .with_equilibria(vec![vec![0.0, 0.0]]),
        "growth-1d" => VectorField::linear(name, vec![vec![1.0]]),
        "translation" => VectorField::from_fn(name, 2, |_, out| {
            out[0] = 1.0;
            out[1] = 0.0;
        })
        .with_jacobian(|_| vec![vec![0.0; 2]; 2]),
        _ => return Err(Error::UnknownSystem(name.to_string())),
    };
    Ok(field)
}
