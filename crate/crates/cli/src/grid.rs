//! `--grid` argument: comma separated axes `LOxHI[xRES]`. Axes without a resolution take
//! the one of the last axis.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use flowbox_core::Point;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub lo: f64,
    pub hi: f64,
    pub n: usize,
}

impl Axis {
    /// Node `k`; a single-node axis sits at `lo`.
    pub fn node(&self, k: usize) -> f64 {
        if self.n == 1 {
            self.lo
        } else {
            self.lo + (self.hi - self.lo) * k as f64 / (self.n - 1) as f64
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub axes: Vec<Axis>,
}

impl GridSpec {
    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn lo(&self) -> Vec<f64> {
        self.axes.iter().map(|a| a.lo).collect()
    }

    pub fn hi(&self) -> Vec<f64> {
        self.axes.iter().map(|a| a.hi).collect()
    }

    pub fn shape(&self) -> Vec<usize> {
        self.axes.iter().map(|a| a.n).collect()
    }

    /// Nodes in row-major order, last axis fastest.
    pub fn points(&self) -> Vec<Point> {
        let total: usize = self.axes.iter().map(|a| a.n).product();
        (0..total)
            .map(|mut idx| {
                let mut x = vec![0.0; self.dim()];
                for (d, axis) in self.axes.iter().enumerate().rev() {
                    x[d] = axis.node(idx % axis.n);
                    idx /= axis.n;
                }
                x
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("invalid grid `{text}`: {reason}")]
pub struct GridParseError {
    text: String,
    reason: String,
}

impl FromStr for GridSpec {
    type Err = GridParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let fail = |reason: &str| GridParseError {
            text: s.to_string(),
            reason: reason.to_string(),
        };
        let mut parsed: Vec<(f64, f64, Option<usize>)> = Vec::new();
        for item in s.split(',') {
            let parts: Vec<&str> = item.trim().split('x').collect();
            let num = |t: &str| t.trim().parse::<f64>().map_err(|_| fail(&format!("bad number `{t}`")));
            let (lo, hi, n) = match parts.as_slice() {
                [lo, hi] => (num(lo)?, num(hi)?, None),
                [lo, hi, n] => {
                    let n = n.trim().parse::<usize>().map_err(|_| fail(&format!("bad resolution `{n}`")))?;
                    (num(lo)?, num(hi)?, Some(n))
                }
                _ => return Err(fail("each axis must read LOxHI or LOxHIxRES")),
            };
            if !lo.is_finite() || !hi.is_finite() || hi < lo {
                return Err(fail("each axis needs finite LO ≤ HI"));
            }
            parsed.push((lo, hi, n));
        }
        let Some(default_n) = parsed.last().and_then(|p| p.2) else {
            return Err(fail("the last axis must carry a resolution"));
        };
        let axes = parsed
            .into_iter()
            .map(|(lo, hi, n)| {
                let n = n.unwrap_or(default_n);
                if n == 0 {
                    return Err(fail("resolution must be positive"));
                }
                if n > 1 && lo == hi {
                    return Err(fail("an axis with LO = HI must have a single node"));
                }
                Ok(Axis { lo, hi, n })
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(GridSpec { axes })
    }
}

impl fmt::Display for GridSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let items: Vec<String> = self.axes.iter().map(|a| format!("{}x{}x{}", a.lo, a.hi, a.n)).collect();
        f.write_str(&items.join(","))
    }
}
