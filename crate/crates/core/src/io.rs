//! CSV artifacts. Numbers are written with 17 significant digits and `\n` line endings
//! so that outputs are byte-stable.

use std::io::Write;

use num_complex::Complex64;

use crate::chart::ChartPoint;
use crate::dynsys::Point;
use crate::error::{Error, Result};
use crate::odeint::Orbit;
use crate::varfit::GridField;

pub fn fmt_num(v: f64) -> String {
    if v.is_nan() {
        "NaN".to_string()
    } else if v.is_infinite() {
        if v > 0.0 { "inf" } else { "-inf" }.to_string()
    } else {
        format!("{v:.16e}")
    }
}

fn writer<W: Write>(w: W) -> csv::Writer<W> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(w)
}

fn names(prefix: &str, n: usize) -> impl Iterator<Item = String> + '_ {
    (1..=n).map(move |i| format!("{prefix}{i}"))
}

fn finish<W: Write>(w: csv::Writer<W>) -> Result<()> {
    w.into_inner()
        .map_err(|e| Error::Io(e.to_string()))?
        .flush()?;
    Ok(())
}

/// Columns `t, x1..xN`.
pub fn write_orbit_csv<W: Write>(w: W, orbit: &Orbit) -> Result<()> {
    let n = orbit.x0.len();
    let mut out = writer(w);
    out.write_record(std::iter::once("t".to_string()).chain(names("x", n)))?;
    for (t, x) in &orbit.samples {
        out.write_record(std::iter::once(fmt_num(*t)).chain(x.iter().map(|v| fmt_num(*v))))?;
    }
    finish(out)
}

/// Short status label of a chart evaluation.
pub fn status_label(result: &Result<ChartPoint>) -> &'static str {
    match result {
        Ok(_) => "ok",
        Err(Error::NotInOmega { .. }) => "not-in-omega",
        Err(Error::AmbiguousChart { .. }) => "ambiguous",
        Err(Error::OutsidePatch { .. }) => "outside-patch",
        Err(Error::LeftDomain { .. } | Error::OutOfDomain { .. }) => "out-of-domain",
        Err(_) => "integration-failure",
    }
}

/// Columns `x1..xN, h1..h{N-1}, m, status`; failed points carry `NaN` values.
pub fn write_chart_grid_csv<W: Write>(w: W, dim: usize, rows: &[(Point, Result<ChartPoint>)]) -> Result<()> {
    let mut out = writer(w);
    out.write_record(
        names("x", dim)
            .chain(names("h", dim - 1))
            .chain(["m".to_string(), "status".to_string()]),
    )?;
    for (x, r) in rows {
        let mut rec: Vec<String> = x.iter().map(|v| fmt_num(*v)).collect();
        match r {
            Ok(p) => {
                rec.extend(p.h.iter().map(|v| fmt_num(*v)));
                rec.push(fmt_num(p.m));
            }
            Err(_) => rec.extend(std::iter::repeat_n("NaN".to_string(), dim)),
        }
        rec.push(status_label(r).to_string());
        out.write_record(&rec)?;
    }
    finish(out)
}

/// One row of a residual sweep.
#[derive(Debug, Clone)]
pub struct ResidualRow {
    pub x: Point,
    pub member: String,
    pub residual: Option<Complex64>,
    pub status: String,
}

/// Columns `x1..xN, member, re, im, status`.
pub fn write_residual_csv<W: Write>(w: W, dim: usize, rows: &[ResidualRow]) -> Result<()> {
    let mut out = writer(w);
    out.write_record(names("x", dim).chain(["member", "re", "im", "status"].map(String::from)))?;
    for row in rows {
        let mut rec: Vec<String> = row.x.iter().map(|v| fmt_num(*v)).collect();
        rec.push(row.member.clone());
        let r = row.residual.unwrap_or(Complex64::new(f64::NAN, f64::NAN));
        rec.push(fmt_num(r.re));
        rec.push(fmt_num(r.im));
        rec.push(row.status.clone());
        out.write_record(&rec)?;
    }
    finish(out)
}

/// Columns `x1..xN, y1..yK` with one row per node.
pub fn write_grid_field_csv<W: Write>(w: W, field: &GridField) -> Result<()> {
    let mut out = writer(w);
    out.write_record(names("x", field.dim()).chain(names("y", field.fields())))?;
    for node in 0..field.node_count() {
        let rec: Vec<String> = field
            .node_coords(node)
            .into_iter()
            .chain(field.values.iter().map(|v| v[node]))
            .map(fmt_num)
            .collect();
        out.write_record(&rec)?;
    }
    finish(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn number_format_round_trips() {
        for v in [0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23] {
            assert_eq!(fmt_num(v).parse::<f64>().unwrap(), v);
        }
        assert_eq!(fmt_num(f64::NAN), "NaN");
    }

    #[test]
    fn orbit_csv_layout() {
        let orbit = Orbit {
            field_name: "f".into(),
            x0: vec![1.0, 2.0],
            samples: vec![(0.0, vec![1.0, 2.0]), (0.5, vec![1.5, 2.5])],
        };
        let mut buf = Vec::new();
        write_orbit_csv(&mut buf, &orbit).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "t,x1,x2");
        assert_eq!(lines.len(), 3);
        assert!(!text.contains('\r'));
    }
}
