//! Text output: numbers at 15 significant digits, CSV tables and atomic file writes.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use crate::error::Result;
use crate::impact::ImpactState;
use crate::linear::ScanRow;
use crate::real::Real;

pub const SIGNIFICANT_DIGITS: usize = 15;

/// `x` in the style of C's `%.15g`: fixed notation for exponents in
/// `[-5, 15)`, scientific otherwise, trailing zeros removed.
pub fn num(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf" } else { "-inf" }.into();
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{:.*e}", SIGNIFICANT_DIGITS - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..SIGNIFICANT_DIGITS as i32).contains(&exp) {
        let decimals = (SIGNIFICANT_DIGITS as i32 - 1 - exp).max(0) as usize;
        trim_zeros(format!("{:.*}", decimals, x))
    } else {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{}{:02}", trim_zeros(mantissa.to_string()), sign, exp.abs())
    }
}

fn trim_zeros(s: String) -> String {
    if !s.contains('.') {
        return s;
    }
    s.trim_end_matches('0').trim_end_matches('.').to_string()
}

pub fn flag(b: bool) -> &'static str {
    if b {
        "true"
    } else {
        "false"
    }
}

/// `n,t,v,gap,dv`, with `gap` and `dv` the differences to the previous state.
pub fn orbit_csv<R: Real>(states: &[ImpactState<R>]) -> String {
    let mut out = String::from("n,t,v,gap,dv\n");
    for (n, s) in states.iter().enumerate() {
        let (gap, dv) = match n.checked_sub(1).map(|p| &states[p]) {
            Some(p) => (
                num((s.t.clone() - p.t.clone()).to_f64()),
                num((s.v.clone() - p.v.clone()).to_f64()),
            ),
            None => (String::new(), String::new()),
        };
        writeln!(out, "{n},{},{},{gap},{dv}", num(s.t.to_f64()), num(s.v.to_f64())).unwrap();
    }
    out
}

/// `s,max_pdot_over_g,pt0,pt1,trace,hyperbolic`.
pub fn scan_csv(rows: &[ScanRow]) -> String {
    let mut out = String::from("s,max_pdot_over_g,pt0,pt1,trace,hyperbolic\n");
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            num(r.s),
            num(r.max_pdot_over_g),
            num(r.pt0),
            num(r.pt1),
            num(r.trace),
            flag(r.hyperbolic)
        )
        .unwrap();
    }
    out
}

/// One row of the manifold table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ManifoldRow {
    pub a: f64,
    pub t0: f64,
    pub v0: f64,
    pub theta_residual: f64,
    pub decay_ratio: f64,
    pub pass: bool,
}

/// `a,t0,v0,theta_residual,decay_ratio,pass`.
pub fn manifold_csv(rows: &[ManifoldRow]) -> String {
    let mut out = String::from("a,t0,v0,theta_residual,decay_ratio,pass\n");
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            num(r.a),
            num(r.t0),
            num(r.v0),
            num(r.theta_residual),
            num(r.decay_ratio),
            flag(r.pass)
        )
        .unwrap();
    }
    out
}

/// Writes `contents` to a temporary file next to `path` and renames it into place.
pub fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(contents.as_bytes())?;
    tmp.flush()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}
