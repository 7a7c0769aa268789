//! Deterministic CSV and Touchstone writers for sweep results.
//!
//! The CSV schema is fixed: `f_Hz,status` followed by four columns per
//! requested S-parameter (`<P>_re`, `<P>_im`, `<P>_db`, `<P>_deg`) in the
//! order the parameters were requested. Failed or skipped points keep their
//! row with empty value cells and a status other than `ok`. Identical
//! inputs produce byte-identical files.

use postmatch::{PointOutcome, ScatteringMatrix, SweepPoint};

/// One of the four two-port parameters of the fundamental-mode block (or,
/// in the CSV, of the full modal matrix restricted to mode 1).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SParam {
    S11,
    S12,
    S21,
    S22,
}

impl SParam {
    pub fn parse(name: &str) -> Option<Self> {
        match name {
            "S11" => Some(SParam::S11),
            "S12" => Some(SParam::S12),
            "S21" => Some(SParam::S21),
            "S22" => Some(SParam::S22),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            SParam::S11 => "S11",
            SParam::S12 => "S12",
            SParam::S21 => "S21",
            SParam::S22 => "S22",
        }
    }

    /// Fundamental-mode entry of this parameter in a `2M x 2M` matrix.
    pub fn extract(&self, s: &ScatteringMatrix) -> postmatch::Complex64 {
        let m = s.modes();
        match self {
            SParam::S11 => s.get(0, 0),
            SParam::S12 => s.get(0, m),
            SParam::S21 => s.get(m, 0),
            SParam::S22 => s.get(m, m),
        }
    }
}

fn db(x: f64) -> f64 {
    20.0 * x.log10()
}

fn deg(x: f64) -> f64 {
    x.to_degrees()
}

/// Render the sweep as CSV.
pub fn render_csv(points: &[SweepPoint], params: &[SParam]) -> String {
    let mut out = String::new();
    out.push_str("f_Hz,status");
    for p in params {
        let n = p.name();
        out.push_str(&format!(",{n}_re,{n}_im,{n}_db,{n}_deg"));
    }
    out.push('\n');

    for point in points {
        out.push_str(&format!("{}", point.f_hz));
        match &point.outcome {
            PointOutcome::Solved(s) => {
                out.push_str(",ok");
                for p in params {
                    let v = p.extract(s);
                    out.push_str(&format!(
                        ",{:.12e},{:.12e},{:.12e},{:.12e}",
                        v.re,
                        v.im,
                        db(v.norm()),
                        deg(v.arg())
                    ));
                }
            }
            PointOutcome::SkippedCutoff { mode } => {
                out.push_str(&format!(",skipped: mode {mode} at cutoff"));
                for _ in params {
                    out.push_str(",,,,");
                }
            }
            PointOutcome::Failed(err) => {
                let msg = err.to_string().replace(',', ";");
                out.push_str(&format!(",error: {msg}"));
                for _ in params {
                    out.push_str(",,,,");
                }
            }
        }
        out.push('\n');
    }
    out
}

/// Render the fundamental-mode 2-port block as a Touchstone (.s2p) file in
/// real/imaginary format. Points that did not solve become comment lines.
pub fn render_touchstone(points: &[SweepPoint]) -> String {
    let mut out = String::new();
    out.push_str("! 2-port S-parameters, fundamental mode, power-wave normalization\n");
    out.push_str("# GHZ S RI R 50\n");
    for point in points {
        let f_ghz = point.f_hz / 1e9;
        match &point.outcome {
            PointOutcome::Solved(s) => {
                let order = [SParam::S11, SParam::S21, SParam::S12, SParam::S22];
                out.push_str(&format!("{f_ghz:.9}"));
                for p in order {
                    let v = p.extract(s);
                    out.push_str(&format!(" {:.12e} {:.12e}", v.re, v.im));
                }
                out.push('\n');
            }
            PointOutcome::SkippedCutoff { mode } => {
                out.push_str(&format!("! {f_ghz:.9} skipped: mode {mode} at cutoff\n"));
            }
            PointOutcome::Failed(err) => {
                out.push_str(&format!("! {f_ghz:.9} failed: {err}\n"));
            }
        }
    }
    out
}
