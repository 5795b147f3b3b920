//! CSV output of run reports.

use std::fmt::Write as _;
use std::path::Path;

use tilemesh::{Layout, Threading};

use crate::error::BenchError;
use crate::run::RunReport;

pub const CSV_HEADER: &str = "kernel,layout,threading,threads,tile_x,tile_y,tile_z,steps,\
kernel_seconds,fill_seconds,total_seconds,checksum,arena_bytes";

/// Formats `x` like C's `%.{sig}g`.
pub fn format_g(x: f64, sig: usize) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf" } else { "-inf" }.into();
    }
    if x == 0.0 {
        return if x.is_sign_negative() { "-0" } else { "0" }.into();
    }
    let sig = sig.max(1);
    // exponent after rounding to `sig` digits
    let sci = format!("{:.*e}", sig - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if exp < -4 || exp >= sig as i32 {
        let m = trim_fraction(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{m}e{sign}{:02}", exp.abs())
    } else {
        let decimals = (sig as i32 - 1 - exp) as usize;
        trim_fraction(&format!("{x:.decimals$}")).to_string()
    }
}

fn trim_fraction(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

pub fn layout_name(layout: Layout) -> &'static str {
    match layout {
        Layout::Contiguous => "contiguous",
        Layout::Regional(_) => "regional",
    }
}

pub fn threading_name(t: Threading) -> &'static str {
    match t {
        Threading::Tile => "tile",
        Threading::Loop => "loop",
    }
}

pub fn csv_row(r: &RunReport) -> String {
    let c = &r.config;
    let [tx, ty, tz] = c.reported_tile();
    format!(
        "{},{},{},{},{tx},{ty},{tz},{},{},{},{},{},{}",
        c.kernel.name(),
        layout_name(c.layout),
        threading_name(c.threading),
        c.workers,
        c.steps,
        format_g(r.kernel_seconds, 6),
        format_g(r.fill_seconds, 6),
        format_g(r.total_seconds, 6),
        format_g(r.checksum, 17),
        r.arena_bytes,
    )
}

/// Header plus one line per report, each newline-terminated.
pub fn csv_string(reports: &[RunReport]) -> Result<String, BenchError> {
    if reports.is_empty() {
        return Err(BenchError::Usage("no reports to write".into()));
    }
    let mut out = String::with_capacity(64 * (reports.len() + 1));
    out.push_str(CSV_HEADER);
    out.push('\n');
    for r in reports {
        writeln!(out, "{}", csv_row(r)).expect("writing to a String");
    }
    Ok(out)
}

pub fn emit_csv(reports: &[RunReport], path: &Path) -> Result<(), BenchError> {
    let text = csv_string(reports)?;
    std::fs::write(path, text).map_err(|e| BenchError::Io(path.to_owned(), e))
}
