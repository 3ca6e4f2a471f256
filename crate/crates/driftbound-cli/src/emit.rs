//! Output plumbing: significant-digit formatting, JSON number rounding,
//! atomic file writes, and output-directory resolution.

use driftbound::{Error, Result};
use std::io::Write as _;
use std::path::{Path, PathBuf};

/// Formatting policy shared by every command.
#[derive(Debug, Clone, Copy)]
pub struct Style {
    pub json: bool,
    pub full: bool,
}

/// Render a float at 6 significant digits, or at full (shortest
/// round-trip) precision when `full` is set. Exact zeros and non-finite
/// values pass through unchanged.
pub fn fmt_f64(x: f64, full: bool) -> String {
    if full || x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let e = x.abs().log10().floor() as i32;
    if (-4..=5).contains(&e) {
        format!("{:.*}", (5 - e).max(0) as usize, x)
    } else {
        format!("{:.5e}", x)
    }
}

/// The value `fmt_f64` displays, as a float again; used so JSON output
/// carries the same rounding policy as text output.
pub fn round_sig(x: f64, full: bool) -> f64 {
    if full {
        x
    } else {
        fmt_f64(x, false).parse().unwrap_or(x)
    }
}

/// Round every fractional number in a JSON tree to the display precision.
/// Integers (counts, times, seeds) are left untouched.
pub fn round_json(v: &mut serde_json::Value, full: bool) {
    if full {
        return;
    }
    match v {
        serde_json::Value::Number(n) => {
            if n.is_f64() {
                if let Some(f) = n.as_f64() {
                    if let Some(r) = serde_json::Number::from_f64(round_sig(f, false)) {
                        *v = serde_json::Value::Number(r);
                    }
                }
            }
        }
        serde_json::Value::Array(a) => a.iter_mut().for_each(|x| round_json(x, full)),
        serde_json::Value::Object(o) => o.values_mut().for_each(|x| round_json(x, full)),
        _ => {}
    }
}

/// Print a report either as rounded JSON or through a plain-text renderer.
pub fn print_report<F>(style: Style, mut json: serde_json::Value, text: F)
where
    F: FnOnce(),
{
    if style.json {
        round_json(&mut json, style.full);
        println!("{}", serde_json::to_string_pretty(&json).expect("report serializes"));
    } else {
        text();
    }
}

/// Write a file atomically: temp file in the destination directory, then
/// rename over the target. Readers never observe a half-written file.
pub fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(contents.as_bytes())?;
    tmp.flush()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

/// Resolve where a generated file goes: an explicit `--out` path wins,
/// otherwise `default_name` inside the output directory (`--out-dir`,
/// then $DRIFTBOUND_OUT_DIR, then the working directory).
pub fn resolve_out(
    explicit: Option<PathBuf>,
    out_dir: Option<&Path>,
    default_name: &str,
) -> PathBuf {
    if let Some(p) = explicit {
        return p;
    }
    let dir = out_dir
        .map(Path::to_path_buf)
        .or_else(|| std::env::var_os("DRIFTBOUND_OUT_DIR").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."));
    dir.join(default_name)
}
