//! Report envelope, fixed-precision JSON output and the `--text` table.

use std::io;

use serde::Serialize;
use serde_json::ser::Formatter;
use serde_json::Value;

pub const SCHEMA_VERSION: &str = "dchar-report/1";

#[derive(Debug, Serialize)]
pub struct RunReport {
    pub schema_version: &'static str,
    pub command: String,
    /// `sha256:<hex>` of the input file; `null` for commands without one.
    pub inputs_digest: Option<String>,
    pub seed: u64,
    pub result: Value,
    pub warnings: Vec<String>,
}

/// Compact JSON whose floats carry 17 significant digits, enough to
/// round-trip every double. Zero prints unsigned.
struct FixedDigits;

impl Formatter for FixedDigits {
    fn write_f64<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        let value = if value == 0.0 { 0.0 } else { value };
        write!(writer, "{value:.16e}")
    }

    fn write_f32<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(writer, value as f64)
    }
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut out, FixedDigits);
    value.serialize(&mut ser).expect("reports serialize infallibly");
    String::from_utf8(out).expect("serde_json writes UTF-8")
}

fn is_matrix(v: &Value) -> Option<(usize, usize)> {
    let rows = v.as_array()?;
    let first = rows.first()?.as_array()?;
    if first.len() > 1
        && rows.iter().all(|r| {
            r.as_array()
                .is_some_and(|r| r.len() == first.len() && r.iter().all(Value::is_number))
        })
    {
        Some((rows.len(), first.len()))
    } else {
        None
    }
}

fn scalar(v: &Value) -> String {
    match v {
        Value::Number(n) => match n.as_f64() {
            Some(f) if !n.is_u64() && !n.is_i64() => format!("{f:.6e}"),
            _ => n.to_string(),
        },
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

fn flatten(prefix: &str, v: &Value, out: &mut Vec<(String, String)>) {
    if let Some((r, c)) = is_matrix(v) {
        out.push((prefix.to_string(), format!("[{r} x {c} matrix]")));
        return;
    }
    match v {
        Value::Object(map) => {
            for (k, x) in map {
                let key = if prefix.is_empty() {
                    k.clone()
                } else {
                    format!("{prefix}.{k}")
                };
                flatten(&key, x, out);
            }
        }
        Value::Array(items) if items.iter().all(|x| !x.is_object() && !x.is_array()) && items.len() <= 8 => {
            let parts: Vec<String> = items.iter().map(scalar).collect();
            out.push((prefix.to_string(), format!("[{}]", parts.join(", "))));
        }
        Value::Array(items) => {
            for (i, x) in items.iter().enumerate() {
                flatten(&format!("{prefix}[{i}]"), x, out);
            }
        }
        other => out.push((prefix.to_string(), scalar(other))),
    }
}

/// One `[PASS]`/`[FAIL]` line per fixture check.
fn fixture_lines(result: &Value) -> Option<String> {
    let checks = result.get("checks")?.as_array()?;
    let mut out = String::new();
    for c in checks {
        let mark = if c.get("passed")?.as_bool()? { "PASS" } else { "FAIL" };
        let field = |k: &str| c.get(k).and_then(Value::as_str).unwrap_or_default().to_string();
        out += &format!(
            "[{mark}] {}: {} ({})\n",
            field("fixture"),
            field("check"),
            field("detail")
        );
    }
    let passed = checks.iter().filter(|c| c["passed"] == true).count();
    out += &format!("{passed}/{} checks passed\n", checks.len());
    Some(out)
}

/// Two-column summary: one line per leaf of the result, matrices abbreviated.
/// The fixture corpus prints one pass/fail line per check instead.
pub fn to_text(report: &RunReport) -> String {
    if report.command == "fixtures" {
        if let Some(lines) = fixture_lines(&report.result) {
            return lines;
        }
    }
    let mut rows = vec![
        ("command".to_string(), report.command.clone()),
        ("seed".to_string(), report.seed.to_string()),
    ];
    if let Some(d) = &report.inputs_digest {
        rows.push(("inputs_digest".into(), d.clone()));
    }
    flatten("result", &report.result, &mut rows);
    for (i, w) in report.warnings.iter().enumerate() {
        rows.push((format!("warning[{i}]"), w.clone()));
    }
    let width = rows.iter().map(|(k, _)| k.chars().count()).max().unwrap_or(0);
    rows.iter().map(|(k, v)| format!("{k:<width$}  {v}\n")).collect()
}
