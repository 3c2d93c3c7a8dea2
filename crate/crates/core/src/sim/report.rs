//! Report emission: aligned text table, flat CSV and JSON.

use std::fmt::Write as _;
use std::io::Write;

use serde_json::Value;

use crate::bootstrap::CiMethod;
use crate::error::{Error, Result};
use crate::sim::run::{MethodSummary, SimulationReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Table,
    Csv,
    Json,
}

impl ReportFormat {
    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "table" | "text" | "text-table" => Some(Self::Table),
            "csv" => Some(Self::Csv),
            "json" => Some(Self::Json),
            _ => None,
        }
    }
}

pub fn emit_report<W: Write + ?Sized>(report: &SimulationReport, format: ReportFormat, out: &mut W) -> Result<()> {
    out.write_all(render_report(report, format)?.as_bytes())?;
    Ok(())
}

pub fn render_report(report: &SimulationReport, format: ReportFormat) -> Result<String> {
    Ok(match format {
        ReportFormat::Table => render_table(report),
        ReportFormat::Csv => render_csv(report),
        ReportFormat::Json => {
            let mut s = serde_json::to_string_pretty(report)?;
            s.push('\n');
            s
        }
    })
}

fn render_table(r: &SimulationReport) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{:<8}{:>9}{:>9}{:>9}{:>9}", "method", "cov_S", "cov_Sc", "len_S", "len_Sc");
    for m in &r.methods {
        let _ = writeln!(
            s,
            "{:<8}{:>9.3}{:>9.3}{:>9.3}{:>9.3}",
            m.method.label(),
            m.cov_s,
            m.cov_sc,
            m.len_s,
            m.len_sc
        );
    }
    if r.methods.is_empty() {
        return s;
    }
    s.push('\n');
    let _ = writeln!(s, "replications  {} ok, {} failed (of {})", r.successful_reps, r.failed_reps, r.n_reps);
    let _ = writeln!(s, "mean sigma_hat  {:.4}", r.mean_sigma_hat);
    let _ = writeln!(s, "mean lambda  {:.4}", r.mean_lambda);
    let _ = writeln!(s, "mean |S_hat|  {:.2}", r.mean_support_size);
    if let Some(o) = r.omega0_rate {
        let _ = writeln!(s, "omega0 rate  {o:.3}");
    }
    for g in &r.bias_groups {
        let ddb = g.ddb.map_or_else(|| "-".to_string(), |v| format!("{v:.4}"));
        let _ = writeln!(
            s,
            "bias {:<6}  lasso {:.4}  db {:.4}  ddb {}  ({} coords)",
            g.group.label(),
            g.lasso,
            g.db,
            ddb,
            g.coords
        );
    }
    if let Some(c) = &r.condition_summary {
        let _ = writeln!(
            s,
            "conditions  kappa {:.4}  K1 {:.4}  C_min {:.4}  s_tilde {:.2}",
            c.mean_kappa, c.mean_k1, c.mean_c_min, c.mean_s_tilde
        );
    }
    s
}

/// One CSV line `scope,metric,value`.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvRow {
    pub scope: String,
    pub metric: String,
    pub value: f64,
}

const RUN_SCOPE: &str = "run";

fn row(scope: &str, metric: &str, value: f64) -> CsvRow {
    CsvRow { scope: scope.into(), metric: metric.into(), value }
}

/// The rows written by the CSV format, in output order.
pub fn csv_rows(r: &SimulationReport) -> Vec<CsvRow> {
    let mut rows = Vec::new();
    for m in &r.methods {
        let l = m.method.label();
        rows.push(row(l, "cov_S", m.cov_s));
        rows.push(row(l, "cov_Sc", m.cov_sc));
        rows.push(row(l, "len_S", m.len_s));
        rows.push(row(l, "len_Sc", m.len_sc));
        rows.push(row(l, "records_S", m.records_s as f64));
        rows.push(row(l, "records_Sc", m.records_sc as f64));
    }
    rows.push(row(RUN_SCOPE, "successful_reps", r.successful_reps as f64));
    rows.push(row(RUN_SCOPE, "failed_reps", r.failed_reps as f64));
    rows.push(row(RUN_SCOPE, "mean_sigma_hat", r.mean_sigma_hat));
    rows.push(row(RUN_SCOPE, "mean_lambda", r.mean_lambda));
    rows.push(row(RUN_SCOPE, "mean_support_size", r.mean_support_size));
    if let Some(o) = r.omega0_rate {
        rows.push(row(RUN_SCOPE, "omega0_rate", o));
    }
    for g in &r.bias_groups {
        let metric = format!("bias_{}", g.group.label());
        rows.push(row("Lasso", &metric, g.lasso));
        rows.push(row("DB", &metric, g.db));
        if let Some(v) = g.ddb {
            rows.push(row("DDB", &metric, v));
        }
    }
    rows
}

fn render_csv(r: &SimulationReport) -> String {
    // `{}` on f64 prints the shortest representation that parses back exactly.
    let mut s = String::from("method,metric,value\n");
    for c in csv_rows(r) {
        let _ = writeln!(s, "{},{},{}", c.scope, c.metric, c.value);
    }
    s
}

pub fn parse_csv_report(text: &str) -> Result<Vec<CsvRow>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
    let headers = rdr.headers()?.clone();
    if headers.iter().collect::<Vec<_>>() != ["method", "metric", "value"] {
        return Err(Error::InvalidData(format!("unexpected report header {headers:?}")));
    }
    rdr.records()
        .map(|rec| {
            let rec = rec?;
            let value = rec[2]
                .parse::<f64>()
                .map_err(|e| Error::InvalidData(format!("bad value {:?}: {e}", &rec[2])))?;
            Ok(CsvRow { scope: rec[0].to_string(), metric: rec[1].to_string(), value })
        })
        .collect()
}

/// Rebuilds the per-method summaries from parsed CSV rows.
pub fn method_summaries_from_rows(rows: &[CsvRow]) -> Result<Vec<MethodSummary>> {
    let mut out: Vec<MethodSummary> = Vec::new();
    for r in rows {
        let Some(method) = CiMethod::parse(&r.scope) else { continue };
        if r.metric.starts_with("bias_") {
            continue;
        }
        let idx = match out.iter().position(|m| m.method == method) {
            Some(i) => i,
            None => {
                out.push(MethodSummary {
                    method,
                    cov_s: f64::NAN,
                    cov_sc: f64::NAN,
                    len_s: f64::NAN,
                    len_sc: f64::NAN,
                    records_s: 0,
                    records_sc: 0,
                });
                out.len() - 1
            }
        };
        let m = &mut out[idx];
        match r.metric.as_str() {
            "cov_S" => m.cov_s = r.value,
            "cov_Sc" => m.cov_sc = r.value,
            "len_S" => m.len_s = r.value,
            "len_Sc" => m.len_sc = r.value,
            "records_S" => m.records_s = r.value as usize,
            "records_Sc" => m.records_sc = r.value as usize,
            other => return Err(Error::InvalidData(format!("unknown metric {other} for {}", r.scope))),
        }
    }
    Ok(out)
}

/// JSON Schema (draft 2020-12 subset) of the JSON report.
///
/// Means over an empty group are NaN in memory and `null` in JSON.
pub const REPORT_SCHEMA: &str = r#"{
  "$schema": "https://json-schema.org/draft/2020-12/schema",
  "title": "SimulationReport",
  "type": "object",
  "required": ["n", "p", "s", "boot", "level", "master_seed", "n_reps", "successful_reps", "failed_reps",
               "methods", "mean_sigma_hat", "mean_lambda", "mean_support_size", "omega0_rate",
               "bias_table", "bias_groups", "condition_summary", "pivots"],
  "properties": {
    "n": {"type": "integer"},
    "p": {"type": "integer"},
    "s": {"type": "integer"},
    "boot": {"type": "integer"},
    "level": {"type": "number"},
    "master_seed": {"type": "integer"},
    "n_reps": {"type": "integer"},
    "successful_reps": {"type": "integer"},
    "failed_reps": {"type": "integer"},
    "methods": {
      "type": "array",
      "items": {
        "type": "object",
        "required": ["method", "cov_s", "cov_sc", "len_s", "len_sc", "records_s", "records_sc"],
        "properties": {
          "method": {"type": "string", "enum": ["BS-DB", "DB", "DDB"]},
          "cov_s": {"type": ["number", "null"]},
          "cov_sc": {"type": ["number", "null"]},
          "len_s": {"type": ["number", "null"]},
          "len_sc": {"type": ["number", "null"]},
          "records_s": {"type": "integer"},
          "records_sc": {"type": "integer"}
        }
      }
    },
    "mean_sigma_hat": {"type": "number"},
    "mean_lambda": {"type": "number"},
    "mean_support_size": {"type": "number"},
    "omega0_rate": {"type": ["number", "null"]},
    "bias_table": {
      "type": "array",
      "items": {
        "type": "object",
        "required": ["j", "beta_true", "group", "lasso", "db", "ddb"],
        "properties": {
          "j": {"type": "integer"},
          "beta_true": {"type": "number"},
          "group": {"type": "string", "enum": ["Zero", "Weak", "Strong"]},
          "lasso": {"type": "number"},
          "db": {"type": "number"},
          "ddb": {"type": ["number", "null"]}
        }
      }
    },
    "bias_groups": {
      "type": "array",
      "items": {
        "type": "object",
        "required": ["group", "coords", "lasso", "db", "ddb"],
        "properties": {
          "group": {"type": "string", "enum": ["Zero", "Weak", "Strong"]},
          "coords": {"type": "integer"},
          "lasso": {"type": "number"},
          "db": {"type": "number"},
          "ddb": {"type": ["number", "null"]}
        }
      }
    },
    "condition_summary": {
      "type": ["object", "null"],
      "required": ["reps", "mean_kappa", "mean_k1", "mean_c_min", "mean_s_tilde", "mean_g_lasso", "population"],
      "properties": {
        "reps": {"type": "integer"},
        "mean_kappa": {"type": "number"},
        "mean_k1": {"type": "number"},
        "mean_c_min": {"type": "number"},
        "mean_s_tilde": {"type": "number"},
        "mean_g_lasso": {"type": "number"},
        "population": {"type": ["object", "null"]}
      }
    },
    "pivots": {
      "type": "array",
      "items": {
        "type": "object",
        "required": ["j", "in_support", "ks_db", "ks_ddb"],
        "properties": {
          "j": {"type": "integer"},
          "in_support": {"type": "boolean"},
          "ks_db": {"type": "number"},
          "ks_ddb": {"type": ["number", "null"]}
        }
      }
    }
  }
}"#;

fn type_matches(v: &Value, ty: &str) -> bool {
    match ty {
        "object" => v.is_object(),
        "array" => v.is_array(),
        "string" => v.is_string(),
        "boolean" => v.is_boolean(),
        "null" => v.is_null(),
        "number" => v.is_number(),
        "integer" => v.is_u64() || v.is_i64(),
        _ => false,
    }
}

fn check(schema: &Value, v: &Value, path: &str) -> std::result::Result<(), String> {
    if let Some(ty) = schema.get("type") {
        let ok = match ty {
            Value::String(t) => type_matches(v, t),
            Value::Array(ts) => ts.iter().filter_map(Value::as_str).any(|t| type_matches(v, t)),
            _ => return Err(format!("{path}: malformed schema type")),
        };
        if !ok {
            return Err(format!("{path}: expected {ty}, found {v}"));
        }
    }
    if let Some(Value::Array(allowed)) = schema.get("enum") {
        if !allowed.contains(v) {
            return Err(format!("{path}: {v} not in {allowed:?}"));
        }
    }
    if let Value::Object(obj) = v {
        if let Some(Value::Array(req)) = schema.get("required") {
            for k in req.iter().filter_map(Value::as_str) {
                if !obj.contains_key(k) {
                    return Err(format!("{path}: missing key {k}"));
                }
            }
        }
        if let Some(Value::Object(props)) = schema.get("properties") {
            for (k, sub) in props {
                if let Some(child) = obj.get(k) {
                    check(sub, child, &format!("{path}.{k}"))?;
                }
            }
        }
    }
    if let (Value::Array(items), Some(sub)) = (v, schema.get("items")) {
        for (i, item) in items.iter().enumerate() {
            check(sub, item, &format!("{path}[{i}]"))?;
        }
    }
    Ok(())
}

/// Validates a JSON document against [`REPORT_SCHEMA`] (type, enum, required, properties and items).
pub fn validate_report_json(doc: &Value) -> Result<()> {
    let schema: Value = serde_json::from_str(REPORT_SCHEMA)?;
    check(&schema, doc, "$").map_err(Error::InvalidData)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::run::{BiasRow, CoefGroup, GroupBias};

    fn sample() -> SimulationReport {
        SimulationReport {
            n: 100,
            p: 500,
            s: 20,
            boot: 300,
            level: 0.95,
            master_seed: 7,
            n_reps: 2,
            successful_reps: 2,
            failed_reps: 0,
            methods: vec![MethodSummary {
                method: CiMethod::BsDb,
                cov_s: 0.95,
                cov_sc: 1.0,
                len_s: 1.1234567890123,
                len_sc: 0.5,
                records_s: 40,
                records_sc: 60,
            }],
            mean_sigma_hat: 2.2,
            mean_lambda: 0.35,
            mean_support_size: 12.5,
            omega0_rate: Some(0.0),
            bias_table: vec![BiasRow {
                j: 0,
                beta_true: 2.0,
                group: CoefGroup::Strong,
                lasso: -0.7,
                db: -0.3,
                ddb: Some(-0.1),
            }],
            bias_groups: vec![GroupBias { group: CoefGroup::Strong, coords: 1, lasso: -0.7, db: -0.3, ddb: Some(-0.1) }],
            condition_summary: None,
            pivots: vec![],
        }
    }

    #[test]
    fn empty_methods_give_header_only() {
        let r = SimulationReport { methods: vec![], ..sample() };
        let t = render_report(&r, ReportFormat::Table).unwrap();
        assert_eq!(t.lines().count(), 1);
        assert!(t.starts_with("method"));
    }

    #[test]
    fn table_layout() {
        let t = render_report(&sample(), ReportFormat::Table).unwrap();
        let lines: Vec<&str> = t.lines().collect();
        assert!(lines[0].split_whitespace().eq(["method", "cov_S", "cov_Sc", "len_S", "len_Sc"]));
        assert!(lines[1].split_whitespace().eq(["BS-DB", "0.950", "1.000", "1.123", "0.500"]));
        assert_eq!(lines[2], "");
    }

    #[test]
    fn csv_round_trip() {
        let r = sample();
        let text = render_report(&r, ReportFormat::Csv).unwrap();
        let rows = parse_csv_report(&text).unwrap();
        assert_eq!(rows, csv_rows(&r));
        assert_eq!(method_summaries_from_rows(&rows).unwrap(), r.methods);
    }

    #[test]
    fn json_matches_schema() {
        let text = render_report(&sample(), ReportFormat::Json).unwrap();
        let doc: Value = serde_json::from_str(&text).unwrap();
        validate_report_json(&doc).unwrap();
        let mut broken = doc.clone();
        broken.as_object_mut().unwrap().remove("methods");
        assert!(validate_report_json(&broken).is_err());
        let mut wrong = doc;
        wrong["methods"][0]["method"] = Value::from("XX");
        assert!(validate_report_json(&wrong).is_err());
    }

    #[test]
    fn format_names() {
        assert_eq!(ReportFormat::parse("TABLE"), Some(ReportFormat::Table));
        assert_eq!(ReportFormat::parse("csv"), Some(ReportFormat::Csv));
        assert_eq!(ReportFormat::parse("xml"), None);
    }
}
