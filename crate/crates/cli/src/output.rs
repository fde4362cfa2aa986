use lacewalk::report::{self, Document};
use serde::Serialize;
use serde_json::Value;

pub fn columns(command: &str) -> &'static [&'static str] {
    match command {
        "dist-check" => &["n", "sup", "normalized"],
        "enumerate" => &["n", "c_n", "count", "mu_bound"],
        "pi" => &["order", "tau", "n", "x", "numerator", "denominator"],
        "pc" => &["tau", "method", "pc", "mu", "lower", "upper", "states", "transitions", "iterations"],
        "scan" => &["tau", "pc_estimate", "method", "diff", "log_tau", "log_diff", "error"],
        "clt" => &["n", "k", "kappa", "value", "target", "deviation", "flagged"],
        "const" => &["n", "i_n", "i_n_quadrature", "quadrature_tail_bound", "u_return"],
        _ => &[],
    }
}

fn compact(v: &impl Serialize) -> String {
    serde_json::to_string(v).expect("serializable")
}

fn cell(v: Option<&Value>) -> String {
    match v {
        None | Some(Value::Null) => String::new(),
        Some(Value::String(s)) => s.clone(),
        Some(other) => other.to_string(),
    }
}

/// Comment lines with the command, config and summary, then the report
/// table and the row table, separated by a blank line.
pub fn to_csv(doc: &Document, columns: &[&str]) -> String {
    let mut out = format!(
        "# lacewalk {}\n# config {}\n# summary {}\n",
        doc.command,
        compact(&doc.config),
        compact(&doc.summary)
    );
    if !doc.reports.is_empty() {
        out.push_str(&report::to_csv(&doc.reports));
    }
    if !doc.rows.is_empty() && !columns.is_empty() {
        if !doc.reports.is_empty() {
            out.push('\n');
        }
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(columns).expect("in-memory write");
        for row in &doc.rows {
            w.write_record(columns.iter().map(|c| cell(row.get(*c)))).expect("in-memory write");
        }
        out.push_str(&String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 cells"));
    }
    out
}
