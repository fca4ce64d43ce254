//! Table writers for convergence studies.

use std::fmt::Write as _;

use ncfem_core::errors::{ConvergenceReport, ConvergenceRow};
use serde_json::{json, Value};

pub const CSV_HEADER: &str = "test,method,epsilon,n,h,dof_phi,dof_total,err_phi,rate_phi,err_u_l2,rate_u_l2,err_u_h1,rate_u_h1,solve_seconds";

fn rate(r: Option<f64>) -> String {
    r.map(|v| format!("{v:.2}")).unwrap_or_default()
}

fn seconds(row: &ConvergenceRow, with_timing: bool) -> String {
    if with_timing {
        format!("{:.3}", row.solve_seconds)
    } else {
        String::new()
    }
}

/// CSV with the fixed column order. Timing is blank unless `with_timing`,
/// which keeps serial runs byte-identical.
pub fn to_csv(report: &ConvergenceReport, with_timing: bool) -> String {
    let mut s = String::from(CSV_HEADER);
    s.push('\n');
    for r in &report.rows {
        let _ = writeln!(
            s,
            "{},{},{:e},{},{:.6e},{},{},{:.6e},{},{:.6e},{},{:.6e},{},{}",
            r.test,
            r.method,
            r.epsilon,
            r.n,
            r.h,
            r.dof_phi,
            r.dof_total,
            r.err_phi,
            rate(r.rate_phi),
            r.err_u_l2,
            rate(r.rate_u_l2),
            r.err_u_h1,
            rate(r.rate_u_h1),
            seconds(r, with_timing)
        );
    }
    s
}

/// Aligned markdown table with the same content as the CSV.
pub fn to_markdown(report: &ConvergenceReport, with_timing: bool) -> String {
    let header: Vec<String> = CSV_HEADER.split(',').map(String::from).collect();
    let body: Vec<Vec<String>> = to_csv(report, with_timing).lines().skip(1).map(|l| l.split(',').map(String::from).collect()).collect();
    let widths: Vec<usize> = (0..header.len()).map(|c| body.iter().map(|r| r[c].len()).chain([header[c].len(), 2]).max().unwrap_or(2)).collect();
    let line = |cells: &[String]| {
        let padded: Vec<String> = cells.iter().zip(&widths).map(|(c, w)| format!("{c:>w$}")).collect();
        format!("| {} |\n", padded.join(" | "))
    };
    let mut s = line(&header);
    let rule: Vec<String> = widths.iter().map(|w| format!("{}:", "-".repeat(w - 1))).collect();
    s.push_str(&format!("| {} |\n", rule.join(" | ")));
    for r in &body {
        s.push_str(&line(r));
    }
    s
}

pub fn row_json(r: &ConvergenceRow, with_timing: bool) -> Value {
    let mut v = json!({
        "test": r.test,
        "method": r.method,
        "epsilon": r.epsilon,
        "n": r.n,
        "h": r.h,
        "dof_phi": r.dof_phi,
        "dof_total": r.dof_total,
        "err_phi": r.err_phi,
        "rate_phi": r.rate_phi,
        "err_u_l2": r.err_u_l2,
        "rate_u_l2": r.rate_u_l2,
        "err_u_h1": r.err_u_h1,
        "rate_u_h1": r.rate_u_h1,
    });
    if with_timing {
        v["solve_seconds"] = json!(r.solve_seconds);
    }
    v
}

pub fn to_json(report: &ConvergenceReport, failures: &[(String, String)], with_timing: bool) -> String {
    let rows: Vec<Value> = report.rows.iter().map(|r| row_json(r, with_timing)).collect();
    let failures: Vec<Value> = failures.iter().map(|(run, err)| json!({ "run": run, "error": err })).collect();
    serde_json::to_string_pretty(&json!({ "rows": rows, "failures": failures })).expect("json value serializes")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(n: usize, err: f64) -> ConvergenceRow {
        ConvergenceRow {
            test: "smooth".into(),
            method: "interp".into(),
            epsilon: 1e-4,
            n,
            h: 1.0 / n as f64,
            dof_phi: 10 * n,
            dof_total: 40 * n,
            err_phi: err,
            rate_phi: None,
            err_u_l2: err / 10.0,
            rate_u_l2: None,
            err_u_h1: err / 2.0,
            rate_u_h1: None,
            solve_seconds: 1.25,
        }
    }

    fn report() -> ConvergenceReport {
        let mut r = ConvergenceReport { rows: vec![row(4, 4e-2), row(8, 1e-2)] };
        r.fill_rates().unwrap();
        r
    }

    #[test]
    fn csv_layout() {
        let csv = to_csv(&report(), false);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], CSV_HEADER);
        assert_eq!(lines[1], "smooth,interp,1e-4,4,2.500000e-1,40,160,4.000000e-2,,4.000000e-3,,2.000000e-2,,");
        assert_eq!(lines[2], "smooth,interp,1e-4,8,1.250000e-1,80,320,1.000000e-2,2.00,1.000000e-3,2.00,5.000000e-3,2.00,");
        assert!(to_csv(&report(), true).lines().nth(1).unwrap().ends_with(",1.250"));
    }

    #[test]
    fn markdown_matches_csv_content() {
        let md = to_markdown(&report(), false);
        assert_eq!(md.lines().count(), 4);
        let widths: Vec<usize> = md.lines().map(str::len).collect();
        assert!(widths.iter().all(|&w| w == widths[0]), "{md}");
        assert!(md.contains("4.000000e-2"));
    }

    #[test]
    fn json_omits_timing_when_serial() {
        let j = to_json(&report(), &[("layer/interp/eps=1e-6/n=4".into(), "boom".into())], false);
        assert!(!j.contains("solve_seconds"));
        let v: Value = serde_json::from_str(&j).unwrap();
        assert_eq!(v["rows"][1]["rate_phi"], json!(2.0));
        assert_eq!(v["failures"][0]["error"], "boom");
    }
}
