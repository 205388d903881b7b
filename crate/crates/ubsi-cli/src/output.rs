//! Report writers: `report.json` with full provenance and `report.csv`
//! with one row per verdict. Both are written deterministically (fixed row
//! order, shortest round-trip float formatting), so identical configs
//! produce byte-identical files.

use anyhow::Context;
use std::path::Path;
use ubsi::geometry::Domain;

pub struct RunOutput {
    pub json: serde_json::Value,
    pub csv_header: Vec<String>,
    pub csv_rows: Vec<Vec<String>>,
    /// exit-code contract: true iff every verdict is true and every
    /// tolerance was met
    pub success: bool,
}

fn csv_escape(field: &str) -> String {
    if field.contains(',') || field.contains('"') || field.contains('\n') {
        format!("\"{}\"", field.replace('"', "\"\""))
    } else {
        field.to_string()
    }
}

pub fn render_csv(header: &[String], rows: &[Vec<String>]) -> String {
    let mut out = String::new();
    out.push_str(
        &header
            .iter()
            .map(|h| csv_escape(h))
            .collect::<Vec<_>>()
            .join(","),
    );
    out.push('\n');
    for row in rows {
        out.push_str(
            &row.iter()
                .map(|f| csv_escape(f))
                .collect::<Vec<_>>()
                .join(","),
        );
        out.push('\n');
    }
    out
}

pub fn write_reports(out_dir: &Path, output: &RunOutput) -> anyhow::Result<()> {
    std::fs::create_dir_all(out_dir)
        .with_context(|| format!("creating output dir {}", out_dir.display()))?;
    let json_path = out_dir.join("report.json");
    let mut json_text = serde_json::to_string_pretty(&output.json)?;
    json_text.push('\n');
    std::fs::write(&json_path, json_text)
        .with_context(|| format!("writing {}", json_path.display()))?;
    let csv_path = out_dir.join("report.csv");
    std::fs::write(&csv_path, render_csv(&output.csv_header, &output.csv_rows))
        .with_context(|| format!("writing {}", csv_path.display()))?;
    Ok(())
}

/// Compact one-field description of a domain for CSV rows.
pub fn domain_label(dom: &Domain) -> String {
    match dom {
        Domain::Box { intervals } => {
            let parts: Vec<String> = intervals
                .iter()
                .map(|(a, b)| format!("[{a};{b}]"))
                .collect();
            format!("box{}", parts.join("x"))
        }
        Domain::Ball { center, radius } => {
            format!("ball(dim={};r={})", center.len(), radius)
        }
        Domain::Empty { dim } => format!("empty(dim={dim})"),
    }
}

pub fn fmt(v: f64) -> String {
    format!("{v}")
}

pub fn header(names: &[&str]) -> Vec<String> {
    names.iter().map(|s| s.to_string()).collect()
}
