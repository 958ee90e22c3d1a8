use std::fmt::Write as _;
use std::path::Path;

use super::{MetricsReport, Protocol, SampleRecord, Stat};
use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    /// Aligned table, one row per method.
    Text,
    /// One row per method with mean and std columns.
    Csv,
    /// One row per sample and method, ordered by method, scenario and step.
    PlotData,
}

const NA: &str = "NA";

fn cell(s: Option<Stat>) -> String {
    s.map_or_else(|| NA.to_string(), |s| format!("{:.2} ± {:.2}", s.mean, s.std))
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| NA.to_string(), |v| v.to_string())
}

fn text(report: &MetricsReport) -> String {
    let mut out = String::new();
    let title = match report.protocol {
        Protocol::Static => "Static evaluation",
        Protocol::Dynamic => "Dynamic evaluation",
    };
    writeln!(
        out,
        "{title}: {} samples, {} scenarios (mean ± population std over samples)",
        report.samples, report.scenarios
    )
    .unwrap();
    let header = ["Method", "Tip error (mm)", "Shape error (mm)", "Force error (mN)", "Location error (mm)"];
    let rows: Vec<[String; 5]> = report
        .methods
        .iter()
        .map(|m| {
            let m = &m.metrics;
            [
                m.method.clone(),
                cell(Some(m.tip_mm)),
                cell(Some(m.shape_mm)),
                cell(m.force_mn),
                cell(m.location_mm),
            ]
        })
        .collect();
    let widths: Vec<usize> = (0..5)
        .map(|j| rows.iter().map(|r| r[j].chars().count()).chain([header[j].len()]).max().unwrap())
        .collect();
    let line = |cells: Vec<&str>| -> String {
        cells
            .iter()
            .zip(&widths)
            .map(|(c, w)| format!("{c:<w$}", w = *w))
            .collect::<Vec<_>>()
            .join("  ")
            .trim_end()
            .to_string()
    };
    writeln!(out, "{}", line(header.to_vec())).unwrap();
    writeln!(out, "{}", "-".repeat(widths.iter().sum::<usize>() + 8)).unwrap();
    for r in &rows {
        writeln!(out, "{}", line(r.iter().map(String::as_str).collect())).unwrap();
    }
    out
}

fn csv(report: &MetricsReport) -> String {
    let mut out = String::from(
        "method,samples,tip_mean_mm,tip_std_mm,shape_mean_mm,shape_std_mm,force_mean_mn,force_std_mn,location_mean_mm,location_std_mm,location_samples\n",
    );
    for m in &report.methods {
        let m = &m.metrics;
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{}",
            m.method,
            m.tip_mm.count,
            m.tip_mm.mean,
            m.tip_mm.std,
            m.shape_mm.mean,
            m.shape_mm.std,
            opt(m.force_mn.map(|s| s.mean)),
            opt(m.force_mn.map(|s| s.std)),
            opt(m.location_mm.map(|s| s.mean)),
            opt(m.location_mm.map(|s| s.std)),
            m.location_mm.map_or(0, |s| s.count),
        )
        .unwrap();
    }
    out
}

fn plot_data(report: &MetricsReport) -> String {
    let mut out = String::from(
        "method,scenario,step,bend_angle_deg,tip_error_mm,shape_error_mm,gt_force_mn,est_force_mn,force_error_mn,gt_location_mm,est_location_mm,location_error_mm,gt_active\n",
    );
    for m in &report.methods {
        let mut records: Vec<&SampleRecord> = m.records.iter().collect();
        records.sort_by_key(|r| (r.scenario, r.step));
        for r in records {
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{},{},{}",
                m.metrics.method,
                r.scenario,
                r.step,
                r.bend_angle_deg,
                r.tip_error_mm,
                r.shape_error_mm,
                r.gt_force_mn,
                opt(r.est_force_mn),
                opt(r.force_error_mn),
                r.gt_location_mm,
                opt(r.est_location_mm),
                opt(r.location_error_mm),
                r.gt_active as u8,
            )
            .unwrap();
        }
    }
    out
}

/// Renders `report` in `format`.
pub fn render(report: &MetricsReport, format: ReportFormat) -> String {
    match format {
        ReportFormat::Text => text(report),
        ReportFormat::Csv => csv(report),
        ReportFormat::PlotData => plot_data(report),
    }
}

pub fn export_report(report: &MetricsReport, path: impl AsRef<Path>, format: ReportFormat) -> Result<()> {
    std::fs::write(path, render(report, format))?;
    Ok(())
}
