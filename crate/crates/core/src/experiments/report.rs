//! CSV and SVG exports for campaign results, plus the inverse import used to
//! regenerate reports from previously exported files. All writers are
//! deterministic: equal inputs produce byte-identical files.

use std::fs;
use std::io::{self, Write};
use std::path::Path;
use std::str::FromStr;

use thiserror::Error;

use super::{RunSummary, TrialRecord};
use crate::benchmark::{AttackKind, DatasetKind};
use crate::search_space::Genotype;

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("io error: {0}")]
    Io(#[from] io::Error),
    #[error("{path} line {line}: {message}")]
    BadLine {
        path: String,
        line: usize,
        message: String,
    },
}

/// Shortest decimal form that round-trips the value exactly.
fn fmt_f64(value: f64) -> String {
    value.to_string()
}

fn quote_genotype(genotype: &Genotype) -> String {
    format!("\"{genotype}\"")
}

pub const SUMMARY_HEADER: &str =
    "optimizer,dataset,attack,trials,budget,mean,std,min,max,best_genotype";
pub const TRACES_HEADER: &str = "optimizer,dataset,attack,trial,fe,best_accuracy";
pub const RECORDS_HEADER: &str =
    "optimizer,dataset,attack,trial,seed,budget,complete,final_accuracy,final_genotype";

/// One row per (optimizer, instance) cell.
pub fn export_summary_csv(summaries: &[RunSummary], path: impl AsRef<Path>) -> Result<(), ReportError> {
    let mut out = Vec::new();
    writeln!(out, "{SUMMARY_HEADER}")?;
    for s in summaries {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            s.optimizer,
            s.dataset,
            s.attack,
            s.trials,
            s.budget,
            fmt_f64(s.mean),
            fmt_f64(s.std),
            fmt_f64(s.min),
            fmt_f64(s.max),
            quote_genotype(&s.best_genotype),
        )?;
    }
    fs::write(path, out)?;
    Ok(())
}

/// One row per fitness evaluation of every trial; `fe` counts from 1.
pub fn export_traces_csv(records: &[TrialRecord], path: impl AsRef<Path>) -> Result<(), ReportError> {
    let mut out = Vec::new();
    writeln!(out, "{TRACES_HEADER}")?;
    for r in records {
        for (i, &best) in r.trace.iter().enumerate() {
            writeln!(
                out,
                "{},{},{},{},{},{}",
                r.optimizer,
                r.dataset,
                r.attack,
                r.trial,
                i + 1,
                fmt_f64(best),
            )?;
        }
    }
    fs::write(path, out)?;
    Ok(())
}

/// One row per trial with its outcome; together with the traces file this is
/// enough to reconstruct every [`TrialRecord`].
pub fn export_records_csv(records: &[TrialRecord], path: impl AsRef<Path>) -> Result<(), ReportError> {
    let mut out = Vec::new();
    writeln!(out, "{RECORDS_HEADER}")?;
    for r in records {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            r.optimizer,
            r.dataset,
            r.attack,
            r.trial,
            r.seed,
            r.budget,
            r.complete,
            fmt_f64(r.final_best.1),
            quote_genotype(&r.final_best.0),
        )?;
    }
    fs::write(path, out)?;
    Ok(())
}

/// Rebuilds trial records from a records CSV and its traces CSV. Records
/// come back in file order with their traces attached.
pub fn import_records(
    records_path: impl AsRef<Path>,
    traces_path: impl AsRef<Path>,
) -> Result<Vec<TrialRecord>, ReportError> {
    let records_path = records_path.as_ref();
    let traces_path = traces_path.as_ref();

    let text = fs::read_to_string(records_path)?;
    let mut records = Vec::new();
    let mut lines = text.lines().enumerate();
    expect_header(records_path, lines.next(), RECORDS_HEADER)?;
    for (line_no, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let fields = split_csv(line);
        let bad = |message: String| ReportError::BadLine {
            path: records_path.display().to_string(),
            line: line_no + 1,
            message,
        };
        if fields.len() != 9 {
            return Err(bad(format!("expected 9 fields, got {}", fields.len())));
        }
        let dataset =
            DatasetKind::from_str(&fields[1]).map_err(&bad)?;
        let attack = AttackKind::from_str(&fields[2]).map_err(&bad)?;
        let parse_num = |s: &str, what: &str| {
            s.parse::<u64>()
                .map_err(|_| bad(format!("bad {what} '{s}'")))
        };
        let genotype: Genotype = fields[8]
            .parse()
            .map_err(|e| bad(format!("bad genotype '{}': {e}", fields[8])))?;
        records.push(TrialRecord {
            optimizer: fields[0].clone(),
            dataset,
            attack,
            trial: parse_num(&fields[3], "trial")? as u32,
            seed: parse_num(&fields[4], "seed")?,
            budget: parse_num(&fields[5], "budget")? as usize,
            complete: fields[6] == "true",
            final_best: (
                genotype,
                fields[7]
                    .parse::<f64>()
                    .map_err(|_| bad(format!("bad accuracy '{}'", fields[7])))?,
            ),
            trace: Vec::new(),
        });
    }

    let text = fs::read_to_string(traces_path)?;
    let mut lines = text.lines().enumerate();
    expect_header(traces_path, lines.next(), TRACES_HEADER)?;
    for (line_no, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let fields = split_csv(line);
        let bad = |message: String| ReportError::BadLine {
            path: traces_path.display().to_string(),
            line: line_no + 1,
            message,
        };
        if fields.len() != 6 {
            return Err(bad(format!("expected 6 fields, got {}", fields.len())));
        }
        let trial: u32 = fields[3]
            .parse()
            .map_err(|_| bad(format!("bad trial '{}'", fields[3])))?;
        let best: f64 = fields[5]
            .parse()
            .map_err(|_| bad(format!("bad accuracy '{}'", fields[5])))?;
        let record = records
            .iter_mut()
            .find(|r| {
                r.optimizer == fields[0]
                    && r.dataset.name() == fields[1]
                    && r.attack.name() == fields[2]
                    && r.trial == trial
            })
            .ok_or_else(|| bad("trace row without a matching record".to_string()))?;
        record.trace.push(best);
    }
    Ok(records)
}

fn expect_header(
    path: &Path,
    line: Option<(usize, &str)>,
    expected: &str,
) -> Result<(), ReportError> {
    match line {
        Some((_, l)) if l.trim() == expected => Ok(()),
        other => Err(ReportError::BadLine {
            path: path.display().to_string(),
            line: 1,
            message: format!("expected header '{expected}', got {other:?}"),
        }),
    }
}

/// Minimal CSV field splitter honoring double-quoted fields (used for the
/// genotype column).
fn split_csv(line: &str) -> Vec<String> {
    let mut fields = Vec::new();
    let mut current = String::new();
    let mut quoted = false;
    for c in line.chars() {
        match c {
            '"' => quoted = !quoted,
            ',' if !quoted => fields.push(std::mem::take(&mut current)),
            _ => current.push(c),
        }
    }
    fields.push(current);
    fields
}

// Fixed drawing geometry, shared by every export so files diff cleanly.
const PANEL_WIDTH: f64 = 360.0;
const PANEL_HEIGHT: f64 = 240.0;
const MARGIN_LEFT: f64 = 52.0;
const MARGIN_BOTTOM: f64 = 34.0;
const MARGIN_TOP: f64 = 26.0;
const MARGIN_RIGHT: f64 = 14.0;
const COLUMNS: usize = 2;

const PALETTE: [&str; 9] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
    "#bcbd22",
];

/// Deterministic convergence chart: one panel per (dataset, attack) in
/// summary order, one mean-trace polyline per optimizer, fixed canvas
/// geometry and palette.
pub fn export_convergence_svg(
    summaries: &[RunSummary],
    path: impl AsRef<Path>,
) -> Result<(), ReportError> {
    let mut instances: Vec<(DatasetKind, AttackKind)> = Vec::new();
    let mut optimizers: Vec<String> = Vec::new();
    for s in summaries {
        if !instances.contains(&(s.dataset, s.attack)) {
            instances.push((s.dataset, s.attack));
        }
        if !optimizers.contains(&s.optimizer) {
            optimizers.push(s.optimizer.clone());
        }
    }

    let rows = instances.len().div_ceil(COLUMNS);
    let width = PANEL_WIDTH * COLUMNS.min(instances.len().max(1)) as f64;
    let height = PANEL_HEIGHT * rows.max(1) as f64 + 24.0; // legend strip

    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width}\" height=\"{height}\" \
         viewBox=\"0 0 {width} {height}\" font-family=\"monospace\" font-size=\"11\">\n"
    ));
    svg.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");

    for (panel, &(dataset, attack)) in instances.iter().enumerate() {
        let panel_x = (panel % COLUMNS) as f64 * PANEL_WIDTH;
        let panel_y = (panel / COLUMNS) as f64 * PANEL_HEIGHT;
        let cell: Vec<&RunSummary> = summaries
            .iter()
            .filter(|s| s.dataset == dataset && s.attack == attack)
            .collect();

        // Panel-local data ranges.
        let max_fe = cell
            .iter()
            .map(|s| s.mean_trace.len())
            .max()
            .unwrap_or(1)
            .max(1);
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for s in &cell {
            for &v in &s.mean_trace {
                lo = lo.min(v);
                hi = hi.max(v);
            }
        }
        if !lo.is_finite() || !hi.is_finite() {
            lo = 0.0;
            hi = 1.0;
        }
        if hi - lo < 1e-9 {
            hi = lo + 1.0;
        }

        let plot_x = panel_x + MARGIN_LEFT;
        let plot_y = panel_y + MARGIN_TOP;
        let plot_w = PANEL_WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
        let plot_h = PANEL_HEIGHT - MARGIN_TOP - MARGIN_BOTTOM;

        svg.push_str(&format!(
            "<text x=\"{:.2}\" y=\"{:.2}\" font-weight=\"bold\">{} / {}</text>\n",
            plot_x,
            panel_y + 16.0,
            dataset,
            attack
        ));
        svg.push_str(&format!(
            "<rect x=\"{plot_x:.2}\" y=\"{plot_y:.2}\" width=\"{plot_w:.2}\" height=\"{plot_h:.2}\" \
             fill=\"none\" stroke=\"#444444\" stroke-width=\"1\"/>\n"
        ));
        svg.push_str(&format!(
            "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"end\">{:.1}</text>\n",
            plot_x - 4.0,
            plot_y + 10.0,
            hi
        ));
        svg.push_str(&format!(
            "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"end\">{:.1}</text>\n",
            plot_x - 4.0,
            plot_y + plot_h,
            lo
        ));
        svg.push_str(&format!(
            "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"end\">{}</text>\n",
            plot_x + plot_w,
            plot_y + plot_h + 14.0,
            max_fe
        ));
        svg.push_str(&format!(
            "<text x=\"{:.2}\" y=\"{:.2}\">fe</text>\n",
            plot_x,
            plot_y + plot_h + 14.0
        ));

        for s in &cell {
            let color_index = optimizers
                .iter()
                .position(|o| *o == s.optimizer)
                .unwrap_or(0);
            let color = PALETTE[color_index % PALETTE.len()];
            let mut points = Vec::with_capacity(s.mean_trace.len());
            for (i, &v) in s.mean_trace.iter().enumerate() {
                let x = plot_x + (i as f64 + 1.0) / max_fe as f64 * plot_w;
                let y = plot_y + plot_h - (v - lo) / (hi - lo) * plot_h;
                points.push(format!("{x:.2},{y:.2}"));
            }
            svg.push_str(&format!(
                "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\" points=\"{}\"/>\n",
                points.join(" ")
            ));
        }
    }

    // Legend strip along the bottom.
    let legend_y = height - 8.0;
    for (i, optimizer) in optimizers.iter().enumerate() {
        let x = 12.0 + i as f64 * 110.0;
        let color = PALETTE[i % PALETTE.len()];
        svg.push_str(&format!(
            "<rect x=\"{x:.2}\" y=\"{:.2}\" width=\"10\" height=\"10\" fill=\"{color}\"/>\n",
            legend_y - 9.0
        ));
        svg.push_str(&format!(
            "<text x=\"{:.2}\" y=\"{legend_y:.2}\">{optimizer}</text>\n",
            x + 14.0
        ));
    }
    svg.push_str("</svg>\n");
    fs::write(path, svg)?;
    Ok(())
}
