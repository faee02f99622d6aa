//! CSV files written after a run.
//!
//! - `summary.csv`: one row per detector and task (words, docs), three columns
//!   (P, R, F) per scenario, micro scores averaged over seeds.
//! - `cells.csv`: one row per cell with every aggregate and a status column.
//! - `runtimes.csv`: wall-clock seconds per cell (the only non-deterministic file).
//! - `sweep.csv`: median word and document F per sweep value, when sweeping.
//! - `curves/`: the per-day curves of every successful cell.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::path::Path;

use serde::Serialize;

use super::{BenchError, ResultCell};
use crate::evaluation::{write_curves_csv, Prf};

fn fmt(x: f64) -> String {
    format!("{x:.4}")
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt).unwrap_or_default()
}

fn mean(xs: &[f64]) -> Option<f64> {
    (!xs.is_empty()).then(|| xs.iter().sum::<f64>() / xs.len() as f64)
}

/// Median with the midpoint of the two central values for even lengths.
pub fn median(xs: &[f64]) -> Option<f64> {
    if xs.is_empty() {
        return None;
    }
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    })
}

pub fn write_outputs(cells: &[ResultCell], dir: &Path) -> Result<(), BenchError> {
    fs::create_dir_all(dir.join("curves"))?;
    write_summary(cells, File::create(dir.join("summary.csv"))?)?;
    write_cells(cells, File::create(dir.join("cells.csv"))?)?;
    let mut rt = csv::Writer::from_path(dir.join("runtimes.csv"))?;
    rt.write_record(["sweep_value", "scenario", "detector", "seed", "seconds"])?;
    for c in cells {
        rt.write_record([
            c.sweep_value.clone().unwrap_or_default(),
            c.scenario_id.to_string(),
            c.detector.clone(),
            c.seed.to_string(),
            format!("{:.3}", c.runtime_secs),
        ])?;
    }
    rt.flush()?;
    if cells.iter().any(|c| c.sweep_value.is_some()) {
        let mut w = csv::Writer::from_path(dir.join("sweep.csv"))?;
        for row in summarize_sweep(cells) {
            w.serialize(row)?;
        }
        w.flush()?;
    }
    for c in cells {
        if let Some(r) = c.report() {
            let sweep = c
                .sweep_value
                .as_deref()
                .map(|v| format!("_v{v}"))
                .unwrap_or_default();
            let name = format!(
                "s{}_{}_seed{}{sweep}.csv",
                c.scenario_id, c.detector, c.seed
            );
            write_curves_csv(File::create(dir.join("curves").join(name))?, &r.per_day)?;
        }
    }
    Ok(())
}

/// Word and document scores of each seed, per scenario.
type PerScenario = BTreeMap<u32, Vec<(Prf, Prf)>>;

/// Rows are (sweep value, detector, task), columns are
/// scenarios × {P, R, F}.
pub fn write_summary<W: std::io::Write>(cells: &[ResultCell], out: W) -> Result<(), BenchError> {
    let scenarios: Vec<u32> = {
        let mut s: Vec<u32> = cells.iter().map(|c| c.scenario_id).collect();
        s.sort_unstable();
        s.dedup();
        s
    };
    // Row order follows cell order: sweep index, then detector index.
    let mut rows: BTreeMap<(usize, usize), (&ResultCell, PerScenario)> = BTreeMap::new();
    for c in cells {
        let entry = rows
            .entry((c.key.sweep_index, c.key.detector_index))
            .or_insert_with(|| (c, BTreeMap::new()));
        let per = entry.1.entry(c.scenario_id).or_default();
        if let Some(r) = c.report() {
            per.push((r.micro.words, r.micro.docs));
        }
    }
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["sweep_value".to_string(), "detector".into(), "task".into()];
    for s in &scenarios {
        for m in ["P", "R", "F"] {
            header.push(format!("s{s}_{m}"));
        }
    }
    w.write_record(&header)?;
    for (first, per) in rows.values() {
        for (task, pick) in [("words", 0usize), ("docs", 1)] {
            let mut rec = vec![
                first.sweep_value.clone().unwrap_or_default(),
                first.detector.clone(),
                task.to_string(),
            ];
            for s in &scenarios {
                let prfs: Vec<Prf> = per
                    .get(s)
                    .map(|v| {
                        v.iter()
                            .map(|p| if pick == 0 { p.0 } else { p.1 })
                            .collect()
                    })
                    .unwrap_or_default();
                let p: Vec<f64> = prfs.iter().map(|x| x.precision).collect();
                let r: Vec<f64> = prfs.iter().filter_map(|x| x.recall).collect();
                let f: Vec<f64> = prfs.iter().map(|x| x.f_measure).collect();
                rec.extend([fmt_opt(mean(&p)), fmt_opt(mean(&r)), fmt_opt(mean(&f))]);
            }
            w.write_record(&rec)?;
        }
    }
    w.flush()?;
    Ok(())
}

fn write_cells<W: std::io::Write>(cells: &[ResultCell], out: W) -> Result<(), BenchError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "sweep_value",
        "scenario",
        "detector",
        "seed",
        "status",
        "word_P",
        "word_R",
        "word_F",
        "doc_P",
        "doc_R",
        "doc_F",
        "macro_word_F",
        "macro_doc_F",
        "alert_delay",
        "false_alerts",
        "alerts",
        "auc",
        "error",
    ])?;
    for c in cells {
        let mut rec = vec![
            c.sweep_value.clone().unwrap_or_default(),
            c.scenario_id.to_string(),
            c.detector.clone(),
            c.seed.to_string(),
        ];
        match &c.outcome {
            Ok(r) => {
                rec.push("ok".into());
                for p in [r.micro.words, r.micro.docs] {
                    rec.extend([fmt(p.precision), fmt_opt(p.recall), fmt(p.f_measure)]);
                }
                rec.extend([
                    fmt(r.macro_avg.words.f_measure),
                    fmt(r.macro_avg.docs.f_measure),
                    r.alert_delay_days
                        .map(|d| d.to_string())
                        .unwrap_or_default(),
                    r.false_alerts.to_string(),
                    r.total_alerts.to_string(),
                    fmt_opt(r.auc),
                    String::new(),
                ]);
            }
            Err(e) => {
                rec.push("failed".into());
                rec.extend(std::iter::repeat_n(String::new(), 12));
                rec.push(e.clone());
            }
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Median F-measures over seeds for one (sweep value, detector, scenario).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub sweep_value: String,
    pub detector: String,
    pub scenario: u32,
    pub word_f_median: Option<f64>,
    pub doc_f_median: Option<f64>,
    pub seeds: usize,
}

pub fn summarize_sweep(cells: &[ResultCell]) -> Vec<SweepRow> {
    let mut groups: BTreeMap<(usize, usize, u32), Vec<&ResultCell>> = BTreeMap::new();
    for c in cells {
        groups
            .entry((c.key.sweep_index, c.key.detector_index, c.scenario_id))
            .or_default()
            .push(c);
    }
    groups
        .into_values()
        .map(|g| {
            let ok: Vec<_> = g.iter().filter_map(|c| c.report()).collect();
            let words: Vec<f64> = ok.iter().map(|r| r.micro.words.f_measure).collect();
            let docs: Vec<f64> = ok.iter().map(|r| r.micro.docs.f_measure).collect();
            SweepRow {
                sweep_value: g[0].sweep_value.clone().unwrap_or_default(),
                detector: g[0].detector.clone(),
                scenario: g[0].scenario_id,
                word_f_median: median(&words),
                doc_f_median: median(&docs),
                seeds: ok.len(),
            }
        })
        .collect()
}
