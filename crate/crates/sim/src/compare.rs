//! Side-by-side comparison of run sets: λ, force summaries, ratios and the
//! acceptance bands they should meet.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use jamsnake_core::environment::{BendClass, CheckpointLabel, PhaseLabel, TrajectoryKind};
use jamsnake_core::metrics::{format_sig, SummaryCell};

use crate::report::{summary_column, CONFIG_FILE};
use crate::run::ScenarioResult;
use crate::scenario::{Controller, Scenario};
use crate::SimError;

/// λ gate for FTL runs.
pub const LAMBDA_LIMIT: f64 = 0.25;
/// Band the FTL error is expected to fall in.
pub const LAMBDA_BAND: (f64, f64) = (0.09, 0.2);
/// Minimum tendon-only / FTL ratio of the middle checkpoint's Phase II force.
pub const FORCE_RATIO: f64 = 2.0;
/// Largest relative spread across extension strategies still called minor.
pub const STRATEGY_SPREAD: f64 = 0.15;

/// One controller/strategy of one scenario, reduced to what reports show.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSet {
    pub source: String,
    pub scenario: String,
    pub trajectory: (TrajectoryKind, BendClass),
    pub controller: Controller,
    pub strategy: String,
    /// Mean over runs.
    pub lambda: f64,
    pub cells: BTreeMap<(CheckpointLabel, PhaseLabel), SummaryCell>,
}

impl RunSet {
    pub fn label(&self) -> String {
        format!("{}:{}", self.scenario, summary_column(self.controller, &self.strategy))
    }

    pub fn cell(&self, c: CheckpointLabel, p: PhaseLabel) -> SummaryCell {
        self.cells.get(&(c, p)).copied().unwrap_or(SummaryCell::NoData)
    }

    pub fn from_result(result: &ScenarioResult, source: &str) -> Vec<RunSet> {
        let s = &result.scenario;
        result
            .strategies
            .iter()
            .map(|st| RunSet {
                source: source.to_string(),
                scenario: s.name.clone(),
                trajectory: (s.trajectory.kind, s.trajectory.bend_class),
                controller: s.controller,
                strategy: st.label.clone(),
                lambda: st.mean_lambda(),
                cells: st.summary.cells.clone(),
            })
            .collect()
    }

    /// Reads the run sets of an output directory written by `run`.
    pub fn load_dir(dir: &Path) -> Result<Vec<RunSet>, SimError> {
        let source = dir.display().to_string();
        let scenario = Scenario::load(&dir.join(CONFIG_FILE))?;
        let lambdas = read_lambdas(&dir.join("lambda.csv"))?;
        let summary = dir.join("summary.csv");
        if !summary.exists() {
            return Err(SimError::Validation(format!(
                "{source}: no summary.csv (run the scenario with the summary output)"
            )));
        }
        let cells = read_summary(&summary)?;
        let mut sets = Vec::new();
        for (strategy, values) in lambdas {
            let lambda = values.iter().sum::<f64>() / values.len() as f64;
            let column = summary_column(scenario.controller, &strategy);
            let cells = cells.get(&column).cloned().ok_or_else(|| {
                SimError::Validation(format!("{source}: summary.csv has no columns for {column}"))
            })?;
            sets.push(RunSet {
                source: source.clone(),
                scenario: scenario.name.clone(),
                trajectory: (scenario.trajectory.kind, scenario.trajectory.bend_class),
                controller: scenario.controller,
                strategy,
                lambda,
                cells,
            });
        }
        Ok(sets)
    }
}

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> SimError + '_ {
    move |e| SimError::Validation(format!("{}: {e}", path.display()))
}

/// λ per strategy label, in file order.
fn read_lambdas(path: &Path) -> Result<Vec<(String, Vec<f64>)>, SimError> {
    let mut r = csv::Reader::from_path(path).map_err(csv_err(path))?;
    let mut out: Vec<(String, Vec<f64>)> = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(csv_err(path))?;
        let strategy = rec.get(2).unwrap_or_default().to_string();
        let lambda: f64 = rec
            .get(4)
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| SimError::Validation(format!("{}: bad lambda in {rec:?}", path.display())))?;
        match out.iter_mut().find(|(s, _)| *s == strategy) {
            Some((_, v)) => v.push(lambda),
            None => out.push((strategy, vec![lambda])),
        }
    }
    if out.is_empty() {
        return Err(SimError::Validation(format!("{}: no runs", path.display())));
    }
    Ok(out)
}

/// Parses a rendered summary cell: `NT`, `--` or `mean±sd`.
pub fn parse_cell(text: &str) -> Option<SummaryCell> {
    match text.trim() {
        "NT" => Some(SummaryCell::NoTouch),
        "--" => Some(SummaryCell::NoData),
        t => {
            let (m, s) = t.split_once('±')?;
            Some(SummaryCell::Value {
                mean: m.parse().ok()?,
                sd: s.parse().ok()?,
            })
        }
    }
}

type Cells = BTreeMap<(CheckpointLabel, PhaseLabel), SummaryCell>;

fn read_summary(path: &Path) -> Result<BTreeMap<String, Cells>, SimError> {
    let mut r = csv::Reader::from_path(path).map_err(csv_err(path))?;
    let header = r.headers().map_err(csv_err(path))?.clone();
    let bad = |m: String| SimError::Validation(format!("{}: {m}", path.display()));
    let mut out: BTreeMap<String, Cells> = BTreeMap::new();
    for rec in r.records() {
        let rec = rec.map_err(csv_err(path))?;
        let checkpoint = CheckpointLabel::ALL
            .into_iter()
            .find(|c| Some(c.as_str()) == rec.get(1))
            .ok_or_else(|| bad(format!("unknown checkpoint in {rec:?}")))?;
        for (col, text) in header.iter().zip(rec.iter()).skip(2) {
            let (column, phase) = col.rsplit_once(' ').ok_or_else(|| bad(format!("bad column {col:?}")))?;
            let phase = PhaseLabel::ALL
                .into_iter()
                .find(|p| p.as_str() == phase)
                .ok_or_else(|| bad(format!("bad phase in column {col:?}")))?;
            let cell = parse_cell(text).ok_or_else(|| bad(format!("bad cell {text:?}")))?;
            out.entry(column.to_string()).or_default().insert((checkpoint, phase), cell);
        }
    }
    Ok(out)
}

/// Pass/fail against one acceptance band.
#[derive(Debug, Clone, PartialEq)]
pub struct Flag {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellRow {
    pub checkpoint: CheckpointLabel,
    pub phase: PhaseLabel,
    pub values: Vec<SummaryCell>,
    /// Relative to the first set; `None` when either side has no data.
    pub ratios: Vec<Option<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub sets: Vec<RunSet>,
    pub lambda_ratios: Vec<f64>,
    pub rows: Vec<CellRow>,
    pub flags: Vec<Flag>,
}

impl Comparison {
    pub fn all_passed(&self) -> bool {
        self.flags.iter().all(|f| f.passed)
    }
}

/// `a / b`, with `0 / 0 = 1`.
pub fn ratio(a: f64, b: f64) -> f64 {
    if a == b {
        1.0
    } else {
        a / b
    }
}

/// `(max − min) / mean`; zero when every value is zero.
pub fn relative_spread(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    if max == min {
        0.0
    } else {
        (max - min) / mean.abs()
    }
}

pub fn compare(sets: Vec<RunSet>) -> Result<Comparison, SimError> {
    if sets.len() < 2 {
        return Err(SimError::Validation(format!(
            "comparison needs at least two run sets, got {}",
            sets.len()
        )));
    }
    let t = sets[0].trajectory;
    if let Some(other) = sets.iter().find(|s| s.trajectory != t) {
        return Err(SimError::Validation(format!(
            "incompatible scenarios: {} is {}-{} but {} is {}-{}",
            sets[0].label(),
            t.0.as_str(),
            t.1.as_str(),
            other.label(),
            other.trajectory.0.as_str(),
            other.trajectory.1.as_str()
        )));
    }
    let lambda_ratios = sets.iter().map(|s| ratio(s.lambda, sets[0].lambda)).collect();
    let mut rows = Vec::new();
    for checkpoint in CheckpointLabel::ALL {
        for phase in PhaseLabel::ALL {
            let values: Vec<_> = sets.iter().map(|s| s.cell(checkpoint, phase)).collect();
            let base = values[0].mean();
            let ratios = values
                .iter()
                .map(|v| Some(ratio(v.mean()?, base?)))
                .collect();
            rows.push(CellRow {
                checkpoint,
                phase,
                values,
                ratios,
            });
        }
    }

    let mut flags = Vec::new();
    for s in sets.iter().filter(|s| s.controller == Controller::Ftl) {
        let in_band = (LAMBDA_BAND.0..=LAMBDA_BAND.1).contains(&s.lambda);
        flags.push(Flag {
            name: format!("lambda {}", s.label()),
            passed: s.lambda <= LAMBDA_LIMIT,
            detail: format!(
                "λ = {} (limit {LAMBDA_LIMIT}, {} the {}–{} band)",
                format_sig(s.lambda, 4),
                if in_band { "inside" } else { "outside" },
                LAMBDA_BAND.0,
                LAMBDA_BAND.1
            ),
        });
    }

    let ftl: Vec<&RunSet> = sets.iter().filter(|s| s.controller == Controller::Ftl).collect();
    let tdcr: Vec<&RunSet> = sets.iter().filter(|s| s.controller == Controller::Tdcr).collect();
    for t in &tdcr {
        let tendon = t.cell(CheckpointLabel::Middle, PhaseLabel::II).mean();
        let fjm = ftl
            .iter()
            .filter_map(|f| f.cell(CheckpointLabel::Middle, PhaseLabel::II).mean())
            .reduce(f64::max);
        if let (Some(tendon), Some(fjm)) = (tendon, fjm) {
            let r = ratio(tendon, fjm);
            let verdict = if tendon > fjm { "tendon > FJM" } else { "tendon <= FJM" };
            flags.push(Flag {
                name: format!("middle phase II {}", t.label()),
                passed: r >= FORCE_RATIO,
                detail: format!(
                    "{verdict} at middle checkpoint: {} vs {} mN, ratio {} (need >= {FORCE_RATIO})",
                    format_sig(tendon, 4),
                    format_sig(fjm, 4),
                    format_sig(r, 4)
                ),
            });
        }
    }

    if ftl.len() >= 2 {
        let lambdas: Vec<f64> = ftl.iter().map(|s| s.lambda).collect();
        let mut worst = (relative_spread(&lambdas), "λ".to_string());
        for checkpoint in CheckpointLabel::ALL {
            for phase in PhaseLabel::ALL {
                let values: Vec<f64> = ftl.iter().filter_map(|s| s.cell(checkpoint, phase).mean()).collect();
                if values.is_empty() {
                    continue;
                }
                let spread = if values.len() < ftl.len() { f64::INFINITY } else { relative_spread(&values) };
                if spread > worst.0 {
                    worst = (spread, format!("{checkpoint} {phase}"));
                }
            }
        }
        let minor = worst.0 <= STRATEGY_SPREAD;
        flags.push(Flag {
            name: "strategy spread".into(),
            passed: minor,
            detail: format!(
                "largest relative spread {} ({}) across {} strategies: {}",
                format_sig(worst.0, 3),
                worst.1,
                ftl.len(),
                if minor { "minor impact" } else { "strategy matters" }
            ),
        });
    }

    Ok(Comparison {
        sets,
        lambda_ratios,
        rows,
        flags,
    })
}

fn fmt_ratio(r: Option<f64>) -> String {
    r.map_or("--".into(), |r| format_sig(r, 4))
}

impl Comparison {
    pub fn to_csv(&self, digits: usize) -> Result<Vec<u8>, SimError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let io = |e: csv::Error| SimError::Io(e.to_string());
        let mut header = vec!["metric".to_string(), "checkpoint".into(), "phase".into()];
        for s in &self.sets {
            header.push(s.label());
            header.push(format!("{} ratio", s.label()));
        }
        w.write_record(&header).map_err(io)?;
        let mut row = vec!["lambda".to_string(), String::new(), String::new()];
        for (s, r) in self.sets.iter().zip(&self.lambda_ratios) {
            row.push(format_sig(s.lambda, digits));
            row.push(format_sig(*r, digits));
        }
        w.write_record(&row).map_err(io)?;
        for r in &self.rows {
            let mut row = vec!["force".to_string(), r.checkpoint.as_str().into(), r.phase.as_str().into()];
            for (v, q) in r.values.iter().zip(&r.ratios) {
                row.push(v.render(digits));
                row.push(q.map_or("--".into(), |q| format_sig(q, digits)));
            }
            w.write_record(&row).map_err(io)?;
        }
        w.into_inner().map_err(|e| SimError::Io(e.to_string()))
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "sets:");
        for (i, s) in self.sets.iter().enumerate() {
            let _ = writeln!(out, "  [{i}] {} ({})", s.label(), s.source);
        }
        let _ = writeln!(out, "lambda:");
        for (s, r) in self.sets.iter().zip(&self.lambda_ratios) {
            let _ = writeln!(out, "  {:<24} {:>10}  x{}", s.label(), format_sig(s.lambda, 4), format_sig(*r, 4));
        }
        let _ = writeln!(out, "forces (mN, ratio to [0]):");
        for r in &self.rows {
            let cells: Vec<String> = r
                .values
                .iter()
                .zip(&r.ratios)
                .map(|(v, q)| format!("{:>12} x{:<6}", v.render(3), fmt_ratio(*q)))
                .collect();
            let _ = writeln!(out, "  {:<6} {:<3} {}", r.checkpoint.as_str(), r.phase.as_str(), cells.join(" "));
        }
        let _ = writeln!(out, "checks:");
        for f in &self.flags {
            let _ = writeln!(out, "  [{}] {}: {}", if f.passed { "pass" } else { "FAIL" }, f.name, f.detail);
        }
        out
    }

    /// Writes `comparison.csv` and `comparison.txt` into `out`.
    pub fn write(&self, out: &Path, digits: usize) -> Result<(), SimError> {
        let files = vec![
            ("comparison.csv".to_string(), self.to_csv(digits)?),
            ("comparison.txt".to_string(), self.to_text().into_bytes()),
        ];
        crate::report::write_atomically(out, &files)?;
        Ok(())
    }
}

/// Loads every directory and compares all run sets found.
pub fn compare_dirs(dirs: &[impl AsRef<Path>]) -> Result<Comparison, SimError> {
    let mut sets = Vec::new();
    for d in dirs {
        let d = d.as_ref();
        if !fs::metadata(d).map(|m| m.is_dir()).unwrap_or(false) {
            return Err(SimError::Validation(format!("{} is not a run output directory", d.display())));
        }
        sets.extend(RunSet::load_dir(d)?);
    }
    compare(sets)
}
