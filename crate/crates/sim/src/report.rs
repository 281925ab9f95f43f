//! Output files of a scenario run.
//!
//! Everything is rendered in memory, written to a staging directory next to
//! the destination and then moved into place, so a failed run never leaves
//! partial data files behind.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use jamsnake_core::environment::{CheckpointLabel, PhaseLabel};
use jamsnake_core::metrics::{format_sig, OccupancyGrid, SweepAccumulator};

use crate::run::{RunRecord, ScenarioResult};
use crate::scenario::{Controller, Output};
use crate::SimError;

/// Significant digits of CSV floats; overridden by this environment variable.
pub const PRECISION_VAR: &str = "JAMSNAKE_CSV_PRECISION";
pub const DEFAULT_PRECISION: usize = 6;

pub const EVENTS_HEADER: [&str; 6] = ["strategy", "time_s", "step_id", "fjm_index", "action", "base_insertion_mm"];
pub const FORCES_HEADER: [&str; 10] = [
    "scenario",
    "controller",
    "strategy",
    "run",
    "checkpoint",
    "segment",
    "time_s",
    "duration_s",
    "phase",
    "force_mN",
];
pub const LAMBDA_HEADER: [&str; 7] = [
    "scenario",
    "controller",
    "strategy",
    "run",
    "lambda",
    "window_first_vertex",
    "window_last_vertex",
];

pub const CONFIG_FILE: &str = "effective_config.toml";
pub const METADATA_FILE: &str = "metadata.json";

/// How the steering commands are produced, stated in every metadata file.
pub const STEERING_NOTE: &str = "steering commands come from the deterministic steering law \
    (head bend towards the trajectory tangent half a segment ahead of the tip, clamped to the \
    bend limit); no manual force-minimising tuning is applied";

/// CSV float precision from the environment, or the default.
pub fn precision() -> Result<usize, SimError> {
    match std::env::var(PRECISION_VAR) {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(d) if (1..=17).contains(&d) => Ok(d),
            _ => Err(SimError::Validation(format!("{PRECISION_VAR} must be an integer in 1..=17, got {v:?}"))),
        },
        Err(_) => Ok(DEFAULT_PRECISION),
    }
}

fn csv_bytes<I, R>(header: &[&str], rows: I) -> Result<Vec<u8>, SimError>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = String>,
{
    let mut w = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| SimError::Io(e.to_string());
    w.write_record(header).map_err(io)?;
    for row in rows {
        w.write_record(row).map_err(io)?;
    }
    w.into_inner().map_err(|e| SimError::Io(e.to_string()))
}

/// Run 1 of every strategy.
fn first_runs(result: &ScenarioResult) -> impl Iterator<Item = (&str, &RunRecord)> {
    result
        .strategies
        .iter()
        .filter_map(|s| s.runs.first().map(|r| (s.label.as_str(), r)))
}

pub fn events_csv(result: &ScenarioResult, digits: usize) -> Result<Vec<u8>, SimError> {
    let rows = first_runs(result).flat_map(|(label, run)| {
        run.events.iter().map(move |e| {
            vec![
                label.to_string(),
                format_sig(e.time_s, digits),
                e.step_id.to_string(),
                e.fjm_index.map_or(String::new(), |i| (i + 1).to_string()),
                e.action.as_str().to_string(),
                format_sig(e.base_insertion, digits),
            ]
        })
    });
    csv_bytes(&EVENTS_HEADER, rows)
}

pub fn forces_csv(result: &ScenarioResult, digits: usize) -> Result<Vec<u8>, SimError> {
    let mut rows = Vec::new();
    for s in &result.strategies {
        for run in &s.runs {
            let meta = &run.trace.meta;
            for ((checkpoint, segment), samples) in run.trace.series() {
                for x in samples {
                    rows.push(vec![
                        meta.scenario.clone(),
                        meta.controller.clone(),
                        meta.strategy.clone(),
                        run.run.to_string(),
                        checkpoint.as_str().to_string(),
                        segment.to_string(),
                        format_sig(x.time_s, digits),
                        format_sig(x.duration, digits),
                        x.phase.as_str().to_string(),
                        format_sig(x.force, digits),
                    ]);
                }
            }
        }
    }
    csv_bytes(&FORCES_HEADER, rows)
}

pub fn lambda_csv(result: &ScenarioResult, digits: usize) -> Result<Vec<u8>, SimError> {
    let s = &result.scenario;
    let rows = result.strategies.iter().flat_map(|st| {
        st.runs.iter().map(move |r| {
            vec![
                s.name.clone(),
                s.controller.as_str().to_string(),
                st.label.clone(),
                r.run.to_string(),
                format_sig(r.lambda, digits),
                r.window.0.to_string(),
                r.window.1.to_string(),
            ]
        })
    });
    csv_bytes(&LAMBDA_HEADER, rows)
}

/// Column label of a controller/strategy in the summary table.
pub fn summary_column(controller: Controller, strategy: &str) -> String {
    match controller {
        Controller::Ftl => strategy.to_string(),
        Controller::Tdcr => "tendon".into(),
    }
}

/// Force summary table: one row per checkpoint,
/// one column per controller/strategy and phase.
pub fn summary_csv(result: &ScenarioResult, digits: usize) -> Result<Vec<u8>, SimError> {
    let mut header = vec!["scenario".to_string(), "checkpoint".to_string()];
    for phase in PhaseLabel::ALL {
        for st in &result.strategies {
            header.push(format!("{} {}", summary_column(result.scenario.controller, &st.label), phase.as_str()));
        }
    }
    let rows = CheckpointLabel::ALL.iter().map(|&c| {
        let mut row = vec![result.scenario.name.clone(), c.as_str().to_string()];
        for phase in PhaseLabel::ALL {
            for st in &result.strategies {
                row.push(st.summary.cell(c, phase).render(digits));
            }
        }
        row
    });
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    csv_bytes(&header, rows)
}

/// Sweep image of run 1 of the first strategy: black background, grey final
/// footprint, white area swept and vacated.
pub fn sweep_svg(result: &ScenarioResult) -> Result<String, SimError> {
    let (_, run) = first_runs(result)
        .next()
        .ok_or_else(|| SimError::Validation("scenario produced no runs".into()))?;
    let s = &result.scenario;
    let chains = run.window_chains();
    let mut acc = SweepAccumulator::for_chains(
        &chains,
        s.robot.seg_diameter,
        result.environment.projection,
        s.simulation.grid_resolution,
    )?;
    for c in &chains {
        acc.add(c)?;
    }
    Ok(render_sweep(acc.union(), acc.last(), &s.name, run.lambda))
}

fn render_sweep(union: &OccupancyGrid, last: &OccupancyGrid, name: &str, lambda: f64) -> String {
    let (nx, ny) = union.dims();
    let res = union.resolution();
    let (w, h) = (nx as f64 * res, ny as f64 * res);
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{:.1}mm" height="{:.1}mm" viewBox="0 0 {nx} {ny}" shape-rendering="crispEdges">"#,
        w, h
    );
    let _ = writeln!(svg, r##"<rect width="{nx}" height="{ny}" fill="#000000"/>"##);
    for (fill, want) in [("#ffffff", 1u8), ("#808080", 2u8)] {
        let _ = writeln!(svg, r#"<g fill="{fill}">"#);
        // rows from the top of the image, runs of equal colour along each row
        for row in 0..ny {
            let j = ny - 1 - row;
            let mut i = 0;
            while i < nx {
                let colour = |i: usize| match (union.get(i, j), last.get(i, j)) {
                    (_, true) => 2u8,
                    (true, false) => 1,
                    _ => 0,
                };
                if colour(i) != want {
                    i += 1;
                    continue;
                }
                let start = i;
                while i < nx && colour(i) == want {
                    i += 1;
                }
                let _ = writeln!(svg, r#"<rect x="{start}" y="{row}" width="{}" height="1"/>"#, i - start);
            }
        }
        let _ = writeln!(svg, "</g>");
    }
    let size = (ny as f64 / 20.0).max(1.0);
    let _ = writeln!(
        svg,
        r##"<text x="{:.0}" y="{:.0}" font-family="sans-serif" font-size="{:.0}" fill="#ffffff">{name}  λ = {}</text>"##,
        size * 0.5,
        size * 1.2,
        size,
        format_sig(lambda, 4)
    );
    svg.push_str("</svg>\n");
    svg
}

fn metadata_json(result: &ScenarioResult, files: &[String]) -> Result<String, SimError> {
    let created = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let value = serde_json::json!({
        "tool": "jamsnake",
        "version": env!("CARGO_PKG_VERSION"),
        "scenario": result.scenario.name,
        "created_unix_s": created,
        "steering": STEERING_NOTE,
        "files": files,
    });
    serde_json::to_string_pretty(&value).map_err(|e| SimError::Io(e.to_string()))
}

/// Every output file of a run, name and contents, in a fixed order.
pub fn render(result: &ScenarioResult) -> Result<Vec<(String, Vec<u8>)>, SimError> {
    let digits = precision()?;
    let s = &result.scenario;
    let mut files = Vec::new();
    if s.wants(Output::Events) {
        files.push(("events.csv".to_string(), events_csv(result, digits)?));
    }
    if s.wants(Output::Forces) {
        files.push(("forces.csv".to_string(), forces_csv(result, digits)?));
    }
    if s.wants(Output::Summary) {
        files.push(("summary.csv".to_string(), summary_csv(result, digits)?));
    }
    files.push(("lambda.csv".to_string(), lambda_csv(result, digits)?));
    if s.wants(Output::Sweep) {
        files.push((format!("sweep_{}.svg", s.name), sweep_svg(result)?.into_bytes()));
    }
    files.push((CONFIG_FILE.to_string(), s.echo().into_bytes()));
    let names: Vec<String> = files.iter().map(|(n, _)| n.clone()).collect();
    files.push((METADATA_FILE.to_string(), metadata_json(result, &names)?.into_bytes()));
    Ok(files)
}

/// Writes `files` into `out` all together: staged first, then moved in. On
/// error nothing new is left in `out`.
pub fn write_atomically(out: &Path, files: &[(String, Vec<u8>)]) -> Result<Vec<PathBuf>, SimError> {
    let parent = match out.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    fs::create_dir_all(&parent)?;
    let staging = tempfile::Builder::new().prefix(".jamsnake-").tempdir_in(&parent)?;
    for (name, bytes) in files {
        fs::write(staging.path().join(name), bytes)?;
    }
    let created_dir = !out.exists();
    fs::create_dir_all(out)?;
    let mut moved = Vec::new();
    for (name, _) in files {
        let dest = out.join(name);
        if let Err(e) = fs::rename(staging.path().join(name), &dest) {
            for p in &moved {
                let _ = fs::remove_file(p);
            }
            if created_dir {
                let _ = fs::remove_dir(out);
            }
            return Err(e.into());
        }
        moved.push(dest);
    }
    Ok(moved)
}

/// Renders and writes every output of `result` into `out`.
pub fn write_outputs(result: &ScenarioResult, out: &Path) -> Result<Vec<PathBuf>, SimError> {
    let files = render(result)?;
    write_atomically(out, &files)
}
