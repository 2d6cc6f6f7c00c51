//! The dataset CSV layout.
//!
//! ```text
//! kind,n,T,G,sample_rate
//! velocities,2,3,1,100
//! task_id,joint_id,t,value
//! 1,1,1,0.125
//! ...
//! ```
//!
//! Two header pairs (metadata names/values, then the data column names)
//! followed by one row per cell, 1-based ids, LF line endings. Values are
//! written with the shortest decimal form that parses back to the identical
//! float, so save/load round trips are bit-exact.

use std::fs;
use std::path::Path;

use crate::dataio::AngleTrajectory;
use crate::error::{Error, Result};
use crate::model::VelocityDataset;

const META_HEADER: &str = "kind,n,T,G,sample_rate";
const DATA_HEADER: &str = "task_id,joint_id,t,value";

/// A parsed dataset file.
#[derive(Debug, Clone, PartialEq)]
pub enum CsvContent {
    Velocities {
        data: VelocityDataset,
        sample_rate: f64,
    },
    Angles(Vec<AngleTrajectory>),
}

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

fn parse_count(field: &str, name: &str, line: usize) -> Result<usize> {
    let v: usize = field
        .trim()
        .parse()
        .map_err(|_| parse_err(line, format!("{name} must be a positive integer, got {field:?}")))?;
    if v == 0 {
        return Err(parse_err(line, format!("{name} must be >= 1")));
    }
    Ok(v)
}

fn parse_value(field: &str, name: &str, line: usize) -> Result<f64> {
    let v: f64 = field
        .trim()
        .parse()
        .map_err(|_| parse_err(line, format!("{name} must be numeric, got {field:?}")))?;
    if !v.is_finite() {
        return Err(parse_err(line, format!("{name} must be finite, got {field:?}")));
    }
    Ok(v)
}

/// Parses the dataset CSV format. Rows may appear in any order but every
/// (task, joint, sample) cell must appear exactly once.
pub fn parse_dataset_csv(text: &str) -> Result<CsvContent> {
    let mut lines = text.lines().enumerate();

    let (_, meta_names) = lines
        .next()
        .ok_or_else(|| parse_err(1, "empty file, expected metadata header"))?;
    if meta_names.trim_end() != META_HEADER {
        return Err(parse_err(
            1,
            format!("expected header {META_HEADER:?}, got {meta_names:?}"),
        ));
    }

    let (idx, meta_values) = lines
        .next()
        .ok_or_else(|| parse_err(2, "missing metadata values"))?;
    let fields: Vec<&str> = meta_values.split(',').collect();
    if fields.len() != 5 {
        return Err(parse_err(
            idx + 1,
            format!("expected 5 metadata fields, got {}", fields.len()),
        ));
    }
    let kind = fields[0].trim();
    if kind != "velocities" && kind != "angles" {
        return Err(parse_err(
            idx + 1,
            format!("kind must be \"velocities\" or \"angles\", got {kind:?}"),
        ));
    }
    let n = parse_count(fields[1], "n", idx + 1)?;
    let t = parse_count(fields[2], "T", idx + 1)?;
    let g = parse_count(fields[3], "G", idx + 1)?;
    let sample_rate = parse_value(fields[4], "sample_rate", idx + 1)?;
    if sample_rate <= 0.0 {
        return Err(parse_err(idx + 1, "sample_rate must be positive"));
    }
    let cells = n
        .checked_mul(t)
        .and_then(|x| x.checked_mul(g))
        .ok_or_else(|| parse_err(idx + 1, "dataset dimensions overflow"))?;
    if cells > 100_000_000 {
        return Err(parse_err(
            idx + 1,
            format!("dataset of {cells} cells exceeds the loader limit"),
        ));
    }

    let (idx, data_names) = lines
        .next()
        .ok_or_else(|| parse_err(3, "missing data header"))?;
    if data_names.trim_end() != DATA_HEADER {
        return Err(parse_err(
            idx + 1,
            format!("expected header {DATA_HEADER:?}, got {data_names:?}"),
        ));
    }

    let mut values = vec![0.0_f64; cells];
    let mut seen = vec![false; cells];
    let mut filled = 0usize;
    for (idx, row) in lines {
        let line = idx + 1;
        if row.is_empty() {
            continue;
        }
        let fields: Vec<&str> = row.split(',').collect();
        if fields.len() != 4 {
            return Err(parse_err(
                line,
                format!("ragged row: expected 4 fields, got {}", fields.len()),
            ));
        }
        let task = parse_count(fields[0], "task_id", line)?;
        let joint = parse_count(fields[1], "joint_id", line)?;
        let sample = parse_count(fields[2], "t", line)?;
        let value = parse_value(fields[3], "value", line)?;
        if task > g {
            return Err(parse_err(line, format!("task_id {task} exceeds G={g}")));
        }
        if joint > n {
            return Err(parse_err(line, format!("joint_id {joint} exceeds n={n}")));
        }
        if sample > t {
            return Err(parse_err(line, format!("t {sample} exceeds T={t}")));
        }
        let cell = (task - 1) * n * t + (sample - 1) * n + (joint - 1);
        if seen[cell] {
            return Err(parse_err(
                line,
                format!("duplicate cell (task {task}, joint {joint}, t {sample})"),
            ));
        }
        seen[cell] = true;
        values[cell] = value;
        filled += 1;
    }
    if filled != cells {
        return Err(Error::Input(format!(
            "dataset incomplete: {filled} of {cells} cells present"
        )));
    }

    let tasks: Vec<Vec<f64>> = (0..g)
        .map(|task| values[task * n * t..(task + 1) * n * t].to_vec())
        .collect();
    if kind == "velocities" {
        Ok(CsvContent::Velocities {
            data: VelocityDataset::new(n, t, tasks)?,
            sample_rate,
        })
    } else {
        let trajectories = tasks
            .into_iter()
            .map(|angles| AngleTrajectory::new(n, t, sample_rate, angles))
            .collect::<Result<Vec<_>>>()?;
        Ok(CsvContent::Angles(trajectories))
    }
}

pub fn load_dataset_csv(path: impl AsRef<Path>) -> Result<CsvContent> {
    let text = fs::read_to_string(path)?;
    parse_dataset_csv(&text)
}

fn format_rows(out: &mut String, tasks: &[&[f64]], n: usize, t: usize) {
    for (g, task) in tasks.iter().enumerate() {
        for s in 0..t {
            for i in 0..n {
                out.push_str(&format!("{},{},{},{}\n", g + 1, i + 1, s + 1, task[s * n + i]));
            }
        }
    }
}

pub fn velocity_csv_string(data: &VelocityDataset, sample_rate: f64) -> String {
    let (n, t, g) = (data.joint_count(), data.window(), data.task_count());
    let mut out = String::new();
    out.push_str(META_HEADER);
    out.push('\n');
    out.push_str(&format!("velocities,{n},{t},{g},{sample_rate}\n"));
    out.push_str(DATA_HEADER);
    out.push('\n');
    let tasks: Vec<&[f64]> = (0..g).map(|i| data.task(i)).collect();
    format_rows(&mut out, &tasks, n, t);
    out
}

pub fn save_velocity_csv(
    path: impl AsRef<Path>,
    data: &VelocityDataset,
    sample_rate: f64,
) -> Result<()> {
    fs::write(path, velocity_csv_string(data, sample_rate))?;
    Ok(())
}

pub fn angle_csv_string(trajectories: &[AngleTrajectory]) -> Result<String> {
    let first = trajectories
        .first()
        .ok_or_else(|| Error::Input("cannot save an empty angle set".into()))?;
    let (n, t, rate) = (first.joint_count(), first.window(), first.sample_rate());
    for traj in trajectories {
        if traj.joint_count() != n || traj.window() != t || traj.sample_rate() != rate {
            return Err(Error::Input(
                "all angle trajectories in one file must share n, T and sample_rate".into(),
            ));
        }
    }
    let mut out = String::new();
    out.push_str(META_HEADER);
    out.push('\n');
    out.push_str(&format!("angles,{n},{t},{},{rate}\n", trajectories.len()));
    out.push_str(DATA_HEADER);
    out.push('\n');
    let tasks: Vec<&[f64]> = trajectories.iter().map(|tr| tr.samples()).collect();
    format_rows(&mut out, &tasks, n, t);
    Ok(out)
}

pub fn save_angle_csv(path: impl AsRef<Path>, trajectories: &[AngleTrajectory]) -> Result<()> {
    fs::write(path, angle_csv_string(trajectories)?)?;
    Ok(())
}
