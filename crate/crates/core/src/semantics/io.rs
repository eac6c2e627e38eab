//! JSON-lines persistence of labeled trajectories.

use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{LabeledTrajectory, Trajectory};
use crate::env::{EnvState, Heading};

#[derive(Debug, Error)]
pub enum IoError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

#[derive(Serialize, Deserialize)]
struct Record {
    states: Vec<[i32; 3]>,
    label: i8,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    reward: Option<f64>,
}

fn to_record(lt: &LabeledTrajectory) -> Record {
    Record {
        states: lt
            .trajectory
            .states
            .iter()
            .map(|s| [s.x, s.y, s.heading.index() as i32])
            .collect(),
        label: lt.label,
        reward: lt.reward,
    }
}

fn from_record(r: Record, line: usize) -> Result<LabeledTrajectory, IoError> {
    let err = |msg: String| IoError::Parse { line, msg };
    if r.states.is_empty() {
        return Err(err("trajectory has no states".into()));
    }
    if r.label != 1 && r.label != -1 {
        return Err(err(format!("label must be 1 or -1, got {}", r.label)));
    }
    let states = r
        .states
        .iter()
        .map(|&[x, y, h]| {
            let heading = u8::try_from(h)
                .ok()
                .and_then(Heading::from_index)
                .ok_or_else(|| err(format!("heading {h} out of range")))?;
            Ok(EnvState::new(x, y, heading))
        })
        .collect::<Result<Vec<_>, IoError>>()?;
    Ok(LabeledTrajectory { trajectory: Trajectory::new(states), label: r.label, reward: r.reward })
}

pub fn trajectories_to_jsonl(data: &[LabeledTrajectory]) -> String {
    let mut out = String::new();
    for lt in data {
        out.push_str(&serde_json::to_string(&to_record(lt)).expect("records always serialize"));
        out.push('\n');
    }
    out
}

pub fn trajectories_from_jsonl(text: &str) -> Result<Vec<LabeledTrajectory>, IoError> {
    read_lines(BufReader::new(text.as_bytes()))
}

fn read_lines<R: BufRead>(r: R) -> Result<Vec<LabeledTrajectory>, IoError> {
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: Record =
            serde_json::from_str(&line).map_err(|e| IoError::Parse { line: i + 1, msg: e.to_string() })?;
        out.push(from_record(rec, i + 1)?);
    }
    Ok(out)
}

pub fn write_trajectories(path: &Path, data: &[LabeledTrajectory]) -> Result<(), IoError> {
    let mut f = fs::File::create(path)?;
    f.write_all(trajectories_to_jsonl(data).as_bytes())?;
    Ok(())
}

pub fn read_trajectories(path: &Path) -> Result<Vec<LabeledTrajectory>, IoError> {
    read_lines(BufReader::new(fs::File::open(path)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn jsonl_round_trip() {
        let a = LabeledTrajectory {
            trajectory: Trajectory::new(vec![EnvState::new(1, 2, Heading::E), EnvState::new(2, 2, Heading::E)]),
            label: 1,
            reward: Some(100.0),
        };
        let b = LabeledTrajectory::new(Trajectory::new(vec![EnvState::new(0, 0, Heading::W)]), false);
        let text = trajectories_to_jsonl(&[a.clone(), b.clone()]);
        assert_eq!(text.lines().next().unwrap(), r#"{"states":[[1,2,1],[2,2,1]],"label":1,"reward":100.0}"#);
        assert_eq!(trajectories_from_jsonl(&text).unwrap(), vec![a, b]);
    }

    #[test]
    fn rejects_bad_labels_and_headings() {
        assert!(matches!(
            trajectories_from_jsonl(r#"{"states":[[0,0,0]],"label":0}"#),
            Err(IoError::Parse { line: 1, .. })
        ));
        assert!(matches!(
            trajectories_from_jsonl("\n{\"states\":[[0,0,7]],\"label\":1}"),
            Err(IoError::Parse { line: 2, .. })
        ));
    }
}
