use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::koopman::SnapshotSequence;

/// A list of snapshot sequences sharing one timestep.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub sequences: Vec<SnapshotSequence>,
    pub dt: f64,
}

impl Dataset {
    pub fn new(sequences: Vec<SnapshotSequence>) -> Result<Self> {
        if sequences.is_empty() {
            return Err(CoreError::InvalidArgument(
                "dataset needs at least one sequence".to_string(),
            ));
        }
        let dt = sequences[0].dt;
        if sequences.iter().any(|s| s.dt != dt) {
            return Err(CoreError::InvalidArgument(
                "all sequences in a dataset must share dt".to_string(),
            ));
        }
        for seq in &sequences {
            seq.validate()?;
        }
        Ok(Self { sequences, dt })
    }

    pub fn state_dim(&self) -> usize {
        self.sequences[0].state_dim()
    }
}

/// Sidecar metadata written next to the CSV; the column schema has no slot
/// for the timestep, so it travels here.
#[derive(Debug, Serialize, Deserialize)]
struct DatasetMeta {
    schema_version: u32,
    dt: f64,
    sequences: usize,
    state_dim: usize,
}

fn meta_path(path: &Path) -> std::path::PathBuf {
    let mut os = path.as_os_str().to_owned();
    os.push(".meta.json");
    std::path::PathBuf::from(os)
}

/// Write a dataset as CSV with header `seq,step,u,x0,x1,...`.
///
/// One row per state; `u` sits on the row of the state it acts from, so the
/// last state of each sequence has an empty `u` field. Values use the
/// shortest encoding that parses back to the identical f64.
pub fn write_dataset(dataset: &Dataset, path: &Path) -> Result<()> {
    let n = dataset.state_dim();
    let mut out = String::from("seq,step,u");
    for d in 0..n {
        out.push_str(&format!(",x{d}"));
    }
    out.push('\n');
    for (seq_id, seq) in dataset.sequences.iter().enumerate() {
        for (step, state) in seq.states.iter().enumerate() {
            out.push_str(&format!("{seq_id},{step}"));
            if step < seq.inputs.len() {
                out.push_str(&format!(",{}", seq.inputs[step]));
            } else {
                out.push(',');
            }
            for v in state {
                out.push_str(&format!(",{v}"));
            }
            out.push('\n');
        }
    }
    std::fs::write(path, out)?;

    let meta = DatasetMeta {
        schema_version: 1,
        dt: dataset.dt,
        sequences: dataset.sequences.len(),
        state_dim: n,
    };
    let meta_json = serde_json::to_string_pretty(&meta)
        .map_err(|e| CoreError::Serialization(e.to_string()))?;
    std::fs::write(meta_path(path), meta_json)?;
    Ok(())
}

/// Read a dataset written by [`write_dataset`].
pub fn read_dataset(path: &Path) -> Result<Dataset> {
    let meta_text = std::fs::read_to_string(meta_path(path)).map_err(|e| {
        CoreError::InvalidArgument(format!(
            "missing dataset metadata {}: {e}",
            meta_path(path).display()
        ))
    })?;
    let meta: DatasetMeta = serde_json::from_str(&meta_text)
        .map_err(|e| CoreError::Serialization(format!("bad dataset metadata: {e}")))?;

    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or(CoreError::Parse {
        line: 1,
        message: "empty dataset file".to_string(),
    })?;

    let columns: Vec<&str> = header.split(',').collect();
    let mut expected = vec!["seq".to_string(), "step".to_string(), "u".to_string()];
    for d in 0..meta.state_dim {
        expected.push(format!("x{d}"));
    }
    for (idx, name) in expected.iter().enumerate() {
        if columns.get(idx).map(|c| c.trim()) != Some(name.as_str()) {
            return Err(CoreError::Parse {
                line: 1,
                message: format!("missing or misplaced column '{name}' in dataset header"),
            });
        }
    }
    if columns.len() != expected.len() {
        return Err(CoreError::Parse {
            line: 1,
            message: format!(
                "expected {} columns, found {}",
                expected.len(),
                columns.len()
            ),
        });
    }

    let mut sequences: Vec<SnapshotSequence> = Vec::new();
    let mut states: Vec<Vec<f64>> = Vec::new();
    let mut inputs: Vec<f64> = Vec::new();
    let mut current_seq: Option<usize> = None;

    let mut flush = |states: &mut Vec<Vec<f64>>, inputs: &mut Vec<f64>| -> Result<()> {
        if !states.is_empty() {
            sequences.push(SnapshotSequence::new(
                std::mem::take(states),
                std::mem::take(inputs),
                meta.dt,
            )?);
        }
        Ok(())
    };

    for (zero_idx, line) in lines {
        let line_no = zero_idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != expected.len() {
            return Err(CoreError::Parse {
                line: line_no,
                message: format!("expected {} fields, found {}", expected.len(), fields.len()),
            });
        }
        let seq_id: usize = fields[0].trim().parse().map_err(|e| CoreError::Parse {
            line: line_no,
            message: format!("bad seq id: {e}"),
        })?;
        let step: usize = fields[1].trim().parse().map_err(|e| CoreError::Parse {
            line: line_no,
            message: format!("bad step index: {e}"),
        })?;
        if current_seq != Some(seq_id) {
            flush(&mut states, &mut inputs)?;
            current_seq = Some(seq_id);
            if step != 0 {
                return Err(CoreError::Parse {
                    line: line_no,
                    message: format!("sequence {seq_id} does not start at step 0"),
                });
            }
        } else if step != states.len() {
            return Err(CoreError::Parse {
                line: line_no,
                message: format!("sequence {seq_id} has non-contiguous step {step}"),
            });
        }
        let u_field = fields[2].trim();
        if !u_field.is_empty() {
            inputs.push(u_field.parse().map_err(|e| CoreError::Parse {
                line: line_no,
                message: format!("bad input value: {e}"),
            })?);
        }
        let mut state = Vec::with_capacity(meta.state_dim);
        for (d, field) in fields[3..].iter().enumerate() {
            state.push(field.trim().parse().map_err(|e| CoreError::Parse {
                line: line_no,
                message: format!("bad value in column x{d}: {e}"),
            })?);
        }
        states.push(state);
    }
    flush(&mut states, &mut inputs)?;

    if sequences.len() != meta.sequences {
        return Err(CoreError::Parse {
            line: 0,
            message: format!(
                "metadata declares {} sequences, file holds {}",
                meta.sequences,
                sequences.len()
            ),
        });
    }
    Dataset::new(sequences)
}
