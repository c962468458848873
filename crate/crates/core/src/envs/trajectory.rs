use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use super::StepInfo;

/// One line of a trajectory dump.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub tick: usize,
    /// World state before the step.
    pub state: serde_json::Value,
    /// Actions the environment executed this tick.
    pub actions: Vec<Vec<f64>>,
    /// Actions the agents chose this tick; differs from `actions` under delay.
    pub chosen: Vec<Vec<f64>>,
    pub rewards: Vec<f64>,
    pub events: StepInfo,
}

/// Writes trajectory records as JSON lines.
pub struct TrajectoryWriter<W: Write> {
    out: W,
}

impl<W: Write> TrajectoryWriter<W> {
    pub fn new(out: W) -> Self {
        Self { out }
    }

    pub fn write(&mut self, record: &TrajectoryRecord) -> io::Result<()> {
        serde_json::to_writer(&mut self.out, record)?;
        self.out.write_all(b"\n")
    }

    pub fn into_inner(self) -> W {
        self.out
    }
}
