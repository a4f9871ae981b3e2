// Copyright 2026 The ribvf Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use super::replay::SessionFrame;
use super::HarnessError;

pub const LOG_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogHeader {
    pub format_version: u32,
    /// Control period (s).
    pub period: f64,
    /// Time the run started; frame `k` is stamped `start_time + k·period`.
    pub start_time: f64,
    pub vf_enabled: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Exam areas in visiting order (empty for free driving).
    #[serde(default)]
    pub areas: Vec<u8>,
    pub probe_radius: f64,
    /// Continuous valid contact that completes an area (s).
    pub dwell: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum Record {
    Header(LogHeader),
    Frame(SessionFrame),
    End { frames: u64 },
}

/// Full-rate frame log. On disk it is JSON lines: a header record, one
/// record per frame and an end record carrying the frame count.
#[derive(Debug, Clone, PartialEq)]
pub struct SessionLog {
    pub header: LogHeader,
    pub frames: Vec<SessionFrame>,
    /// The run ran to completion (and, when read back, the end record was
    /// present and consistent).
    pub complete: bool,
}

impl SessionLog {
    pub fn write_jsonl<W: Write>(&self, mut w: W) -> Result<(), HarnessError> {
        let line = |w: &mut W, r: &Record| -> Result<(), HarnessError> {
            serde_json::to_writer(&mut *w, r).map_err(|e| HarnessError::Log(e.to_string()))?;
            w.write_all(b"\n")?;
            Ok(())
        };
        line(&mut w, &Record::Header(self.header.clone()))?;
        for f in &self.frames {
            line(&mut w, &Record::Frame(f.clone()))?;
        }
        if self.complete {
            line(&mut w, &Record::End { frames: self.frames.len() as u64 })?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads a log. A missing end record or an unreadable final line marks
    /// the log incomplete; an unreadable line elsewhere is an error.
    pub fn read_jsonl<R: BufRead>(r: R) -> Result<Self, HarnessError> {
        let mut lines = r.lines().enumerate().peekable();
        let header = match lines.next() {
            Some((_, line)) => match serde_json::from_str::<Record>(&line?) {
                Ok(Record::Header(h)) => h,
                _ => return Err(HarnessError::Log("first line is not a log header".into())),
            },
            None => return Err(HarnessError::Log("empty log".into())),
        };
        if header.format_version != LOG_FORMAT_VERSION {
            return Err(HarnessError::Log(format!("unsupported log format {}", header.format_version)));
        }
        let mut frames = Vec::new();
        let mut complete = false;
        while let Some((n, line)) = lines.next() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            match serde_json::from_str::<Record>(&line) {
                Ok(Record::Frame(f)) if !complete => frames.push(f),
                Ok(Record::End { frames: count }) if !complete => complete = count == frames.len() as u64,
                Ok(_) => return Err(HarnessError::Log(format!("line {}: unexpected record", n + 1))),
                Err(_) if lines.peek().is_none() => break,
                Err(e) => return Err(HarnessError::Log(format!("line {}: {e}", n + 1))),
            }
        }
        Ok(SessionLog { header, frames, complete })
    }

    pub fn save(&self, path: &std::path::Path) -> Result<(), HarnessError> {
        let f = std::fs::File::create(path)?;
        self.write_jsonl(std::io::BufWriter::new(f))
    }

    pub fn load(path: &std::path::Path) -> Result<Self, HarnessError> {
        let f = std::fs::File::open(path)?;
        Self::read_jsonl(std::io::BufReader::new(f))
    }

    /// Timestamped leader references, one per frame.
    pub fn leader_samples(&self) -> Vec<(f64, crate::Vec3)> {
        self.frames.iter().map(|f| (f.t, f.leader)).collect()
    }
}
