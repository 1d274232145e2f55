//! Line-oriented ASCII bit-train files.
//!
//! ```text
//! # comment
//! CLOCK 11.282949073769103
//! SEG 255 A=-
//! SEG 2 A=0,1
//! SHUTTLE e1 s2
//! TOTAL 6400
//! ```
//!
//! Sites and electrons are 0-based. `TOTAL` is optional; when present it
//! must be the last line and match the recomputed cycle count.

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::evolution::{BitTrain, TrainEvent};

impl BitTrain {
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "CLOCK {}", self.clock_ghz());
        for ev in self.events() {
            match ev {
                TrainEvent::Segment { cycles, sites_on } => {
                    let sites = if sites_on.is_empty() {
                        "-".to_string()
                    } else {
                        sites_on
                            .iter()
                            .map(|s| s.to_string())
                            .collect::<Vec<_>>()
                            .join(",")
                    };
                    let _ = writeln!(out, "SEG {cycles} A={sites}");
                }
                TrainEvent::Shuttle { electron, site } => {
                    let _ = writeln!(out, "SHUTTLE e{electron} s{site}");
                }
            }
        }
        let _ = writeln!(out, "TOTAL {}", self.total_cycles());
        out
    }

    pub fn parse(text: &str) -> Result<BitTrain> {
        let mut clock: Option<f64> = None;
        let mut events = Vec::new();
        let mut total: Option<(usize, u64)> = None;
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let err = |msg: String| Error::Parse { line: line_no, msg };
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some((total_line, _)) = total {
                return Err(err(format!("content after TOTAL on line {total_line}")));
            }
            let mut words = line.split_whitespace();
            let keyword = words.next().unwrap_or_default();
            let args: Vec<&str> = words.collect();
            match keyword {
                "CLOCK" => {
                    if clock.is_some() {
                        return Err(err("duplicate CLOCK".into()));
                    }
                    if !events.is_empty() {
                        return Err(err("CLOCK must precede all events".into()));
                    }
                    let [value] = args[..] else {
                        return Err(err("expected CLOCK <f_GHz>".into()));
                    };
                    let f: f64 = value
                        .parse()
                        .map_err(|_| err(format!("bad frequency {value:?}")))?;
                    if !(f > 0.0) {
                        return Err(err("frequency must be positive".into()));
                    }
                    clock = Some(f);
                }
                "SEG" => {
                    if clock.is_none() {
                        return Err(err("SEG before CLOCK".into()));
                    }
                    let [cycles, gates] = args[..] else {
                        return Err(err("expected SEG <cycles> A=<sites>".into()));
                    };
                    let cycles: u64 = cycles
                        .parse()
                        .map_err(|_| err(format!("bad cycle count {cycles:?}")))?;
                    if cycles == 0 {
                        return Err(err("segment of zero cycles".into()));
                    }
                    let list = gates
                        .strip_prefix("A=")
                        .ok_or_else(|| err(format!("expected A=<sites>, got {gates:?}")))?;
                    let sites_on = if list == "-" {
                        Vec::new()
                    } else {
                        list.split(',')
                            .map(|s| s.parse::<usize>().map_err(|_| err(format!("bad site {s:?}"))))
                            .collect::<Result<Vec<_>>>()?
                    };
                    events.push((line_no, TrainEvent::Segment { cycles, sites_on }));
                }
                "SHUTTLE" => {
                    if clock.is_none() {
                        return Err(err("SHUTTLE before CLOCK".into()));
                    }
                    let [e, s] = args[..] else {
                        return Err(err("expected SHUTTLE e<i> s<j>".into()));
                    };
                    let electron = e
                        .strip_prefix('e')
                        .and_then(|v| v.parse().ok())
                        .ok_or_else(|| err(format!("bad electron {e:?}")))?;
                    let site = s
                        .strip_prefix('s')
                        .and_then(|v| v.parse().ok())
                        .ok_or_else(|| err(format!("bad site {s:?}")))?;
                    events.push((line_no, TrainEvent::Shuttle { electron, site }));
                }
                "TOTAL" => {
                    let [n] = args[..] else {
                        return Err(err("expected TOTAL <cycles>".into()));
                    };
                    let n: u64 = n.parse().map_err(|_| err(format!("bad total {n:?}")))?;
                    total = Some((line_no, n));
                }
                other => return Err(err(format!("unknown keyword {other:?}"))),
            }
        }
        let clock = clock.ok_or(Error::Parse {
            line: 0,
            msg: "missing CLOCK line".into(),
        })?;
        let mut train = BitTrain::new(clock);
        for (line, ev) in events {
            train.push(ev).map_err(|e| Error::Parse {
                line,
                msg: e.to_string(),
            })?;
        }
        if let Some((line, n)) = total {
            if n != train.total_cycles() {
                return Err(Error::Parse {
                    line,
                    msg: format!("TOTAL {n} does not match {} recomputed cycles", train.total_cycles()),
                });
            }
        }
        Ok(train)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<BitTrain> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }
}

impl FromStr for BitTrain {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::parse(s)
    }
}
