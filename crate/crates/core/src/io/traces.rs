//! Trace dumps: `gains.csv` and `arrivals.csv` in one directory.

use crate::channel::{ChannelGains, FrameTrace, RecordedTraces, TraceSource, TrafficArrivals};
use crate::config::{RbGrid, Slice, SystemConfig};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use thiserror::Error;

pub const GAINS_FILE: &str = "gains.csv";
pub const ARRIVALS_FILE: &str = "arrivals.csv";

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Csv { path: PathBuf, source: csv::Error },
    #[error("{path} row {row}: {message}")]
    Shape { path: PathBuf, row: usize, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum SliceTag {
    Embb,
    Urllc,
}

impl From<Slice> for SliceTag {
    fn from(s: Slice) -> Self {
        match s {
            Slice::Embb => SliceTag::Embb,
            Slice::Urllc => SliceTag::Urllc,
        }
    }
}

impl From<SliceTag> for Slice {
    fn from(s: SliceTag) -> Self {
        match s {
            SliceTag::Embb => Slice::Embb,
            SliceTag::Urllc => Slice::Urllc,
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct GainRow {
    frame: usize,
    slice: SliceTag,
    ru: usize,
    user: usize,
    rb: usize,
    tti: usize,
    gain: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct ArrivalRow {
    frame: usize,
    user: usize,
    packets: u64,
}

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> TraceError + '_ {
    move |source| TraceError::Csv { path: path.to_path_buf(), source }
}

/// Writes frames `0..frames` of `source` into `dir`, creating it if needed.
pub fn dump_traces(
    source: &dyn TraceSource,
    frames: usize,
    config: &SystemConfig,
    grid: &RbGrid,
    dir: &Path,
) -> Result<(), TraceError> {
    std::fs::create_dir_all(dir).map_err(|source| TraceError::Io { path: dir.to_path_buf(), source })?;
    let gp = dir.join(GAINS_FILE);
    let ap = dir.join(ARRIVALS_FILE);
    let mut gw = csv::Writer::from_path(&gp).map_err(csv_err(&gp))?;
    let mut aw = csv::Writer::from_path(&ap).map_err(csv_err(&ap))?;
    let (nm, nu) = (config.system.num_rus, config.num_users());
    for frame in 0..frames {
        let trace = source.frame(frame);
        for s in Slice::ALL {
            let sg = grid.slice(s);
            for ru in 0..nm {
                for user in 0..nu {
                    for rb in 0..sg.num_rbs {
                        for tti in 0..sg.num_ttis {
                            let gain = trace.gains.get(s, ru, user, rb, tti);
                            gw.serialize(GainRow { frame, slice: s.into(), ru, user, rb, tti, gain }).map_err(csv_err(&gp))?;
                        }
                    }
                }
            }
        }
        for (user, &packets) in trace.arrivals.packets.iter().enumerate() {
            aw.serialize(ArrivalRow { frame, user, packets }).map_err(csv_err(&ap))?;
        }
    }
    gw.flush().map_err(|source| TraceError::Io { path: gp.clone(), source })?;
    aw.flush().map_err(|source| TraceError::Io { path: ap.clone(), source })?;
    Ok(())
}

/// Reads a dump written by [`dump_traces`] for the same config. Every cell of
/// every frame must appear exactly once.
pub fn load_traces(config: &SystemConfig, grid: &RbGrid, dir: &Path) -> Result<RecordedTraces, TraceError> {
    let (nm, nu) = (config.system.num_rus, config.num_users());
    let gp = dir.join(GAINS_FILE);
    let ap = dir.join(ARRIVALS_FILE);
    let mut frames: Vec<(ChannelGains, Vec<Option<u64>>, [Vec<bool>; 2])> = Vec::new();
    let fresh = || {
        let seen = Slice::ALL.map(|s| {
            let sg = grid.slice(s);
            vec![false; nm * nu * sg.num_rbs * sg.num_ttis]
        });
        (ChannelGains::filled(nm, nu, grid, 0.0), vec![None; nu], seen)
    };
    let shape = |path: &Path, row: usize, message: String| TraceError::Shape { path: path.to_path_buf(), row, message };

    let mut gr = csv::Reader::from_path(&gp).map_err(csv_err(&gp))?;
    for (i, row) in gr.deserialize::<GainRow>().enumerate() {
        let row = row.map_err(csv_err(&gp))?;
        let line = i + 2;
        let s: Slice = row.slice.into();
        let sg = grid.slice(s);
        if row.ru >= nm || row.user >= nu || row.rb >= sg.num_rbs || row.tti >= sg.num_ttis {
            return Err(shape(
                &gp,
                line,
                format!(
                    "cell (ru {}, user {}, rb {}, tti {}) outside the {}x{}x{}x{} grid",
                    row.ru, row.user, row.rb, row.tti, nm, nu, sg.num_rbs, sg.num_ttis
                ),
            ));
        }
        if !(row.gain.is_finite() && row.gain >= 0.0) {
            return Err(shape(&gp, line, format!("gain {} is not a finite non-negative number", row.gain)));
        }
        while frames.len() <= row.frame {
            frames.push(fresh());
        }
        let (gains, _, seen) = &mut frames[row.frame];
        let k = ((row.ru * nu + row.user) * sg.num_rbs + row.rb) * sg.num_ttis + row.tti;
        if std::mem::replace(&mut seen[s.index()][k], true) {
            return Err(shape(&gp, line, "duplicate cell".into()));
        }
        gains.set(s, row.ru, row.user, row.rb, row.tti, row.gain);
    }

    let mut ar = csv::Reader::from_path(&ap).map_err(csv_err(&ap))?;
    for (i, row) in ar.deserialize::<ArrivalRow>().enumerate() {
        let row = row.map_err(csv_err(&ap))?;
        let line = i + 2;
        if row.user >= nu {
            return Err(shape(&ap, line, format!("user {} outside 0..{nu}", row.user)));
        }
        if row.frame >= frames.len() {
            return Err(shape(&ap, line, format!("frame {} has no gains", row.frame)));
        }
        if frames[row.frame].1[row.user].replace(row.packets).is_some() {
            return Err(shape(&ap, line, "duplicate user".into()));
        }
    }

    frames
        .into_iter()
        .enumerate()
        .map(|(t, (gains, packets, seen))| {
            if seen.iter().any(|v| v.iter().any(|&b| !b)) {
                return Err(shape(&gp, 0, format!("frame {t} is missing gain cells")));
            }
            let packets = packets
                .into_iter()
                .collect::<Option<Vec<_>>>()
                .ok_or_else(|| shape(&ap, 0, format!("frame {t} is missing users")))?;
            Ok(FrameTrace { gains, arrivals: TrafficArrivals { packets } })
        })
        .collect::<Result<Vec<_>, _>>()
        .map(|frames| RecordedTraces { frames })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::benchmarks::tiny_config;
    use crate::channel::{scenario_topology, GeneratedTraces, TracePhase};
    use crate::config::build_rb_grid;

    #[test]
    fn dump_and_reload_is_bit_exact() {
        let c = tiny_config(2, 1);
        let g = build_rb_grid(&c);
        let src = GeneratedTraces::new(&c, scenario_topology(&c, 5), 5, TracePhase::Eval);
        let dir = tempfile::tempdir().unwrap();
        dump_traces(&src, 3, &c, &g, dir.path()).unwrap();
        let back = load_traces(&c, &g, dir.path()).unwrap();
        assert_eq!(back.frames.len(), 3);
        for t in 0..3 {
            assert_eq!(back.frame(t), src.frame(t));
        }
    }

    #[test]
    fn wrong_shape_is_rejected() {
        let c = tiny_config(2, 1);
        let g = build_rb_grid(&c);
        let src = GeneratedTraces::new(&c, scenario_topology(&c, 5), 5, TracePhase::Eval);
        let dir = tempfile::tempdir().unwrap();
        dump_traces(&src, 1, &c, &g, dir.path()).unwrap();
        let bigger = tiny_config(1, 1);
        let e = load_traces(&bigger, &build_rb_grid(&bigger), dir.path()).unwrap_err();
        assert!(e.to_string().contains("outside"), "{e}");
        let text = std::fs::read_to_string(dir.path().join(GAINS_FILE)).unwrap();
        let short: Vec<&str> = text.lines().take(3).collect();
        std::fs::write(dir.path().join(GAINS_FILE), short.join("\n")).unwrap();
        let e = load_traces(&c, &g, dir.path()).unwrap_err();
        assert!(e.to_string().contains("missing gain cells"), "{e}");
    }
}
