//! Pose trajectories and their JSON Lines file format.
//!
//! Line 1 is a header `{"frame_rate": f, "body": name}`; every following
//! line is one sample `{"t": f, "p": [x,y,z], "q": [w,x,y,z]}`.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::geom::{Quat, Vec3};

use super::RigidState;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PoseSample {
    pub t: f64,
    pub p: Vec3,
    pub q: Quat,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub body: String,
    pub frame_rate: f64,
    pub samples: Vec<PoseSample>,
}

#[derive(Debug, thiserror::Error)]
pub enum TrajectoryError {
    #[error("trajectory I/O: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {msg}")]
    Format { line: usize, msg: String },
    #[error("timestamps not strictly increasing at sample {0}")]
    NonMonotonic(usize),
    #[error("sample {index}: spacing {spacing} differs from 1/frame_rate {expected}")]
    NonUniform { index: usize, spacing: f64, expected: f64 },
}

#[derive(Serialize, Deserialize)]
struct Header {
    frame_rate: f64,
    body: String,
}

#[derive(Serialize, Deserialize)]
struct ParticleFrame<'a> {
    t: f64,
    particles: std::borrow::Cow<'a, [Vec3]>,
}

const SPACING_TOL: f64 = 1e-9;

impl Trajectory {
    pub fn from_states(body: &str, states: &[RigidState], dt: f64) -> Self {
        Self {
            body: body.to_string(),
            frame_rate: 1.0 / dt,
            samples: states.iter().map(|s| PoseSample { t: s.t, p: s.p, q: s.q }).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        self.samples.iter().map(|s| s.t)
    }

    pub fn validate(&self) -> Result<(), TrajectoryError> {
        let expected = 1.0 / self.frame_rate;
        for (i, w) in self.samples.windows(2).enumerate() {
            let spacing = w[1].t - w[0].t;
            if !(spacing > 0.0) {
                return Err(TrajectoryError::NonMonotonic(i + 1));
            }
            if (spacing - expected).abs() > SPACING_TOL {
                return Err(TrajectoryError::NonUniform {
                    index: i + 1,
                    spacing,
                    expected,
                });
            }
        }
        Ok(())
    }

    pub fn write_jsonl<W: Write>(&self, mut w: W) -> Result<(), TrajectoryError> {
        let header = Header {
            frame_rate: self.frame_rate,
            body: self.body.clone(),
        };
        serde_json::to_writer(&mut w, &header).map_err(std::io::Error::from)?;
        w.write_all(b"\n")?;
        for s in &self.samples {
            serde_json::to_writer(&mut w, s).map_err(std::io::Error::from)?;
            w.write_all(b"\n")?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_jsonl_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_jsonl(&mut buf).expect("writing to memory cannot fail");
        String::from_utf8(buf).expect("serde_json emits UTF-8")
    }

    pub fn read_jsonl<R: BufRead>(r: R) -> Result<Self, TrajectoryError> {
        let mut lines = r.lines().enumerate().filter_map(|(i, l)| match l {
            Ok(l) if l.trim().is_empty() => None,
            other => Some((i + 1, other)),
        });
        let (line, first) = lines.next().ok_or(TrajectoryError::Format {
            line: 1,
            msg: "empty file".into(),
        })?;
        let header: Header = serde_json::from_str(&first?).map_err(|e| TrajectoryError::Format {
            line,
            msg: format!("bad header: {e}"),
        })?;
        if !(header.frame_rate > 0.0) {
            return Err(TrajectoryError::Format {
                line,
                msg: "frame_rate must be positive".into(),
            });
        }
        let mut samples = Vec::new();
        for (line, text) in lines {
            let s: PoseSample = serde_json::from_str(&text?).map_err(|e| TrajectoryError::Format {
                line,
                msg: e.to_string(),
            })?;
            samples.push(s);
        }
        let traj = Self {
            body: header.body,
            frame_rate: header.frame_rate,
            samples,
        };
        traj.validate()?;
        Ok(traj)
    }
}

/// Per-particle frames (`{"t": f, "particles": [[x,y,z], ...]}`) after the
/// usual header line.
pub fn write_particle_frames<W: Write>(
    mut w: W,
    body: &str,
    frame_rate: f64,
    frames: &[(f64, Vec<Vec3>)],
) -> Result<(), TrajectoryError> {
    let header = Header {
        frame_rate,
        body: body.to_string(),
    };
    serde_json::to_writer(&mut w, &header).map_err(std::io::Error::from)?;
    w.write_all(b"\n")?;
    for (t, particles) in frames {
        let rec = ParticleFrame {
            t: *t,
            particles: std::borrow::Cow::Borrowed(particles),
        };
        serde_json::to_writer(&mut w, &rec).map_err(std::io::Error::from)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_particle_frames<R: BufRead>(r: R) -> Result<(f64, Vec<(f64, Vec<Vec3>)>), TrajectoryError> {
    let mut frame_rate = None;
    let mut frames = Vec::new();
    for (i, l) in r.lines().enumerate() {
        let l = l?;
        if l.trim().is_empty() {
            continue;
        }
        let bad = |e: serde_json::Error| TrajectoryError::Format {
            line: i + 1,
            msg: e.to_string(),
        };
        if frame_rate.is_none() {
            let h: Header = serde_json::from_str(&l).map_err(bad)?;
            frame_rate = Some(h.frame_rate);
        } else {
            let f: ParticleFrame = serde_json::from_str(&l).map_err(bad)?;
            frames.push((f.t, f.particles.into_owned()));
        }
    }
    let fr = frame_rate.ok_or(TrajectoryError::Format {
        line: 1,
        msg: "empty file".into(),
    })?;
    Ok((fr, frames))
}
