//! Hand-off of presentations to whatever drives the hardware.
//!
//! Delivery is advisory: a failed dispatch is reported to the caller, which
//! records it and carries on.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::net::{SocketAddr, TcpStream};
use std::path::PathBuf;
use std::time::Duration;

use pleasance_core::protocol::Millis;
use pleasance_core::stimulus::{generate_trajectory_with, FocusFrame, StimulusId, StimulusSpec, StrokeRepeat};
use serde::{Deserialize, Serialize};

use crate::config::{PresenterSection, SinkKind};
use crate::formats::write_trajectory;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TrajectoryRef {
    /// Regenerate from the session catalog entry.
    Catalog { stimulus_id: StimulusId },
    Inline { frames: Vec<FocusFrame> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PresentCommand {
    pub session_id: String,
    pub stimulus_id: StimulusId,
    pub trajectory_ref: TrajectoryRef,
    pub issued_at: Millis,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Delivery {
    Delivered,
    Failed { reason: String },
}

impl Delivery {
    pub fn is_delivered(&self) -> bool {
        matches!(self, Delivery::Delivered)
    }
}

#[derive(Debug, Clone)]
pub enum Presenter {
    /// The presentation event in the session log is the only record.
    Log,
    /// Writes `<dir>/<session>/stimulus_<id>.csv` trajectory exports.
    File { dir: PathBuf, repeat: StrokeRepeat },
    /// Sends length-prefixed JSON commands over TCP.
    Stream { addr: SocketAddr, timeout: Duration },
}

impl Presenter {
    pub fn from_config(section: &PresenterSection, data_dir: &std::path::Path, repeat: StrokeRepeat) -> Self {
        match section.sink {
            SinkKind::Log => Presenter::Log,
            SinkKind::File => Presenter::File { dir: data_dir.join(&section.file_dir), repeat },
            SinkKind::Stream => {
                Presenter::Stream { addr: section.stream_addr, timeout: Duration::from_millis(section.timeout_ms) }
            }
        }
    }

    pub fn kind(&self) -> SinkKind {
        match self {
            Presenter::Log => SinkKind::Log,
            Presenter::File { .. } => SinkKind::File,
            Presenter::Stream { .. } => SinkKind::Stream,
        }
    }

    /// Delivers `command` for `spec`. Blocking; the stream sink waits at most
    /// twice its timeout.
    pub fn dispatch(&self, command: &PresentCommand, spec: &StimulusSpec) -> Delivery {
        let result = match self {
            Presenter::Log => Ok(()),
            Presenter::File { dir, repeat } => write_file(dir, command, spec, *repeat),
            Presenter::Stream { addr, timeout } => {
                send_frame(addr, *timeout, command).or_else(|_| send_frame(addr, *timeout, command))
            }
        };
        match result {
            Ok(()) => Delivery::Delivered,
            Err(e) => Delivery::Failed { reason: e.to_string() },
        }
    }
}

fn write_file(
    dir: &std::path::Path,
    command: &PresentCommand,
    spec: &StimulusSpec,
    repeat: StrokeRepeat,
) -> std::io::Result<()> {
    let dir = dir.join(&command.session_id);
    fs::create_dir_all(&dir)?;
    let frames = match &command.trajectory_ref {
        TrajectoryRef::Inline { frames } => frames.clone(),
        TrajectoryRef::Catalog { .. } => generate_trajectory_with(spec, repeat),
    };
    let mut out = BufWriter::new(File::create(dir.join(format!("stimulus_{:02}.csv", command.stimulus_id)))?);
    write_trajectory(&mut out, &frames).map_err(std::io::Error::other)?;
    out.flush()
}

/// Big-endian `u32` byte length followed by the JSON body.
pub fn encode_frame(command: &PresentCommand) -> Vec<u8> {
    let body = serde_json::to_vec(command).expect("command serializes");
    let mut frame = (body.len() as u32).to_be_bytes().to_vec();
    frame.extend(body);
    frame
}

fn send_frame(addr: &SocketAddr, timeout: Duration, command: &PresentCommand) -> std::io::Result<()> {
    let mut stream = TcpStream::connect_timeout(addr, timeout)?;
    stream.set_write_timeout(Some(timeout))?;
    stream.write_all(&encode_frame(command))?;
    stream.flush()
}

#[cfg(test)]
mod tests {
    use super::*;
    use pleasance_core::stimulus::default_catalog;
    use std::io::Read;
    use std::net::TcpListener;

    fn command(id: StimulusId) -> PresentCommand {
        PresentCommand {
            session_id: "s1".into(),
            stimulus_id: id,
            trajectory_ref: TrajectoryRef::Catalog { stimulus_id: id },
            issued_at: 7,
        }
    }

    #[test]
    fn file_sink_writes_full_trial() {
        let dir = tempfile::tempdir().unwrap();
        let p = Presenter::File { dir: dir.path().to_path_buf(), repeat: StrokeRepeat::Wrap };
        let spec = &default_catalog()[4];
        assert_eq!(p.dispatch(&command(4), spec), Delivery::Delivered);
        let text = fs::read_to_string(dir.path().join("s1/stimulus_04.csv")).unwrap();
        assert_eq!(text.lines().count(), 3001);
    }

    #[test]
    fn stream_sink_frames_commands() {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap();
        let reader = std::thread::spawn(move || {
            let (mut s, _) = listener.accept().unwrap();
            let mut len = [0u8; 4];
            s.read_exact(&mut len).unwrap();
            let mut body = vec![0; u32::from_be_bytes(len) as usize];
            s.read_exact(&mut body).unwrap();
            serde_json::from_slice::<PresentCommand>(&body).unwrap()
        });
        let p = Presenter::Stream { addr, timeout: Duration::from_millis(500) };
        assert!(p.dispatch(&command(2), &default_catalog()[2]).is_delivered());
        assert_eq!(reader.join().unwrap(), command(2));
    }

    #[test]
    fn unreachable_stream_fails_without_panicking() {
        let addr = TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap();
        let p = Presenter::Stream { addr, timeout: Duration::from_millis(50) };
        assert!(matches!(p.dispatch(&command(0), &default_catalog()[0]), Delivery::Failed { .. }));
    }
}
