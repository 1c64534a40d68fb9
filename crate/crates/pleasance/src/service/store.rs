use std::collections::HashMap;
use std::fs::{self, OpenOptions};
use std::path::{Path, PathBuf};
use std::sync::{Arc, RwLock};
use std::time::{SystemTime, UNIX_EPOCH};

use pleasance_core::bt::{estimate_ilsr, BtOptions, ComparisonDataset, Provenance, StrengthEstimate};
use pleasance_core::protocol::{
    start_session, Event, Millis, Phase, Progress, Prompt, ProtocolConfig, ProtocolError, Response,
    SessionState,
};
use pleasance_core::stimulus::{default_catalog, StimulusSpec};
use serde::{Deserialize, Serialize};
use tokio::sync::Mutex;

use super::ServiceError;
use crate::bundle::{bundle_dir, compute_results, write_bundle, SessionResults};
use crate::config::Config;
use crate::eventlog::{parse_log, EventLogWriter, LogLine};
use crate::presenter::{Delivery, PresentCommand, Presenter, TrajectoryRef};

pub type Clock = Arc<dyn Fn() -> Millis + Send + Sync>;

pub fn system_clock() -> Clock {
    Arc::new(|| SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_millis() as Millis).unwrap_or(0))
}

/// Per-session settings that are not part of the protocol log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionMeta {
    pub bt: BtOptions,
    pub created_at: Millis,
    /// Set once a presentation could not be delivered.
    pub presenter_degraded: bool,
    pub presenter_failures: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub last_presenter_error: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CreateSession {
    pub seed: Option<u64>,
    pub catalog: Option<Vec<StimulusSpec>>,
    pub gap_repeats: Option<Vec<u32>>,
    pub synthetic_weight: Option<u32>,
    pub alpha: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Created {
    pub session_id: String,
    pub phase: Phase,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ack {
    pub session_id: String,
    pub phase: Phase,
    /// Progress through the phase now current; absent once complete.
    pub progress: Option<Progress>,
    /// Position of the recorded event in the session log.
    pub event_index: usize,
    /// True when this acknowledges an earlier delivery of the same request.
    pub replayed: bool,
}

/// What a participant sees: the prompt plus a presenter notice.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NextPayload {
    #[serde(flatten)]
    pub prompt: Prompt,
    pub presenter_degraded: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionSummary {
    pub session_id: String,
    pub phase: Phase,
    pub progress: Option<Progress>,
    pub remaining_trials: usize,
    pub events: usize,
    pub presenter_degraded: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartialEstimate {
    /// Always true: computed before the session finished.
    pub partial: bool,
    pub answered_trials: usize,
    pub remaining_trials: usize,
    pub estimate: StrengthEstimate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExportManifest {
    pub session_id: String,
    pub directory: PathBuf,
    pub files: Vec<String>,
}

struct Session {
    state: SessionState,
    writer: EventLogWriter,
    meta: SessionMeta,
    meta_path: PathBuf,
    keys: HashMap<String, (Event, Ack)>,
    cache: Option<SessionResults>,
}

impl Session {
    fn summary(&self) -> SessionSummary {
        SessionSummary {
            session_id: self.state.session_id().to_string(),
            phase: self.state.phase(),
            progress: self.state.next_prompt().ok().map(|p| p.progress),
            remaining_trials: self.state.remaining_trials(),
            events: self.state.event_log().len(),
            presenter_degraded: self.meta.presenter_degraded,
        }
    }

    fn ack(&self, replayed: bool) -> Ack {
        Ack {
            session_id: self.state.session_id().to_string(),
            phase: self.state.phase(),
            progress: self.state.next_prompt().ok().map(|p| p.progress),
            event_index: self.state.event_log().len() - 1,
            replayed,
        }
    }

    fn save_meta(&self) -> Result<(), ServiceError> {
        write_json_atomic(&self.meta_path, &self.meta)
    }

    /// Applies new records to a copy, persists them, then commits.
    fn commit(&mut self, next: SessionState, key: Option<String>) -> Result<(), ServiceError> {
        let old = self.state.event_log().len();
        let mut lines: Vec<LogLine> = next.event_log()[old..].iter().cloned().map(LogLine::from).collect();
        if let Some(last) = lines.last_mut() {
            last.idempotency_key = key;
        }
        self.writer.append(&lines)?;
        self.state = next;
        Ok(())
    }
}

fn write_json_atomic<T: Serialize>(path: &Path, value: &T) -> Result<(), ServiceError> {
    let tmp = path.with_extension("json.tmp");
    fs::write(&tmp, serde_json::to_vec_pretty(value).map_err(crate::error::Error::from)?)?;
    fs::rename(tmp, path)?;
    Ok(())
}

/// The event a response produces, used to compare repeated deliveries.
fn response_event(response: &Response) -> Event {
    match *response {
        Response::ConfirmFamiliarization => Event::FamiliarizationConfirmed,
        Response::GroupExtremes { group_index, most_pleasant, most_unpleasant } => {
            Event::GroupExtremesRecorded { group_index, most_pleasant, most_unpleasant }
        }
        Response::Anchors { best, worst } => Event::AnchorsRecorded { best, worst },
        Response::Rating { stimulus_id, value } => Event::RatingRecorded { stimulus_id, value },
        Response::Choice { pair, winner } => Event::ChoiceRecorded { left: pair.0, right: pair.1, winner },
        Response::Replay { stimulus_id } => Event::StimulusReplayed { stimulus_id },
    }
}

/// Sessions on disk under `<data_dir>/sessions/<id>/`, each with an
/// `events.jsonl` log and a `meta.json` sidecar.
pub struct Store {
    data_dir: PathBuf,
    sessions: RwLock<HashMap<String, Arc<Mutex<Session>>>>,
    protocol: ProtocolConfig,
    bt: BtOptions,
    presenter: Presenter,
    clock: Clock,
}

impl Store {
    /// Opens `data_dir`, replaying every session found there.
    pub fn open(data_dir: impl Into<PathBuf>, config: &Config, presenter: Presenter, clock: Clock) -> Result<Self, ServiceError> {
        let data_dir = data_dir.into();
        let root = data_dir.join("sessions");
        fs::create_dir_all(&root)?;
        let mut sessions = HashMap::new();
        for entry in fs::read_dir(&root)? {
            let dir = entry?.path();
            if !dir.join("events.jsonl").exists() {
                continue;
            }
            match load_session(&dir, &config.bt.options()) {
                Ok(s) => {
                    sessions.insert(s.state.session_id().to_string(), Arc::new(Mutex::new(s)));
                }
                Err(e) => tracing::warn!(dir = %dir.display(), error = %e, "skipping unreadable session"),
            }
        }
        Ok(Self {
            data_dir,
            sessions: RwLock::new(sessions),
            protocol: config.schedule.protocol(),
            bt: config.bt.options(),
            presenter,
            clock,
        })
    }

    pub fn data_dir(&self) -> &Path {
        &self.data_dir
    }

    pub fn presenter(&self) -> &Presenter {
        &self.presenter
    }

    pub fn session_count(&self) -> usize {
        self.sessions.read().expect("session map lock").len()
    }

    fn get(&self, id: &str) -> Result<Arc<Mutex<Session>>, ServiceError> {
        self.sessions
            .read()
            .expect("session map lock")
            .get(id)
            .cloned()
            .ok_or_else(|| ServiceError::NotFound(id.to_string()))
    }

    pub fn create(&self, req: CreateSession) -> Result<Created, ServiceError> {
        let mut protocol = self.protocol.clone();
        if let Some(g) = req.gap_repeats {
            protocol.gap_repeats = g;
        }
        if let Some(w) = req.synthetic_weight {
            protocol.synthetic_weight = w;
        }
        protocol.validate().map_err(|e| ServiceError::invalid("gap_repeats", e.to_string()))?;
        let mut bt = self.bt;
        if let Some(a) = req.alpha {
            bt.alpha = a;
        }
        bt.validate().map_err(|e| ServiceError::invalid("alpha", e.to_string()))?;
        let id = uuid::Uuid::new_v4().simple().to_string();
        let seed = req.seed.unwrap_or_else(|| uuid::Uuid::new_v4().as_u64_pair().0);
        let now = (self.clock)();
        let state = start_session(id.clone(), req.catalog.unwrap_or_else(default_catalog), seed, protocol, now)
            .map_err(|e| ServiceError::invalid("catalog", e.to_string()))?;
        let dir = self.data_dir.join("sessions").join(&id);
        fs::create_dir_all(&dir)?;
        let mut writer = EventLogWriter::create(dir.join("events.jsonl"))?;
        writer.append(&[LogLine::from(state.event_log()[0].clone())])?;
        let meta = SessionMeta { bt, created_at: now, presenter_degraded: false, presenter_failures: 0, last_presenter_error: None };
        let session = Session { state, writer, meta, meta_path: dir.join("meta.json"), keys: HashMap::new(), cache: None };
        session.save_meta()?;
        let phase = session.state.phase();
        self.sessions.write().expect("session map lock").insert(id.clone(), Arc::new(Mutex::new(session)));
        Ok(Created { session_id: id, phase })
    }

    /// The current prompt; every stimulus in it is logged as presented and
    /// then handed to the presenter.
    pub async fn next(&self, id: &str) -> Result<NextPayload, ServiceError> {
        let handle = self.get(id)?;
        let mut s = handle.lock().await;
        let prompt = s.state.next_prompt()?;
        let mut commands = Vec::new();
        let mut next = s.state.clone();
        for &stimulus_id in &prompt.stimuli {
            let issued_at = (self.clock)();
            next.record_presentation(stimulus_id, issued_at)?;
            commands.push(PresentCommand {
                session_id: id.to_string(),
                stimulus_id,
                trajectory_ref: TrajectoryRef::Catalog { stimulus_id },
                issued_at,
            });
        }
        s.commit(next, None)?;
        let catalog = s.state.catalog().to_vec();
        let presenter = self.presenter.clone();
        let results = tokio::task::spawn_blocking(move || {
            commands.iter().map(|c| presenter.dispatch(c, &catalog[c.stimulus_id as usize])).collect::<Vec<_>>()
        })
        .await
        .map_err(|e| ServiceError::Internal(e.to_string()))?;
        let failures: Vec<String> = results
            .into_iter()
            .filter_map(|d| match d {
                Delivery::Delivered => None,
                Delivery::Failed { reason } => Some(reason),
            })
            .collect();
        if let Some(reason) = failures.last() {
            tracing::warn!(session = id, %reason, "presenter unreachable; continuing in degraded mode");
            s.meta.presenter_degraded = true;
            s.meta.presenter_failures += failures.len();
            s.meta.last_presenter_error = Some(reason.clone());
            s.save_meta()?;
        }
        Ok(NextPayload { prompt, presenter_degraded: s.meta.presenter_degraded })
    }

    pub async fn respond(&self, id: &str, key: Option<String>, response: Response) -> Result<Ack, ServiceError> {
        let handle = self.get(id)?;
        let mut s = handle.lock().await;
        let event = response_event(&response);
        if let Some(k) = &key {
            if let Some((seen, ack)) = s.keys.get(k) {
                if *seen != event {
                    return Err(ServiceError::KeyReused(k.clone()));
                }
                return Ok(Ack { replayed: true, ..ack.clone() });
            }
        }
        let mut next = s.state.clone();
        next.respond(&response, (self.clock)()).map_err(|e| ServiceError::Protocol {
            error: e,
            expected: s.state.next_prompt().ok().map(|p| p.response),
        })?;
        s.commit(next, key.clone())?;
        let ack = s.ack(false);
        if let Some(k) = key {
            s.keys.insert(k, (event, ack.clone()));
        }
        Ok(ack)
    }

    /// Results of a completed session, cached per log hash.
    pub async fn results(&self, id: &str) -> Result<SessionResults, ServiceError> {
        let handle = self.get(id)?;
        let mut s = handle.lock().await;
        if s.state.phase() != Phase::Complete {
            return Err(ProtocolError::Incomplete { remaining_trials: s.state.remaining_trials() }.into());
        }
        let hash = crate::eventlog::log_hash(s.state.event_log());
        if let Some(cached) = &s.cache {
            if cached.metadata.log_hash == hash {
                return Ok(cached.clone());
            }
        }
        let results = compute_results(&s.state, &s.meta.bt)?;
        s.cache = Some(results.clone());
        Ok(results)
    }

    pub async fn export(&self, id: &str) -> Result<ExportManifest, ServiceError> {
        let handle = self.get(id)?;
        let s = handle.lock().await;
        let directory = bundle_dir(&self.data_dir, id);
        let files = write_bundle(&directory, &s.state, &s.meta.bt)?;
        Ok(ExportManifest { session_id: id.to_string(), directory, files })
    }

    pub async fn list(&self) -> Vec<SessionSummary> {
        let handles: Vec<_> = self.sessions.read().expect("session map lock").values().cloned().collect();
        let mut out = Vec::with_capacity(handles.len());
        for h in handles {
            out.push(h.lock().await.summary());
        }
        out.sort_by(|a, b| a.session_id.cmp(&b.session_id));
        out
    }

    pub async fn snapshot(&self, id: &str) -> Result<SessionState, ServiceError> {
        Ok(self.get(id)?.lock().await.state.clone())
    }

    pub async fn meta(&self, id: &str) -> Result<SessionMeta, ServiceError> {
        Ok(self.get(id)?.lock().await.meta.clone())
    }

    /// Estimate from the answers so far plus the implied outcomes.
    pub async fn partial_estimate(&self, id: &str) -> Result<PartialEstimate, ServiceError> {
        let handle = self.get(id)?;
        let s = handle.lock().await;
        let schedule = s.state.schedule().ok_or(ServiceError::Conflict("no comparisons scheduled yet".into()))?;
        let mut ds = ComparisonDataset::new(s.state.catalog().len()).map_err(crate::error::Error::from)?;
        for c in s.state.choices() {
            ds.push(c.winner as usize, c.loser() as usize, Provenance::Observed).map_err(crate::error::Error::from)?;
        }
        for o in &schedule.omitted {
            for _ in 0..s.state.config().synthetic_weight {
                ds.push(o.implied_winner as usize, o.implied_loser() as usize, Provenance::Synthetic)
                    .map_err(crate::error::Error::from)?;
            }
        }
        let estimate = estimate_ilsr(&ds, &s.meta.bt).map_err(crate::error::Error::from)?;
        Ok(PartialEstimate {
            partial: true,
            answered_trials: s.state.choices().len(),
            remaining_trials: s.state.remaining_trials(),
            estimate,
        })
    }
}

fn load_session(dir: &Path, default_bt: &BtOptions) -> Result<Session, ServiceError> {
    let path = dir.join("events.jsonl");
    let mut text = fs::read_to_string(&path)?;
    if !text.is_empty() && !text.ends_with('\n') {
        // a write cut short by a crash; the request was never acknowledged
        let keep = text.rfind('\n').map_or(0, |i| i + 1);
        text.truncate(keep);
        OpenOptions::new().write(true).open(&path)?.set_len(keep as u64)?;
    }
    let lines = parse_log(&text, &path.display().to_string())?;
    let (first, rest) = lines.split_first().ok_or(ProtocolError::InvalidLog("empty log"))?;
    let mut state = SessionState::replay(std::slice::from_ref(&first.record))?;
    let mut keys = HashMap::new();
    for line in rest {
        state.apply_record(line.record.clone())?;
        if let Some(k) = &line.idempotency_key {
            let ack = Ack {
                session_id: state.session_id().to_string(),
                phase: state.phase(),
                progress: state.next_prompt().ok().map(|p| p.progress),
                event_index: state.event_log().len() - 1,
                replayed: false,
            };
            keys.insert(k.clone(), (line.record.event.clone(), ack));
        }
    }
    let meta_path = dir.join("meta.json");
    let meta = match fs::read(&meta_path) {
        Ok(bytes) => serde_json::from_slice(&bytes).map_err(crate::error::Error::from)?,
        Err(_) => SessionMeta {
            bt: *default_bt,
            created_at: first.record.timestamp,
            presenter_degraded: false,
            presenter_failures: 0,
            last_presenter_error: None,
        },
    };
    let writer = EventLogWriter::open(&path)?;
    Ok(Session { state, writer, meta, meta_path, keys, cache: None })
}
