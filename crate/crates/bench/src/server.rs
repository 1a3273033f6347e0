//! HTTP API for the pairwise study: sessions, votes, progress and blinded media.

use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};
use std::time::{SystemTime, UNIX_EPOCH};

use axum::extract::{Path as UrlPath, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use srvqa_core::subjective::{
    append_vote, read_votes, schedule_pairs, Choice, PairId, ScheduleParams, SchedulePlan, SlotKind, VerificationPair, Vote,
};

use crate::cache::hex;
use crate::error::{BenchError, Result};
use crate::pipeline::CropRecord;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MediaItem {
    /// Study clip id, e.g. "clip/codec/bitrate".
    pub clip: String,
    pub method: String,
    pub path: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudyManifest {
    pub votes: PathBuf,
    #[serde(default)]
    pub seed: u64,
    /// Salt for media tokens; defaults to one derived from the seed.
    #[serde(default)]
    pub secret: Option<String>,
    #[serde(default = "default_views")]
    pub views_per_pair: usize,
    #[serde(default = "default_session")]
    pub session_size: usize,
    #[serde(default = "default_verification")]
    pub verification_per_session: usize,
    /// Served at `/` when set.
    #[serde(default)]
    pub static_dir: Option<PathBuf>,
    pub media: Vec<MediaItem>,
    pub verification: Vec<VerificationPair>,
}

fn default_views() -> usize {
    15
}

fn default_session() -> usize {
    25
}

fn default_verification() -> usize {
    3
}

impl StudyManifest {
    pub fn load(path: &Path) -> Result<StudyManifest> {
        let text = std::fs::read_to_string(path)?;
        let mut m: StudyManifest = if path.extension().is_some_and(|e| e == "json") {
            serde_json::from_str(&text)?
        } else {
            toml::from_str(&text).map_err(|e| BenchError::ConfigParse {
                path: path.to_path_buf(),
                message: e.to_string(),
            })?
        };
        let base = path.parent().unwrap_or(Path::new("."));
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut m.votes);
        if let Some(d) = &mut m.static_dir {
            fix(d);
        }
        for item in &mut m.media {
            fix(&mut item.path);
        }
        Ok(m)
    }

    /// Manifest over pipeline crops. Each study clip gets one verification
    /// pair: the uncompressed source crop against the first method's crop.
    pub fn from_crops(crops: &[CropRecord], output_dir: &Path, votes: PathBuf, seed: u64) -> StudyManifest {
        let mut media = Vec::new();
        let mut verification = Vec::new();
        let mut seen = BTreeMap::new();
        for c in crops {
            let clip = format!("{}/{}/{}", c.clip, c.codec, crate::pipeline::bitrate_dir(c.bitrate_kbps));
            media.push(MediaItem {
                clip: clip.clone(),
                method: c.method.clone(),
                path: output_dir.join(&c.path),
            });
            seen.entry(clip).or_insert_with(|| (c.clip.clone(), c.method.clone()));
        }
        for (clip, (source, method)) in seen {
            media.push(MediaItem {
                clip: clip.clone(),
                method: REFERENCE.to_owned(),
                path: output_dir.join("crops").join(&source).join("reference.y4m"),
            });
            if let Ok(pair) = PairId::new(clip, REFERENCE, method) {
                verification.push(VerificationPair { pair, answer: Choice::A });
            }
        }
        StudyManifest {
            votes,
            seed,
            secret: None,
            views_per_pair: default_views(),
            session_size: default_session(),
            verification_per_session: default_verification(),
            static_dir: None,
            media,
            verification,
        }
    }

    pub fn params(&self) -> ScheduleParams {
        ScheduleParams {
            views_per_pair: self.views_per_pair,
            session_size: self.session_size,
            verification_per_session: self.verification_per_session,
            seed: self.seed,
        }
    }
}

/// Method id of the uncompressed source crop used by verification pairs.
pub const REFERENCE: &str = "reference";

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
struct Assigned {
    participant_id: String,
    /// slot index -> vote id
    submitted: BTreeMap<usize, u64>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
struct Progress {
    sessions: Vec<Option<Assigned>>,
    next_vote_id: u64,
}

pub struct StudyState {
    plan: SchedulePlan,
    votes_path: PathBuf,
    state_path: PathBuf,
    /// token -> file
    media: HashMap<String, PathBuf>,
    /// (clip, method) -> token
    tokens: HashMap<(String, String), String>,
    progress: Mutex<Progress>,
}

impl StudyState {
    pub fn new(manifest: &StudyManifest) -> Result<StudyState> {
        let mut methods: Vec<String> = Vec::new();
        let mut clips: Vec<String> = Vec::new();
        for m in &manifest.media {
            if m.method != REFERENCE && !methods.contains(&m.method) {
                methods.push(m.method.clone());
            }
            if !clips.contains(&m.clip) {
                clips.push(m.clip.clone());
            }
        }
        methods.sort();
        clips.sort();
        let plan = schedule_pairs(&methods, &clips, &manifest.params(), &manifest.verification)?;
        let secret = manifest
            .secret
            .clone()
            .unwrap_or_else(|| format!("srvqa-study-{}", manifest.seed));
        let mut media = HashMap::new();
        let mut tokens = HashMap::new();
        for m in &manifest.media {
            let t = media_token(&secret, &m.clip, &m.method);
            media.insert(t.clone(), m.path.clone());
            tokens.insert((m.clip.clone(), m.method.clone()), t);
        }
        for s in &plan.sessions {
            for slot in &s.slots {
                for method in [&slot.pair.a, &slot.pair.b] {
                    if !tokens.contains_key(&(slot.pair.clip.clone(), method.clone())) {
                        return Err(BenchError::Config(format!("no media for `{}` on `{}`", method, slot.pair.clip)));
                    }
                }
            }
        }
        let mut state_path = manifest.votes.clone().into_os_string();
        state_path.push(".sessions.json");
        let state_path = PathBuf::from(state_path);
        let mut progress: Progress = match std::fs::read_to_string(&state_path) {
            Ok(t) => serde_json::from_str(&t)?,
            Err(_) => Progress::default(),
        };
        progress.sessions.resize(plan.sessions.len(), None);
        if manifest.votes.exists() {
            let logged = read_votes(&manifest.votes)?.len() as u64;
            progress.next_vote_id = progress.next_vote_id.max(logged);
        }
        Ok(StudyState {
            plan,
            votes_path: manifest.votes.clone(),
            state_path,
            media,
            tokens,
            progress: Mutex::new(progress),
        })
    }

    pub fn plan(&self) -> &SchedulePlan {
        &self.plan
    }

    fn media_url(&self, clip: &str, method: &str) -> String {
        format!("/media/{}", self.tokens[&(clip.to_owned(), method.to_owned())])
    }

    fn persist(&self, p: &Progress) -> Result<()> {
        let tmp = self.state_path.with_extension("tmp");
        std::fs::write(&tmp, serde_json::to_string(p)?)?;
        std::fs::rename(tmp, &self.state_path)?;
        Ok(())
    }
}

/// Opaque media id: a prefix of SHA-256 over the secret, clip and method.
pub fn media_token(secret: &str, clip: &str, method: &str) -> String {
    let mut h = Sha256::new();
    for part in [secret, clip, method] {
        h.update((part.len() as u64).to_le_bytes());
        h.update(part.as_bytes());
    }
    hex(&h.finalize())[..24].to_owned()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SlotView {
    pub slot: usize,
    pub left: String,
    pub right: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionView {
    pub session_id: String,
    pub participant_id: String,
    pub slots: Vec<SlotView>,
    /// Slots already answered.
    pub submitted: Vec<usize>,
    /// First unanswered slot.
    pub progress: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VoteRequest {
    pub session_id: String,
    pub participant_id: String,
    pub slot: usize,
    pub choice: Choice,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VoteReceipt {
    pub vote_id: u64,
    pub session_id: String,
    pub slot: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StudyStatus {
    pub sessions_total: usize,
    pub sessions_assigned: usize,
    pub sessions_completed: usize,
    pub votes_received: u64,
}

#[derive(Debug, Deserialize)]
struct SessionQuery {
    participant_id: String,
}

struct ApiError(StatusCode, String);

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.0, Json(serde_json::json!({ "error": self.1 }))).into_response()
    }
}

fn internal(e: impl std::fmt::Display) -> ApiError {
    ApiError(StatusCode::INTERNAL_SERVER_ERROR, e.to_string())
}

fn session_id(index: usize) -> String {
    format!("s{index}")
}

fn parse_session_id(id: &str) -> Option<usize> {
    id.strip_prefix('s')?.parse().ok()
}

fn view(state: &StudyState, index: usize, a: &Assigned) -> SessionView {
    let plan = &state.plan.sessions[index];
    let slots = plan
        .slots
        .iter()
        .enumerate()
        .map(|(i, s)| SlotView {
            slot: i,
            left: state.media_url(&s.pair.clip, &s.pair.a),
            right: state.media_url(&s.pair.clip, &s.pair.b),
        })
        .collect();
    SessionView {
        session_id: session_id(index),
        participant_id: a.participant_id.clone(),
        slots,
        submitted: a.submitted.keys().copied().collect(),
        progress: (0..plan.slots.len()).find(|i| !a.submitted.contains_key(i)).unwrap_or(plan.slots.len()),
    }
}

async fn get_session(State(state): State<Arc<StudyState>>, Query(q): Query<SessionQuery>) -> std::result::Result<Json<SessionView>, ApiError> {
    let pid = q.participant_id.trim();
    if pid.is_empty() {
        return Err(ApiError(StatusCode::BAD_REQUEST, "participant_id is required".into()));
    }
    let mut p = state.progress.lock().unwrap();
    if let Some((i, a)) = p
        .sessions
        .iter()
        .enumerate()
        .find_map(|(i, s)| s.as_ref().filter(|a| a.participant_id == pid).map(|a| (i, a)))
    {
        return Ok(Json(view(&state, i, a)));
    }
    let Some(i) = p.sessions.iter().position(Option::is_none) else {
        return Err(ApiError(StatusCode::GONE, "study complete".into()));
    };
    let a = Assigned {
        participant_id: pid.to_owned(),
        submitted: BTreeMap::new(),
    };
    let v = view(&state, i, &a);
    p.sessions[i] = Some(a);
    state.persist(&p).map_err(internal)?;
    log::info!("session {} assigned to {pid}", session_id(i));
    Ok(Json(v))
}

fn now_ms() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_millis() as u64)
}

async fn post_vote(State(state): State<Arc<StudyState>>, Json(req): Json<VoteRequest>) -> std::result::Result<Json<VoteReceipt>, ApiError> {
    let index = parse_session_id(&req.session_id)
        .filter(|&i| i < state.plan.sessions.len())
        .ok_or_else(|| ApiError(StatusCode::NOT_FOUND, format!("unknown session `{}`", req.session_id)))?;
    let mut p = state.progress.lock().unwrap();
    let next_id = p.next_vote_id;
    let a = match p.sessions[index].as_mut() {
        Some(a) if a.participant_id == req.participant_id => a,
        _ => return Err(ApiError(StatusCode::FORBIDDEN, "session belongs to another participant".into())),
    };
    let Some(slot) = state.plan.sessions[index].slots.get(req.slot) else {
        return Err(ApiError(StatusCode::BAD_REQUEST, format!("slot {} out of range", req.slot)));
    };
    if a.submitted.contains_key(&req.slot) {
        return Err(ApiError(StatusCode::CONFLICT, format!("slot {} already answered", req.slot)));
    }
    if slot.kind != SlotKind::Filler {
        let vote = Vote::new(
            req.participant_id.clone(),
            slot.pair.clone(),
            req.choice,
            slot.kind == SlotKind::Verification,
            now_ms(),
        );
        append_vote(&state.votes_path, &vote).map_err(internal)?;
    }
    a.submitted.insert(req.slot, next_id);
    p.next_vote_id += 1;
    state.persist(&p).map_err(internal)?;
    Ok(Json(VoteReceipt {
        vote_id: next_id,
        session_id: req.session_id,
        slot: req.slot,
    }))
}

async fn get_status(State(state): State<Arc<StudyState>>) -> Json<StudyStatus> {
    let p = state.progress.lock().unwrap();
    let assigned: Vec<(usize, &Assigned)> = p
        .sessions
        .iter()
        .enumerate()
        .filter_map(|(i, s)| s.as_ref().map(|a| (i, a)))
        .collect();
    Json(StudyStatus {
        sessions_total: state.plan.sessions.len(),
        sessions_assigned: assigned.len(),
        sessions_completed: assigned
            .iter()
            .filter(|(i, a)| a.submitted.len() == state.plan.sessions[*i].slots.len())
            .count(),
        votes_received: p.next_vote_id,
    })
}

async fn get_media(State(state): State<Arc<StudyState>>, UrlPath(token): UrlPath<String>) -> std::result::Result<Response, ApiError> {
    let path = state
        .media
        .get(&token)
        .ok_or_else(|| ApiError(StatusCode::NOT_FOUND, "unknown media".into()))?;
    let bytes = tokio::fs::read(path).await.map_err(internal)?;
    let mime = match path.extension().and_then(|e| e.to_str()) {
        Some("mp4") => "video/mp4",
        Some("webm") => "video/webm",
        Some("png") => "image/png",
        _ => "application/octet-stream",
    };
    Ok(([(header::CONTENT_TYPE, mime)], bytes).into_response())
}

pub fn router(state: Arc<StudyState>, static_dir: Option<&Path>) -> Router {
    let api = Router::new()
        .route("/session", get(get_session))
        .route("/vote", post(post_vote))
        .route("/study/status", get(get_status))
        .route("/media/{token}", get(get_media))
        .with_state(state);
    match static_dir {
        Some(d) => api.fallback_service(tower_http::services::ServeDir::new(d)),
        None => api,
    }
}

pub async fn serve(manifest: &StudyManifest, addr: &str) -> anyhow::Result<()> {
    let state = Arc::new(StudyState::new(manifest)?);
    log::info!(
        "study: {} sessions, votes to {}",
        state.plan.sessions.len(),
        manifest.votes.display()
    );
    let app = router(state, manifest.static_dir.as_deref());
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, app).await?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tokens_hide_names() {
        let t = media_token("k", "clip1/x264/600", "SwinIR");
        assert_eq!(t.len(), 24);
        assert!(!t.contains("SwinIR"));
        assert_ne!(t, media_token("k", "clip1/x264/600", "RealSR"));
        assert_ne!(t, media_token("other", "clip1/x264/600", "SwinIR"));
    }

    #[test]
    fn session_ids() {
        assert_eq!(parse_session_id(&session_id(17)), Some(17));
        assert_eq!(parse_session_id("17"), None);
    }
}
