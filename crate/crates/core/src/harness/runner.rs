use super::report::*;
use super::scenario::*;
use super::{LoopbackStack, Rig};
use crate::clock::Clock;
use crate::crypto::CipherKey;
use crate::directory::Directory;
use crate::doorunit::DoorLink;
use crate::flows::{timing_report, ConfirmAnswer, SessionKind, SessionState};
use crate::protocol::*;
use crate::recognition::FaceScriptEntry;
use crate::tag::tagged_buffer;
use crate::transcription::{Band, SpeechScriptEntry};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use std::time::Duration;

const REPLY_TIMEOUT: Duration = Duration::from_secs(10);
const DEFAULT_SEED: u64 = 0x0ff1ce;

fn face_tag(i: usize) -> String {
    format!("f{i:07}")
}

fn audio_tag(i: usize, k: usize) -> String {
    format!("g{i:04}{k:02}")
}

fn stack_err(e: impl std::fmt::Display) -> ScenarioError {
    ScenarioError::Stack(e.to_string())
}

fn harness_key(rng: &mut ChaCha20Rng) -> CipherKey {
    loop {
        let mut bytes = [0u8; 16];
        rng.fill_bytes(&mut bytes);
        if let Ok(k) = CipherKey::new(bytes.to_vec()) {
            return k;
        }
    }
}

/// Runs every trial, in order, through a loopback controller and the door
/// unit client. `seed` overrides the scenario's own seed.
pub async fn run_scenario(scenario: &Scenario, seed: Option<u64>) -> Result<Report, ScenarioError> {
    scenario.flow.validate().map_err(ScenarioError::Config)?;
    let seed = seed.or(scenario.seed).unwrap_or(DEFAULT_SEED);
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let directory = scenario.build_directory()?;
    let trials = scenario.expand(&directory, &mut rng)?;
    let key = harness_key(&mut rng);

    let mut face = Vec::new();
    let mut speech = Vec::new();
    for (i, t) in trials.iter().enumerate() {
        if t.kind.is_face() {
            let mut e = FaceScriptEntry::new(
                &face_tag(i),
                t.employee_id.as_deref(),
                t.similarity.unwrap_or(0.0),
            );
            e.latency_ms = t.cloud_auth_ms;
            face.push(e);
        } else {
            for (k, text) in t.transcripts.iter().enumerate() {
                speech.push(SpeechScriptEntry::new(&audio_tag(i, k), text));
            }
        }
    }
    let window = scenario.flow.unlock_window_ms;
    let rig = Rig::new(directory, face, speech, key.clone(), window).map_err(stack_err)?;
    let cfg = ServerConfig {
        record_trace: true,
        ..ServerConfig::default()
    };
    let stack = LoopbackStack::start(&rig, scenario.flow.clone(), cfg, Some(seed))
        .await
        .map_err(stack_err)?;
    let result = drive(&rig, &stack, &trials, key).await;
    if let Ok((_, Some(sid))) = &result {
        // Aborts get no reply, so wait until the controller has seen the last one.
        let seen = |h: &ServerHandle| {
            h.trace().iter().any(|m| {
                m.kind == MessageType::Error
                    && m.role == Role::Door
                    && m.session.as_deref() == Some(sid.as_str())
            })
        };
        let _ = stack.wait_for(seen).await;
    }
    let trace = stack.server.trace();
    let sessions = stack.server.controller().lock().await.take_finished();
    stack.shutdown().await;
    let records = result?.0;

    let mut genuine_scores = Vec::new();
    let mut impostor_scores = Vec::new();
    let (mut false_accepts, mut false_rejects) = (0, 0);
    let mut native = Vec::new();
    let mut non_native = Vec::new();
    for (t, r) in trials.iter().zip(&records) {
        match t.kind {
            TrialKind::Genuine => {
                genuine_scores.push(t.similarity.unwrap_or(0.0));
                false_rejects += usize::from(r.accepted == Some(false));
            }
            TrialKind::Impostor => {
                impostor_scores.push(t.similarity.unwrap_or(0.0));
                false_accepts += usize::from(r.accepted == Some(true));
            }
            TrialKind::GuestNative | TrialKind::GuestNonNative => {
                let n = NameTries {
                    trial: r.index,
                    target: t.target.clone().unwrap_or_default(),
                    tries: r.tries.unwrap_or(0),
                    notified: r.outcome == TrialOutcome::Notified,
                };
                if t.kind == TrialKind::GuestNative {
                    native.push(n);
                } else {
                    non_native.push(n);
                }
            }
        }
    }
    let summary =
        |v: &[NameTries]| TriesSummary::new(v.len(), v.iter().map(|n| n.tries as u64).sum());
    let trace_violations: Vec<String> = split_by_session(&trace)
        .into_iter()
        .filter_map(|(sid, msgs)| {
            match validate_trace(&msgs, scenario.flow.max_attempts as usize) {
                Ok(v) if v.complete => None,
                Ok(_) => Some(format!("{sid}: session did not finish")),
                Err(e) => Some(format!("{sid}: {e}")),
            }
        })
        .collect();
    let mismatches = records.iter().filter(|r| !r.ok).count() + trace_violations.len();
    let ratio = |num: usize, den: usize| (den > 0).then(|| num as f64 / den as f64);
    Ok(Report {
        seed,
        accept_threshold: scenario.flow.recognition.accept_threshold,
        histogram: histogram(&genuine_scores, &impostor_scores),
        far: ratio(false_accepts, impostor_scores.len()),
        frr: ratio(false_rejects, genuine_scores.len()),
        false_accepts,
        false_rejects,
        genuine_scores,
        impostor_scores,
        timing: timing_report(
            sessions
                .iter()
                .filter(|s| s.state == SessionState::Unlocked),
        ),
        guests: GuestReport {
            native_summary: summary(&native),
            non_native_summary: summary(&non_native),
            native,
            non_native,
        },
        trials: records,
        trace_violations,
        mismatches,
    })
}

/// Runs every trial in order. Also returns the session id of a final
/// guest trial that was abandoned.
async fn drive(
    rig: &Rig,
    stack: &LoopbackStack,
    trials: &[Trial],
    key: CipherKey,
) -> Result<(Vec<TrialRecord>, Option<String>), ScenarioError> {
    let mut door = DoorLink::connect(stack.addr(), key)
        .await
        .map_err(stack_err)?;
    let mut out = Vec::with_capacity(trials.len());
    let mut aborted = None;
    for (index, t) in trials.iter().enumerate() {
        aborted = None;
        let (outcome, accepted, tries, note) = if t.kind.is_face() {
            let (o, a, n) = face_trial(rig, &mut door, index, t).await?;
            (o, Some(a), None, n)
        } else {
            let (o, tries, n) = guest_trial(&mut door, index, t, &mut aborted).await?;
            (o, None, Some(tries), n)
        };
        let expected = t.expected();
        let ok = outcome == expected
            && t.expect_tries.is_none_or(|want| Some(want) == tries)
            && note.is_none();
        out.push(TrialRecord {
            index,
            kind: t.kind,
            expected,
            outcome,
            accepted,
            tries,
            ok,
            note,
        });
    }
    Ok((out, aborted))
}

async fn reply(door: &mut DoorLink, session: &str) -> Result<Message, ScenarioError> {
    loop {
        let m = door.recv_timeout(REPLY_TIMEOUT).await.map_err(stack_err)?;
        if m.session.as_deref() == Some(session) {
            return Ok(m);
        }
        if m.kind == MessageType::Error {
            let p: ErrorPayload = m.payload_as().map_err(stack_err)?;
            return Err(ScenarioError::Stack(format!("{}: {}", p.code, p.message)));
        }
    }
}

fn handle_of(dir: &Directory, id: Option<&str>) -> Option<String> {
    dir.get(id?)?.notify_handle.clone()
}

fn wrong_code(real: &str) -> String {
    let n: u32 = real.parse().unwrap_or(0);
    format!("{:04}", (n + 1) % 10_000)
}

async fn face_trial(
    rig: &Rig,
    door: &mut DoorLink,
    index: usize,
    t: &Trial,
) -> Result<(TrialOutcome, bool, Option<String>), ScenarioError> {
    let sid = door
        .start_session(SessionKind::Employee)
        .map_err(stack_err)?;
    let probe = tagged_buffer(&face_tag(index), b"scenario probe");
    door.upload_probe(&sid, probe, t.capture_ms)
        .map_err(stack_err)?;
    let first = reply(door, &sid).await?;
    match first.kind {
        MessageType::AuthResult => return Ok((TrialOutcome::Denied, false, None)),
        MessageType::Error => return Ok((TrialOutcome::Error, false, error_note(&first))),
        MessageType::CodeChallenge => {}
        other => {
            return Err(ScenarioError::Stack(format!(
                "unexpected {other:?} after capture"
            )))
        }
    }
    let handle = handle_of(&rig.directory, t.employee_id.as_deref()).ok_or_else(|| {
        ScenarioError::Stack("challenge issued for an employee without handle".into())
    })?;
    if let Some(ms) = t.pin_entry_ms {
        rig.clock.advance(ms);
    }
    loop {
        let real = rig
            .last_code_for(&handle)
            .ok_or_else(|| ScenarioError::Stack("no code was delivered".into()))?;
        // An impostor never sees the code sent to the employee.
        let code = if t.kind == TrialKind::Genuine {
            real
        } else {
            wrong_code(&real)
        };
        door.submit_code(&sid, &code).map_err(stack_err)?;
        let m = reply(door, &sid).await?;
        if m.kind == MessageType::Error {
            return Ok((TrialOutcome::Error, true, error_note(&m)));
        }
        let r: CodeResultPayload = m.payload_as().map_err(stack_err)?;
        match r.outcome {
            CodeOutcome::Unlocked => {
                let u = reply(door, &sid).await?;
                let w: UnlockEventPayload = u.payload_as().map_err(stack_err)?;
                // Let the lock close before the next person steps up.
                let now = rig.clock.now_ms();
                if w.end_ms > now {
                    rig.clock.advance(w.end_ms - now);
                }
                return Ok((TrialOutcome::Unlocked, true, None));
            }
            CodeOutcome::NewChallenge => {
                let c = reply(door, &sid).await?;
                if c.kind != MessageType::CodeChallenge {
                    return Err(ScenarioError::Stack(format!(
                        "expected CODE_CHALLENGE, got {:?}",
                        c.kind
                    )));
                }
            }
            CodeOutcome::LockedOut => return Ok((TrialOutcome::LockedOut, true, None)),
            CodeOutcome::Expired => return Ok((TrialOutcome::Expired, true, None)),
        }
    }
}

fn error_note(m: &Message) -> Option<String> {
    m.payload_as::<ErrorPayload>().ok().map(|p| p.message)
}

async fn guest_trial(
    door: &mut DoorLink,
    index: usize,
    t: &Trial,
    aborted: &mut Option<String>,
) -> Result<(TrialOutcome, u32, Option<String>), ScenarioError> {
    let target = t.target.as_deref().unwrap_or_default();
    let sid = door.start_session(SessionKind::Guest).map_err(stack_err)?;
    let mut tries = 0u32;
    for k in 0..t.transcripts.len() {
        tries += 1;
        let audio = tagged_buffer(&audio_tag(index, k), b"scenario audio");
        door.send_audio(&sid, audio).map_err(stack_err)?;
        let mut m = reply(door, &sid).await?;
        if m.kind == MessageType::GuestMatch {
            let p: GuestMatchPayload = m.payload_as().map_err(stack_err)?;
            match p.band {
                Band::Retry => continue,
                Band::Confirm => {
                    let yes = p.employee_id.as_deref() == Some(target);
                    let answer = if yes {
                        ConfirmAnswer::Yes
                    } else {
                        ConfirmAnswer::No
                    };
                    door.confirm(&sid, answer).map_err(stack_err)?;
                    m = reply(door, &sid).await?;
                }
                Band::Notify => {
                    return Err(ScenarioError::Stack(
                        "notify band sent as GUEST_MATCH".into(),
                    ))
                }
            }
        }
        match m.kind {
            MessageType::GuestResult => {
                let p: GuestResultPayload = m.payload_as().map_err(stack_err)?;
                match p.outcome {
                    GuestOutcome::Notified => {
                        let note = (p.employee_id.as_deref() != Some(target))
                            .then(|| format!("notified {:?} instead of {target:?}", p.employee_id));
                        return Ok((TrialOutcome::Notified, tries, note));
                    }
                    GuestOutcome::BackToUtterance => continue,
                }
            }
            MessageType::Error => return Ok((TrialOutcome::Error, tries, error_note(&m))),
            other => {
                return Err(ScenarioError::Stack(format!(
                    "unexpected {other:?} in guest flow"
                )))
            }
        }
    }
    door.abort(&sid, "guest gave up").map_err(stack_err)?;
    *aborted = Some(sid);
    Ok((TrialOutcome::Exhausted, tries, None))
}
