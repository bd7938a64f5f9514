#![allow(dead_code)]

use officegate::crypto::{xor_transform, CipherKey};
use officegate::directory::Directory;
use officegate::harness::Rig;
use officegate::recognition::FaceScriptEntry;
use officegate::tag::tagged_buffer;
use officegate::transcription::SpeechScriptEntry;
use serde_json::json;

pub const KEY_HEX: &str = "5a17c3e80b9d4f2611ae73c05d8b29f4";

pub fn key() -> CipherKey {
    CipherKey::from_hex(KEY_HEX).unwrap()
}

pub fn directory_docs() -> Vec<serde_json::Value> {
    vec![
        json!({"id": "e1", "firstName": "Anna", "lastName": "Lindberg", "notifyHandle": "@anna"}),
        json!({"id": "e2", "firstName": "Bo", "lastName": "Ek", "notifyHandle": "@bo"}),
        json!({"id": "e3", "firstName": "Carl", "lastName": "Berg", "notifyHandle": "@carl"}),
        json!({"id": "e4", "firstName": "Dora", "lastName": "Nyman"}),
    ]
}

pub fn directory() -> Directory {
    Directory::from_documents(directory_docs()).unwrap()
}

/// Transcripts whose best score against [`directory`] is the key, always on Anna Lindberg.
pub const GUEST_TRANSCRIPTS: [(u8, &str); 7] = [
    (100, "anna lindberg"),
    (85, "ana lindberi"),
    (80, "anna lindberqqq"),
    (55, "qqqanna lindbexxxxxx"),
    (30, "zzzzanna lxxxxxxxxxx"),
    (29, "annaxxxxxxxxxx"),
    (15, "anxzzzz"),
];

pub fn face_script() -> Vec<FaceScriptEntry> {
    let mut slow = FaceScriptEntry::new("slow", Some("e1"), 96.0);
    slow.latency_ms = Some(10353);
    let mut outage = FaceScriptEntry::new("outage", Some("e1"), 99.0);
    outage.unavailable = true;
    vec![
        FaceScriptEntry::new("genuine", Some("e1"), 94.25),
        FaceScriptEntry::new("impostor", Some("e2"), 73.1),
        FaceScriptEntry::new("nobody", None, 0.0),
        FaceScriptEntry::new("high", Some("e1"), 99.8),
        FaceScriptEntry::new("nohandle", Some("e4"), 97.0),
        slow,
        outage,
    ]
}

pub fn speech_script() -> Vec<SpeechScriptEntry> {
    let mut v: Vec<_> = GUEST_TRANSCRIPTS
        .iter()
        .map(|(score, t)| SpeechScriptEntry::new(&format!("s{score}"), t))
        .collect();
    v.push(SpeechScriptEntry::new("bo", "bo ek"));
    v.push(SpeechScriptEntry::new("dora", "dora nyman"));
    let mut down = SpeechScriptEntry::new("down", "");
    down.unavailable = true;
    v.push(down);
    v
}

pub fn rig() -> Rig {
    Rig::new(directory(), face_script(), speech_script(), key(), 5000).unwrap()
}

pub fn probe(tag: &str) -> Vec<u8> {
    tagged_buffer(tag, b"\xff\xd8\xff\xe0 fake jpeg body for tests")
}

pub fn encrypted_probe(tag: &str) -> Vec<u8> {
    xor_transform(&probe(tag), &key())
}

pub fn audio(tag: &str) -> Vec<u8> {
    tagged_buffer(tag, b"RIFF fake pcm")
}

pub fn b64(bytes: &[u8]) -> String {
    use base64::Engine;
    base64::engine::general_purpose::STANDARD.encode(bytes)
}
