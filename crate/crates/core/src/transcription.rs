//! Speech-to-text providers and fuzzy matching of a spoken name against the
//! directory.
//!
//! Scores are integer percentages. The best score decides the band:
//! strictly above the notify threshold the employee is messaged directly,
//! strictly below the retry threshold the guest is asked again, and anything
//! in between asks the guest to confirm the candidate.

use crate::directory::{normalize_name, Directory};
use crate::recognition::ProviderError;
use crate::tag::BufferTag;
use async_trait::async_trait;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Band {
    Notify,
    Confirm,
    Retry,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct NameMatch {
    pub employee_id: Option<String>,
    pub score: u8,
    pub band: Band,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default)]
pub struct TranscriptionConfig {
    pub notify_threshold: u8,
    pub retry_threshold: u8,
    /// Passed to real adapters; the mock ignores it.
    pub language_tag: String,
}

impl Default for TranscriptionConfig {
    fn default() -> Self {
        Self {
            notify_threshold: 80,
            retry_threshold: 30,
            language_tag: "sv-SE".into(),
        }
    }
}

impl TranscriptionConfig {
    pub fn validate(&self) -> Result<(), ProviderError> {
        if !(0 < self.retry_threshold
            && self.retry_threshold < self.notify_threshold
            && self.notify_threshold < 100)
        {
            return Err(ProviderError::Invalid(format!(
                "need 0 < retry ({}) < notify ({}) < 100",
                self.retry_threshold, self.notify_threshold
            )));
        }
        Ok(())
    }

    pub fn band(&self, score: u8) -> Band {
        if score > self.notify_threshold {
            Band::Notify
        } else if score < self.retry_threshold {
            Band::Retry
        } else {
            Band::Confirm
        }
    }
}

#[async_trait]
pub trait SpeechProvider: Send + Sync {
    async fn transcribe(&self, audio: &[u8]) -> Result<String, ProviderError>;
}

pub async fn transcribe(
    provider: &dyn SpeechProvider,
    audio: &[u8],
) -> Result<String, ProviderError> {
    if audio.is_empty() {
        return Err(ProviderError::EmptyInput);
    }
    provider.transcribe(audio).await
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SpeechScriptEntry {
    pub audio_tag: String,
    pub transcript: String,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub unavailable: bool,
}

impl SpeechScriptEntry {
    pub fn new(tag: &str, transcript: &str) -> Self {
        Self {
            audio_tag: tag.into(),
            transcript: transcript.into(),
            unavailable: false,
        }
    }
}

/// Maps the tag in the first eight bytes of the audio buffer to a transcript.
#[derive(Debug, Default)]
pub struct MockSpeechProvider {
    entries: HashMap<BufferTag, SpeechScriptEntry>,
}

impl MockSpeechProvider {
    pub fn from_script(script: Vec<SpeechScriptEntry>) -> Result<Self, ProviderError> {
        let mut entries = HashMap::new();
        for entry in script {
            let tag = BufferTag::new(&entry.audio_tag)?;
            if entries.insert(tag, entry.clone()).is_some() {
                return Err(ProviderError::Invalid(format!(
                    "duplicate audio tag {:?}",
                    entry.audio_tag
                )));
            }
        }
        Ok(Self { entries })
    }

    /// Parses a JSON array of `{audioTag, transcript}`.
    pub fn from_json(text: &str) -> Result<Self, ProviderError> {
        let script: Vec<SpeechScriptEntry> =
            serde_json::from_str(text).map_err(|e| ProviderError::Invalid(e.to_string()))?;
        Self::from_script(script)
    }
}

#[async_trait]
impl SpeechProvider for MockSpeechProvider {
    async fn transcribe(&self, audio: &[u8]) -> Result<String, ProviderError> {
        let tag = BufferTag::of_buffer(audio);
        match self.entries.get(&tag) {
            Some(e) if e.unavailable => Err(ProviderError::Unavailable("scripted outage".into())),
            Some(e) => Ok(e.transcript.clone()),
            None => Err(ProviderError::ScriptedMiss(tag.to_string())),
        }
    }
}

/// String similarity on an integer 0..=100 scale.
pub trait NameMetric: Send + Sync {
    fn score(&self, a: &str, b: &str) -> u8;
}

/// Normalized Levenshtein ratio over Unicode scalar values.
#[derive(Debug, Clone, Copy, Default)]
pub struct LevenshteinRatio;

impl NameMetric for LevenshteinRatio {
    fn score(&self, a: &str, b: &str) -> u8 {
        similarity(a, b)
    }
}

/// Token-set ratio: compares the shared tokens against each side's extras,
/// so word order and repeated words do not matter.
#[derive(Debug, Clone, Copy, Default)]
pub struct TokenSetRatio;

impl NameMetric for TokenSetRatio {
    fn score(&self, a: &str, b: &str) -> u8 {
        use std::collections::BTreeSet;
        let na = normalize_name(a);
        let nb = normalize_name(b);
        let ta: BTreeSet<&str> = na.split(' ').filter(|t| !t.is_empty()).collect();
        let tb: BTreeSet<&str> = nb.split(' ').filter(|t| !t.is_empty()).collect();
        let join = |set: Vec<&str>| set.join(" ");
        let common = join(ta.intersection(&tb).copied().collect());
        let with = |extra: Vec<&str>| {
            let extra = join(extra);
            format!("{common} {extra}").trim().to_string()
        };
        let left = with(ta.difference(&tb).copied().collect());
        let right = with(tb.difference(&ta).copied().collect());
        [
            similarity(&common, &left),
            similarity(&common, &right),
            similarity(&left, &right),
        ]
        .into_iter()
        .max()
        .unwrap_or(0)
    }
}

pub fn edit_distance(a: &[char], b: &[char]) -> usize {
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0; b.len() + 1];
    for (i, ca) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, cb) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(ca != cb);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// `round_half_up(100 * (1 - dist / max_len))` on normalized names; two empty
/// names score 100.
pub fn similarity(a: &str, b: &str) -> u8 {
    let a: Vec<char> = normalize_name(a).chars().collect();
    let b: Vec<char> = normalize_name(b).chars().collect();
    let longest = a.len().max(b.len());
    if longest == 0 {
        return 100;
    }
    let same = longest - edit_distance(&a, &b);
    // integer half-up rounding of 100 * same / longest
    ((200 * same + longest) / (2 * longest)) as u8
}

pub fn match_name(transcript: &str, directory: &Directory, cfg: &TranscriptionConfig) -> NameMatch {
    match_name_with(&LevenshteinRatio, transcript, directory, cfg)
}

/// Scores every employee name; the highest score wins and ties go to the
/// earliest-ingested record.
pub fn match_name_with(
    metric: &dyn NameMetric,
    transcript: &str,
    directory: &Directory,
    cfg: &TranscriptionConfig,
) -> NameMatch {
    let mut best: Option<(&str, u8)> = None;
    for record in directory {
        let score = metric.score(transcript, &record.full_name);
        if best.is_none_or(|(_, s)| score > s) {
            best = Some((&record.id, score));
        }
    }
    match best {
        Some((id, score)) => NameMatch {
            employee_id: Some(id.to_string()),
            score,
            band: cfg.band(score),
        },
        None => NameMatch {
            employee_id: None,
            score: 0,
            band: Band::Retry,
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tag::tagged_buffer;
    use proptest::prelude::*;
    use serde_json::json;
    use std::collections::HashMap as Memo;

    // Independent oracle: the textbook recursive definition, memoized.
    fn oracle_distance(a: &[char], b: &[char]) -> usize {
        fn go(
            a: &[char],
            b: &[char],
            i: usize,
            j: usize,
            memo: &mut Memo<(usize, usize), usize>,
        ) -> usize {
            if i == a.len() {
                return b.len() - j;
            }
            if j == b.len() {
                return a.len() - i;
            }
            if let Some(&v) = memo.get(&(i, j)) {
                return v;
            }
            let v = if a[i] == b[j] {
                go(a, b, i + 1, j + 1, memo)
            } else {
                1 + go(a, b, i + 1, j, memo)
                    .min(go(a, b, i, j + 1, memo))
                    .min(go(a, b, i + 1, j + 1, memo))
            };
            memo.insert((i, j), v);
            v
        }
        go(a, b, 0, 0, &mut Memo::new())
    }

    fn oracle_score(a: &str, b: &str) -> u8 {
        let a: Vec<char> = normalize_name(a).chars().collect();
        let b: Vec<char> = normalize_name(b).chars().collect();
        let m = a.len().max(b.len());
        if m == 0 {
            return 100;
        }
        let raw = 100.0 * (1.0 - oracle_distance(&a, &b) as f64 / m as f64);
        (raw + 0.5).floor() as u8
    }

    fn dir(names: &[(&str, &str)]) -> Directory {
        Directory::from_documents(
            names
                .iter()
                .enumerate()
                .map(|(i, (f, l))| json!({"id": format!("e{i}"), "firstName": f, "lastName": l})),
        )
        .unwrap()
    }

    #[test]
    fn oracle_values_frozen() {
        // Frozen from oracle_distance: (1, 13) -> 92.3, (12, 13) -> 7.7, (2, 13) -> 84.6,
        // (11, 13) -> 15.4.
        let chars = |s: &str| s.chars().collect::<Vec<_>>();
        assert_eq!(
            oracle_distance(&chars("ana lindberg"), &chars("anna lindberg")),
            1
        );
        assert_eq!(oracle_distance(&chars("jon"), &chars("anna lindberg")), 12);
        assert_eq!(oracle_distance(&chars("an"), &chars("anna lindberg")), 11);
        assert_eq!(
            oracle_distance(&chars("ana lindberi"), &chars("anna lindberg")),
            2
        );
        assert_eq!(similarity("Anna Lindberg", "anna  lindberg"), 100);
        assert_eq!(similarity("ana lindberg", "anna lindberg"), 92);
        assert_eq!(similarity("jon", "anna lindberg"), 8);
        assert_eq!(similarity("an", "anna lindberg"), 15);
        assert_eq!(similarity("ana lindberi", "anna lindberg"), 85);
        assert_eq!(similarity("", ""), 100);
        assert_eq!(similarity("abc", ""), 0);
        assert_eq!(similarity("abc", "xyz"), 0);
    }

    #[test]
    fn rounding_is_half_up() {
        // 1 edit over 8 chars: 87.5 -> 88
        assert_eq!(similarity("abcdefgh", "abcdefgx"), 88);
    }

    #[test]
    fn match_examples() {
        let cfg = TranscriptionConfig::default();
        let d = dir(&[("Anna", "Lindberg"), ("Bo", "Ek")]);
        let m = match_name("anna lindberg", &d, &cfg);
        assert_eq!(
            m,
            NameMatch {
                employee_id: Some("e0".into()),
                score: 100,
                band: Band::Notify
            }
        );
        let m = match_name("ana lindberi", &d, &cfg);
        assert_eq!(
            m,
            NameMatch {
                employee_id: Some("e0".into()),
                score: 85,
                band: Band::Notify
            }
        );
        let m = match_name("anything", &Directory::default(), &cfg);
        assert_eq!(
            m,
            NameMatch {
                employee_id: None,
                score: 0,
                band: Band::Retry
            }
        );
    }

    #[test]
    fn exactly_eighty_confirms() {
        // "abcdefghij" vs "abcdefghxy": 2 edits over 10 chars -> 80
        let d = dir(&[("abcdefghij", "")]);
        let m = match_name("abcdefghxy", &d, &TranscriptionConfig::default());
        assert_eq!((m.score, m.band), (80, Band::Confirm));
    }

    #[test]
    fn band_boundaries() {
        let cfg = TranscriptionConfig::default();
        let bands: Vec<_> = [100, 85, 81, 80, 55, 30, 29, 15, 0]
            .iter()
            .map(|&s| cfg.band(s))
            .collect();
        use Band::*;
        assert_eq!(
            bands,
            [Notify, Notify, Notify, Confirm, Confirm, Confirm, Retry, Retry, Retry]
        );
        let bad = TranscriptionConfig {
            notify_threshold: 30,
            retry_threshold: 80,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        assert!(cfg.validate().is_ok());
    }

    #[test]
    fn tie_goes_to_first_ingested() {
        let d = dir(&[("Anna", "Lindberg"), ("Anna", "Lindberg")]);
        let m = match_name("anna lindberg", &d, &TranscriptionConfig::default());
        assert_eq!(m.employee_id.as_deref(), Some("e0"));
    }

    #[test]
    fn token_set_ignores_order() {
        assert_eq!(TokenSetRatio.score("Lindberg Anna", "anna lindberg"), 100);
        assert!(TokenSetRatio.score("jon", "anna lindberg") < 50);
    }

    #[test]
    fn mock_speech() {
        let mock = MockSpeechProvider::from_script(vec![
            SpeechScriptEntry::new("a1", "anna lindberg"),
            SpeechScriptEntry::new("a2", "ana lindberi"),
        ])
        .unwrap();
        let rt = tokio::runtime::Builder::new_current_thread()
            .build()
            .unwrap();
        assert_eq!(
            rt.block_on(transcribe(&mock, &tagged_buffer("a1", b"pcm")))
                .unwrap(),
            "anna lindberg"
        );
        assert_eq!(
            rt.block_on(transcribe(&mock, &tagged_buffer("a2", b"pcm")))
                .unwrap(),
            "ana lindberi"
        );
        assert!(matches!(
            rt.block_on(transcribe(&mock, &tagged_buffer("zz", b"pcm"))),
            Err(ProviderError::ScriptedMiss(_))
        ));
        assert_eq!(
            rt.block_on(transcribe(&mock, b"")),
            Err(ProviderError::EmptyInput)
        );
        assert!(MockSpeechProvider::from_json(r#"[{"audioTag":"a1","transcript":"x"}]"#).is_ok());
    }

    fn name() -> impl Strategy<Value = String> {
        "[a-dåö ]{0,10}"
    }

    proptest! {
        #[test]
        fn matches_oracle_and_is_symmetric(a in name(), b in name()) {
            let s = similarity(&a, &b);
            prop_assert_eq!(s, oracle_score(&a, &b));
            prop_assert_eq!(s, similarity(&b, &a));
            prop_assert!(s <= 100);
            prop_assert_eq!(s == 100, normalize_name(&a) == normalize_name(&b));
        }

        #[test]
        fn match_is_brute_force_max(names in proptest::collection::vec(("[a-d]{1,5}", "[a-d]{1,5}"), 1..20), q in name()) {
            let pairs: Vec<(&str, &str)> = names.iter().map(|(a, b)| (a.as_str(), b.as_str())).collect();
            let d = dir(&pairs);
            let m = match_name(&q, &d, &TranscriptionConfig::default());
            let scores: Vec<u8> = d.iter().map(|r| oracle_score(&q, &r.full_name)).collect();
            let best = *scores.iter().max().unwrap();
            let first = scores.iter().position(|&s| s == best).unwrap();
            prop_assert_eq!(m.score, best);
            prop_assert_eq!(m.employee_id, Some(format!("e{first}")));
        }

        #[test]
        fn bands_partition(score in 0u8..=100) {
            let cfg = TranscriptionConfig::default();
            let band = cfg.band(score);
            let hits = [score > 80, (30..=80).contains(&score), score < 30];
            prop_assert_eq!(hits.iter().filter(|h| **h).count(), 1);
            prop_assert_eq!(band == Band::Notify, hits[0]);
            prop_assert_eq!(band == Band::Confirm, hits[1]);
            prop_assert_eq!(band == Band::Retry, hits[2]);
        }
    }
}
