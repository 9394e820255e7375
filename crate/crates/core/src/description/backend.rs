//! External description sources: a pre-generated description file or a
//! chat-style HTTP endpoint.

use std::collections::HashMap;
use std::path::Path;
use std::sync::{Condvar, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::normalize::Normalizer;
use super::{DescriptionRecord, DescriptionText, TextSource};
use crate::error::{Error, Result};
use crate::io::read_jsonl;
use crate::scene::ScenarioId;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecodeParams {
    pub temperature: f64,
    pub top_p: f64,
    pub max_tokens: usize,
}

impl DecodeParams {
    /// Near-greedy decoding used for positive descriptions.
    pub fn positive() -> Self {
        DecodeParams { temperature: 0.001, top_p: 0.95, max_tokens: 512 }
    }

    /// Higher-temperature decoding used when a model writes negatives.
    pub fn negative() -> Self {
        DecodeParams { temperature: 0.9, ..DecodeParams::positive() }
    }
}

impl Default for DecodeParams {
    fn default() -> Self {
        DecodeParams::positive()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackendRequest {
    pub prompt: String,
    pub image_ref: String,
    pub temperature: f64,
    pub top_p: f64,
    pub max_tokens: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackendResponse {
    pub text: String,
}

pub trait DescriptionBackend: Send + Sync {
    fn complete(&self, request: &BackendRequest) -> Result<BackendResponse>;
}

/// Serves stored descriptions keyed by sample id; the image reference of a
/// request is the sample id.
#[derive(Debug, Default)]
pub struct FileBackend {
    texts: HashMap<String, String>,
}

impl FileBackend {
    pub fn from_records(records: impl IntoIterator<Item = DescriptionRecord>) -> Self {
        FileBackend {
            texts: records.into_iter().map(|r| (r.sample_id, r.text)).collect(),
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        Ok(FileBackend::from_records(read_jsonl::<DescriptionRecord>(path)?))
    }

    pub fn len(&self) -> usize {
        self.texts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.texts.is_empty()
    }
}

impl DescriptionBackend for FileBackend {
    fn complete(&self, request: &BackendRequest) -> Result<BackendResponse> {
        self.texts
            .get(&request.image_ref)
            .map(|text| BackendResponse { text: text.clone() })
            .ok_or_else(|| Error::MissingRecord(request.image_ref.clone()))
    }
}

/// POSTs the request as JSON and reads `{"text": ...}` back.
pub struct HttpBackend {
    url: String,
    agent: ureq::Agent,
}

impl HttpBackend {
    pub fn new(url: impl Into<String>, timeout: Duration) -> Self {
        let agent = ureq::Agent::config_builder().timeout_global(Some(timeout)).build().into();
        HttpBackend { url: url.into(), agent }
    }
}

impl DescriptionBackend for HttpBackend {
    fn complete(&self, request: &BackendRequest) -> Result<BackendResponse> {
        let mut response = self
            .agent
            .post(&self.url)
            .send_json(request)
            .map_err(|e| Error::Backend(format!("{}: {e}", self.url)))?;
        response
            .body_mut()
            .read_json::<BackendResponse>()
            .map_err(|e| Error::Backend(format!("{}: bad response body: {e}", self.url)))
    }
}

/// Counting gate bounding concurrent requests.
struct InFlight {
    cap: usize,
    active: Mutex<usize>,
    freed: Condvar,
}

impl InFlight {
    fn run<T>(&self, f: impl FnOnce() -> T) -> T {
        {
            let mut n = self.active.lock().unwrap();
            while *n >= self.cap {
                n = self.freed.wait(n).unwrap();
            }
            *n += 1;
        }
        let out = f();
        *self.active.lock().unwrap() -= 1;
        self.freed.notify_one();
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Fetched {
    pub text: DescriptionText,
    /// The response exceeded `max_tokens` and was cut.
    pub truncated: bool,
}

/// Cuts `text` to at most `max_tokens` whitespace-separated tokens.
pub fn truncate_tokens(text: &str, max_tokens: usize) -> (String, bool) {
    let tokens: Vec<&str> = text.split_whitespace().collect();
    if tokens.len() <= max_tokens {
        (text.to_string(), false)
    } else {
        (tokens[..max_tokens].join(" "), true)
    }
}

/// Requests one description and cleans it up.
pub fn fetch_external(
    backend: &dyn DescriptionBackend,
    image_ref: &str,
    prompt: &str,
    decode: &DecodeParams,
    normalizer: &Normalizer,
) -> Result<Fetched> {
    let request = BackendRequest {
        prompt: prompt.to_string(),
        image_ref: image_ref.to_string(),
        temperature: decode.temperature,
        top_p: decode.top_p,
        max_tokens: decode.max_tokens,
    };
    let response = backend.complete(&request)?;
    if response.text.trim().is_empty() {
        return Err(Error::Backend(format!("empty response for `{image_ref}`")));
    }
    let text = normalizer.normalize(&response.text)?;
    let (text, truncated) = truncate_tokens(&text, decode.max_tokens);
    if truncated {
        log::warn!("description for `{image_ref}` exceeded {} tokens and was truncated", decode.max_tokens);
    }
    Ok(Fetched {
        text: DescriptionText {
            text,
            source: TextSource::External,
            scene_ref: Some(image_ref.to_string()),
        },
        truncated,
    })
}

/// A backend bound to one prompt, so every split of a task is described
/// with the identical prompt string.
pub struct ExternalDescriber<'a> {
    backend: &'a dyn DescriptionBackend,
    prompt: String,
    decode: DecodeParams,
    normalizer: Normalizer,
    gate: InFlight,
}

impl<'a> ExternalDescriber<'a> {
    pub fn new(backend: &'a dyn DescriptionBackend, prompt: impl Into<String>, decode: DecodeParams, max_in_flight: usize) -> Self {
        ExternalDescriber {
            backend,
            prompt: prompt.into(),
            decode,
            normalizer: Normalizer::default(),
            gate: InFlight {
                cap: max_in_flight.max(1),
                active: Mutex::new(0),
                freed: Condvar::new(),
            },
        }
    }

    pub fn for_scenario(backend: &'a dyn DescriptionBackend, id: ScenarioId, max_in_flight: usize) -> Self {
        ExternalDescriber::new(backend, prompt_for(id), DecodeParams::positive(), max_in_flight)
    }

    pub fn with_normalizer(mut self, normalizer: Normalizer) -> Self {
        self.normalizer = normalizer;
        self
    }

    pub fn prompt(&self) -> &str {
        &self.prompt
    }

    /// Safe to call from many threads; at most `max_in_flight` requests run
    /// at once.
    pub fn fetch(&self, image_ref: &str) -> Result<Fetched> {
        self.gate
            .run(|| fetch_external(self.backend, image_ref, &self.prompt, &self.decode, &self.normalizer))
    }
}

/// The shipped description prompt of a scenario.
pub fn prompt_for(id: ScenarioId) -> &'static str {
    match id {
        ScenarioId::Sticks => include_str!("../../assets/prompts/sticks.txt"),
        ScenarioId::Fruits => include_str!("../../assets/prompts/fruits.txt"),
        ScenarioId::Tools => include_str!("../../assets/prompts/tools.txt"),
        ScenarioId::Cookies => include_str!("../../assets/prompts/cookies.txt"),
        ScenarioId::Tapes => include_str!("../../assets/prompts/tapes.txt"),
        ScenarioId::Stationery => include_str!("../../assets/prompts/stationery.txt"),
        ScenarioId::Ropes => include_str!("../../assets/prompts/ropes.txt"),
        ScenarioId::Blocks => include_str!("../../assets/prompts/blocks.txt"),
        ScenarioId::Dishes => include_str!("../../assets/prompts/dishes.txt"),
        ScenarioId::Balls => include_str!("../../assets/prompts/balls.txt"),
    }
    .trim_end()
}

#[cfg(test)]
mod tests {
    use std::sync::atomic::{AtomicUsize, Ordering};

    use super::*;
    use crate::scene::{Split, ViolationLabel};

    fn record(sample_id: &str, text: &str) -> DescriptionRecord {
        DescriptionRecord {
            task_id: "Fruits_WhiteBG".into(),
            sample_id: sample_id.into(),
            split: Split::Train,
            label: ViolationLabel::Normal,
            text: text.into(),
        }
    }

    #[test]
    fn file_backend_passthrough_and_missing() {
        let b = FileBackend::from_records([record("a", "  There are  two kiwis. <|im_end|>")]);
        let got = fetch_external(&b, "a", "p", &DecodeParams::positive(), &Normalizer::default()).unwrap();
        assert_eq!(got.text.text, "There are two kiwis.");
        assert_eq!(got.text.source, TextSource::External);
        assert!(!got.truncated);
        assert!(matches!(
            fetch_external(&b, "b", "p", &DecodeParams::positive(), &Normalizer::default()),
            Err(Error::MissingRecord(_))
        ));
    }

    #[test]
    fn empty_and_long_responses() {
        let b = FileBackend::from_records([record("e", "   "), record("l", "one two three four five")]);
        let d = DecodeParams { max_tokens: 3, ..DecodeParams::positive() };
        assert!(matches!(
            fetch_external(&b, "e", "p", &d, &Normalizer::default()),
            Err(Error::Backend(_))
        ));
        let got = fetch_external(&b, "l", "p", &d, &Normalizer::default()).unwrap();
        assert_eq!(got.text.text, "one two three");
        assert!(got.truncated);
    }

    struct Probe {
        active: AtomicUsize,
        peak: AtomicUsize,
        prompts: Mutex<Vec<String>>,
    }

    impl DescriptionBackend for Probe {
        fn complete(&self, request: &BackendRequest) -> Result<BackendResponse> {
            let now = self.active.fetch_add(1, Ordering::SeqCst) + 1;
            self.peak.fetch_max(now, Ordering::SeqCst);
            std::thread::sleep(Duration::from_millis(5));
            self.active.fetch_sub(1, Ordering::SeqCst);
            self.prompts.lock().unwrap().push(request.prompt.clone());
            Ok(BackendResponse { text: format!("seen {}", request.image_ref) })
        }
    }

    #[test]
    fn in_flight_cap_and_single_prompt() {
        let probe = Probe { active: AtomicUsize::new(0), peak: AtomicUsize::new(0), prompts: Mutex::new(vec![]) };
        let describer = ExternalDescriber::for_scenario(&probe, ScenarioId::Tools, 2);
        std::thread::scope(|s| {
            for i in 0..8 {
                let d = &describer;
                s.spawn(move || d.fetch(&format!("img{i}")).unwrap());
            }
        });
        assert!(probe.peak.load(Ordering::SeqCst) <= 2);
        let prompts = probe.prompts.lock().unwrap();
        assert_eq!(prompts.len(), 8);
        assert!(prompts.iter().all(|p| p == prompt_for(ScenarioId::Tools)));
    }

    #[test]
    fn unreachable_http_backend() {
        let b = HttpBackend::new("http://127.0.0.1:9/describe", Duration::from_millis(500));
        let err = fetch_external(&b, "x", "p", &DecodeParams::positive(), &Normalizer::default()).unwrap_err();
        assert!(matches!(err, Error::Backend(_)));
    }

    #[test]
    fn prompts_are_shipped() {
        for id in ScenarioId::ALL {
            assert!(!prompt_for(id).is_empty());
        }
    }
}
