//! Speech seams. No engine ships here; the null implementations disable
//! voice input and log what would have been spoken.

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SpeechError {
    #[error("speech recognition is unavailable")]
    Unavailable,
    #[error("speech engine failed: {0}")]
    Engine(String),
}

pub trait SpeechToText: Send {
    /// Transcribes raw audio to text.
    fn transcribe(&mut self, audio: &[u8]) -> Result<String, SpeechError>;

    fn available(&self) -> bool {
        true
    }
}

pub trait TextToSpeech: Send {
    fn speak(&mut self, text: &str);
}

#[derive(Debug, Default, Clone, Copy)]
pub struct NullSpeechToText;

impl SpeechToText for NullSpeechToText {
    fn transcribe(&mut self, _audio: &[u8]) -> Result<String, SpeechError> {
        Err(SpeechError::Unavailable)
    }

    fn available(&self) -> bool {
        false
    }
}

#[derive(Debug, Default, Clone, Copy)]
pub struct NullTextToSpeech;

impl TextToSpeech for NullTextToSpeech {
    fn speak(&mut self, text: &str) {
        tracing::info!(target: "webnav::speech", "(speak) {text}");
    }
}
