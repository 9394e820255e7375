use crate::error::{Error, Result};

/// Special tokens chat models commonly leak into their output.
pub const DEFAULT_MARKERS: &[&str] = &[
    "<|im_start|>",
    "<|im_end|>",
    "<|endoftext|>",
    "<|eot_id|>",
    "<|start_header_id|>",
    "<|end_header_id|>",
    "<|assistant|>",
    "<|user|>",
    "<|system|>",
    "<|end|>",
    "[INST]",
    "[/INST]",
    "<s>",
    "</s>",
    "<pad>",
    "<unk>",
];

#[derive(Debug, Clone)]
pub struct Normalizer {
    markers: Vec<String>,
}

impl Default for Normalizer {
    fn default() -> Self {
        Normalizer::new(DEFAULT_MARKERS.iter().map(|m| m.to_string()))
    }
}

impl Normalizer {
    pub fn new(markers: impl IntoIterator<Item = String>) -> Self {
        Normalizer {
            markers: markers.into_iter().filter(|m| !m.is_empty()).collect(),
        }
    }

    pub fn markers(&self) -> &[String] {
        &self.markers
    }

    /// Removes markers, collapses whitespace runs to one space and trims.
    ///
    /// Markers are replaced by a space and removal repeats until none is
    /// left, so fragments that join into a new marker are removed too.
    pub fn normalize(&self, raw: &str) -> Result<String> {
        let mut text = raw.to_string();
        loop {
            let before = text.len();
            for m in &self.markers {
                if text.contains(m.as_str()) {
                    text = text.replace(m.as_str(), " ");
                }
            }
            text = text.split_whitespace().collect::<Vec<_>>().join(" ");
            if text.len() == before {
                break;
            }
        }
        if text.is_empty() {
            return Err(Error::EmptyText);
        }
        Ok(text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn collapses_whitespace() {
        let n = Normalizer::default();
        assert_eq!(n.normalize("  There are  three oranges. ").unwrap(), "There are three oranges.");
        assert_eq!(n.normalize("a\t\nb").unwrap(), "a b");
    }

    #[test]
    fn strips_markers() {
        let n = Normalizer::default();
        let once = n.normalize("<s>There are two kiwis.<|im_end|></s>").unwrap();
        assert_eq!(once, "There are two kiwis.");
        assert_eq!(n.normalize(&once).unwrap(), once);
        let nested = n.normalize("two<|im_<|im_end|>end|>kiwis").unwrap();
        assert_eq!(n.normalize(&nested).unwrap(), nested);
    }

    #[test]
    fn empty_after_cleanup() {
        let n = Normalizer::default();
        assert!(matches!(n.normalize(" <|endoftext|>  "), Err(Error::EmptyText)));
        assert!(matches!(n.normalize(""), Err(Error::EmptyText)));
    }

    #[test]
    fn custom_markers() {
        let n = Normalizer::new(["<eos>".to_string()]);
        assert_eq!(n.normalize("done <eos>").unwrap(), "done");
        assert_eq!(n.normalize("done </s>").unwrap(), "done </s>");
    }
}
