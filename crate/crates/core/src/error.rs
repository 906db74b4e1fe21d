use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid dimension: {0}")]
    Dimension(String),

    #[error("shape error: {0}")]
    Shape(String),

    #[error("index ({x}, {y}) out of range for side {n}")]
    Index { n: usize, x: usize, y: usize },

    #[error("invalid patch: {0}")]
    Patch(String),

    #[error("unsupported group kind: {0}")]
    UnsupportedKind(String),

    #[error("layer {layer}: {source}")]
    Layer {
        layer: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("configuration error: {0}")]
    Config(String),
}

impl Error {
    pub(crate) fn at_layer(self, layer: usize) -> Self {
        Error::Layer {
            layer,
            source: Box::new(self),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
