//! Crate-wide error type.

use thiserror::Error;

/// Kind of atom a label refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AtomKind {
    EntityType,
    Relation,
    Entity,
}

impl std::fmt::Display for AtomKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            AtomKind::EntityType => write!(f, "entity type"),
            AtomKind::Relation => write!(f, "relation"),
            AtomKind::Entity => write!(f, "entity"),
        }
    }
}

#[derive(Debug, Error)]
pub enum EvoPathError {
    #[error("{file}:{line}: {message}")]
    Parse {
        file: String,
        line: usize,
        message: String,
    },

    #[error("type taxonomy contains a cycle through '{type_label}'")]
    TaxonomyCycle { type_label: String },

    #[error("unknown {kind} '{label}'")]
    UnknownAtom { kind: AtomKind, label: String },

    #[error("relation '{relation}' has no support")]
    NoRelationSupport { relation: String },

    #[error("inverse relations already materialized")]
    AlreadyAugmented,

    #[error("frontier expansion exceeded the per-step cap of {cap} pairs")]
    FrontierCapExceeded { cap: usize },

    #[error("invalid meta-path: {0}")]
    InvalidMetaPath(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("prompt template placeholder '{0}' left unsubstituted")]
    TemplatePlaceholder(String),

    #[error("provider error{}: {message}", status.map(|s| format!(" (status {s})")).unwrap_or_default())]
    Provider {
        status: Option<u16>,
        message: String,
    },

    #[error(
        "no path instances sampled for the target relation; \
         increase the walk budget (--batch-size / --walks-per-fact)"
    )]
    NoSeedInstances,

    #[error("evaluation error: {0}")]
    Eval(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, EvoPathError>;
