use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeomError {
    #[error("degenerate input: {0}")]
    DegenerateInput(String),
    #[error("invalid polygon: {0}")]
    InvalidPolygon(String),
    #[error("point ({x:.3}, {y:.3}) is {distance:.3} m from the reference path (limit {limit} m)")]
    ProjectionOutOfRange { x: f64, y: f64, distance: f64, limit: f64 },
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("invalid scenario config: {0}")]
    Invalid(String),
    #[error("unknown scenario `{0}`")]
    UnknownScenario(String),
    #[error(transparent)]
    Geometry(#[from] GeomError),
    #[error("config io: {0}")]
    Io(#[from] std::io::Error),
    #[error("config parse: {0}")]
    Parse(#[from] serde_json::Error),
}
