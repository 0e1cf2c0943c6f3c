use thiserror::Error;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("warm-up incomplete: history has {got} frames, need {need}")]
    WarmupIncomplete { got: usize, need: usize },
    #[error("rollout diverged: non-finite displacement at frame {frame}")]
    RolloutDiverged { frame: usize },
    #[error("vertex order table missing or sized {got}, expected {expected}")]
    BadTileOrder { got: usize, expected: usize },
    #[error(transparent)]
    Nn(#[from] drape_nn::NnError),
    #[error(transparent)]
    Geom(#[from] drape_geom::GeomError),
}
