use thiserror::Error;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid spec: {0}")]
    InvalidSpec(String),
    #[error("generation failed: {0}")]
    Generation(String),
    #[error("spring explosion at frame {frame}: max displacement {max_displacement:.3} m exceeds body height {height:.3} m")]
    SpringExplosion { frame: usize, max_displacement: f64, height: f64 },
    #[error(transparent)]
    Geom(#[from] drape_geom::GeomError),
    #[error("manifest error in {path}: {message}")]
    Manifest { path: String, message: String },
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}
