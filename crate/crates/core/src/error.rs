use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("reflective surface has no sample inside the field of view")]
    EmptySurface,

    #[error("geometry: {0}")]
    Geometry(String),

    #[error("no specular solution: {0}")]
    NoSolution(String),

    #[error("reflector at {range:.3} m lies beyond the unambiguous window of {max_range:.3} m")]
    OutOfWindow { range: f64, max_range: f64 },

    #[error("echo of {rows}x{cols} does not fit a {limit}-point transform")]
    DimensionOverflow {
        rows: usize,
        cols: usize,
        limit: usize,
    },

    #[error("requested {requested} peaks from a map with {cells} cells")]
    TooManyPeaks { requested: usize, cells: usize },

    #[error("line fit is rank deficient: {0}")]
    RankDeficient(String),

    #[error("no line hypothesis reached {min_inliers} inliers")]
    NoConsensus { min_inliers: usize },

    #[error("surface estimate is not detected")]
    SurfaceNotDetected,

    #[error("LOS and NLOS masks are both empty")]
    EmptyMask,

    #[error("infeasible NLOS geometry: {0}")]
    InfeasibleGeometry(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl From<toml::de::Error> for Error {
    fn from(e: toml::de::Error) -> Self {
        Error::Parse(e.to_string())
    }
}
