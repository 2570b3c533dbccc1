use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("invalid depth {0} m, depth must be positive and finite")]
    InvalidDepth(f64),
    #[error("pixel ({u}, {v}) lies outside the {width}x{height} image")]
    OutOfBounds { u: f64, v: f64, width: u32, height: u32 },
    #[error("point is behind the camera (z = {0})")]
    BehindCamera(f64),
    #[error("depth map dimensions {got_w}x{got_h} do not match expected {want_w}x{want_h}")]
    Dimensions { got_w: u32, got_h: u32, want_w: u32, want_h: u32 },
    #[error("expected depth convention {expected}, found {found}")]
    Convention { expected: &'static str, found: &'static str },
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("fitted scale {0} is not positive")]
    NonPositiveScale(f64),
    #[error("rank-deficient fit: all relative samples are equal")]
    RankDeficient,
    #[error("only {valid} of {total} window pixels carry depth")]
    InsufficientDepth { valid: usize, total: usize },
    #[error("keypoint {0} is not labeled")]
    MissingKeypoint(&'static str),
    #[error("calyx and peduncle coincide in 3D")]
    DegeneratePose,
    #[error("predictions are not sorted by descending confidence")]
    Unsorted,
    #[error("empty input")]
    EmptyInput,
    #[error("average precision is undefined without ground truth")]
    UndefinedAp,
}
