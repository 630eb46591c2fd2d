use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("mesh format error: {0}")]
    MeshFormat(String),

    #[error("no interior edge intersects the requested region")]
    EmptyRegion,

    #[error("point lies outside the triangle (barycentric tolerance exceeded)")]
    OutOfTriangle,

    #[error("test function support touches the domain boundary")]
    BoundaryTestFunction,

    #[error("invalid degree/test-kind combination: {0}")]
    InvalidCombination(String),

    #[error("sample point outside the domain")]
    OutOfDomain,

    #[error("direction vectors are (numerically) dependent")]
    DegenerateDirections,

    #[error("evaluation patch does not fit inside the domain")]
    PatchOutOfDomain,

    #[error("degenerate order data: all samples below noise floor")]
    DegenerateData,

    #[error("unknown consistency case `{0}`")]
    UnknownCase(String),

    #[error("solver failure: {0}")]
    Solver(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
