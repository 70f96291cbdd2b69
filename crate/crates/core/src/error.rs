use thiserror::Error;

#[derive(Debug, Error)]
pub enum MeshError {
    #[error("invalid initial partition: {0}")]
    InvalidPartition(String),
    #[error("meshes do not share the same initial partition")]
    PartitionMismatch,
    #[error("mesh is not nested in the target mesh")]
    NotNested,
    #[error("empty marked set: adaptive loop stalled")]
    EmptyMarking,
    #[error("element {0} is not a leaf of the mesh")]
    InvalidElement(usize),
    #[error("non-conforming mesh: {0}")]
    NonConforming(String),
    #[error("refinement depth limit of {0} exceeded")]
    DepthLimit(usize),
}

#[derive(Debug, Error)]
pub enum FemError {
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error("coefficient not positive ({value}) at ({x}, {y})")]
    Ellipticity { value: f64, x: f64, y: f64 },
    #[error("vector length {got} does not match vertex count {expected}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("non-finite nodal value at vertex {0}")]
    NonFinite(usize),
    #[error("degenerate bubble energy {energy} on edge ({a}, {b})")]
    DegenerateBubble { a: usize, b: usize, energy: f64 },
}

#[derive(Debug, Error)]
pub enum ProblemError {
    #[error("reference expectation not self-converged at resolution {resolution}: relative change {change:e}")]
    SelfConvergence { resolution: usize, change: f64 },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error(transparent)]
    Fem(#[from] FemError),
}

#[derive(Debug, Error)]
pub enum MlmcError {
    #[error(transparent)]
    Fem(#[from] FemError),
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Problem(#[from] ProblemError),
    #[error("solver did not converge on level {level} (sample {sample}, step {step}): increment {increment:e} after {iterations} iterations")]
    SolverDiverged {
        level: usize,
        sample: u64,
        step: usize,
        iterations: usize,
        increment: f64,
    },
    #[error("refinement limit {limit} reached on level {level} (sample {sample}): eta {eta:e} > {target:e}")]
    RefinementLimit {
        level: usize,
        sample: u64,
        limit: usize,
        eta: f64,
        target: f64,
    },
    #[error("level cap {cap} reached without bias convergence (bias estimate {bias:e})")]
    LevelCap { cap: usize, bias: f64 },
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Mlmc(#[from] MlmcError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error("config error: {0}")]
    Config(String),
    #[error("missing column `{column}` in {file}")]
    MissingColumn { file: String, column: String },
}
