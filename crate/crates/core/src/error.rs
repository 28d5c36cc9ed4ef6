use thiserror::Error;

/// Every failure the library can report.
///
/// [`Error::module`] and [`Error::code`] give the stable, machine-readable
/// identifiers used by the command-line front end.
#[derive(Debug, Error)]
pub enum Error {
    #[error("argument outside supported domain: {0}")]
    Domain(String),
    #[error("accuracy loss: {0}")]
    AccuracyLoss(String),

    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("model invariant violated: {0}")]
    ModelInvariant(String),
    #[error("omega = {omega} rad/s is at or below the acoustic cutoff {cutoff} rad/s")]
    BelowCutoff { omega: f64, cutoff: f64 },
    #[error("model not smooth enough: {0}")]
    Smoothness(String),
    #[error("model differs from background outside the inversion interval: {0}")]
    SupportViolation(String),

    #[error("step size underflow at r = {r}")]
    StepUnderflow { r: f64 },
    #[error("tolerance not met: {0}")]
    ToleranceNotMet(String),
    #[error("degenerate matching for ell = {ell}: |[phi,H+]| ratio {ratio:e}")]
    DegenerateMatching { ell: usize, ratio: f64 },

    #[error("too few quadrature nodes: {nodes} < {required}")]
    Aliasing { nodes: usize, required: usize },
    #[error("sample at theta = {0} lies in the excluded band near the singularity")]
    ExcludedBand(f64),
    #[error("sample angles are not Gauss-Legendre nodes")]
    NotGaussLegendre,

    #[error("inconsistent observation: {0}")]
    Consistency(String),
    #[error("singular two-height system: {0}")]
    SingularSystem(String),

    #[error("iteration diverged: {0}")]
    Divergence(String),
    #[error("linear solve failed: {0}")]
    LinearSolve(String),
    #[error("reconstruction not physical: {0}")]
    Positivity(String),
    #[error("reference profile vanishes on the interval")]
    ZeroReference,

    #[error("configuration: {0}")]
    Config(String),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Short module tag used in `E:<module>:<code>:<detail>` lines.
    pub fn module(&self) -> &'static str {
        use Error::*;
        match self {
            Domain(_) | AccuracyLoss(_) => "specfun",
            Parse { .. } | ModelInvariant(_) | BelowCutoff { .. } | Smoothness(_)
            | SupportViolation(_) => "solar-model",
            StepUnderflow { .. } | ToleranceNotMet(_) | DegenerateMatching { .. } => "radial",
            Aliasing { .. } | ExcludedBand(_) | NotGaussLegendre => "multipole",
            Consistency(_) => "observe",
            SingularSystem(_) => "recover",
            Divergence(_) | LinearSolve(_) | Positivity(_) | ZeroReference => "invert",
            Config(_) => "cli",
            Io(_) => "io",
        }
    }

    pub fn code(&self) -> &'static str {
        use Error::*;
        match self {
            Domain(_) => "domain",
            AccuracyLoss(_) => "accuracy-loss",
            Parse { .. } => "parse",
            ModelInvariant(_) => "invariant",
            BelowCutoff { .. } => "below-cutoff",
            Smoothness(_) => "smoothness",
            SupportViolation(_) => "support",
            StepUnderflow { .. } => "step-underflow",
            ToleranceNotMet(_) => "tolerance",
            DegenerateMatching { .. } => "degenerate-matching",
            Aliasing { .. } => "aliasing",
            ExcludedBand(_) => "excluded-band",
            NotGaussLegendre => "not-gauss-legendre",
            Consistency(_) => "consistency",
            SingularSystem(_) => "singular",
            Divergence(_) => "divergence",
            LinearSolve(_) => "linear-solve",
            Positivity(_) => "positivity",
            ZeroReference => "zero-reference",
            Config(_) => "config",
            Io(_) => "io",
        }
    }

    /// True for failures caused by bad input files or settings rather than
    /// by the numerics.
    pub fn is_config(&self) -> bool {
        matches!(self, Error::Config(_) | Error::Parse { .. })
    }
}

pub type Result<T> = std::result::Result<T, Error>;
