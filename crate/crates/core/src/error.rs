use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("degenerate horizon: tm - t0 = {horizon} s is below {epsilon} s")]
    DegenerateHorizon { horizon: f64, epsilon: f64 },
    #[error("time {t} s lies outside the trajectory window [{from}, {to}]")]
    OutOfInterval { t: f64, from: f64, to: f64 },
    #[error("assigned terminal time {tm} s exceeds the admissible maximum {max} s")]
    InfeasibleWindow { tm: f64, max: f64 },
    #[error(
        "certificate hypothesis violated: initial gap {gap} m is below the safe distance {delta} m"
    )]
    HypothesisViolated { gap: f64, delta: f64 },
    #[error("no feasible terminal time up to {max} s")]
    NoFeasibleTime { max: f64 },
    #[error("fuel trace needs at least two samples, got {0}")]
    EmptyTrace(usize),
    #[error("demanded volume needs a mean headway of {mean_headway} s, below the safe entry headway {min_headway} s")]
    InfeasibleVolume { mean_headway: f64, min_headway: f64 },
    #[error("invalid configuration: {0}")]
    Config(String),
}
