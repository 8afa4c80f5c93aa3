use thiserror::Error;

/// Why a co-design problem instance has no solution.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Infeasibility {
    #[error("delay budget of {budget} slots leaves no room for one copy of {copy} slots plus a positive queueing delay")]
    BudgetTooSmall { budget: i64, copy: i64 },
    #[error("queue is unstable for every repetition count that fits the budget (arrival rate {arrival_rate} packets/slot)")]
    QueueUnstable { arrival_rate: f64 },
    #[error("no prediction horizon in [0, {horizon_cap}] admits a feasible delay split")]
    NoFeasibleHorizon { horizon_cap: u32 },
    #[error("reliability target {target:e} not met at the bandwidth cap {bandwidth_cap} Hz (achieved {achieved:e})")]
    BandwidthCap {
        bandwidth_cap: f64,
        target: f64,
        achieved: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("{op}: {detail}")]
    Domain { op: &'static str, detail: String },
    #[error(transparent)]
    Infeasible(#[from] Infeasibility),
    /// The minimum overall error was observed to increase with bandwidth, so
    /// bisection on bandwidth cannot be trusted.
    #[error("overall error is not monotone in bandwidth: {lower_error:e} at {lower} Hz but {upper_error:e} at {upper} Hz")]
    NonMonotoneBandwidth {
        lower: f64,
        lower_error: f64,
        upper: f64,
        upper_error: f64,
    },
}

impl Error {
    pub(crate) fn domain(op: &'static str, detail: impl Into<String>) -> Self {
        Error::Domain {
            op,
            detail: detail.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
