use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("user index {user} out of range for {num_users} users")]
    InvalidUser { user: usize, num_users: usize },

    #[error("offset {offset} is infeasible for N = {n}: tau = {tau} < ceil(N/3) = {min_tau}")]
    InfeasibleOffset {
        n: u64,
        offset: u64,
        tau: u64,
        min_tau: u64,
    },

    #[error("slot triple is not a type-Z pattern")]
    NotAZPattern,

    #[error("effective channel is singular (condition number {condition:e})")]
    SingularEffectiveChannel { condition: f64 },

    #[error("argument out of domain: {0}")]
    OutOfDomain(String),

    #[error("enumeration needs {required} tuples, budget is {budget}")]
    BudgetExceeded { required: String, budget: u64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, Error>;
