//! Partitioned deadline-monotonic scheduling of sporadic tasks: exact and
//! sufficient uniprocessor tests, the partitioning loop, failure
//! certificates for the speedup bounds, the tight instances, and a
//! simulator used as an oracle.

pub mod campaign;
pub mod demand;
pub mod doc;
pub mod error;
pub mod partition;
pub mod random;
pub mod rational;
pub mod schedulability;
pub mod sim;
pub mod speedup;
pub mod task;
pub mod tightness;

pub use demand::{dbf, dbf_total, speed_lower_bound, step_points, SpeedBoundReport};
pub use doc::TaskSetDocument;
pub use error::{Result, SchedError};
pub use partition::{dm_partition, verify_partition, workload_index, FitStrategy, Outcome, Partition};
pub use rational::Rational;
pub use schedulability::{SchedTest, TestVerdict, Violation};
pub use sim::{oracle_check, simulate_dm, SimTrace};
pub use speedup::{
    arbitrary_failure_certificate, constrained_failure_certificate, failure_certificate,
    k2u_success_condition, lambert_w, ArbitraryCertificate, ConstrainedCertificate,
    FailureCertificate,
};
pub use task::{classify, dm_sort, scale_speed, DeadlineClass, Period, SporadicTask, TaskId, TaskSet};
pub use tightness::{gen_arbitrary_af, gen_arbitrary_ff, gen_constrained, TightInstance};
