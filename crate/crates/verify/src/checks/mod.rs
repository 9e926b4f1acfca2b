//! One function per identity or bound, each returning a report.

mod appendix;
mod chi2;
mod gradient;
mod lemmas;
mod saddle;
mod theorem1;
mod theorem2;
mod theorem3;

pub use appendix::verify_appendix_lemmas;
pub use chi2::verify_chi2;
pub use gradient::verify_gradient;
pub use lemmas::verify_lemmas;
pub use theorem1::verify_theorem1;
pub use theorem2::verify_theorem2;
pub use theorem3::{verify_corollary1, verify_theorem3};

use rayon::prelude::*;

use crate::error::{Result, VerifyError};
use crate::report::{InstanceRecord, VerificationReport};

/// Runs `check` on every instance index in parallel, keeping index order so
/// the report does not depend on scheduling.
pub(crate) fn run<F>(name: &str, instances: usize, tolerance: f64, check: F) -> Result<VerificationReport>
where
    F: Fn(usize) -> InstanceRecord + Sync + Send,
{
    if instances == 0 {
        return Err(VerifyError::NoInstances);
    }
    let records: Vec<InstanceRecord> = (0..instances).into_par_iter().map(check).collect();
    Ok(VerificationReport::from_records(name, tolerance, records))
}

/// Converts an instance-level error into a failed record.
pub(crate) fn record_or_failure<E: std::fmt::Display>(
    index: usize,
    r: std::result::Result<InstanceRecord, E>,
) -> InstanceRecord {
    r.unwrap_or_else(|e| InstanceRecord::failure(index, e.to_string()))
}
