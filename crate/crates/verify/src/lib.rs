//! Executable checks of the conservative imitation identities against
//! independent oracles.

pub mod error;
pub mod gen;
pub mod oracle;
pub mod report;

pub use error::{Result, VerifyError};
pub use report::{InstanceRecord, VerificationReport};
pub mod checks;

pub use checks::{
    verify_appendix_lemmas, verify_chi2, verify_corollary1, verify_gradient, verify_lemmas, verify_theorem1,
    verify_theorem2, verify_theorem3,
};

/// Instance counts used by [`run_all`].
pub const SUITE: [(&str, usize); 8] = [
    ("lemmas", 100),
    ("theorem2", 200),
    ("theorem3", 100),
    ("corollary1", 100),
    ("theorem1", 20),
    ("appendix_lemmas", 500),
    ("chi2", 100),
    ("gradient", 50),
];

/// Runs one named check.
pub fn run_check(name: &str, instances: usize, seed: u64) -> Option<Result<VerificationReport>> {
    let f: fn(usize, u64) -> Result<VerificationReport> = match name {
        "lemmas" => verify_lemmas,
        "theorem2" => verify_theorem2,
        "theorem3" => verify_theorem3,
        "corollary1" => verify_corollary1,
        "theorem1" => verify_theorem1,
        "appendix_lemmas" => verify_appendix_lemmas,
        "chi2" => verify_chi2,
        "gradient" => verify_gradient,
        _ => return None,
    };
    Some(f(instances, seed))
}

/// Every check at its [`SUITE`] size.
pub fn run_all(seed: u64) -> Result<Vec<VerificationReport>> {
    SUITE
        .iter()
        .map(|&(name, n)| run_check(name, n, seed).expect("suite names are known"))
        .collect()
}
