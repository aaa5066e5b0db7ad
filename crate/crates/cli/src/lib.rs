//! Shared pieces of the `nemel` command: pinned scenarios and the
//! invariant suites run by `nemel verify`.

pub mod scenarios;
pub mod suites;
