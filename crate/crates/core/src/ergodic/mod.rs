//! Test functions, averaging along expanding horocycle pieces, and
//! integration against orbit and Haar measures.

pub mod averaging;
pub mod integrals;
pub mod profile;
pub mod testfn;

pub use averaging::{birkhoff_battery, birkhoff_d, genericity_test, AveragingReport, GenericityReport};
pub use integrals::{almost_invariance, autocorrelation, haar_integral, mu_integral, Correlation, InvarianceReport};
pub use testfn::{BumpFunction, TestFunction};
