//! Local optimality checks and global optimality certificates for quadratic,
//! ρ-convex and quadratic fractional programs over mixed continuous/discrete
//! boxes, with an exhaustive grid oracle for cross-checking.

pub mod certify;
pub mod error;
pub mod examples;
pub mod fractional;
pub mod grid;
pub mod kkt;
pub mod linalg;
pub mod model;
pub mod oracle;
pub mod region;
pub mod report;
pub mod schema;
pub mod spectral;

use serde::{Deserialize, Serialize};

pub use certify::{CertificateKind, CertificateResult, Verdict, Witness};
pub use error::{Error, Result};
pub use model::{
    ConvexSmoothFunction, DomainKind, FractionalFunction, MixedBox, PowerTerm, Problem, ProblemData, ProblemKind,
    Program, QuadraticFunction, RhoConvexFunction, SymMatrix, VariableDomain,
};
pub use region::MultiplierRegion;
pub use report::{certify_candidate, CertificationReport, Classification, CertifyOptions};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    /// Distance within which a coordinate counts as sitting on a bound.
    pub snap: f64,
    pub feasibility: f64,
    /// Relative eigenvalue tolerance; see [`Tolerances::psd_tol`].
    pub psd_rel: f64,
    pub kkt: f64,
    pub slackness: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            snap: 1e-9,
            feasibility: 1e-8,
            psd_rel: 1e-9,
            kkt: 1e-8,
            slackness: 1e-8,
        }
    }
}

impl Tolerances {
    pub fn psd_tol(&self, m: &SymMatrix) -> f64 {
        self.psd_rel * (1.0 + m.frobenius_norm())
    }
}
