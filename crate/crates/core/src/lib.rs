//! Online topological clustering with CAEA (CIM-based ART with Edge and Age)
//! and its divisive hierarchical extension HCAEA.
//!
//! The learners consume one point at a time in a single pass. Similarity is
//! the Correntropy-Induced Metric with a Gaussian kernel whose bandwidth is
//! chosen by a kernel-density rule of thumb; the vigilance threshold is
//! estimated from the first inputs instead of being set by hand.
//!
//! | Module | Contents |
//! |--------|----------|
//! | [`similarity`] | Gaussian kernel, correntropy, CIM |
//! | [`bandwidth`] | Bandwidth estimation from a window of points |
//! | [`caea`] | The online learner and nearest-node prediction |
//! | [`hcaea`] | Hierarchy construction and leaf prediction |
//! | [`metrics`] | Accuracy, NMI, ARI, macro-F1 |
//! | [`dataio`] | CSV loading, stream orders, stratified folds |
//! | [`eval`] | Cross-validation and lambda grid search |

pub mod bandwidth;
pub mod caea;
pub mod dataio;
pub mod error;
pub mod eval;
pub mod hcaea;
pub mod metrics;
pub mod similarity;

pub use caea::{AgingPolicy, CaeaModel, CaeaParams, ClassId};
pub use error::{Error, Result};
pub use hcaea::{fit_hierarchy, HcaeaTree, HierarchyParams};
pub use similarity::{cim, correntropy, gaussian_kernel, Bandwidth};
