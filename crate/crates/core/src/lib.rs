//! Hyperbolic Brownian motion, the Kontsevich–Zorich cocycle over square-tiled
//! surfaces, Lyapunov exponents and central-limit estimators for the cocycle.

pub mod brownian;
pub mod clt;
pub mod cocycle;
pub mod hyperbolic;
pub mod intlin;
pub mod monodromy;
pub mod multilinear;
pub mod origami;
pub mod rng;
pub mod spectral;
pub mod stats;

pub use brownian::{BrownianPath, Mode, PathError, PathSpec};
pub use clt::{CltSampleSet, DriverTag, SampleOptions, VarianceReport};
pub use cocycle::{BasePoint, CocycleError, Driver, MatrixModel, Model};
pub use hyperbolic::{DiskPoint, GroupElement};
pub use intlin::IntMatrix;
pub use monodromy::{MonodromyRep, Move};
pub use multilinear::{KFrame, LyapunovEstimate, MultilinearError};
pub use num_complex::Complex64;
pub use origami::{Origami, OrigamiError, OrigamiFile, PermPair};
pub use rng::Purpose;
pub use spectral::{RepresentationParams, Series, Side, SpectralError};
