pub mod basis;
pub mod bench;
pub mod checks;
pub mod dag;
pub mod coupling;
pub mod cyl;
pub mod error;
pub mod fit;
pub mod geom;
pub mod potential;
pub mod quadrature;
pub mod radial;
pub mod sphharm;
pub mod synth;

pub use error::{AceError, Result};

/// Convention fingerprint embedded in every persisted coefficient file.
pub const CONVENTION: &str = "ylm:complex-orthonormal-condon-shortley;cg:standard;rows:lex-m0;keys:z-n-l-m";
