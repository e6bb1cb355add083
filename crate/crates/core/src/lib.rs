//! Monte Carlo and analysis toolkit for pinhole-masked MeV ion implantation
//! of color centers in diamond.

pub mod analysis;
pub mod optics;
pub mod pinhole;
pub mod rng;
pub mod stats;
pub mod stopping;
