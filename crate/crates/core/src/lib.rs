//! Membership and co-membership attacks against small generative models.
//!
//! [`attacks`] trains an attacker network that inverts a frozen generator; the
//! distance it cannot close is the membership score. [`genmodels`] trains the
//! WGANs and VAEs under attack, [`metrics`] turns losses into ROC curves, gaps
//! and dispersion profiles, and [`datalab`] supplies datasets and splits.

pub mod attacks;
pub mod datalab;
pub mod error;
pub mod genmodels;
pub mod metrics;
pub mod numcore;
pub mod seed;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/networks.md")]
    mod networks {}
    #[doc = include_str!("../../../book/src/models.md")]
    mod models {}
    #[doc = include_str!("../../../book/src/attacks.md")]
    mod attacks {}
    #[doc = include_str!("../../../book/src/evaluation.md")]
    mod evaluation {}
    #[doc = include_str!("../../../book/src/dispersion.md")]
    mod dispersion {}
}
