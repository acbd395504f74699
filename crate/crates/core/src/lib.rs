//! Cooperative, occlusion-aware pedestrian forecasting.
//!
//! Two camera agents look at the same scene. Camera 1 can see a pedestrian
//! that camera 2 (the ego agent) cannot. The crate
//!
//! 1. recovers the relative pose of the cameras from pixel correspondences
//!    ([`geometry`]),
//! 2. moves the pedestrian's track from camera 1 into camera 2's frame,
//! 3. forecasts the next 12 states from the last 8 as a sequence of bivariate
//!    Gaussians with an LSTM encoder-decoder run under Monte-Carlo dropout
//!    ([`forecaster`]),
//! 4. scores the result with ADE, KL divergence and entropy ([`metrics`]).
//!
//! [`scene`] replaces real cameras with a seeded synthetic world, [`data`]
//! ingests ETH/UCY-style tracks and [`scenarios`] strings everything together
//! into the experiments. The guide in `book/` walks through each stage.

// `!(x < y)` is deliberate throughout: it treats NaN as failing the check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod data;
pub mod forecaster;
pub mod geometry;
pub mod metrics;
pub mod rng;
pub mod scenarios;
pub mod scene;

// Compile and run the book's snippets as doc-tests.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    struct Introduction;
    #[doc = include_str!("../../../book/src/pose.md")]
    struct Pose;
    #[doc = include_str!("../../../book/src/scene.md")]
    struct Scene;
    #[doc = include_str!("../../../book/src/forecaster.md")]
    struct Forecaster;
    #[doc = include_str!("../../../book/src/metrics.md")]
    struct Metrics;
    #[doc = include_str!("../../../book/src/data.md")]
    struct Data;
    #[doc = include_str!("../../../book/src/scenarios.md")]
    struct Scenarios;
    #[doc = include_str!("../../../book/src/cli.md")]
    struct Cli;
}
