//! Menu-based auction mechanisms and the machinery for connecting trained
//! menus by piecewise-linear, low-loss paths.
//!
//! Two mechanism families are supported:
//!
//! * [`RochetMenu`]: a single buyer picks the utility-maximizing option out of
//!   a finite menu of (allocation, price) pairs.
//! * [`AmaMenu`]: an affine maximizer auction with unit buyer weights; the
//!   auctioneer picks the option maximizing boosted welfare and charges
//!   VCG-style prices.
//!
//! Everything numeric is generic over [`Scalar`] (`f32` or `f64`); the
//! `*F64`/`*F32` aliases below pin the common instantiations.

pub mod ama;
pub mod connectivity;
pub mod distributions;
pub mod error;
pub mod evaluation;
pub mod menu;
pub mod rochet;
pub mod scalar;
pub mod softmax;
pub mod training;

pub use ama::{AmaGradient, AmaOutcome};
pub use connectivity::{Bijection, Connectable, ReductionSet, Side};
pub use distributions::{DensityKind, DensitySpec, Piece, SeededSampler};
pub use error::{Error, Result};
pub use evaluation::{Estimate, GapReport, PathReport, ReducibilityReport, Smoothing};
pub use menu::{
    AmaMenu, AmaOption, AnyMenu, Mechanism, Menu, MenuPath, Profile, RochetMenu, RochetOption,
    Valuation, Violation, ViolationKind,
};
pub use rochet::{RochetGradient, SoftmaxConfig};
pub use scalar::Scalar;
pub use training::{HistoryRow, MenuKind, TrainConfig, TrainOutcome};

pub type ValuationF64 = Valuation<f64>;
pub type ProfileF64 = Profile<f64>;
pub type RochetMenuF64 = RochetMenu<f64>;
pub type AmaMenuF64 = AmaMenu<f64>;
pub type AnyMenuF64 = AnyMenu<f64>;
pub type SoftmaxConfigF64 = SoftmaxConfig<f64>;

pub type ValuationF32 = Valuation<f32>;
pub type ProfileF32 = Profile<f32>;
pub type RochetMenuF32 = RochetMenu<f32>;
pub type AmaMenuF32 = AmaMenu<f32>;
pub type AnyMenuF32 = AnyMenu<f32>;
pub type SoftmaxConfigF32 = SoftmaxConfig<f32>;
