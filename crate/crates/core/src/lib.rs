//! Static detection of ProGuard-family obfuscation in Android apps.
//!
//! The crate reads DEX code (bare or inside an APK) into an [`AppModel`],
//! runs name-matching and stripping heuristics over it, and aggregates the
//! resulting [`FeatureReport`]s across a corpus. It also simulates
//! ProGuard-style renaming to build labeled evaluation sets, and parses and
//! grades ProGuard/Gradle configurations.

pub mod config;
pub mod corpus;
pub mod detector;
pub mod dex;
pub mod eval;
pub mod model;
pub mod names;
pub mod proguard;
pub mod simulate;
pub mod synth;

pub use detector::{analyze, DetectorConfig, Feature, FeatureFlags, FeatureReport};
pub use model::{load_app, save_app, AppModel, ClassRecord, FieldRecord, MethodRecord, PackageTree};
