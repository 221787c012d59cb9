//! Synthetic homes, attacks, noise and poisoning.

pub mod attack;
pub mod generate;
pub mod noise;
pub mod poison;
pub mod profile;

pub use attack::{inject_attack, AttackKind, AttackParams, AttackScenario, Category};
pub use generate::generate_home;
pub use noise::{inject_noise, Domain, NoiseConfig};
pub use poison::{flicker_pool, poison_training};
pub use profile::{HomeProfile, Role};
