//! Desk-scale stand-in for a rigged-character dataset: procedural humanoids
//! with apparel patches, smooth random motions, and a mass-spring oracle
//! that produces ground-truth apparel animation.

pub mod character;
pub mod corpus;
mod error;
pub mod motion;
pub mod sim;
pub mod skeleton;

pub use character::{generate_character, Capsule, SynthCharacter, SynthCharacterSpec};
pub use corpus::{build_corpus, Corpus, CorpusConfig, Manifest};
pub use error::SynthError;
pub use motion::generate_motion;
pub use sim::{simulate_apparel, simulate_full};
