//! Compiler-guided repair of LLM-generated Lean 4 proofs.
//!
//! The pipeline takes candidate proofs from a language model, fixes
//! superficial syntax, turns every failing sub-proof into a `sorry`, tries
//! Lean's automation on each `sorry`, and recursively asks the model for
//! the goals that remain, splicing verified sub-proofs back together.

pub mod autosolver;
pub mod goals;
pub mod harness;
pub mod llm;
pub mod orchestrator;
pub mod pp;
pub mod proof;
pub mod refiner;
pub mod repl;
pub mod sorrifier;
