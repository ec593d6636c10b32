//! A verified-style cost-annotating compiler for a toy imperative language.
//!
//! Source programs are compiled through a stack machine to a register
//! machine; labels placed in the source survive compilation as `nop`s, the
//! object code is checked for sound and precise labelling, and the
//! resulting per-label costs are written back into the source as increments
//! of a reserved `cost` variable.

pub mod asm;
pub mod costcheck;
mod erasure;
pub mod gen;
pub mod imp;
pub mod labelling;
pub mod mips;
pub mod oracle;
pub mod passes;
pub mod pipeline;
pub mod selftest;
pub mod vm;

pub use asm::AsmParseError;
