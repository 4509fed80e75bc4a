//! Signature codebooks and the block-circulant shift dictionary.
//!
//! Sequences are produced unnormalised; unit-column scaling happens once,
//! when a measurement ensemble is assembled.

pub mod codebook;
pub mod gabor;
pub mod galois;
pub mod kerdock;
pub mod seeds;

pub use codebook::{
    build_shift_dictionary, cyclic_prefix_extend, delay_of, flat_index, user_capacity, user_of, Codebook, CodebookFile,
    Family, ShiftDictionary,
};
pub use gabor::{gabor_frame, modulate, shift_block};
pub use kerdock::{kerdock_block_circulant, kerdock_codebook, KerdockBlocks, OrbitCensus};
pub use seeds::{alltop_seed, random_phase_seed, SeedFamily, SeedSequence};
