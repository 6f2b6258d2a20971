//! Nested quantum annealing correction: logical → code → physical, and back.

mod chimera;
mod decode;
mod embed;
mod nest;
mod resources;

pub use chimera::{chimera, ChimeraCoord, HardwareGraph};
pub use decode::{decode, decode_code_to_logical, ChainBreakStats, DecodeMode, DecodePolicy, Decoded};
pub use embed::{clique_chains, embed_with_chains, minor_embed, Embedding};
pub use nest::{nest, NestedProblem, NestingConfig};
pub use resources::{clique_qubits, replica_count, resource_count, ResourceCount};
