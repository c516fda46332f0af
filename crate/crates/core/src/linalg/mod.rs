//! Dense linear-algebra primitives shared by every bound.

mod csv;
mod eigen;
mod norms;
mod nullspace;

pub use csv::{format_matrix, parse_matrix, read_matrix, write_matrix};
pub use eigen::{asymmetry, psd_factor, sym_eig, sym_eig_rows, SymEig};
pub(crate) use norms::top_k_sum;
pub use norms::{k_norm, num_card, num_rank, spectral_norm};
pub use nullspace::{nullspace_basis, CodingMatrix, NullspaceBasis};
