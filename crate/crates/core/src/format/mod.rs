//! The EHYB storage format.
//!
//! Rows are grouped by partition; every partition owns a contiguous window
//! of `vec_cache_size` reordered rows (padded with empty rows) and the same
//! window of the reordered input vector. Entries whose column falls inside
//! the row's own window go to a sliced-ELL part whose column indices are
//! 16-bit offsets into that window. The remaining entries go to the
//! "extra rows" (ER) part, stored row-wise by descending entry count with
//! global 32-bit column indices and a scatter table back to the output.

mod assemble;
mod classify;
mod footprint;
mod params;
mod plan;

pub use assemble::{assemble_ehyb, assemble_ehyb_with, EhybMatrix};
pub use classify::{classify_rows, RowClassification};
pub use footprint::{footprint_stats, Footprint, INDEX_BYTES};
pub use params::{compute_params, vec_cache_size_for, DeviceProfile, EhybParams, MAX_CACHE_ENTRIES};
pub use plan::{build_reorder_plan, ReorderPlan};
