use serde::{Deserialize, Serialize};

use crate::format::assemble::EhybMatrix;
use crate::scalar::Scalar;

/// Bytes per metadata index (offsets, widths, scatter table) on the device.
pub const INDEX_BYTES: usize = 4;

/// Storage footprint of an assembled matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Footprint {
    pub tau: usize,
    pub ell_slots: usize,
    pub er_slots: usize,
    /// `ell_slots * (tau + 2)`
    pub ell_slot_bytes: usize,
    /// `er_slots * (tau + 4)`
    pub er_slot_bytes: usize,
    /// Slot bytes plus slice offset and width arrays.
    pub ell_bytes: usize,
    /// Slot bytes plus slice offsets, widths and the scatter table.
    pub er_bytes: usize,
    pub total_bytes: usize,
    /// `1 - (tau + 2) / (tau + 4)`: per-slot saving of 16-bit over 32-bit
    /// column indices in the ELL part.
    pub savings_vs_32bit_cols: f64,
    /// Same comparison over the whole ELL part, metadata included. Equal to
    /// zero when the part holds no slots.
    pub ell_savings_with_metadata: f64,
}

pub fn footprint_stats<T: Scalar>(e: &EhybMatrix<T>) -> Footprint {
    let tau = T::TAU;
    let ell_slots = e.val_ell.len();
    let er_slots = e.val_er.len();
    let ell_meta = (e.position_ell.len() + e.width_ell.len()) * INDEX_BYTES;
    let er_meta = (e.position_er.len() + e.width_er.len() + e.plan.y_idx_er.len()) * INDEX_BYTES;
    let ell_slot_bytes = ell_slots * (tau + 2);
    let er_slot_bytes = er_slots * (tau + 4);
    let ell_bytes = ell_slot_bytes + ell_meta;
    let er_bytes = er_slot_bytes + er_meta;
    let wide_ell = ell_slots * (tau + 4) + ell_meta;
    Footprint {
        tau,
        ell_slots,
        er_slots,
        ell_slot_bytes,
        er_slot_bytes,
        ell_bytes,
        er_bytes,
        total_bytes: ell_bytes + er_bytes,
        savings_vs_32bit_cols: 1.0 - (tau + 2) as f64 / (tau + 4) as f64,
        ell_savings_with_metadata: 1.0 - ell_bytes as f64 / wide_ell as f64,
    }
}
