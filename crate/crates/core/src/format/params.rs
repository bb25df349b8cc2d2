use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest cached window addressable with 16-bit local column indices.
pub const MAX_CACHE_ENTRIES: usize = 1 << 16;

/// Simulated device: processor count, warp width and shared memory per
/// block in bytes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeviceProfile {
    pub num_processors: usize,
    pub warp_size: usize,
    pub shm_max: usize,
}

impl Default for DeviceProfile {
    /// 80 processors, 32-wide warps, 48 KiB shared memory.
    fn default() -> Self {
        DeviceProfile { num_processors: 80, warp_size: 32, shm_max: 48 * 1024 }
    }
}

impl DeviceProfile {
    pub fn new(num_processors: usize, warp_size: usize, shm_max: usize) -> Result<Self> {
        let p = DeviceProfile { num_processors, warp_size, shm_max };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_processors == 0 || self.warp_size == 0 || self.shm_max == 0 {
            return Err(Error::InvalidArgument(format!(
                "device profile needs P >= 1, warp >= 1, shm > 0 (got {self:?})"
            )));
        }
        Ok(())
    }
}

/// Partition count and per-partition cache size for one matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EhybParams {
    pub dimension: usize,
    /// Partitions per processor.
    pub k: usize,
    /// `k * num_processors`.
    pub n_parts: usize,
    /// Input-vector entries cached per partition; a multiple of the warp size.
    pub vec_cache_size: usize,
    /// Bytes per value (4 or 8).
    pub tau: usize,
    pub profile: DeviceProfile,
}

impl EhybParams {
    pub fn padded_dimension(&self) -> usize {
        self.n_parts * self.vec_cache_size
    }

    pub fn warp_size(&self) -> usize {
        self.profile.warp_size
    }

    pub fn slices_per_partition(&self) -> usize {
        self.vec_cache_size / self.profile.warp_size
    }

    pub fn validate(&self) -> Result<()> {
        self.profile.validate()?;
        let ok = (self.tau == 4 || self.tau == 8)
            && self.k >= 1
            && self.n_parts == self.k * self.profile.num_processors
            && self.vec_cache_size.is_multiple_of(self.profile.warp_size)
            && self.vec_cache_size * self.tau <= self.profile.shm_max
            && self.vec_cache_size <= MAX_CACHE_ENTRIES
            && self.padded_dimension() >= self.dimension;
        if ok {
            Ok(())
        } else {
            Err(Error::Infeasible(format!("inconsistent parameters {self:?}")))
        }
    }
}

/// Cache window for `k` partitions per processor: `ceil(dimension / (k P))`
/// rounded up to a multiple of the warp size.
pub fn vec_cache_size_for(dimension: usize, k: usize, profile: &DeviceProfile) -> usize {
    dimension.div_ceil(k * profile.num_processors).next_multiple_of(profile.warp_size)
}

/// Smallest `k` whose warp-aligned cache window fits in shared memory and
/// in 16-bit local indices.
pub fn compute_params(dimension: usize, tau: usize, profile: &DeviceProfile) -> Result<EhybParams> {
    profile.validate()?;
    if tau != 4 && tau != 8 {
        return Err(Error::InvalidArgument(format!("tau must be 4 or 8, got {tau}")));
    }
    if dimension == 0 {
        return Err(Error::InvalidArgument("dimension must be at least 1".into()));
    }
    // Largest warp-aligned window that satisfies both bounds. An aligned
    // window fits iff the unaligned ceil fits, so k follows in closed form.
    let limit = (profile.shm_max / tau).min(MAX_CACHE_ENTRIES);
    let window = limit - limit % profile.warp_size;
    if window == 0 {
        return Err(Error::Infeasible(format!(
            "shared memory of {} bytes cannot hold one warp ({} x {tau} bytes)",
            profile.shm_max, profile.warp_size
        )));
    }
    let k = dimension.div_ceil(profile.num_processors * window).max(1);
    let params = EhybParams {
        dimension,
        k,
        n_parts: k * profile.num_processors,
        vec_cache_size: vec_cache_size_for(dimension, k, profile),
        tau,
        profile: *profile,
    };
    debug_assert!(params.validate().is_ok());
    Ok(params)
}
