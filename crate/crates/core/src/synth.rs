//! Synthetic test matrices: stencils, block structures and seeded random
//! sparsity patterns. Used by the tests, the benches and the acceptance run.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::matrix::CooMatrix;

/// 1D Laplacian `tridiag(-1, 2, -1)`.
pub fn tridiagonal(n: usize) -> CooMatrix {
    laplacian_1d(n)
}

pub fn laplacian_1d(n: usize) -> CooMatrix {
    let mut e = Vec::with_capacity(3 * n);
    for i in 0..n {
        if i > 0 {
            e.push((i, i - 1, -1.0));
        }
        e.push((i, i, 2.0));
        if i + 1 < n {
            e.push((i, i + 1, -1.0));
        }
    }
    CooMatrix::new(n, n, e).expect("in bounds")
}

/// 5-point stencil on an `nx x ny` grid, row-major numbering.
pub fn laplacian_2d(nx: usize, ny: usize) -> CooMatrix {
    let n = nx * ny;
    let id = |x: usize, y: usize| y * nx + x;
    let mut e = Vec::with_capacity(5 * n);
    for y in 0..ny {
        for x in 0..nx {
            let r = id(x, y);
            e.push((r, r, 4.0));
            if x > 0 {
                e.push((r, id(x - 1, y), -1.0));
            }
            if x + 1 < nx {
                e.push((r, id(x + 1, y), -1.0));
            }
            if y > 0 {
                e.push((r, id(x, y - 1), -1.0));
            }
            if y + 1 < ny {
                e.push((r, id(x, y + 1), -1.0));
            }
        }
    }
    CooMatrix::new(n, n, e).expect("in bounds")
}

/// 7-point stencil on an `nx x ny x nz` grid.
pub fn laplacian_3d(nx: usize, ny: usize, nz: usize) -> CooMatrix {
    let n = nx * ny * nz;
    let id = |x: usize, y: usize, z: usize| (z * ny + y) * nx + x;
    let mut e = Vec::with_capacity(7 * n);
    for z in 0..nz {
        for y in 0..ny {
            for x in 0..nx {
                let r = id(x, y, z);
                e.push((r, r, 6.0));
                if x > 0 {
                    e.push((r, id(x - 1, y, z), -1.0));
                }
                if x + 1 < nx {
                    e.push((r, id(x + 1, y, z), -1.0));
                }
                if y > 0 {
                    e.push((r, id(x, y - 1, z), -1.0));
                }
                if y + 1 < ny {
                    e.push((r, id(x, y + 1, z), -1.0));
                }
                if z > 0 {
                    e.push((r, id(x, y, z - 1), -1.0));
                }
                if z + 1 < nz {
                    e.push((r, id(x, y, z + 1), -1.0));
                }
            }
        }
    }
    CooMatrix::new(n, n, e).expect("in bounds")
}

/// Dense diagonal blocks of the given sizes with seeded values in `[-1, 1]`.
pub fn block_diagonal(block_sizes: &[usize], seed: u64) -> CooMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n: usize = block_sizes.iter().sum();
    let mut e = Vec::new();
    let mut start = 0;
    for &b in block_sizes {
        for r in start..start + b {
            for c in start..start + b {
                e.push((r, c, rng.gen_range(-1.0..=1.0)));
            }
        }
        start += b;
    }
    CooMatrix::new(n, n, e).expect("in bounds")
}

/// `round(density * n^2)` uniformly placed entries (duplicates summed) with
/// values in `[-1, 1]`.
pub fn random_sparse(n: usize, density: f64, seed: u64) -> CooMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let count = (density * (n * n) as f64).round() as usize;
    let e = (0..count)
        .map(|_| (rng.gen_range(0..n), rng.gen_range(0..n), rng.gen_range(-1.0..=1.0)))
        .collect();
    CooMatrix::new(n, n, e).expect("in bounds")
}

/// Seeded vector with entries in `[-1, 1]`.
pub fn random_vector(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.gen_range(-1.0..=1.0)).collect()
}
