//! Periodic rectangular grid geometry.
//!
//! Points live at coordinates `(j*dx, k*dy)` for `j in [0, nx)`, `k in [0, ny)`.
//! Both axes wrap around, so the domain periods are `Lx = nx*dx` and
//! `Ly = ny*dy`; the point that would sit at `Lx` is the point at 0.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Geometry of a periodic 2D grid: point counts and spacings in meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub nx: usize,
    pub ny: usize,
    pub dx: f64,
    pub dy: f64,
}

/// Canonical grid point index: `0 <= j < nx`, `0 <= k < ny`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PointIndex {
    pub j: usize,
    pub k: usize,
}

impl PointIndex {
    pub fn new(j: usize, k: usize) -> Self {
        PointIndex { j, k }
    }
}

impl GridSpec {
    pub fn new(nx: usize, ny: usize, dx: f64, dy: f64) -> Result<Self> {
        if nx < 2 || ny < 2 {
            return Err(Error::config(format!(
                "grid needs at least 2 points per axis, got {nx}x{ny}"
            )));
        }
        if !(dx > 0.0) || !(dy > 0.0) {
            return Err(Error::config(format!(
                "grid spacings must be positive, got dx={dx}, dy={dy}"
            )));
        }
        Ok(GridSpec { nx, ny, dx, dy })
    }

    /// Square grid of `n x n` points covering `[0, extent)` on both axes.
    pub fn square(n: usize, extent: f64) -> Result<Self> {
        let d = extent / n as f64;
        GridSpec::new(n, n, d, d)
    }

    pub fn n_points(&self) -> usize {
        self.nx * self.ny
    }

    /// Domain period in x: `nx * dx`.
    pub fn period_x(&self) -> f64 {
        self.nx as f64 * self.dx
    }

    /// Domain period in y: `ny * dy`.
    pub fn period_y(&self) -> f64 {
        self.ny as f64 * self.dy
    }

    /// Wrap arbitrary integer indices onto the canonical grid.
    pub fn wrap(&self, j: i64, k: i64) -> PointIndex {
        PointIndex {
            j: j.rem_euclid(self.nx as i64) as usize,
            k: k.rem_euclid(self.ny as i64) as usize,
        }
    }

    /// Canonical neighbor reached from `p` by an integer cell offset.
    pub fn neighbor(&self, p: PointIndex, dj: i64, dk: i64) -> PointIndex {
        self.wrap(p.j as i64 + dj, p.k as i64 + dk)
    }

    /// Flat index of a canonical point, row-major with k outer: `k*nx + j`.
    pub fn index_of(&self, p: PointIndex) -> usize {
        debug_assert!(p.j < self.nx && p.k < self.ny);
        p.k * self.nx + p.j
    }

    /// Inverse of [`GridSpec::index_of`].
    pub fn point_at(&self, idx: usize) -> PointIndex {
        debug_assert!(idx < self.n_points());
        PointIndex {
            j: idx % self.nx,
            k: idx / self.nx,
        }
    }

    /// Physical coordinates `(j*dx, k*dy)` of a canonical point.
    pub fn point_coords(&self, p: PointIndex) -> (f64, f64) {
        (p.j as f64 * self.dx, p.k as f64 * self.dy)
    }

    /// Minimal-image displacement `dst - src` in meters.
    ///
    /// Each axis is reduced into `(-L/2, L/2]` for that axis's period; the
    /// positive representative is chosen at exactly the half period, so the
    /// result is orientation-unambiguous.
    pub fn min_image_displacement(&self, src: PointIndex, dst: PointIndex) -> (f64, f64) {
        let dj = min_image_cells(dst.j as i64 - src.j as i64, self.nx as i64);
        let dk = min_image_cells(dst.k as i64 - src.k as i64, self.ny as i64);
        (dj as f64 * self.dx, dk as f64 * self.dy)
    }

    /// Iterate all canonical points in flat-index order.
    pub fn points(&self) -> impl Iterator<Item = PointIndex> + '_ {
        (0..self.n_points()).map(|i| self.point_at(i))
    }
}

/// Reduce a cell offset into `(-n/2, n/2]` (integer arithmetic, exact).
fn min_image_cells(d: i64, n: i64) -> i64 {
    let mut d = d.rem_euclid(n); // [0, n)
    if 2 * d > n {
        d -= n;
    }
    d
}
