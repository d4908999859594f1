//! Advection velocity fields for the scenario catalog.
//!
//! Fields are immutable once built. Every constructor records the maximum
//! vector magnitude so the CFL bound and vmax rescaling can use it directly.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{GridSpec, PointIndex};

/// Per-point advection vectors, row-major with k outer (same layout as
/// [`GridSpec::index_of`]).
#[derive(Debug, Clone, PartialEq)]
pub struct VelocityField {
    grid: GridSpec,
    vx: Vec<f64>,
    vy: Vec<f64>,
    vmax: f64,
}

/// Sidecar metadata persisted next to a field CSV.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FieldMeta {
    pub nx: usize,
    pub ny: usize,
    pub dx: f64,
    pub dy: f64,
    pub scenario: String,
    pub params: serde_json::Value,
    pub vmax: f64,
}

impl VelocityField {
    /// Build a field from per-point components; checks finiteness and records vmax.
    pub fn from_components(grid: GridSpec, vx: Vec<f64>, vy: Vec<f64>) -> Result<Self> {
        let n = grid.n_points();
        if vx.len() != n || vy.len() != n {
            return Err(Error::config(format!(
                "velocity component length {} / {} does not match {} grid points",
                vx.len(),
                vy.len(),
                n
            )));
        }
        if vx.iter().chain(vy.iter()).any(|v| !v.is_finite()) {
            return Err(Error::config("velocity components must be finite"));
        }
        let vmax = max_magnitude(&vx, &vy);
        Ok(VelocityField { grid, vx, vy, vmax })
    }

    /// Identical velocity at every point, pointing straight to the right.
    pub fn uniform_right(grid: GridSpec, speed: f64) -> Result<Self> {
        if !(speed >= 0.0) {
            return Err(Error::config(format!("speed must be >= 0, got {speed}")));
        }
        let n = grid.n_points();
        Self::from_components(grid, vec![speed; n], vec![0.0; n])
    }

    /// Field that is zero everywhere (used when advection is disabled).
    pub fn zero(grid: GridSpec) -> Self {
        let n = grid.n_points();
        VelocityField {
            grid,
            vx: vec![0.0; n],
            vy: vec![0.0; n],
            vmax: 0.0,
        }
    }

    /// Rotating ring flow: unit tangential speed on the annulus
    /// `r_inner <= r <= r_outer` about `center`, exactly zero elsewhere.
    pub fn ring_flow(
        grid: GridSpec,
        center: (f64, f64),
        r_inner: f64,
        r_outer: f64,
        ccw: bool,
    ) -> Result<Self> {
        if !(r_inner > 0.0 && r_inner < r_outer) {
            return Err(Error::config(format!(
                "ring radii must satisfy 0 < r_inner < r_outer, got {r_inner}, {r_outer}"
            )));
        }
        let n = grid.n_points();
        let mut vx = vec![0.0; n];
        let mut vy = vec![0.0; n];
        let mut inside = 0usize;
        for p in grid.points() {
            let (x, y) = grid.point_coords(p);
            let (rx, ry) = (x - center.0, y - center.1);
            let r = (rx * rx + ry * ry).sqrt();
            if r >= r_inner && r <= r_outer {
                // Unit tangent of the circle through this point.
                let (tx, ty) = if ccw { (-ry / r, rx / r) } else { (ry / r, -rx / r) };
                let i = grid.index_of(p);
                vx[i] = tx;
                vy[i] = ty;
                inside += 1;
            }
        }
        if inside == 0 {
            log::warn!(
                "ring annulus [{r_inner}, {r_outer}] about ({}, {}) contains no grid points; field is all zero",
                center.0,
                center.1
            );
        }
        Self::from_components(grid, vx, vy)
    }

    /// Solid-body rotation about `center` with unit nominal angular rate:
    /// magnitude proportional to the distance from the center, zero at the center.
    pub fn solid_rotation(grid: GridSpec, center: (f64, f64), ccw: bool) -> Self {
        let n = grid.n_points();
        let mut vx = vec![0.0; n];
        let mut vy = vec![0.0; n];
        for p in grid.points() {
            let (x, y) = grid.point_coords(p);
            let (rx, ry) = (x - center.0, y - center.1);
            let i = grid.index_of(p);
            if ccw {
                vx[i] = -ry;
                vy[i] = rx;
            } else {
                vx[i] = ry;
                vy[i] = -rx;
            }
        }
        let vmax = max_magnitude(&vx, &vy);
        VelocityField { grid, vx, vy, vmax }
    }

    /// Two crossing currents, one left-to-right and one bottom-to-top, with
    /// speeds rising exponentially toward the domain center:
    /// `v = (exp(-|y-yc|/w), exp(-|x-xc|/w))`. Strictly positive everywhere.
    pub fn cross_currents(grid: GridSpec, profile_width: f64) -> Result<Self> {
        if !(profile_width > 0.0) {
            return Err(Error::config(format!(
                "profile width must be positive, got {profile_width}"
            )));
        }
        let (xc, yc) = (grid.period_x() / 2.0, grid.period_y() / 2.0);
        let n = grid.n_points();
        let mut vx = vec![0.0; n];
        let mut vy = vec![0.0; n];
        for p in grid.points() {
            let (x, y) = grid.point_coords(p);
            // Periodic distance to the center line keeps the profile seamless
            // across the wrap-around.
            let ddy = periodic_abs(y - yc, grid.period_y());
            let ddx = periodic_abs(x - xc, grid.period_x());
            let i = grid.index_of(p);
            vx[i] = (-ddy / profile_width).exp();
            vy[i] = (-ddx / profile_width).exp();
        }
        Self::from_components(grid, vx, vy)
    }

    /// Rescale so the recorded maximum magnitude becomes `vmax_target`.
    /// Directions and the argmax location are unchanged.
    pub fn scale_to_vmax(&self, vmax_target: f64) -> Result<Self> {
        if self.vmax == 0.0 {
            return Err(Error::ZeroField);
        }
        if !(vmax_target >= 0.0) {
            return Err(Error::config(format!(
                "target vmax must be >= 0, got {vmax_target}"
            )));
        }
        let s = vmax_target / self.vmax;
        let vx: Vec<f64> = self.vx.iter().map(|v| v * s).collect();
        let vy: Vec<f64> = self.vy.iter().map(|v| v * s).collect();
        let vmax = max_magnitude(&vx, &vy);
        Ok(VelocityField {
            grid: self.grid,
            vx,
            vy,
            vmax,
        })
    }

    pub fn grid(&self) -> GridSpec {
        self.grid
    }

    pub fn vmax(&self) -> f64 {
        self.vmax
    }

    pub fn vx(&self) -> &[f64] {
        &self.vx
    }

    pub fn vy(&self) -> &[f64] {
        &self.vy
    }

    pub fn at(&self, p: PointIndex) -> (f64, f64) {
        let i = self.grid.index_of(p);
        (self.vx[i], self.vy[i])
    }

    /// Largest absolute x-component over all points.
    pub fn max_abs_vx(&self) -> f64 {
        self.vx.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Largest absolute y-component over all points.
    pub fn max_abs_vy(&self) -> f64 {
        self.vy.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Write `<base>.csv` (header `j,k,vx,vy`, one row per point, k outer) and
    /// the `<base>.json` sidecar.
    pub fn save(&self, base: &Path, scenario: &str, params: serde_json::Value) -> Result<()> {
        let csv_path = base.with_extension("csv");
        let json_path = base.with_extension("json");
        let mut out = String::from("j,k,vx,vy\n");
        for p in self.grid.points() {
            let i = self.grid.index_of(p);
            out.push_str(&format!("{},{},{},{}\n", p.j, p.k, self.vx[i], self.vy[i]));
        }
        let mut f = fs::File::create(&csv_path)?;
        f.write_all(out.as_bytes())?;
        let meta = FieldMeta {
            nx: self.grid.nx,
            ny: self.grid.ny,
            dx: self.grid.dx,
            dy: self.grid.dy,
            scenario: scenario.to_string(),
            params,
            vmax: self.vmax,
        };
        let json = serde_json::to_string_pretty(&meta).map_err(|e| Error::Json {
            path: json_path.clone(),
            source: e,
        })?;
        fs::write(&json_path, json + "\n")?;
        Ok(())
    }

    /// Read a field written by [`VelocityField::save`].
    pub fn load(base: &Path) -> Result<(Self, FieldMeta)> {
        let csv_path = base.with_extension("csv");
        let json_path = base.with_extension("json");
        if !json_path.exists() {
            return Err(Error::MissingSidecar(json_path));
        }
        let meta: FieldMeta =
            serde_json::from_str(&fs::read_to_string(&json_path)?).map_err(|e| Error::Json {
                path: json_path.clone(),
                source: e,
            })?;
        let grid = GridSpec::new(meta.nx, meta.ny, meta.dx, meta.dy)?;
        let text = fs::read_to_string(&csv_path)?;
        let malformed = |detail: String| Error::Malformed {
            path: csv_path.clone(),
            detail,
        };
        let mut lines = text.lines();
        match lines.next() {
            Some("j,k,vx,vy") => {}
            other => {
                return Err(malformed(format!(
                    "expected header 'j,k,vx,vy', got {other:?}"
                )))
            }
        }
        let n = grid.n_points();
        let mut vx = vec![0.0; n];
        let mut vy = vec![0.0; n];
        let mut count = 0usize;
        for (lineno, line) in lines.enumerate() {
            let mut cols = line.split(',');
            let parse = |s: Option<&str>| -> Result<f64> {
                s.ok_or_else(|| malformed(format!("line {}: too few columns", lineno + 2)))?
                    .parse::<f64>()
                    .map_err(|e| malformed(format!("line {}: {e}", lineno + 2)))
            };
            let j = parse(cols.next())? as usize;
            let k = parse(cols.next())? as usize;
            if j >= grid.nx || k >= grid.ny {
                return Err(malformed(format!(
                    "line {}: point ({j},{k}) outside {}x{} grid",
                    lineno + 2,
                    grid.nx,
                    grid.ny
                )));
            }
            let i = grid.index_of(PointIndex::new(j, k));
            vx[i] = parse(cols.next())?;
            vy[i] = parse(cols.next())?;
            count += 1;
        }
        if count != n {
            return Err(Error::Shape {
                path: csv_path,
                detail: format!("expected {n} rows, found {count}"),
            });
        }
        let field = Self::from_components(grid, vx, vy)?;
        Ok((field, meta))
    }

    /// Path helper: `<dir>/field` as the save/load base.
    pub fn bundle_base(dir: &Path) -> PathBuf {
        dir.join("field")
    }
}

fn max_magnitude(vx: &[f64], vy: &[f64]) -> f64 {
    vx.iter()
        .zip(vy)
        .map(|(x, y)| (x * x + y * y).sqrt())
        .fold(0.0, f64::max)
}

/// |d| folded into the periodic interval, i.e. min(|d| mod L, L - |d| mod L).
fn periodic_abs(d: f64, period: f64) -> f64 {
    let m = d.abs() % period;
    m.min(period - m)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid10() -> GridSpec {
        GridSpec::square(10, 100.0).unwrap()
    }

    fn grid20() -> GridSpec {
        GridSpec::square(20, 100.0).unwrap()
    }

    #[test]
    fn uniform_right_examples() {
        let f = VelocityField::uniform_right(grid10(), 1.0).unwrap();
        assert_eq!(f.vmax(), 1.0);
        assert!(f.vx().iter().all(|&v| v == 1.0));
        assert!(f.vy().iter().all(|&v| v == 0.0));

        let z = VelocityField::uniform_right(grid10(), 0.0).unwrap();
        assert_eq!(z.vmax(), 0.0);

        let f2 = VelocityField::uniform_right(grid10(), 2.0)
            .unwrap()
            .scale_to_vmax(1.0)
            .unwrap();
        assert!(f2.vx().iter().all(|&v| v == 1.0));
    }

    #[test]
    fn ring_is_zero_off_annulus_and_tangential_on_it() {
        let g = grid20();
        let c = (50.0, 50.0);
        let f = VelocityField::ring_flow(g, c, 25.0, 45.0, true).unwrap();
        for p in g.points() {
            let (x, y) = g.point_coords(p);
            let r = ((x - c.0).powi(2) + (y - c.1).powi(2)).sqrt();
            let (vx, vy) = f.at(p);
            if r < 25.0 || r > 45.0 {
                assert_eq!((vx, vy), (0.0, 0.0), "off-annulus point must be exactly zero");
            } else {
                let mag = (vx * vx + vy * vy).sqrt();
                assert!((mag - 1.0).abs() < 1e-12, "unit tangential speed on annulus");
                // Tangential: perpendicular to the radius vector.
                let dot = vx * (x - c.0) + vy * (y - c.1);
                assert!(dot.abs() < 1e-9);
            }
        }
        // Point directly right of the center, ccw: velocity points up.
        let p = PointIndex::new(17, 10); // x=85, y=50, r=35
        let (vx, vy) = f.at(p);
        assert!(vx.abs() < 1e-12 && (vy - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ring_opposite_points_have_opposite_velocities() {
        let g = grid20();
        let f = VelocityField::ring_flow(g, (50.0, 50.0), 25.0, 45.0, true).unwrap();
        let a = PointIndex::new(17, 10);
        let b = PointIndex::new(3, 10); // mirrored across the center (x=15 vs 85)
        let (ax, ay) = f.at(a);
        let (bx, by) = f.at(b);
        assert!((ax + bx).abs() < 1e-12 && (ay + by).abs() < 1e-12);
    }

    #[test]
    fn degenerate_ring_is_all_zero() {
        // Annulus thinner than any gap between grid points.
        let f = VelocityField::ring_flow(grid10(), (3.0, 3.0), 1.0, 2.0, true).unwrap();
        assert_eq!(f.vmax(), 0.0);
        assert!(f.scale_to_vmax(1.0).is_err());
    }

    #[test]
    fn rotation_examples() {
        let g = grid20();
        let c = (50.0, 50.0);
        let f = VelocityField::solid_rotation(g, c, false);
        // The center is a grid point and has zero velocity.
        assert_eq!(f.at(PointIndex::new(10, 10)), (0.0, 0.0));
        // Clockwise: top-boundary center points right, bottom-boundary center left.
        let (vx_top, vy_top) = f.at(PointIndex::new(10, 19));
        assert!(vx_top > 0.0 && vy_top.abs() < 1e-12);
        let (vx_bot, vy_bot) = f.at(PointIndex::new(10, 0));
        assert!(vx_bot < 0.0 && vy_bot.abs() < 1e-12);
        assert!((vx_top + vx_bot).abs() <= 5.0 + 1e-12); // top r=45, bottom r=50
        // Magnitude proportional to distance: twice the radius, twice the speed.
        let v1 = f.at(PointIndex::new(12, 10)).0.hypot(f.at(PointIndex::new(12, 10)).1);
        let v2 = f.at(PointIndex::new(14, 10)).0.hypot(f.at(PointIndex::new(14, 10)).1);
        assert!((v2 - 2.0 * v1).abs() < 1e-12);
    }

    #[test]
    fn rotation_matches_the_divergence_free_formula() {
        // The sampled field must equal v = omega x (p - c) exactly at every
        // grid point; that continuum formula has dvx/dx = dvy/dy = 0, so the
        // field is divergence-free analytically (no discrete stencil needed).
        let g = grid20();
        let c = (50.0, 50.0);
        let f = VelocityField::solid_rotation(g, c, true);
        for p in g.points() {
            let (x, y) = g.point_coords(p);
            assert_eq!(f.at(p), (-(y - c.1), x - c.0));
        }
        let (vx, vy) = f.at(PointIndex::new(10, 13));
        assert_eq!((vx, vy), (-15.0, 0.0));
    }

    #[test]
    fn cross_currents_examples() {
        let g = grid20();
        let f = VelocityField::cross_currents(g, 15.0).unwrap();
        // Strictly positive components everywhere.
        assert!(f.vx().iter().all(|&v| v > 0.0));
        assert!(f.vy().iter().all(|&v| v > 0.0));
        // Center has the largest magnitude.
        let center = g.index_of(PointIndex::new(10, 10));
        let mag = |i: usize| (f.vx()[i].powi(2) + f.vy()[i].powi(2)).sqrt();
        let center_mag = mag(center);
        for i in 0..g.n_points() {
            assert!(mag(i) <= center_mag + 1e-12);
        }
        let corner = g.index_of(PointIndex::new(0, 0));
        assert!(mag(corner) < center_mag);
    }

    #[test]
    fn scaling_preserves_directions_and_argmax() {
        let g = grid20();
        let f = VelocityField::cross_currents(g, 15.0).unwrap();
        let s = f.scale_to_vmax(1.0).unwrap();
        assert!((s.vmax() - 1.0).abs() <= 1e-12);
        let argmax = |f: &VelocityField| {
            (0..g.n_points())
                .max_by(|&a, &b| {
                    let ma = f.vx()[a].hypot(f.vy()[a]);
                    let mb = f.vx()[b].hypot(f.vy()[b]);
                    ma.partial_cmp(&mb).unwrap()
                })
                .unwrap()
        };
        assert_eq!(argmax(&f), argmax(&s));
        for i in 0..g.n_points() {
            let m0 = f.vx()[i].hypot(f.vy()[i]);
            let m1 = s.vx()[i].hypot(s.vy()[i]);
            // Unit vectors unchanged by positive scaling.
            assert!((f.vx()[i] / m0 - s.vx()[i] / m1).abs() < 1e-12);
            assert!((f.vy()[i] / m0 - s.vy()[i] / m1).abs() < 1e-12);
        }
        // Identity when the recorded vmax already equals the target exactly.
        let unit = VelocityField::uniform_right(g, 1.0).unwrap();
        let id = unit.scale_to_vmax(1.0).unwrap();
        assert_eq!(id, unit);
    }

    #[test]
    fn csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let base = dir.path().join("field");
        let f = VelocityField::ring_flow(grid20(), (50.0, 50.0), 25.0, 45.0, true)
            .unwrap()
            .scale_to_vmax(1.0)
            .unwrap();
        f.save(&base, "ring", serde_json::json!({"r_inner": 25.0, "r_outer": 45.0}))
            .unwrap();
        let (g, meta) = VelocityField::load(&base).unwrap();
        assert_eq!(f, g);
        assert_eq!(meta.scenario, "ring");
        assert_eq!(meta.vmax, f.vmax());
    }

    #[test]
    fn load_without_sidecar_names_the_missing_file() {
        let dir = tempfile::tempdir().unwrap();
        let base = dir.path().join("field");
        std::fs::write(base.with_extension("csv"), "j,k,vx,vy\n").unwrap();
        let err = VelocityField::load(&base).unwrap_err();
        assert!(err.to_string().contains("field.json"));
    }
}
