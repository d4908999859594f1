//! First-order upwind advection-diffusion integrator on the periodic grid.
//!
//! One step advances the scalar field by
//! `f' = f - Vx*dt*df/dx - Vy*dt*df/dy + kx*dt*d2f/dx2 + ky*dt*d2f/dy2`
//! with one-sided first derivatives taken from the upstream side of the local
//! velocity and central second derivatives, all with periodic neighbor lookup.
//! Forcing increments are added after the transport update, so they propagate
//! from the following step onward.

use crate::error::{Error, Result};
use crate::grid::GridSpec;
use crate::velocity::VelocityField;

/// Stability-checked integrator parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimParams {
    pub kappa_x: f64,
    pub kappa_y: f64,
    pub courant: f64,
    pub advection_enabled: bool,
    pub dt: f64,
}

/// Scalar field state (interpreted as temperature) at an instant.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldState {
    pub grid: GridSpec,
    pub f: Vec<f64>,
    pub t: f64,
}

impl FieldState {
    /// Equilibrium state: the same temperature (zero) everywhere at t = 0.
    pub fn equilibrium(grid: GridSpec) -> Self {
        FieldState {
            grid,
            f: vec![0.0; grid.n_points()],
            t: 0.0,
        }
    }

    pub fn total(&self) -> f64 {
        self.f.iter().sum()
    }
}

/// Largest stable time step for the active terms, scaled by the Courant number.
///
/// Advection bound: `C * min(dx/max|vx|, dy/max|vy|)`, infinite when advection
/// is disabled (`advection = None`) or the field is all zero. Diffusion bound:
/// `C / (2*(kx/dx^2 + ky/dy^2))`, infinite when both coefficients vanish.
/// Returns the smaller of the two; errors when neither term is active.
pub fn stable_dt(
    grid: GridSpec,
    advection: Option<&VelocityField>,
    kappa_x: f64,
    kappa_y: f64,
    courant: f64,
) -> Result<f64> {
    validate_coeffs(kappa_x, kappa_y, courant)?;
    let dt_adv = match advection {
        Some(field) if field.vmax() > 0.0 => {
            let bx = per_axis_bound(grid.dx, field.max_abs_vx());
            let by = per_axis_bound(grid.dy, field.max_abs_vy());
            courant * bx.min(by)
        }
        _ => f64::INFINITY,
    };
    let dt_diff = if kappa_x > 0.0 || kappa_y > 0.0 {
        courant / (2.0 * (kappa_x / (grid.dx * grid.dx) + kappa_y / (grid.dy * grid.dy)))
    } else {
        f64::INFINITY
    };
    let dt = dt_adv.min(dt_diff);
    if dt.is_infinite() {
        return Err(Error::NoDynamics);
    }
    Ok(dt)
}

fn per_axis_bound(spacing: f64, vmax_component: f64) -> f64 {
    if vmax_component > 0.0 {
        spacing / vmax_component
    } else {
        f64::INFINITY
    }
}

fn validate_coeffs(kappa_x: f64, kappa_y: f64, courant: f64) -> Result<()> {
    if !(kappa_x >= 0.0 && kappa_y >= 0.0) {
        return Err(Error::config(format!(
            "diffusion coefficients must be >= 0, got {kappa_x}, {kappa_y}"
        )));
    }
    if !(courant > 0.0 && courant <= 1.0) {
        return Err(Error::config(format!(
            "Courant number must be in (0, 1], got {courant}"
        )));
    }
    Ok(())
}

impl SimParams {
    /// Parameters with the time step set to the stability bound.
    pub fn stable(
        grid: GridSpec,
        advection: Option<&VelocityField>,
        kappa_x: f64,
        kappa_y: f64,
        courant: f64,
    ) -> Result<Self> {
        let dt = stable_dt(grid, advection, kappa_x, kappa_y, courant)?;
        Ok(SimParams {
            kappa_x,
            kappa_y,
            courant,
            advection_enabled: advection.is_some(),
            dt,
        })
    }

    /// Parameters with an explicit time step, validated against the bound.
    pub fn with_dt(
        grid: GridSpec,
        advection: Option<&VelocityField>,
        kappa_x: f64,
        kappa_y: f64,
        courant: f64,
        dt: f64,
    ) -> Result<Self> {
        let bound = stable_dt(grid, advection, kappa_x, kappa_y, courant)?;
        if !(dt > 0.0) || dt > bound * (1.0 + 1e-12) {
            return Err(Error::config(format!(
                "dt={dt} violates the stability bound {bound}"
            )));
        }
        Ok(SimParams {
            kappa_x,
            kappa_y,
            courant,
            advection_enabled: advection.is_some(),
            dt,
        })
    }
}

/// Advance one time step. `forcing`, when given, is a per-point additive
/// increment applied after the transport update.
pub fn step(
    state: &FieldState,
    field: &VelocityField,
    params: &SimParams,
    forcing: Option<&[f64]>,
) -> Result<FieldState> {
    let grid = state.grid;
    let n = grid.n_points();
    debug_assert_eq!(field.grid(), grid);
    if let Some(fc) = forcing {
        debug_assert_eq!(fc.len(), n);
    }
    let (nx, ny) = (grid.nx, grid.ny);
    let (dx, dy) = (grid.dx, grid.dy);
    let dt = params.dt;
    let f = &state.f;
    let (vx, vy) = (field.vx(), field.vy());
    let mut out = vec![0.0; n];

    for k in 0..ny {
        let km = if k == 0 { ny - 1 } else { k - 1 };
        let kp = if k == ny - 1 { 0 } else { k + 1 };
        for j in 0..nx {
            let jm = if j == 0 { nx - 1 } else { j - 1 };
            let jp = if j == nx - 1 { 0 } else { j + 1 };
            let c = k * nx + j;
            let (w, e) = (k * nx + jm, k * nx + jp);
            let (s, nn) = (km * nx + j, kp * nx + j);

            let mut val = f[c];
            if params.advection_enabled {
                let dfdx = if vx[c] >= 0.0 {
                    (f[c] - f[w]) / dx
                } else {
                    (f[e] - f[c]) / dx
                };
                let dfdy = if vy[c] >= 0.0 {
                    (f[c] - f[s]) / dy
                } else {
                    (f[nn] - f[c]) / dy
                };
                val -= vx[c] * dt * dfdx + vy[c] * dt * dfdy;
            }
            val += params.kappa_x * dt * (f[w] - 2.0 * f[c] + f[e]) / (dx * dx)
                + params.kappa_y * dt * (f[s] - 2.0 * f[c] + f[nn]) / (dy * dy);
            out[c] = val;
        }
    }

    if let Some(fc) = forcing {
        for (o, a) in out.iter_mut().zip(fc) {
            *o += a;
        }
    }

    let t = state.t + dt;
    if let Some(bad) = out.iter().position(|v| !v.is_finite()) {
        return Err(Error::Unstable {
            j: bad % nx,
            k: bad / nx,
            t,
        });
    }
    Ok(FieldState { grid, f: out, t })
}

/// Run `n_steps` steps, invoking the forcing script before each step with a
/// zeroed per-point buffer to fill. Returns every state including the initial
/// one; subsampling happens downstream.
pub fn run(
    initial: FieldState,
    field: &VelocityField,
    params: &SimParams,
    n_steps: usize,
    mut forcing_script: impl FnMut(usize, &mut [f64]),
) -> Result<Vec<FieldState>> {
    let n = initial.grid.n_points();
    let mut states = Vec::with_capacity(n_steps + 1);
    let mut forcing = vec![0.0; n];
    states.push(initial);
    for i in 0..n_steps {
        forcing.fill(0.0);
        forcing_script(i, &mut forcing);
        let next = step(states.last().unwrap(), field, params, Some(&forcing))?;
        states.push(next);
    }
    Ok(states)
}
