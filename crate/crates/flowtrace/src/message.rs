//! Message injection protocols and the run-per-grid-point dataset schedule.
//!
//! One run is performed for each grid point regardless of the message kind.
//! Per run the state is reset to equilibrium, the message for that run's
//! point is applied, and the simulator advances `M * (N + S - 1)` steps with
//! every Mth post-step state recorded. All runs are concatenated in grid
//! order.
//!
//! Randomness is fully determined by the script seed. The generator is
//! ChaCha8; each run uses the substream seeded with
//! `splitmix64(seed ^ splitmix64(run_index))`. Within a step the draw order
//! is: message forcing first (single-point: one draw; all-point: one draw per
//! point in row-major order), then background noise (one draw per point in
//! row-major order) when its sigma is positive.

use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, DatasetMeta};
use crate::error::{Error, Result};
use crate::grid::GridSpec;
use crate::sim::{step, FieldState, SimParams};
use crate::velocity::VelocityField;

/// The three ways a message is fed into the system.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MessageKind {
    /// Single-point peak initial condition, set once at step 0.
    IcPeak,
    /// Normally distributed noise added to one grid point every step.
    SinglePointNoise,
    /// Independent normal noise added to every grid point every step.
    AllPointNoise,
}

impl MessageKind {
    pub fn label(&self) -> &'static str {
        match self {
            MessageKind::IcPeak => "ic-peak",
            MessageKind::SinglePointNoise => "single-point-noise",
            MessageKind::AllPointNoise => "all-point-noise",
        }
    }
}

/// Message parameters; the seed fully determines all randomness.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MessageScript {
    pub kind: MessageKind,
    pub peak_amplitude: f64,
    /// Std dev of the injected noise for the noise message kinds.
    pub forcing_sigma: f64,
    /// Std dev of a small everywhere-noise added on top of any message kind.
    pub background_sigma: f64,
    pub seed: u64,
}

impl MessageScript {
    pub fn ic_peak(seed: u64) -> Self {
        MessageScript {
            kind: MessageKind::IcPeak,
            peak_amplitude: 500.0,
            forcing_sigma: 0.0,
            background_sigma: 0.0,
            seed,
        }
    }

    pub fn with_background(mut self, sigma: f64) -> Self {
        self.background_sigma = sigma;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.peak_amplitude >= 0.0 && self.forcing_sigma >= 0.0 && self.background_sigma >= 0.0)
        {
            return Err(Error::config(
                "message amplitudes and sigmas must be >= 0".to_string(),
            ));
        }
        let has_signal = match self.kind {
            MessageKind::IcPeak => self.peak_amplitude > 0.0 || self.background_sigma > 0.0,
            MessageKind::SinglePointNoise | MessageKind::AllPointNoise => {
                self.forcing_sigma > 0.0 || self.background_sigma > 0.0
            }
        };
        if !has_signal {
            return Err(Error::ZeroSignal);
        }
        Ok(())
    }
}

/// Dataset sizing: N lagged samples per run over S tiers, subsampled by M.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunSchedule {
    /// Lagged-sample count N per run.
    pub samples_per_run: usize,
    /// Tier count S.
    pub tiers: usize,
    /// Subsampling factor M.
    pub subsample: usize,
    pub grid: GridSpec,
}

impl RunSchedule {
    pub fn new(samples_per_run: usize, tiers: usize, subsample: usize, grid: GridSpec) -> Result<Self> {
        if samples_per_run < 1 || tiers < 1 || subsample < 1 {
            return Err(Error::config(format!(
                "schedule needs samples_per_run, tiers, subsample >= 1, got {samples_per_run}, {tiers}, {subsample}"
            )));
        }
        Ok(RunSchedule {
            samples_per_run,
            tiers,
            subsample,
            grid,
        })
    }

    /// Default N so the total lagged sample count `N * nx * ny` reaches 5000.
    pub fn default_samples_per_run(grid: GridSpec) -> usize {
        (5000 + grid.n_points() - 1) / grid.n_points()
    }

    /// Non-lagged recorded samples per run: `N + S - 1`.
    pub fn rows_per_run(&self) -> usize {
        self.samples_per_run + self.tiers - 1
    }

    /// Simulator steps per run: `M * (N + S - 1)`.
    pub fn steps_per_run(&self) -> usize {
        self.subsample * self.rows_per_run()
    }

    /// Total lagged samples over all runs.
    pub fn total_lagged_samples(&self) -> usize {
        self.samples_per_run * self.grid.n_points()
    }
}

pub(crate) fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Per-run RNG substream; independent of run execution order.
pub fn run_rng(seed: u64, run_index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(splitmix64(seed ^ splitmix64(run_index)))
}

/// Generate the benchmark dataset: one run per grid point, concatenated in
/// row-major grid order. Runs are independent and may execute in parallel;
/// the result is bit-identical to sequential execution.
pub fn generate_dataset(
    field: &VelocityField,
    params: &SimParams,
    script: &MessageScript,
    sched: &RunSchedule,
) -> Result<Dataset> {
    script.validate()?;
    let grid = sched.grid;
    if field.grid() != grid {
        return Err(Error::config("field grid does not match schedule grid"));
    }
    let p = grid.n_points();
    let rows_per_run = sched.rows_per_run();

    let runs: Vec<Result<Vec<f64>>> = (0..p)
        .into_par_iter()
        .map(|run_idx| single_run(field, params, script, sched, run_idx))
        .collect();

    let mut values = Array2::zeros((p * rows_per_run, p));
    for (run_idx, run) in runs.into_iter().enumerate() {
        let run = run?;
        for r in 0..rows_per_run {
            for c in 0..p {
                values[[run_idx * rows_per_run + r, c]] = run[r * p + c];
            }
        }
    }

    Ok(Dataset {
        grid,
        values,
        run_len: rows_per_run,
        n_runs: p,
        dt_data: sched.subsample as f64 * params.dt,
        meta: DatasetMeta {
            scenario: "custom".to_string(),
            message_kind: script.kind.label().to_string(),
            seed: script.seed,
            peak_amplitude: script.peak_amplitude,
            forcing_sigma: script.forcing_sigma,
            background_sigma: script.background_sigma,
            kappa_x: params.kappa_x,
            kappa_y: params.kappa_y,
            courant: params.courant,
            subsample: sched.subsample,
            dt: params.dt,
            advection_enabled: params.advection_enabled,
            recording: DatasetMeta::post_step_recording(),
            field_file: None,
            posterior_sigma: None,
            posterior_seed: None,
        },
    })
}

/// One run: returns `rows_per_run * n_points` recorded values, row-major.
pub(crate) fn single_run(
    field: &VelocityField,
    params: &SimParams,
    script: &MessageScript,
    sched: &RunSchedule,
    run_idx: usize,
) -> Result<Vec<f64>> {
    let grid = sched.grid;
    let p = grid.n_points();
    let mut rng = run_rng(script.seed, run_idx as u64);
    let forcing_noise = Normal::new(0.0, script.forcing_sigma).expect("validated sigma");
    let background_noise = Normal::new(0.0, script.background_sigma).expect("validated sigma");

    let mut state = FieldState::equilibrium(grid);
    if script.kind == MessageKind::IcPeak {
        state.f[run_idx] = script.peak_amplitude;
    }

    let mut out = Vec::with_capacity(sched.rows_per_run() * p);
    let mut forcing = vec![0.0; p];
    for step_idx in 0..sched.steps_per_run() {
        forcing.fill(0.0);
        match script.kind {
            MessageKind::IcPeak => {}
            MessageKind::SinglePointNoise => {
                forcing[run_idx] += forcing_noise.sample(&mut rng);
            }
            MessageKind::AllPointNoise => {
                for slot in forcing.iter_mut() {
                    *slot += forcing_noise.sample(&mut rng);
                }
            }
        }
        if script.background_sigma > 0.0 {
            for slot in forcing.iter_mut() {
                *slot += background_noise.sample(&mut rng);
            }
        }
        state = step(&state, field, params, Some(&forcing))?;
        if (step_idx + 1) % sched.subsample == 0 {
            out.extend_from_slice(&state.f);
        }
    }
    Ok(out)
}

/// Add i.i.d. normal noise to every cell after simulation. Posterior noise
/// does not propagate with the dynamics; it models measurement error. Cells
/// are perturbed in row-major order from the substream-0 generator of `seed`.
pub fn add_posterior_noise(ds: &Dataset, sigma: f64, seed: u64) -> Result<Dataset> {
    if !(sigma >= 0.0) {
        return Err(Error::config(format!("sigma must be >= 0, got {sigma}")));
    }
    let mut out = ds.clone();
    if sigma > 0.0 {
        let mut rng = run_rng(seed, 0);
        let noise = Normal::new(0.0, sigma).expect("checked sigma");
        for v in out.values.iter_mut() {
            *v += noise.sample(&mut rng);
        }
    }
    out.meta.posterior_sigma = Some(sigma);
    out.meta.posterior_seed = Some(seed);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::PointIndex;
    use crate::sim::stable_dt;

    fn grid10() -> GridSpec {
        GridSpec::square(10, 100.0).unwrap()
    }

    fn diffusion_setup() -> (VelocityField, SimParams, RunSchedule) {
        let g = grid10();
        let field = VelocityField::zero(g);
        let params = SimParams::stable(g, None, 1.0, 1.0, 1.0).unwrap();
        let sched = RunSchedule::new(50, 20, 1, g).unwrap();
        (field, params, sched)
    }

    #[test]
    fn schedule_counts_match_the_protocol() {
        let (_, _, sched) = diffusion_setup();
        assert_eq!(sched.rows_per_run(), 69);
        assert_eq!(sched.steps_per_run(), 69);
        assert_eq!(sched.total_lagged_samples(), 5000);
        assert_eq!(RunSchedule::default_samples_per_run(grid10()), 50);
        assert_eq!(
            RunSchedule::default_samples_per_run(GridSpec::square(20, 100.0).unwrap()),
            13
        );
    }

    #[test]
    fn dataset_shape_and_boundaries() {
        let (field, params, sched) = diffusion_setup();
        let script = MessageScript::ic_peak(7);
        let ds = generate_dataset(&field, &params, &script, &sched).unwrap();
        assert_eq!(ds.values.nrows(), 100 * 69);
        assert_eq!(ds.run_len, 69);
        assert_eq!(ds.n_runs, 100);
        assert_eq!(ds.dt_data, 25.0);
    }

    #[test]
    fn subsampling_keeps_rows_and_scales_dt_data() {
        let g = grid10();
        let field = VelocityField::zero(g);
        let params = SimParams::stable(g, None, 1.0, 1.0, 1.0).unwrap();
        let script = MessageScript::ic_peak(7);
        let s1 = RunSchedule::new(10, 5, 1, g).unwrap();
        let s2 = RunSchedule::new(10, 5, 2, g).unwrap();
        assert_eq!(s2.steps_per_run(), 2 * s1.steps_per_run());
        let d1 = generate_dataset(&field, &params, &script, &s1).unwrap();
        let d2 = generate_dataset(&field, &params, &script, &s2).unwrap();
        assert_eq!(d1.values.nrows(), d2.values.nrows());
        assert_eq!(d2.dt_data, 2.0 * d1.dt_data);
        // A subsampled run keeps exactly every Mth state of a fine run that
        // covers the same step count (deterministic diffusion, run 0).
        let fine = RunSchedule::new(2 * 10 + 5 - 1, 5, 1, g).unwrap(); // 28 rows = 28 steps
        let df = generate_dataset(&field, &params, &script, &fine).unwrap();
        assert_eq!(fine.steps_per_run(), s2.steps_per_run());
        let p = g.n_points();
        for r in 0..s2.rows_per_run() {
            let fine_row = 2 * r + 1; // state after step 2(r+1), 0-indexed rows
            for c in 0..p {
                assert_eq!(d2.values[[r, c]], df.values[[fine_row, c]]);
            }
        }
    }

    #[test]
    fn ic_peak_run_is_reset_per_run() {
        let g = grid10();
        let field = VelocityField::zero(g);
        let params = SimParams::stable(g, None, 1.0, 1.0, 1.0).unwrap();
        let sched = RunSchedule::new(5, 3, 1, g).unwrap();
        let script = MessageScript::ic_peak(3);
        let ds = generate_dataset(&field, &params, &script, &sched).unwrap();
        // Re-simulate run 42 in isolation; it must equal its block exactly.
        let solo = single_run(&field, &params, &script, &sched, 42).unwrap();
        let p = g.n_points();
        for r in 0..sched.rows_per_run() {
            for c in 0..p {
                assert_eq!(ds.values[[42 * sched.rows_per_run() + r, c]], solo[r * p + c]);
            }
        }
        // First recorded row of run g is one diffusion step of the g-peak:
        // peak cell goes to 0, its four neighbors to 125.
        let run = 37;
        let peak = g.point_at(run);
        let row = run * sched.rows_per_run();
        assert_eq!(ds.values[[row, run]], 0.0);
        for (dj, dk) in [(1i64, 0i64), (-1, 0), (0, 1), (0, -1)] {
            let n = g.index_of(g.neighbor(peak, dj, dk));
            assert_eq!(ds.values[[row, n]], 125.0);
        }
    }

    #[test]
    fn identical_seeds_are_bit_identical() {
        let g = grid10();
        let field = VelocityField::uniform_right(g, 1.0).unwrap();
        let params = SimParams::stable(g, Some(&field), 0.0, 0.0, 1.0).unwrap();
        let sched = RunSchedule::new(8, 4, 1, g).unwrap();
        let script = MessageScript {
            kind: MessageKind::AllPointNoise,
            peak_amplitude: 0.0,
            forcing_sigma: 1.0,
            background_sigma: 0.1,
            seed: 99,
        };
        let a = generate_dataset(&field, &params, &script, &sched).unwrap();
        let b = generate_dataset(&field, &params, &script, &sched).unwrap();
        assert_eq!(a.values, b.values);
        let c = generate_dataset(
            &field,
            &params,
            &MessageScript { seed: 100, ..script },
            &sched,
        )
        .unwrap();
        assert_ne!(a.values, c.values);
    }

    #[test]
    fn zero_signal_scripts_are_rejected() {
        let (field, params, sched) = diffusion_setup();
        let script = MessageScript {
            kind: MessageKind::IcPeak,
            peak_amplitude: 0.0,
            forcing_sigma: 0.0,
            background_sigma: 0.0,
            seed: 1,
        };
        assert!(matches!(
            generate_dataset(&field, &params, &script, &sched),
            Err(Error::ZeroSignal)
        ));
        let script = MessageScript {
            kind: MessageKind::SinglePointNoise,
            peak_amplitude: 500.0, // ignored by noise kinds
            forcing_sigma: 0.0,
            background_sigma: 0.0,
            seed: 1,
        };
        assert!(matches!(
            generate_dataset(&field, &params, &script, &sched),
            Err(Error::ZeroSignal)
        ));
    }

    #[test]
    fn posterior_noise_examples() {
        let (field, params, _) = diffusion_setup();
        let sched = RunSchedule::new(6, 3, 1, grid10()).unwrap();
        let ds = generate_dataset(&field, &params, &MessageScript::ic_peak(5), &sched).unwrap();

        let same = add_posterior_noise(&ds, 0.0, 11).unwrap();
        assert_eq!(same.values, ds.values);
        assert_eq!(same.meta.posterior_sigma, Some(0.0));

        let a = add_posterior_noise(&ds, 0.5, 11).unwrap();
        let b = add_posterior_noise(&ds, 0.5, 11).unwrap();
        assert_eq!(a.values, b.values);
        assert_ne!(a.values, ds.values);

        // Column means shift by less than 4*sigma/sqrt(n).
        let n = ds.values.nrows() as f64;
        let bound = 4.0 * 0.5 / n.sqrt();
        for c in 0..ds.values.ncols() {
            let before: f64 = ds.values.column(c).sum() / n;
            let after: f64 = a.values.column(c).sum() / n;
            assert!(
                (after - before).abs() < bound,
                "column {c} mean moved {} >= {bound}",
                (after - before).abs()
            );
        }
    }

    #[test]
    fn advection_ic_peak_marches_right() {
        let g = grid10();
        let field = VelocityField::uniform_right(g, 1.0).unwrap();
        let params = SimParams::stable(g, Some(&field), 0.0, 0.0, 1.0).unwrap();
        assert_eq!(stable_dt(g, Some(&field), 0.0, 0.0, 1.0).unwrap(), 10.0);
        let sched = RunSchedule::new(4, 3, 1, g).unwrap();
        let script = MessageScript::ic_peak(0);
        let ds = generate_dataset(&field, &params, &script, &sched).unwrap();
        // Run for point (4,4): recorded row r has the peak at (4+r+1, 4).
        let run = g.index_of(PointIndex::new(4, 4));
        for r in 0..sched.rows_per_run() {
            let expect = g.index_of(g.neighbor(PointIndex::new(4, 4), r as i64 + 1, 0));
            assert_eq!(ds.values[[run * sched.rows_per_run() + r, expect]], 500.0);
        }
    }
}
