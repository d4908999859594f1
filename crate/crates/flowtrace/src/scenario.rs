//! Scenario catalog and the end-to-end pipeline:
//! simulate -> discover -> analyze -> report.
//!
//! Every stage reads its inputs from and writes its outputs to a bundle
//! directory, so running the stages separately composes to exactly the same
//! bundle as the one-shot pipeline. The provenance JSON carries the full
//! configuration; a bundle is reproducible from its provenance alone.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::discovery::{run_discovery, DiscoveryStats, PcOptions, TemporalGraph, TemporalPrior};
use crate::error::{Error, Result};
use crate::grid::GridSpec;
use crate::message::{generate_dataset, MessageScript, RunSchedule};
use crate::render::{
    render_intra_plot, render_inter_plot, render_stats_table, render_velocity_plot, PlotStyle,
    TableFormat,
};
use crate::sim::SimParams;
use crate::summary::{summarize, velocity_type1, velocity_type2, SummaryGraph};
use crate::velocity::VelocityField;

/// Advection field construction recipe. Length parameters are fractions of
/// the domain period so the same recipe scales across grid resolutions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum FieldSpec {
    Zero,
    UniformRight { speed: f64 },
    Ring { r_inner_frac: f64, r_outer_frac: f64, ccw: bool },
    Rotation { ccw: bool },
    Cross { profile_width_frac: f64 },
}

/// Full configuration of one experiment; the single source of truth recorded
/// in the bundle provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub name: String,
    pub nx: usize,
    pub ny: usize,
    /// Domain extent in meters on both axes.
    pub extent: f64,
    pub field: FieldSpec,
    /// Maximum advection speed after scaling, for the shaped fields.
    pub target_vmax: f64,
    pub kappa_x: f64,
    pub kappa_y: f64,
    pub courant: f64,
    pub advection_enabled: bool,
    /// Subsampling factor M.
    pub subsample: usize,
    pub message: MessageScript,
    /// Tier count S.
    pub tiers: usize,
    /// Tier spacing D in data steps.
    pub spacing: usize,
    pub alpha: f64,
    pub allow_concurrent: bool,
    /// Lagged samples per run N; defaults to ceil(5000 / grid points).
    pub samples_per_run: Option<usize>,
    /// Restrict velocity estimates to lags up to this value.
    pub max_lag_for_velocity: Option<usize>,
    pub discard_earliest: usize,
    pub weak_quantile: f64,
    pub max_order: usize,
    /// Seconds represented by one arrow length in the plots.
    pub display_dt: f64,
}

impl ScenarioConfig {
    pub fn grid(&self) -> Result<GridSpec> {
        let d = self.extent / self.nx as f64;
        let dy = self.extent / self.ny as f64;
        GridSpec::new(self.nx, self.ny, d, dy)
    }

    pub fn build_field(&self) -> Result<VelocityField> {
        let grid = self.grid()?;
        let lx = grid.period_x();
        let center = (grid.period_x() / 2.0, grid.period_y() / 2.0);
        match self.field {
            FieldSpec::Zero => Ok(VelocityField::zero(grid)),
            FieldSpec::UniformRight { speed } => VelocityField::uniform_right(grid, speed),
            FieldSpec::Ring {
                r_inner_frac,
                r_outer_frac,
                ccw,
            } => VelocityField::ring_flow(grid, center, r_inner_frac * lx, r_outer_frac * lx, ccw)?
                .scale_to_vmax(self.target_vmax),
            FieldSpec::Rotation { ccw } => {
                VelocityField::solid_rotation(grid, center, ccw).scale_to_vmax(self.target_vmax)
            }
            FieldSpec::Cross { profile_width_frac } => {
                VelocityField::cross_currents(grid, profile_width_frac * lx)?
                    .scale_to_vmax(self.target_vmax)
            }
        }
    }

    pub fn sim_params(&self, field: &VelocityField) -> Result<SimParams> {
        let grid = self.grid()?;
        let advection = self.advection_enabled.then_some(field);
        SimParams::stable(grid, advection, self.kappa_x, self.kappa_y, self.courant)
    }

    pub fn schedule(&self) -> Result<RunSchedule> {
        let grid = self.grid()?;
        let n = self
            .samples_per_run
            .unwrap_or_else(|| RunSchedule::default_samples_per_run(grid));
        RunSchedule::new(n, self.tiers, self.subsample, grid)
    }

    pub fn pc_options(&self) -> PcOptions {
        PcOptions {
            alpha: self.alpha,
            max_order: self.max_order,
        }
    }

    pub fn prior(&self) -> TemporalPrior {
        TemporalPrior {
            allow_concurrent: self.allow_concurrent,
        }
    }

    pub fn plot_style(&self) -> PlotStyle {
        PlotStyle {
            display_dt: self.display_dt,
            ..PlotStyle::default()
        }
    }

    /// Validate every module precondition before any work starts.
    pub fn validate(&self) -> Result<()> {
        self.grid()?;
        if !(self.courant > 0.0 && self.courant <= 1.0) {
            return Err(Error::config(format!(
                "Courant number must be in (0, 1], got {}",
                self.courant
            )));
        }
        if !(self.kappa_x >= 0.0 && self.kappa_y >= 0.0) {
            return Err(Error::config("diffusion coefficients must be >= 0"));
        }
        if self.subsample < 1 {
            return Err(Error::config("subsample M must be >= 1"));
        }
        if self.tiers < 2 {
            return Err(Error::config("need at least 2 tiers"));
        }
        if self.spacing < 1 {
            return Err(Error::config("tier spacing D must be >= 1"));
        }
        if self.discard_earliest >= self.tiers {
            return Err(Error::config("cannot discard every tier"));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::config(format!(
                "alpha must be in (0, 1), got {}",
                self.alpha
            )));
        }
        if !(self.weak_quantile >= 0.0 && self.weak_quantile < 1.0) {
            return Err(Error::config("weak quantile must be in [0, 1)"));
        }
        if let Some(n) = self.samples_per_run {
            if n < 1 {
                return Err(Error::config("samples_per_run must be >= 1"));
            }
        }
        self.message.validate()?;
        Ok(())
    }

    fn field_params_json(&self) -> serde_json::Value {
        serde_json::to_value(self.field).expect("field spec serializes")
    }
}

fn base_config(name: &str, n: usize) -> ScenarioConfig {
    ScenarioConfig {
        name: name.to_string(),
        nx: n,
        ny: n,
        extent: 100.0,
        field: FieldSpec::Zero,
        target_vmax: 1.0,
        kappa_x: 1.0,
        kappa_y: 1.0,
        courant: 1.0,
        advection_enabled: false,
        subsample: 1,
        message: MessageScript::ic_peak(1),
        tiers: 20,
        spacing: 1,
        alpha: 0.05,
        allow_concurrent: true,
        samples_per_run: None,
        max_lag_for_velocity: None,
        discard_earliest: 2,
        weak_quantile: 0.25,
        max_order: 25,
        display_dt: 5.0,
    }
}

/// Built-in experiment catalog covering the simple and complex scenarios.
pub fn builtin_scenarios() -> Vec<ScenarioConfig> {
    let mut catalog = Vec::new();

    // Pure diffusion: both grid resolutions, kappa_y in {kappa, 0}, M in {1, 2, 4}.
    for &n in &[10usize, 20] {
        for m in [1usize, 2, 4] {
            let mut cfg = base_config(&format!("pure-diffusion-{n}x{n}-M{m}"), n);
            cfg.subsample = m;
            catalog.push(cfg);
        }
        let mut cfg = base_config(&format!("pure-diffusion-{n}x{n}-kxonly-M1"), n);
        cfg.kappa_y = 0.0;
        catalog.push(cfg);
    }

    // Pure advection: uniform rightward flow, tiny background noise.
    for m in [1usize, 2, 4] {
        let mut cfg = base_config(&format!("pure-advection-M{m}"), 10);
        cfg.field = FieldSpec::UniformRight { speed: 1.0 };
        cfg.advection_enabled = true;
        cfg.kappa_x = 0.0;
        cfg.kappa_y = 0.0;
        cfg.subsample = m;
        cfg.message = MessageScript::ic_peak(1).with_background(0.1);
        catalog.push(cfg);
    }

    // Mixed advection and diffusion at a lower Courant number.
    let mut mixed = base_config("mixed", 10);
    mixed.field = FieldSpec::UniformRight { speed: 1.0 };
    mixed.advection_enabled = true;
    mixed.courant = 0.7;
    catalog.push(mixed);

    // Complex scenarios on the 20x20 grid, C = 0.5.
    let complex_base = |name: &str, field: FieldSpec| {
        let mut cfg = base_config(name, 20);
        cfg.field = field;
        cfg.advection_enabled = true;
        cfg.courant = 0.5;
        cfg
    };
    let ring_field = FieldSpec::Ring {
        r_inner_frac: 0.25,
        r_outer_frac: 0.45,
        ccw: true,
    };
    let rotation_field = FieldSpec::Rotation { ccw: false };
    let cross_field = FieldSpec::Cross {
        profile_width_frac: 0.15,
    };

    catalog.push(complex_base("ring", ring_field));
    let mut cfg = complex_base("ring-no-concurrent", ring_field);
    cfg.allow_concurrent = false;
    catalog.push(cfg);
    for m in [4usize, 10] {
        let mut cfg = complex_base(&format!("ring-M{m}"), ring_field);
        cfg.subsample = m;
        catalog.push(cfg);
    }
    // Scaled-down ring variants that finish quickly on one core.
    for m in [1usize, 10] {
        let mut cfg = complex_base(&format!("ring-12x12-M{m}"), ring_field);
        cfg.nx = 12;
        cfg.ny = 12;
        cfg.subsample = m;
        catalog.push(cfg);
    }

    catalog.push(complex_base("rotation", rotation_field));
    let mut cfg = complex_base("rotation-no-concurrent", rotation_field);
    cfg.allow_concurrent = false;
    catalog.push(cfg);

    catalog.push(complex_base("cross", cross_field));
    let mut cfg = complex_base("cross-no-concurrent", cross_field);
    cfg.allow_concurrent = false;
    catalog.push(cfg);

    catalog
}

pub fn find_scenario(name: &str) -> Option<ScenarioConfig> {
    builtin_scenarios().into_iter().find(|c| c.name == name)
}

/// Bundle provenance: configuration, versions, per-stage wall times, and the
/// first error if a stage failed.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Provenance {
    pub config: ScenarioConfig,
    pub version: String,
    pub stages: BTreeMap<String, StageRecord>,
    pub error: Option<StageFailure>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StageRecord {
    pub wall_seconds: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StageFailure {
    pub stage: String,
    pub message: String,
}

impl Provenance {
    fn new(config: ScenarioConfig) -> Self {
        Provenance {
            config,
            version: env!("CARGO_PKG_VERSION").to_string(),
            stages: BTreeMap::new(),
            error: None,
        }
    }

    pub fn path(dir: &Path) -> PathBuf {
        dir.join("provenance.json")
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        let path = Self::path(dir);
        let json = serde_json::to_string_pretty(self).map_err(|e| Error::Json {
            path: path.clone(),
            source: e,
        })?;
        fs::write(&path, json + "\n")?;
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Provenance> {
        let path = Self::path(dir);
        if !path.exists() {
            return Err(Error::MissingSidecar(path));
        }
        serde_json::from_str(&fs::read_to_string(&path)?).map_err(|e| Error::Json { path, source: e })
    }
}

/// Load a configuration from a JSON file holding either a bare
/// [`ScenarioConfig`] or a full bundle provenance.
pub fn load_config_file(path: &Path) -> Result<ScenarioConfig> {
    let text = fs::read_to_string(path)?;
    let value: serde_json::Value = serde_json::from_str(&text).map_err(|e| Error::Json {
        path: path.to_path_buf(),
        source: e,
    })?;
    let config_value = value.get("config").cloned().unwrap_or(value);
    serde_json::from_value(config_value).map_err(|e| Error::Json {
        path: path.to_path_buf(),
        source: e,
    })
}

fn dataset_base(dir: &Path, cfg: &ScenarioConfig) -> PathBuf {
    dir.join(format!(
        "{}_{}_M{}_seed{}",
        cfg.name,
        cfg.message.kind.label(),
        cfg.subsample,
        cfg.message.seed
    ))
}

/// Simulate the scenario: writes the velocity-field file and the dataset.
pub fn stage_simulate(cfg: &ScenarioConfig, dir: &Path) -> Result<()> {
    cfg.validate()?;
    fs::create_dir_all(dir)?;
    let started = Instant::now();
    let field = cfg.build_field()?;
    let params = cfg.sim_params(&field)?;
    let sched = cfg.schedule()?;
    let mut ds = generate_dataset(&field, &params, &cfg.message, &sched)?;
    ds.meta.scenario = cfg.name.clone();
    ds.meta.field_file = Some("field.csv".to_string());
    field.save(
        &VelocityField::bundle_base(dir),
        &cfg.name,
        cfg.field_params_json(),
    )?;
    ds.write(&dataset_base(dir, cfg))?;

    let mut prov = Provenance::new(cfg.clone());
    prov.stages.insert(
        "simulate".to_string(),
        StageRecord {
            wall_seconds: started.elapsed().as_secs_f64(),
        },
    );
    prov.save(dir)?;
    Ok(())
}

/// Run discovery on the bundle's dataset: writes the temporal graph and the
/// cost table.
pub fn stage_discover(dir: &Path) -> Result<DiscoveryStats> {
    let mut prov = Provenance::load(dir)?;
    let cfg = prov.config.clone();
    let started = Instant::now();
    let ds = Dataset::read(&dataset_base(dir, &cfg))?;
    let (graph, stats) = run_discovery(&ds, cfg.tiers, cfg.spacing, &cfg.prior(), &cfg.pc_options())?;
    fs::write(dir.join("temporal_graph.csv"), graph.to_csv(&ds.grid))?;
    fs::write(
        dir.join("stats.csv"),
        render_stats_table(&stats, TableFormat::Csv),
    )?;
    let json = serde_json::to_string_pretty(&stats).map_err(|e| Error::Json {
        path: dir.join("stats.csv"),
        source: e,
    })?;
    fs::write(dir.join("discovery_stats.json"), json + "\n")?;
    prov.stages.insert(
        "discover".to_string(),
        StageRecord {
            wall_seconds: started.elapsed().as_secs_f64(),
        },
    );
    prov.save(dir)?;
    Ok(stats)
}

/// Collapse the temporal graph into the location-level summary graph.
pub fn stage_analyze(dir: &Path) -> Result<()> {
    let mut prov = Provenance::load(dir)?;
    let cfg = prov.config.clone();
    let started = Instant::now();
    let ds = Dataset::read(&dataset_base(dir, &cfg))?;
    let text = fs::read_to_string(dir.join("temporal_graph.csv"))?;
    let graph = TemporalGraph::from_csv(&ds.grid, cfg.tiers, &text)?;
    let sg = summarize(
        &graph,
        ds.grid,
        ds.dt_data,
        cfg.discard_earliest,
        cfg.weak_quantile,
    );
    fs::write(dir.join("summary_graph.csv"), sg.to_csv())?;
    prov.stages.insert(
        "analyze".to_string(),
        StageRecord {
            wall_seconds: started.elapsed().as_secs_f64(),
        },
    );
    prov.save(dir)?;
    Ok(())
}

/// Render the figure suite and the markdown cost table.
pub fn stage_report(dir: &Path) -> Result<()> {
    let mut prov = Provenance::load(dir)?;
    let cfg = prov.config.clone();
    let started = Instant::now();
    let ds = Dataset::read(&dataset_base(dir, &cfg))?;
    let text = fs::read_to_string(dir.join("summary_graph.csv"))?;
    let sg = SummaryGraph::from_csv(
        ds.grid,
        ds.dt_data,
        cfg.tiers,
        cfg.discard_earliest,
        &text,
    )?;
    let style = cfg.plot_style();
    for t in 1..=4 {
        fs::write(
            dir.join(format!("intra_T{t}.svg")),
            render_intra_plot(&sg, t, &style),
        )?;
    }
    for t in 0..=3 {
        fs::write(
            dir.join(format!("inter_T{t}.svg")),
            render_inter_plot(&sg, t, &style),
        )?;
    }
    let v1 = velocity_type1(&sg, cfg.max_lag_for_velocity);
    let v2 = velocity_type2(&sg, cfg.max_lag_for_velocity);
    fs::write(dir.join("velocity_type1.svg"), render_velocity_plot(&v1, &style))?;
    fs::write(dir.join("velocity_type2.svg"), render_velocity_plot(&v2, &style))?;
    if let Ok(stats_json) = fs::read_to_string(dir.join("discovery_stats.json")) {
        let stats: DiscoveryStats =
            serde_json::from_str(&stats_json).map_err(|e| Error::Json {
                path: dir.join("discovery_stats.json"),
                source: e,
            })?;
        fs::write(
            dir.join("stats.md"),
            render_stats_table(&stats, TableFormat::Markdown),
        )?;
    }
    prov.stages.insert(
        "report".to_string(),
        StageRecord {
            wall_seconds: started.elapsed().as_secs_f64(),
        },
    );
    prov.save(dir)?;
    Ok(())
}

/// Run all four stages, aborting on the first failure with the stage name and
/// persisting partial provenance.
pub fn pipeline(cfg: &ScenarioConfig, dir: &Path) -> Result<()> {
    run_stage(dir, "simulate", || stage_simulate(cfg, dir))?;
    run_stage(dir, "discover", || stage_discover(dir).map(|_| ()))?;
    run_stage(dir, "analyze", || stage_analyze(dir))?;
    run_stage(dir, "report", || stage_report(dir))
}

fn run_stage(dir: &Path, name: &'static str, f: impl FnOnce() -> Result<()>) -> Result<()> {
    f().map_err(|e| {
        if let Ok(mut prov) = Provenance::load(dir) {
            prov.error = Some(StageFailure {
                stage: name.to_string(),
                message: e.to_string(),
            });
            let _ = prov.save(dir);
        }
        Error::in_stage(name)(e)
    })
}
