//! Benchmark dataset persistence and the lagged-variable table.
//!
//! A dataset is the concatenation of per-run time series: one row per recorded
//! sample, one column per grid point (row-major, k outer). The lagged table
//! expands each grid point into `S` tier columns for the discovery stage;
//! tier `s` holds values lagged by `s` time slices, with `s = 0` the latest.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::GridSpec;

/// Concatenated per-run time series plus provenance metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub grid: GridSpec,
    /// `n_rows x n_points`; row = recorded sample, column = grid point.
    pub values: Array2<f64>,
    /// Recorded samples per run.
    pub run_len: usize,
    pub n_runs: usize,
    /// Seconds between recorded samples (`M * dt`).
    pub dt_data: f64,
    pub meta: DatasetMeta,
}

/// Provenance carried in the JSON sidecar along with the shape fields.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub scenario: String,
    pub message_kind: String,
    pub seed: u64,
    pub peak_amplitude: f64,
    pub forcing_sigma: f64,
    pub background_sigma: f64,
    pub kappa_x: f64,
    pub kappa_y: f64,
    pub courant: f64,
    /// Subsampling factor M: every Mth simulator step is recorded.
    pub subsample: usize,
    /// Simulator time step in seconds.
    pub dt: f64,
    pub advection_enabled: bool,
    /// Recording convention: states are recorded after each block of M steps,
    /// with forcing applied after the transport update within a step.
    pub recording: String,
    pub field_file: Option<String>,
    pub posterior_sigma: Option<f64>,
    pub posterior_seed: Option<u64>,
}

impl DatasetMeta {
    pub fn post_step_recording() -> String {
        "post-step states, every Mth".to_string()
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct DatasetSidecar {
    nx: usize,
    ny: usize,
    dx: f64,
    dy: f64,
    n_rows: usize,
    run_len: usize,
    n_runs: usize,
    dt_data: f64,
    meta: DatasetMeta,
}

impl Dataset {
    /// File stem following the bundle naming convention.
    pub fn file_stem(&self) -> String {
        format!(
            "{}_{}_M{}_seed{}",
            self.meta.scenario, self.meta.message_kind, self.meta.subsample, self.meta.seed
        )
    }

    /// Write `<base>.csv` and `<base>.json`. The CSV has header `p0,...,pN-1`
    /// and shortest round-trip decimal formatting, so a read reproduces the
    /// values bit-exactly.
    pub fn write(&self, base: &Path) -> Result<()> {
        let csv_path = base.with_extension("csv");
        let json_path = base.with_extension("json");
        let p = self.grid.n_points();
        let mut out = String::new();
        for i in 0..p {
            if i > 0 {
                out.push(',');
            }
            out.push('p');
            out.push_str(&i.to_string());
        }
        out.push('\n');
        for row in self.values.rows() {
            let mut first = true;
            for v in row {
                if !first {
                    out.push(',');
                }
                first = false;
                out.push_str(&format!("{v}"));
            }
            out.push('\n');
        }
        let mut f = fs::File::create(&csv_path)?;
        f.write_all(out.as_bytes())?;
        let sidecar = DatasetSidecar {
            nx: self.grid.nx,
            ny: self.grid.ny,
            dx: self.grid.dx,
            dy: self.grid.dy,
            n_rows: self.values.nrows(),
            run_len: self.run_len,
            n_runs: self.n_runs,
            dt_data: self.dt_data,
            meta: self.meta.clone(),
        };
        let json = serde_json::to_string_pretty(&sidecar).map_err(|e| Error::Json {
            path: json_path.clone(),
            source: e,
        })?;
        fs::write(&json_path, json + "\n")?;
        Ok(())
    }

    /// Read a dataset written by [`Dataset::write`].
    pub fn read(base: &Path) -> Result<Self> {
        let csv_path = base.with_extension("csv");
        let json_path = base.with_extension("json");
        if !json_path.exists() {
            return Err(Error::MissingSidecar(json_path));
        }
        let sidecar: DatasetSidecar =
            serde_json::from_str(&fs::read_to_string(&json_path)?).map_err(|e| Error::Json {
                path: json_path.clone(),
                source: e,
            })?;
        let grid = GridSpec::new(sidecar.nx, sidecar.ny, sidecar.dx, sidecar.dy)?;
        if sidecar.n_rows != sidecar.n_runs * sidecar.run_len {
            return Err(Error::Shape {
                path: json_path,
                detail: format!(
                    "n_rows={} but n_runs*run_len={}",
                    sidecar.n_rows,
                    sidecar.n_runs * sidecar.run_len
                ),
            });
        }
        let p = grid.n_points();
        let text = fs::read_to_string(&csv_path)?;
        let malformed = |detail: String| Error::Malformed {
            path: csv_path.clone(),
            detail,
        };
        let mut lines = text.lines();
        let header = lines
            .next()
            .ok_or_else(|| malformed("empty file".to_string()))?;
        let n_cols = header.split(',').count();
        if n_cols != p {
            return Err(Error::Shape {
                path: csv_path,
                detail: format!("{n_cols} columns for {p} grid points"),
            });
        }
        let mut values = Vec::with_capacity(sidecar.n_rows * p);
        let mut n_rows = 0usize;
        for (lineno, line) in lines.enumerate() {
            let mut cols = 0usize;
            for tok in line.split(',') {
                let v: f64 = tok
                    .parse()
                    .map_err(|e| malformed(format!("line {}: {e}", lineno + 2)))?;
                values.push(v);
                cols += 1;
            }
            if cols != p {
                return Err(malformed(format!(
                    "line {}: {cols} columns, expected {p}",
                    lineno + 2
                )));
            }
            n_rows += 1;
        }
        if n_rows != sidecar.n_rows {
            return Err(Error::Shape {
                path: csv_path,
                detail: format!("{} body rows, sidecar says {}", n_rows, sidecar.n_rows),
            });
        }
        let values = Array2::from_shape_vec((n_rows, p), values).expect("checked shape");
        Ok(Dataset {
            grid,
            values,
            run_len: sidecar.run_len,
            n_runs: sidecar.n_runs,
            dt_data: sidecar.dt_data,
            meta: sidecar.meta,
        })
    }

    pub fn bundle_base(dir: &Path) -> PathBuf {
        dir.join("dataset")
    }
}

/// Lagged-variable table: column `(point, tier)` at flat index
/// `point * tiers + tier`. Lag windows never cross run boundaries.
#[derive(Debug, Clone)]
pub struct LaggedTable {
    /// `rows x (n_points * tiers)`.
    pub values: Array2<f64>,
    pub grid: GridSpec,
    pub tiers: usize,
    /// Tier spacing D in data steps.
    pub spacing: usize,
    pub rows_per_run: usize,
    pub n_runs: usize,
    pub dt_data: f64,
    /// Variable held by each column, as a canonical node index
    /// `point * tiers + tier`. Identity after [`lag`]; tests permute it.
    pub column_vars: Vec<usize>,
}

impl LaggedTable {
    pub fn n_points(&self) -> usize {
        self.grid.n_points()
    }

    pub fn n_columns(&self) -> usize {
        self.grid.n_points() * self.tiers
    }

    pub fn n_rows(&self) -> usize {
        self.values.nrows()
    }

    /// Reorder columns by `perm` (column i of the result is column `perm[i]`
    /// of self), keeping the variable mapping consistent.
    pub fn permute_columns(&self, perm: &[usize]) -> LaggedTable {
        assert_eq!(perm.len(), self.n_columns());
        let mut values = Array2::zeros((self.n_rows(), self.n_columns()));
        let mut column_vars = vec![0; self.n_columns()];
        for (new_c, &old_c) in perm.iter().enumerate() {
            values.column_mut(new_c).assign(&self.values.column(old_c));
            column_vars[new_c] = self.column_vars[old_c];
        }
        LaggedTable {
            values,
            column_vars,
            ..self.clone()
        }
    }
}

/// Build the lagged table with `tiers` slices spaced `spacing` data steps
/// apart. Column `(p, s)` at lagged row `r` holds the dataset value of point
/// `p` at data row `r + (tiers-1-s)*spacing` within the run.
pub fn lag(ds: &Dataset, tiers: usize, spacing: usize) -> Result<LaggedTable> {
    if tiers < 1 || spacing < 1 {
        return Err(Error::config(format!(
            "need tiers >= 1 and spacing >= 1, got {tiers}, {spacing}"
        )));
    }
    let window = (tiers - 1) * spacing;
    if ds.run_len <= window {
        return Err(Error::RunTooShort {
            run_len: ds.run_len,
            required: window + 1,
        });
    }
    let p = ds.grid.n_points();
    let rows_per_run = ds.run_len - window;
    let n_rows = rows_per_run * ds.n_runs;
    let mut values = Array2::zeros((n_rows, p * tiers));
    for run in 0..ds.n_runs {
        let run_base = run * ds.run_len;
        for r in 0..rows_per_run {
            let out_row = run * rows_per_run + r;
            for point in 0..p {
                for s in 0..tiers {
                    let data_row = run_base + r + (tiers - 1 - s) * spacing;
                    values[[out_row, point * tiers + s]] = ds.values[[data_row, point]];
                }
            }
        }
    }
    Ok(LaggedTable {
        values,
        grid: ds.grid,
        tiers,
        spacing,
        rows_per_run,
        n_runs: ds.n_runs,
        dt_data: ds.dt_data,
        column_vars: (0..p * tiers).collect(),
    })
}
