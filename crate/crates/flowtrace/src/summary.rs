//! Location-level summary of the temporal graph.
//!
//! Lagged edges are collapsed onto (source point, destination point, lag T)
//! triples, merging duplicate tier pairs with mean strength. Edges are
//! classified intra (same location, later time), concurrent inter (different
//! locations, same tier, undirected) or nonconcurrent inter (different
//! locations, directed older to newer). Velocity estimates take the
//! strength-weighted mean of incoming displacement rates; Type 1 uses only
//! nonconcurrent inter edges, Type 2 mixes in intra edges as zero-displacement
//! contributions that shrink magnitudes without changing directions.

use serde::{Deserialize, Serialize};

use crate::discovery::TemporalGraph;
use crate::error::{Error, Result};
use crate::grid::{GridSpec, PointIndex};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EdgeClass {
    Intra,
    ConcurrentInter,
    NonconcurrentInter,
}

impl EdgeClass {
    pub fn label(&self) -> &'static str {
        match self {
            EdgeClass::Intra => "intra",
            EdgeClass::ConcurrentInter => "concurrent-inter",
            EdgeClass::NonconcurrentInter => "nonconcurrent-inter",
        }
    }
}

/// One summary edge. `lag` counts data steps; lag 0 edges are undirected and
/// always connect distinct points, lag > 0 edges are directed src -> dst.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SummaryEdge {
    pub src: PointIndex,
    pub dst: PointIndex,
    pub lag: usize,
    pub directed: bool,
    pub strength: f64,
    pub weak: bool,
    /// Number of tier pairs merged into this edge.
    pub multiplicity: usize,
    pub class: EdgeClass,
    /// Nonconcurrent edge at lag > 1 duplicating the direction and speed of a
    /// lag-1 edge into the same destination.
    pub echo: bool,
}

#[derive(Debug, Clone)]
pub struct SummaryGraph {
    pub grid: GridSpec,
    pub dt_data: f64,
    pub tiers: usize,
    pub discarded_tiers: usize,
    pub edges: Vec<SummaryEdge>,
}

/// Echo tolerance: same direction within 15 degrees, speed ratio within 25%.
const ECHO_ANGLE_DEG: f64 = 15.0;
const ECHO_SPEED_TOL: f64 = 0.25;

/// Collapse the temporal graph into summary edges.
///
/// Edges incident to the `discard_earliest` oldest tiers are dropped first
/// (initialization artifact of the lagged model). `weak_quantile` sets the
/// weak flag: an edge is weak iff its strength falls below that quantile of
/// all merged strengths.
pub fn summarize(
    g: &TemporalGraph,
    grid: GridSpec,
    dt_data: f64,
    discard_earliest: usize,
    weak_quantile: f64,
) -> SummaryGraph {
    assert!(discard_earliest < g.tiers, "cannot discard every tier");
    let keep_below = g.tiers - discard_earliest;

    // Merge over tier pairs: key (src point, dst point, lag).
    use std::collections::BTreeMap;
    let mut merged: BTreeMap<(usize, usize, usize), (f64, usize)> = BTreeMap::new();
    for e in &g.edges {
        if e.src.tier >= keep_below || e.dst.tier >= keep_below {
            continue;
        }
        let lag = e.src.tier - e.dst.tier; // 0 for concurrent edges
        let key = if lag == 0 {
            // Undirected: canonical point order.
            (e.src.point.min(e.dst.point), e.src.point.max(e.dst.point), 0)
        } else {
            (e.src.point, e.dst.point, lag)
        };
        let entry = merged.entry(key).or_insert((0.0, 0));
        entry.0 += e.strength;
        entry.1 += 1;
    }

    let mut edges: Vec<SummaryEdge> = merged
        .into_iter()
        .map(|((src, dst, lag), (strength_sum, count))| {
            let class = if src == dst {
                EdgeClass::Intra
            } else if lag == 0 {
                EdgeClass::ConcurrentInter
            } else {
                EdgeClass::NonconcurrentInter
            };
            SummaryEdge {
                src: grid.point_at(src),
                dst: grid.point_at(dst),
                lag,
                directed: lag > 0,
                strength: strength_sum / count as f64,
                weak: false,
                multiplicity: count,
                class,
                echo: false,
            }
        })
        .collect();

    apply_weak_flags(&mut edges, weak_quantile);
    let mut sg = SummaryGraph {
        grid,
        dt_data,
        tiers: g.tiers,
        discarded_tiers: discard_earliest,
        edges,
    };
    tag_echo_edges(&mut sg);
    sg
}

fn apply_weak_flags(edges: &mut [SummaryEdge], weak_quantile: f64) {
    if edges.is_empty() {
        return;
    }
    let mut strengths: Vec<f64> = edges.iter().map(|e| e.strength).collect();
    strengths.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let idx = ((strengths.len() - 1) as f64 * weak_quantile).floor() as usize;
    let threshold = strengths[idx];
    for e in edges.iter_mut() {
        e.weak = e.strength < threshold;
    }
}

fn tag_echo_edges(sg: &mut SummaryGraph) {
    let grid = sg.grid;
    let dt = sg.dt_data;
    let lag1: Vec<(PointIndex, f64, f64)> = sg
        .edges
        .iter()
        .filter(|e| e.class == EdgeClass::NonconcurrentInter && e.lag == 1)
        .map(|e| {
            let (dx, dy) = grid.min_image_displacement(e.src, e.dst);
            (e.dst, dx / dt, dy / dt)
        })
        .collect();
    for e in sg.edges.iter_mut() {
        if e.class != EdgeClass::NonconcurrentInter || e.lag <= 1 {
            continue;
        }
        let (dx, dy) = grid.min_image_displacement(e.src, e.dst);
        let t = e.lag as f64 * dt;
        let (vx, vy) = (dx / t, dy / t);
        let speed = vx.hypot(vy);
        if speed == 0.0 {
            continue;
        }
        e.echo = lag1.iter().any(|&(dst, ux, uy)| {
            if dst != e.dst {
                return false;
            }
            let ref_speed = ux.hypot(uy);
            if ref_speed == 0.0 {
                return false;
            }
            let cos = (vx * ux + vy * uy) / (speed * ref_speed);
            let angle_ok = cos >= (ECHO_ANGLE_DEG.to_radians()).cos();
            let ratio = speed / ref_speed;
            angle_ok && (ratio - 1.0).abs() <= ECHO_SPEED_TOL
        });
    }
}

impl SummaryGraph {
    /// CSV export, one row per edge.
    pub fn to_csv(&self) -> String {
        let mut out =
            String::from("src_j,src_k,dst_j,dst_k,lag,directed,strength,weak,multiplicity,class\n");
        for e in &self.edges {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{}\n",
                e.src.j,
                e.src.k,
                e.dst.j,
                e.dst.k,
                e.lag,
                e.directed,
                e.strength,
                e.weak,
                e.multiplicity,
                e.class.label()
            ));
        }
        out
    }

    /// Parse a CSV written by [`SummaryGraph::to_csv`]; echo tags are
    /// recomputed from the edges.
    pub fn from_csv(
        grid: GridSpec,
        dt_data: f64,
        tiers: usize,
        discarded_tiers: usize,
        text: &str,
    ) -> Result<SummaryGraph> {
        let mut lines = text.lines();
        let header = lines.next().unwrap_or_default();
        if header != "src_j,src_k,dst_j,dst_k,lag,directed,strength,weak,multiplicity,class" {
            return Err(Error::config(format!(
                "unexpected summary graph header: {header}"
            )));
        }
        let mut edges = Vec::new();
        for (lineno, line) in lines.enumerate() {
            let cols: Vec<&str> = line.split(',').collect();
            if cols.len() != 10 {
                return Err(Error::config(format!(
                    "summary line {}: expected 10 columns",
                    lineno + 2
                )));
            }
            let bad = |e: String| Error::config(format!("summary line {}: {e}", lineno + 2));
            let p = |s: &str| s.parse::<usize>().map_err(|e| bad(e.to_string()));
            let class = match cols[9] {
                "intra" => EdgeClass::Intra,
                "concurrent-inter" => EdgeClass::ConcurrentInter,
                "nonconcurrent-inter" => EdgeClass::NonconcurrentInter,
                other => return Err(bad(format!("unknown class {other}"))),
            };
            edges.push(SummaryEdge {
                src: PointIndex::new(p(cols[0])?, p(cols[1])?),
                dst: PointIndex::new(p(cols[2])?, p(cols[3])?),
                lag: p(cols[4])?,
                directed: cols[5] == "true",
                strength: cols[6].parse().map_err(|e: std::num::ParseFloatError| bad(e.to_string()))?,
                weak: cols[7] == "true",
                multiplicity: p(cols[8])?,
                class,
                echo: false,
            });
        }
        let mut sg = SummaryGraph {
            grid,
            dt_data,
            tiers,
            discarded_tiers,
            edges,
        };
        tag_echo_edges(&mut sg);
        Ok(sg)
    }

    pub fn edges_of_class(&self, class: EdgeClass) -> impl Iterator<Item = &SummaryEdge> {
        self.edges.iter().filter(move |e| e.class == class)
    }

    /// Concurrent edges incident to a point, as (other endpoint, edge).
    pub fn concurrent_at(&self, p: PointIndex) -> Vec<(PointIndex, &SummaryEdge)> {
        self.edges_of_class(EdgeClass::ConcurrentInter)
            .filter_map(move |e| {
                if e.src == p {
                    Some((e.dst, e))
                } else if e.dst == p {
                    Some((e.src, e))
                } else {
                    None
                }
            })
            .collect()
    }
}

/// Reconstructed flow vector per grid point.
#[derive(Debug, Clone)]
pub struct VelocityEstimateField {
    pub grid: GridSpec,
    pub vx: Vec<f64>,
    pub vy: Vec<f64>,
    /// Set when every contributing edge is weak.
    pub weak: Vec<bool>,
    /// Total strength of contributing edges; zero means no estimate.
    pub weight: Vec<f64>,
}

impl VelocityEstimateField {
    pub fn magnitude(&self, i: usize) -> f64 {
        self.vx[i].hypot(self.vy[i])
    }

    pub fn mean_magnitude(&self) -> f64 {
        let n = self.grid.n_points() as f64;
        (0..self.grid.n_points()).map(|i| self.magnitude(i)).sum::<f64>() / n
    }
}

/// Type-1 estimate: strength-weighted mean of incoming nonconcurrent inter
/// edge displacement rates. `max_lag` restricts which lags contribute
/// (echo-dominated graphs are sometimes better summarized by lag 1 only).
pub fn velocity_type1(sg: &SummaryGraph, max_lag: Option<usize>) -> VelocityEstimateField {
    velocity_estimate(sg, max_lag, false)
}

/// Type-2 estimate: as Type 1 plus intra edges contributing zero-displacement
/// vectors with their strengths.
pub fn velocity_type2(sg: &SummaryGraph, max_lag: Option<usize>) -> VelocityEstimateField {
    velocity_estimate(sg, max_lag, true)
}

fn velocity_estimate(
    sg: &SummaryGraph,
    max_lag: Option<usize>,
    include_intra: bool,
) -> VelocityEstimateField {
    let grid = sg.grid;
    let n = grid.n_points();
    let mut sum_wx = vec![0.0; n];
    let mut sum_wy = vec![0.0; n];
    let mut weight = vec![0.0; n];
    let mut any_strong = vec![false; n];
    let mut any_edge = vec![false; n];
    for e in &sg.edges {
        if e.lag == 0 {
            continue; // concurrent edges have no direction
        }
        if let Some(cap) = max_lag {
            if e.lag > cap {
                continue;
            }
        }
        let is_intra = e.class == EdgeClass::Intra;
        if is_intra && !include_intra {
            continue;
        }
        let g = grid.index_of(e.dst);
        let (vx, vy) = if is_intra {
            (0.0, 0.0)
        } else {
            let (dx, dy) = grid.min_image_displacement(e.src, e.dst);
            let t = e.lag as f64 * sg.dt_data;
            (dx / t, dy / t)
        };
        sum_wx[g] += e.strength * vx;
        sum_wy[g] += e.strength * vy;
        weight[g] += e.strength;
        any_edge[g] = true;
        if !e.weak {
            any_strong[g] = true;
        }
    }
    let mut vx = vec![0.0; n];
    let mut vy = vec![0.0; n];
    let mut weak = vec![false; n];
    for i in 0..n {
        if weight[i] > 0.0 {
            vx[i] = sum_wx[i] / weight[i];
            vy[i] = sum_wy[i] / weight[i];
        }
        weak[i] = any_edge[i] && !any_strong[i];
    }
    VelocityEstimateField {
        grid,
        vx,
        vy,
        weak,
        weight,
    }
}

/// Per-point role of concurrent edges.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConcurrentSignature {
    /// No concurrent edges at the point.
    None,
    /// Connections within the 4-neighborhood covering an opposite-axis pair.
    DiffusionLike,
    /// A single direction aligned with the point's Type-1 flow.
    AdvectionLike,
    Other,
}

/// Classify the concurrent-edge pattern at every grid point.
pub fn classify_concurrent_signature(sg: &SummaryGraph) -> Vec<ConcurrentSignature> {
    let grid = sg.grid;
    let type1 = velocity_type1(sg, None);
    let mut labels = vec![ConcurrentSignature::None; grid.n_points()];
    for p in grid.points() {
        let incident = sg.concurrent_at(p);
        if incident.is_empty() {
            continue;
        }
        let i = grid.index_of(p);
        let displacements: Vec<(f64, f64)> = incident
            .iter()
            .map(|(other, _)| grid.min_image_displacement(p, *other))
            .collect();

        // Diffusion-like: all edges go to 4-neighbors and cover at least one
        // opposite pair along an axis.
        let all_four_neighbors = displacements.iter().all(|&(dx, dy)| {
            (dx.abs() == grid.dx && dy == 0.0) || (dx == 0.0 && dy.abs() == grid.dy)
        });
        if all_four_neighbors {
            let has = |tx: f64, ty: f64| {
                displacements
                    .iter()
                    .any(|&(dx, dy)| (dx - tx).abs() < 1e-9 && (dy - ty).abs() < 1e-9)
            };
            let opposite_x = has(grid.dx, 0.0) && has(-grid.dx, 0.0);
            let opposite_y = has(0.0, grid.dy) && has(0.0, -grid.dy);
            if opposite_x || opposite_y {
                labels[i] = ConcurrentSignature::DiffusionLike;
                continue;
            }
        }

        // Advection-like: one direction cluster aligned with the Type-1 flow.
        let (mut mx, mut my) = (0.0, 0.0);
        for &(dx, dy) in &displacements {
            let m = dx.hypot(dy);
            mx += dx / m;
            my += dy / m;
        }
        let mean_mag = mx.hypot(my);
        let cos45 = 45f64.to_radians().cos();
        let one_cluster = mean_mag > 0.0
            && displacements.iter().all(|&(dx, dy)| {
                let m = dx.hypot(dy);
                (dx * mx + dy * my) / (m * mean_mag) >= cos45
            });
        let flow_mag = type1.magnitude(i);
        if one_cluster && flow_mag > 0.0 {
            let cos = (mx * type1.vx[i] + my * type1.vy[i]) / (mean_mag * flow_mag);
            if cos >= cos45 {
                labels[i] = ConcurrentSignature::AdvectionLike;
                continue;
            }
        }
        labels[i] = ConcurrentSignature::Other;
    }
    labels
}
