//! Temporal PC-stable structure search over the lagged-variable graph.
//!
//! Nodes are (grid point, tier) pairs. The search starts from the complete
//! graph over admissible pairs — cross-tier pairs always, same-tier pairs only
//! when concurrent edges are allowed — and removes edges by conditional-
//! independence testing in increasing conditioning-set order. Within one order
//! every test conditions on the adjacency snapshot frozen at the start of the
//! order and removals are applied at the end, which makes the result
//! independent of edge processing order and of the number of worker threads.
//!
//! Variable order independence: columns are first canonicalized to node order,
//! so a permuted input table yields bit-identical correlations, test counts,
//! and skeleton.
//!
//! Cost instrumentation counts every CI test executed. Order 0 runs exactly
//! one test per admissible pair (the empty conditioning set is the same from
//! both sides); higher orders enumerate size-l subsets of the snapshot
//! neighborhood of X (excluding Y), then of Y (excluding X), in lexicographic
//! node order, stopping at the first independence.

use std::time::Instant;

use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ci::{r_threshold, CiOutcome, CorrCache, PcorrScratch};
use crate::dataset::{lag, Dataset, LaggedTable};
use crate::error::{Error, Result};
use crate::grid::{GridSpec, PointIndex};

/// One lagged variable: a grid point at a tier (tier 0 is the latest slice).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct NodeId {
    pub point: usize,
    pub tier: usize,
}

impl NodeId {
    pub fn index(&self, tiers: usize) -> usize {
        self.point * tiers + self.tier
    }

    pub fn from_index(idx: usize, tiers: usize) -> NodeId {
        NodeId {
            point: idx / tiers,
            tier: idx % tiers,
        }
    }
}

/// Temporal prior knowledge: causes occur before or at the same time as their
/// effects. Forbidding concurrent edges tightens "at the same time" away.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TemporalPrior {
    pub allow_concurrent: bool,
}

impl TemporalPrior {
    pub fn admissible(&self, a: NodeId, b: NodeId) -> bool {
        a != b && (a.tier != b.tier || self.allow_concurrent)
    }
}

/// Search options. `max_order` is a safety ceiling; the search normally
/// terminates on its own well below it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PcOptions {
    pub alpha: f64,
    pub max_order: usize,
}

impl Default for PcOptions {
    fn default() -> Self {
        PcOptions {
            alpha: 0.05,
            max_order: 25,
        }
    }
}

/// Undirected skeleton: surviving edges with strengths, plus the removal log.
pub struct Skeleton {
    pub n_points: usize,
    pub tiers: usize,
    /// Surviving edges, `a < b` in canonical node index order.
    pub edges: Vec<SkeletonEdge>,
    removed: Vec<RemovedEdge>,
    sep_pool: Vec<u32>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SkeletonEdge {
    pub a: u32,
    pub b: u32,
    /// Minimum |partial correlation| over every test run on this pair.
    pub strength: f64,
}

#[derive(Debug, Clone, Copy)]
struct RemovedEdge {
    a: u32,
    b: u32,
    order: u16,
    singular: bool,
    sep_off: u32,
    sep_len: u16,
}

/// View of one removal: the pair, the order, and the separating set whose
/// independence verdict removed it.
#[derive(Debug, Clone, Copy)]
pub struct RemovalRecord<'a> {
    pub a: u32,
    pub b: u32,
    pub order: usize,
    /// The verdict came from a collinear conditioning set rather than a test
    /// statistic.
    pub singular: bool,
    pub sepset: &'a [u32],
}

impl Skeleton {
    pub fn n_nodes(&self) -> usize {
        self.n_points * self.tiers
    }

    pub fn node(&self, idx: u32) -> NodeId {
        NodeId::from_index(idx as usize, self.tiers)
    }

    pub fn removals(&self) -> impl Iterator<Item = RemovalRecord<'_>> {
        self.removed.iter().map(|r| RemovalRecord {
            a: r.a,
            b: r.b,
            order: r.order as usize,
            singular: r.singular,
            sepset: &self.sep_pool[r.sep_off as usize..r.sep_off as usize + r.sep_len as usize],
        })
    }
}

/// Per-order cost counters in the shape of the cost tables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderStats {
    pub order: usize,
    pub tests: u64,
    pub edges_after: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscoveryStats {
    pub per_order: Vec<OrderStats>,
    /// Highest order the search considered (its row may show zero tests).
    pub max_order: usize,
    pub final_edges: usize,
    pub wall_seconds: f64,
    /// Edges removed because a conditioning submatrix was collinear.
    pub singular_removals: u64,
    pub n_nodes: usize,
}

/// Outcome of processing one edge within an order level.
enum EdgeOutcome {
    Kept { tests: u64, min_abs_r: f64 },
    Removed { tests: u64, sepset: Vec<u32>, singular: bool },
}

/// PC-stable skeleton search over the lagged table under a temporal prior.
pub fn pc_stable_skeleton(
    table: &LaggedTable,
    prior: &TemporalPrior,
    opts: &PcOptions,
) -> Result<(Skeleton, DiscoveryStats)> {
    let cache = canonical_cache(table);
    pc_stable_with_cache(&cache, table.n_points(), table.tiers, prior, opts)
}

/// Build the correlation cache with columns in canonical node order, so the
/// search is invariant to the table's column permutation.
pub fn canonical_cache(table: &LaggedTable) -> CorrCache {
    let p = table.n_columns();
    let identity = table.column_vars.iter().enumerate().all(|(i, &v)| i == v);
    if identity {
        return CorrCache::from_table(table);
    }
    let mut pos_of_var = vec![usize::MAX; p];
    for (pos, &var) in table.column_vars.iter().enumerate() {
        pos_of_var[var] = pos;
    }
    let mut canon = Array2::zeros((table.n_rows(), p));
    for var in 0..p {
        canon
            .column_mut(var)
            .assign(&table.values.column(pos_of_var[var]));
    }
    CorrCache::from_view(canon.view())
}

pub fn pc_stable_with_cache(
    cache: &CorrCache,
    n_points: usize,
    tiers: usize,
    prior: &TemporalPrior,
    opts: &PcOptions,
) -> Result<(Skeleton, DiscoveryStats)> {
    let started = Instant::now();
    let p = n_points * tiers;
    assert_eq!(cache.n_cols(), p);
    let n = cache.n_rows();
    if n < 5 {
        return Err(Error::config(format!(
            "lagged table has only {n} rows; too few for any CI test"
        )));
    }
    if !(opts.alpha > 0.0 && opts.alpha < 1.0) {
        return Err(Error::config(format!(
            "alpha must be in (0, 1), got {}",
            opts.alpha
        )));
    }

    let mut per_order: Vec<OrderStats> = Vec::new();
    let mut singular_removals: u64 = 0;
    let mut removed: Vec<RemovedEdge> = Vec::new();
    let mut sep_pool: Vec<u32> = Vec::new();

    // Order 0: one test per admissible pair.
    let thr0 = r_threshold(n, 0, opts.alpha);
    let mut edges: Vec<(u32, u32)> = Vec::new();
    let mut strengths: Vec<f64> = Vec::new();
    let mut tests0: u64 = 0;
    {
        let mut scratch = PcorrScratch::default();
        for a in 0..p {
            let node_a = NodeId::from_index(a, tiers);
            for b in (a + 1)..p {
                let node_b = NodeId::from_index(b, tiers);
                if !prior.admissible(node_a, node_b) {
                    continue;
                }
                tests0 += 1;
                match cache.decide(a, b, &[], thr0, &mut scratch) {
                    CiOutcome::Dependent { r } => {
                        edges.push((a as u32, b as u32));
                        strengths.push(r.abs());
                    }
                    CiOutcome::Independent { .. } => {
                        removed.push(RemovedEdge {
                            a: a as u32,
                            b: b as u32,
                            order: 0,
                            singular: false,
                            sep_off: sep_pool.len() as u32,
                            sep_len: 0,
                        });
                    }
                    CiOutcome::Collinear => unreachable!("order 0 cannot be collinear"),
                }
            }
        }
    }
    per_order.push(OrderStats {
        order: 0,
        tests: tests0,
        edges_after: edges.len(),
    });

    // Higher orders.
    let mut order = 0usize;
    loop {
        order += 1;
        if order > opts.max_order || n < order + 4 {
            break; // ceiling reached; stats keep the last order actually run
        }
        // Frozen adjacency snapshot for this order.
        let mut adj: Vec<Vec<u32>> = vec![Vec::new(); p];
        for &(a, b) in &edges {
            adj[a as usize].push(b);
            adj[b as usize].push(a);
        }
        for list in adj.iter_mut() {
            list.sort_unstable();
        }
        let qualifies = edges
            .iter()
            .any(|&(a, b)| adj[a as usize].len() > order || adj[b as usize].len() > order);
        let thr = r_threshold(n, order, opts.alpha);

        let outcomes: Vec<EdgeOutcome> = if qualifies {
            edges
                .par_iter()
                .map_init(PcorrScratch::default, |scratch, &(a, b)| {
                    process_edge(cache, &adj, a, b, order, thr, scratch)
                })
                .collect()
        } else {
            Vec::new()
        };

        let mut tests: u64 = 0;
        if !outcomes.is_empty() {
            let mut kept_edges = Vec::with_capacity(edges.len());
            let mut kept_strengths = Vec::with_capacity(edges.len());
            for (idx, outcome) in outcomes.into_iter().enumerate() {
                let (a, b) = edges[idx];
                match outcome {
                    EdgeOutcome::Kept { tests: t, min_abs_r } => {
                        tests += t;
                        kept_edges.push((a, b));
                        kept_strengths.push(strengths[idx].min(min_abs_r));
                    }
                    EdgeOutcome::Removed {
                        tests: t,
                        sepset,
                        singular,
                    } => {
                        tests += t;
                        if singular {
                            singular_removals += 1;
                        }
                        let sep_off = sep_pool.len() as u32;
                        let sep_len = sepset.len() as u16;
                        sep_pool.extend_from_slice(&sepset);
                        removed.push(RemovedEdge {
                            a,
                            b,
                            order: order as u16,
                            singular,
                            sep_off,
                            sep_len,
                        });
                    }
                }
            }
            edges = kept_edges;
            strengths = kept_strengths;
        }
        per_order.push(OrderStats {
            order,
            tests,
            edges_after: edges.len(),
        });
        if !qualifies {
            break;
        }
    }

    let final_edges = edges.len();
    let skeleton = Skeleton {
        n_points,
        tiers,
        edges: edges
            .into_iter()
            .zip(strengths)
            .map(|((a, b), strength)| SkeletonEdge { a, b, strength })
            .collect(),
        removed,
        sep_pool,
    };
    let stats = DiscoveryStats {
        max_order: per_order.last().map(|o| o.order).unwrap_or(0),
        final_edges,
        wall_seconds: started.elapsed().as_secs_f64(),
        singular_removals,
        per_order,
        n_nodes: p,
    };
    Ok((skeleton, stats))
}

/// Run the order-l tests for one edge against the frozen snapshot.
fn process_edge(
    cache: &CorrCache,
    adj: &[Vec<u32>],
    a: u32,
    b: u32,
    order: usize,
    thr: f64,
    scratch: &mut PcorrScratch,
) -> EdgeOutcome {
    let mut tests: u64 = 0;
    let mut min_abs_r = f64::INFINITY;
    let mut neighbors: Vec<u32> = Vec::new();
    let mut cond: Vec<usize> = vec![0; order];
    let mut removal: Option<(Vec<u32>, bool)> = None;

    'sides: for (from, other) in [(a, b), (b, a)] {
        neighbors.clear();
        neighbors.extend(adj[from as usize].iter().copied().filter(|&m| m != other));
        if neighbors.len() < order {
            continue;
        }
        // Lexicographic subset enumeration over the sorted neighbor list.
        let mut idx: Vec<usize> = (0..order).collect();
        loop {
            for (slot, &i) in cond.iter_mut().zip(idx.iter()) {
                *slot = neighbors[i] as usize;
            }
            tests += 1;
            match cache.decide(a as usize, b as usize, &cond, thr, scratch) {
                CiOutcome::Dependent { r } => {
                    min_abs_r = min_abs_r.min(r.abs());
                }
                CiOutcome::Independent { .. } => {
                    removal = Some((idx.iter().map(|&i| neighbors[i]).collect(), false));
                    break 'sides;
                }
                CiOutcome::Collinear => {
                    removal = Some((idx.iter().map(|&i| neighbors[i]).collect(), true));
                    break 'sides;
                }
            }
            if !advance_combination(&mut idx, neighbors.len()) {
                break;
            }
        }
    }

    match removal {
        Some((sepset, singular)) => EdgeOutcome::Removed {
            tests,
            sepset,
            singular,
        },
        None => EdgeOutcome::Kept { tests, min_abs_r },
    }
}

/// Step `idx` to the next k-combination of `{0, .., n-1}` in lexicographic
/// order; false when exhausted.
fn advance_combination(idx: &mut [usize], n: usize) -> bool {
    let k = idx.len();
    let mut pos = k;
    while pos > 0 {
        pos -= 1;
        if idx[pos] != pos + n - k {
            idx[pos] += 1;
            for q in pos + 1..k {
                idx[q] = idx[q - 1] + 1;
            }
            return true;
        }
    }
    false
}

/// Temporal graph: the skeleton with cross-tier edges directed older → newer.
#[derive(Debug, Clone, PartialEq)]
pub struct TemporalGraph {
    pub n_points: usize,
    pub tiers: usize,
    pub edges: Vec<TemporalEdge>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TemporalEdge {
    pub src: NodeId,
    pub dst: NodeId,
    /// False only for same-tier (concurrent) edges.
    pub directed: bool,
    pub strength: f64,
}

/// Orient the skeleton by temporal order: every cross-tier edge points from
/// the older tier (larger s) to the newer; same-tier edges stay undirected.
pub fn orient(skel: &Skeleton) -> TemporalGraph {
    let edges = skel
        .edges
        .iter()
        .map(|e| {
            let x = skel.node(e.a);
            let y = skel.node(e.b);
            let (src, dst, directed) = if x.tier == y.tier {
                (x.min(y), x.max(y), false)
            } else if x.tier > y.tier {
                (x, y, true)
            } else {
                (y, x, true)
            };
            TemporalEdge {
                src,
                dst,
                directed,
                strength: e.strength,
            }
        })
        .collect();
    TemporalGraph {
        n_points: skel.n_points,
        tiers: skel.tiers,
        edges,
    }
}

impl TemporalGraph {
    /// CSV export: one row per edge with grid coordinates.
    pub fn to_csv(&self, grid: &GridSpec) -> String {
        let mut out = String::from("src_j,src_k,src_tier,dst_j,dst_k,dst_tier,directed,strength\n");
        for e in &self.edges {
            let s = grid.point_at(e.src.point);
            let d = grid.point_at(e.dst.point);
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{}\n",
                s.j, s.k, e.src.tier, d.j, d.k, e.dst.tier, e.directed, e.strength
            ));
        }
        out
    }

    pub fn from_csv(grid: &GridSpec, tiers: usize, text: &str) -> Result<TemporalGraph> {
        let mut lines = text.lines();
        let header = lines.next().unwrap_or_default();
        if header != "src_j,src_k,src_tier,dst_j,dst_k,dst_tier,directed,strength" {
            return Err(Error::config(format!(
                "unexpected temporal graph header: {header}"
            )));
        }
        let mut edges = Vec::new();
        for (lineno, line) in lines.enumerate() {
            let cols: Vec<&str> = line.split(',').collect();
            if cols.len() != 8 {
                return Err(Error::config(format!(
                    "temporal graph line {}: expected 8 columns",
                    lineno + 2
                )));
            }
            let parse_usize = |s: &str| {
                s.parse::<usize>()
                    .map_err(|e| Error::config(format!("line {}: {e}", lineno + 2)))
            };
            let src = NodeId {
                point: grid.index_of(PointIndex::new(parse_usize(cols[0])?, parse_usize(cols[1])?)),
                tier: parse_usize(cols[2])?,
            };
            let dst = NodeId {
                point: grid.index_of(PointIndex::new(parse_usize(cols[3])?, parse_usize(cols[4])?)),
                tier: parse_usize(cols[5])?,
            };
            let directed = cols[6] == "true";
            let strength: f64 = cols[7]
                .parse()
                .map_err(|e| Error::config(format!("line {}: {e}", lineno + 2)))?;
            edges.push(TemporalEdge {
                src,
                dst,
                directed,
                strength,
            });
        }
        Ok(TemporalGraph {
            n_points: grid.n_points(),
            tiers,
            edges,
        })
    }
}

/// Lag, search, and orient in one call, timing the whole pass.
pub fn run_discovery(
    ds: &Dataset,
    tiers: usize,
    spacing: usize,
    prior: &TemporalPrior,
    opts: &PcOptions,
) -> Result<(TemporalGraph, DiscoveryStats)> {
    let started = Instant::now();
    let table = lag(ds, tiers, spacing)?;
    let (skel, mut stats) = pc_stable_skeleton(&table, prior, opts)?;
    let graph = orient(&skel);
    stats.wall_seconds = started.elapsed().as_secs_f64();
    Ok((graph, stats))
}

/// Number of admissible node pairs under a prior; the order-0 test count.
pub fn admissible_pair_count(n_points: usize, tiers: usize, prior: &TemporalPrior) -> u64 {
    let p = (n_points * tiers) as u64;
    let all = p * (p - 1) / 2;
    if prior.allow_concurrent {
        all
    } else {
        let np = n_points as u64;
        all - tiers as u64 * np * (np - 1) / 2
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::DatasetMeta;
    use rand::SeedableRng;
    use rand_distr::{Distribution, Normal};

    fn meta() -> DatasetMeta {
        DatasetMeta {
            scenario: "synthetic".into(),
            message_kind: "ic-peak".into(),
            seed: 0,
            peak_amplitude: 0.0,
            forcing_sigma: 0.0,
            background_sigma: 0.0,
            kappa_x: 0.0,
            kappa_y: 0.0,
            courant: 1.0,
            subsample: 1,
            dt: 1.0,
            advection_enabled: false,
            recording: DatasetMeta::post_step_recording(),
            field_file: None,
            posterior_sigma: None,
            posterior_seed: None,
        }
    }

    /// Single-run dataset with given per-point columns (one tier per use).
    fn dataset_from_columns(grid: GridSpec, cols: Vec<Vec<f64>>) -> Dataset {
        let n = cols[0].len();
        let mut values = Array2::zeros((n, cols.len()));
        for (c, col) in cols.iter().enumerate() {
            for (r, &v) in col.iter().enumerate() {
                values[[r, c]] = v;
            }
        }
        Dataset {
            grid,
            values,
            run_len: n,
            n_runs: 1,
            dt_data: 1.0,
            meta: meta(),
        }
    }

    #[test]
    fn admissible_counts_match_the_formulas() {
        let allow = TemporalPrior {
            allow_concurrent: true,
        };
        let forbid = TemporalPrior {
            allow_concurrent: false,
        };
        assert_eq!(admissible_pair_count(100, 20, &allow), 1_999_000);
        assert_eq!(admissible_pair_count(100, 20, &forbid), 1_900_000);
        // Cross-check the formula against explicit enumeration on a small case.
        for prior in [allow, forbid] {
            let (np, s) = (5, 3);
            let p = np * s;
            let mut count = 0u64;
            for a in 0..p {
                for b in (a + 1)..p {
                    if prior.admissible(NodeId::from_index(a, s), NodeId::from_index(b, s)) {
                        count += 1;
                    }
                }
            }
            assert_eq!(count, admissible_pair_count(np, s, &prior));
        }
    }

    #[test]
    fn chain_skeleton_and_separating_sets() {
        // Three "points" at a single tier carrying x -> y -> z.
        let grid = GridSpec::new(3, 2, 1.0, 1.0).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(12);
        let noise = Normal::new(0.0, 1.0).unwrap();
        let n = 4000;
        let mut cols = vec![Vec::with_capacity(n); 6];
        for _ in 0..n {
            let x: f64 = noise.sample(&mut rng);
            let y = 0.9 * x + 0.45 * noise.sample(&mut rng);
            let z = 0.9 * y + 0.45 * noise.sample(&mut rng);
            // Three informative points plus three independent noise points.
            cols[0].push(x);
            cols[1].push(y);
            cols[2].push(z);
            for q in 3..6 {
                cols[q].push(noise.sample(&mut rng));
            }
        }
        let ds = dataset_from_columns(grid, cols);
        let table = lag(&ds, 1, 1).unwrap();
        let prior = TemporalPrior {
            allow_concurrent: true,
        };
        let (skel, stats) = pc_stable_skeleton(&table, &prior, &PcOptions::default()).unwrap();
        let has = |a: u32, b: u32| skel.edges.iter().any(|e| (e.a, e.b) == (a, b));
        assert!(has(0, 1) && has(1, 2), "chain links survive");
        assert!(!has(0, 2), "endpoints separated by the middle");
        // The removal record for (0, 2) names node 1 as the separating set.
        let rec = skel
            .removals()
            .find(|r| (r.a, r.b) == (0, 2))
            .expect("edge (0,2) was removed");
        assert_eq!(rec.sepset, &[1]);
        assert_eq!(rec.order, 1);
        assert!(!rec.singular);
        assert_eq!(stats.per_order[0].tests, 15);
        // Certify: re-running every recorded removal reproduces the verdict.
        let cache = canonical_cache(&table);
        let mut scratch = PcorrScratch::default();
        for r in skel.removals() {
            let cond: Vec<usize> = r.sepset.iter().map(|&v| v as usize).collect();
            let thr = r_threshold(cache.n_rows(), r.order, 0.05);
            let verdict = cache.decide(r.a as usize, r.b as usize, &cond, thr, &mut scratch);
            if r.singular {
                assert_eq!(verdict, CiOutcome::Collinear);
            } else {
                assert!(matches!(verdict, CiOutcome::Independent { .. }));
            }
        }
    }

    #[test]
    fn stats_edges_are_monotone_nonincreasing() {
        let grid = GridSpec::new(3, 2, 1.0, 1.0).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let noise = Normal::new(0.0, 1.0).unwrap();
        let cols: Vec<Vec<f64>> = (0..6)
            .map(|_| (0..500).map(|_| noise.sample(&mut rng)).collect())
            .collect();
        let ds = dataset_from_columns(grid, cols);
        let table = lag(&ds, 2, 1).unwrap();
        let (_, stats) = pc_stable_skeleton(
            &table,
            &TemporalPrior {
                allow_concurrent: true,
            },
            &PcOptions::default(),
        )
        .unwrap();
        for w in stats.per_order.windows(2) {
            assert!(w[1].edges_after <= w[0].edges_after);
        }
        assert_eq!(stats.max_order, stats.per_order.last().unwrap().order);
    }

    #[test]
    fn white_noise_families_stay_unconnected() {
        // Two points of pure white noise expanded into tiers: edges between
        // the families are alpha-level false positives only.
        let grid = GridSpec::new(2, 2, 1.0, 1.0).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let noise = Normal::new(0.0, 1.0).unwrap();
        let n = 2000;
        let cols: Vec<Vec<f64>> = (0..4)
            .map(|_| (0..n).map(|_| noise.sample(&mut rng)).collect())
            .collect();
        let ds = dataset_from_columns(grid, cols);
        let tiers = 5;
        let table = lag(&ds, tiers, 1).unwrap();
        let alpha = 0.05;
        let (skel, _) = pc_stable_skeleton(
            &table,
            &TemporalPrior {
                allow_concurrent: true,
            },
            &PcOptions {
                alpha,
                ..Default::default()
            },
        )
        .unwrap();
        let cross_family = skel
            .edges
            .iter()
            .filter(|e| {
                let pa = skel.node(e.a).point;
                let pb = skel.node(e.b).point;
                (pa < 2) != (pb < 2)
            })
            .count();
        let cross_pairs = (2 * tiers) * (2 * tiers);
        let bound = (2.0 * alpha * cross_pairs as f64).ceil() as usize;
        assert!(
            cross_family <= bound,
            "{cross_family} cross-family edges exceeds 2*alpha bound {bound}"
        );
    }

    #[test]
    fn orientation_follows_tier_order() {
        let grid = GridSpec::new(2, 2, 1.0, 1.0).unwrap();
        let tiers = 4;
        let skel = Skeleton {
            n_points: grid.n_points(),
            tiers,
            edges: vec![
                SkeletonEdge {
                    a: NodeId { point: 0, tier: 3 }.index(tiers) as u32,
                    b: NodeId { point: 1, tier: 1 }.index(tiers) as u32,
                    strength: 0.5,
                },
                SkeletonEdge {
                    a: NodeId { point: 0, tier: 2 }.index(tiers) as u32,
                    b: NodeId { point: 2, tier: 2 }.index(tiers) as u32,
                    strength: 0.4,
                },
                SkeletonEdge {
                    a: NodeId { point: 3, tier: 0 }.index(tiers) as u32,
                    b: NodeId { point: 3, tier: 2 }.index(tiers) as u32,
                    strength: 0.9,
                },
            ],
            removed: Vec::new(),
            sep_pool: Vec::new(),
        };
        let g = orient(&skel);
        // Cross-tier edge directed from the older tier (larger s) to the newer.
        assert_eq!(g.edges[0].src, NodeId { point: 0, tier: 3 });
        assert_eq!(g.edges[0].dst, NodeId { point: 1, tier: 1 });
        assert!(g.edges[0].directed);
        // Same-tier edge stays undirected.
        assert!(!g.edges[1].directed);
        // Intra pair oriented older to newer.
        assert_eq!(g.edges[2].src, NodeId { point: 3, tier: 2 });
        assert_eq!(g.edges[2].dst, NodeId { point: 3, tier: 0 });
        // No edge points newer -> older.
        for e in &g.edges {
            if e.directed {
                assert!(e.src.tier > e.dst.tier);
            } else {
                assert_eq!(e.src.tier, e.dst.tier);
            }
        }
    }

    #[test]
    fn forbidding_concurrent_removes_same_tier_pairs_a_priori() {
        let grid = GridSpec::new(2, 2, 1.0, 1.0).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let noise = Normal::new(0.0, 1.0).unwrap();
        // Strongly coupled same-tier pair: identical columns plus noise.
        let base: Vec<f64> = (0..800).map(|_| noise.sample(&mut rng)).collect();
        let cols: Vec<Vec<f64>> = (0..4)
            .map(|c| {
                base.iter()
                    .map(|&v| v + 0.1 * (c as f64) + 0.2 * noise.sample(&mut rng))
                    .collect()
            })
            .collect();
        let ds = dataset_from_columns(grid, cols);
        let table = lag(&ds, 3, 1).unwrap();
        let (skel, _) = pc_stable_skeleton(
            &table,
            &TemporalPrior {
                allow_concurrent: false,
            },
            &PcOptions::default(),
        )
        .unwrap();
        for e in &skel.edges {
            assert_ne!(
                skel.node(e.a).tier,
                skel.node(e.b).tier,
                "same-tier edge must never appear when concurrent is forbidden"
            );
        }
    }

    #[test]
    fn column_permutation_changes_nothing() {
        let grid = GridSpec::new(3, 2, 1.0, 1.0).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(21);
        let noise = Normal::new(0.0, 1.0).unwrap();
        let n = 600;
        let mut cols = vec![Vec::with_capacity(n); 6];
        for _ in 0..n {
            let x: f64 = noise.sample(&mut rng);
            for (c, col) in cols.iter_mut().enumerate() {
                col.push(0.5 * x * (c as f64 + 1.0) + noise.sample(&mut rng));
            }
        }
        let ds = dataset_from_columns(grid, cols);
        let table = lag(&ds, 3, 1).unwrap();
        let prior = TemporalPrior {
            allow_concurrent: true,
        };
        let opts = PcOptions::default();
        let (skel0, stats0) = pc_stable_skeleton(&table, &prior, &opts).unwrap();
        use rand::seq::SliceRandom;
        let mut perm: Vec<usize> = (0..table.n_columns()).collect();
        for seed in 0..3u64 {
            let mut prng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            perm.shuffle(&mut prng);
            let shuffled = table.permute_columns(&perm);
            let (skel1, stats1) = pc_stable_skeleton(&shuffled, &prior, &opts).unwrap();
            let e0: Vec<(u32, u32)> = skel0.edges.iter().map(|e| (e.a, e.b)).collect();
            let e1: Vec<(u32, u32)> = skel1.edges.iter().map(|e| (e.a, e.b)).collect();
            assert_eq!(e0, e1);
            assert_eq!(stats0.per_order, stats1.per_order);
        }
    }
}
