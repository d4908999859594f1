//! Figure and table rendering: intra/inter edge panels and velocity quivers
//! as standalone SVG 1.1 documents, cost tables as CSV or markdown text.
//!
//! Output is deterministic byte for byte given identical inputs: coordinates
//! are emitted with shortest round-trip formatting and no randomness or
//! timestamps enter the documents.

use crate::discovery::DiscoveryStats;
use crate::grid::GridSpec;
use crate::summary::{EdgeClass, SummaryGraph, VelocityEstimateField};

/// Visual parameters shared by all panels.
#[derive(Debug, Clone)]
pub struct PlotStyle {
    /// Seconds of travel represented by a velocity arrow: the drawn
    /// displacement is `v * display_dt` meters.
    pub display_dt: f64,
    pub strong_color: String,
    pub weak_color: String,
}

impl Default for PlotStyle {
    fn default() -> Self {
        PlotStyle {
            display_dt: 5.0,
            strong_color: "#1f6fb4".to_string(),
            weak_color: "#999999".to_string(),
        }
    }
}

struct Canvas {
    grid: GridSpec,
    body: String,
}

impl Canvas {
    fn new(grid: GridSpec, title: &str) -> Canvas {
        let (lx, ly) = (grid.period_x(), grid.period_y());
        let (x0, y0) = (-grid.dx / 2.0, -grid.dy / 2.0);
        let px = 420.0;
        let height = px * ly / lx;
        let mut body = String::new();
        body.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
        body.push_str(&format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"{px}\" height=\"{height}\" viewBox=\"{x0} {y0} {lx} {ly}\">\n"
        ));
        body.push_str(&format!("<title>{title}</title>\n"));
        body.push_str(&format!(
            "<rect x=\"{x0}\" y=\"{y0}\" width=\"{lx}\" height=\"{ly}\" fill=\"white\" stroke=\"#cccccc\" stroke-width=\"{}\"/>\n",
            lx / 420.0
        ));
        Canvas { grid, body }
    }

    fn with_markers(mut self, style: &PlotStyle) -> Canvas {
        let m = |id: &str, color: &str| {
            format!(
                "<marker id=\"{id}\" viewBox=\"0 0 10 10\" refX=\"8\" refY=\"5\" markerWidth=\"5\" markerHeight=\"5\" orient=\"auto-start-reverse\"><path d=\"M 0 0 L 10 5 L 0 10 z\" fill=\"{color}\"/></marker>"
            )
        };
        self.body.push_str(&format!(
            "<defs>{}{}</defs>\n",
            m("ah-strong", &style.strong_color),
            m("ah-weak", &style.weak_color)
        ));
        self
    }

    /// Flip y so tier/k grows upward in the image.
    fn at(&self, x: f64, y: f64) -> (f64, f64) {
        (x, (self.grid.period_y() - self.grid.dy) - y)
    }

    fn circle(&mut self, x: f64, y: f64, r: f64, fill: &str, stroke: &str) {
        let (cx, cy) = self.at(x, y);
        let sw = self.grid.dx.min(self.grid.dy) * 0.04;
        self.body.push_str(&format!(
            "<circle cx=\"{cx}\" cy=\"{cy}\" r=\"{r}\" fill=\"{fill}\" stroke=\"{stroke}\" stroke-width=\"{sw}\"/>\n"
        ));
    }

    fn line(
        &mut self,
        from: (f64, f64),
        to: (f64, f64),
        color: &str,
        marker: Option<&str>,
        dashed: bool,
    ) {
        let (x1, y1) = self.at(from.0, from.1);
        let (x2, y2) = self.at(to.0, to.1);
        let sw = self.grid.dx.min(self.grid.dy) * 0.07;
        let mut attrs = format!(
            "x1=\"{x1}\" y1=\"{y1}\" x2=\"{x2}\" y2=\"{y2}\" stroke=\"{color}\" stroke-width=\"{sw}\""
        );
        if let Some(id) = marker {
            attrs.push_str(&format!(" marker-end=\"url(#{id})\""));
        }
        if dashed {
            let d = self.grid.dx.min(self.grid.dy) * 0.15;
            attrs.push_str(&format!(" stroke-dasharray=\"{d} {}\"", d * 0.6));
        }
        self.body.push_str(&format!("<line {attrs}/>\n"));
    }

    fn finish(mut self) -> String {
        self.body.push_str("</svg>\n");
        self.body
    }

    /// Intersection of the ray `src + t*disp`, t in (0, 1], with the plot
    /// border (used to draw the exit stub of a wrap-around edge).
    fn border_exit(&self, src: (f64, f64), disp: (f64, f64)) -> (f64, f64) {
        let (x0, y0) = (-self.grid.dx / 2.0, -self.grid.dy / 2.0);
        let (x1, y1) = (
            self.grid.period_x() - self.grid.dx / 2.0,
            self.grid.period_y() - self.grid.dy / 2.0,
        );
        let mut t = 1.0f64;
        if disp.0 > 0.0 {
            t = t.min((x1 - src.0) / disp.0);
        } else if disp.0 < 0.0 {
            t = t.min((x0 - src.0) / disp.0);
        }
        if disp.1 > 0.0 {
            t = t.min((y1 - src.1) / disp.1);
        } else if disp.1 < 0.0 {
            t = t.min((y0 - src.1) / disp.1);
        }
        (src.0 + t * disp.0, src.1 + t * disp.1)
    }
}

/// Intra-edge panel for travel time `T` (in data steps): one circle per grid
/// point, empty when the point has no intra edge at that lag, grey when the
/// edge is weak, colored otherwise.
pub fn render_intra_plot(sg: &SummaryGraph, t: usize, style: &PlotStyle) -> String {
    assert!(t >= 1, "intra edges exist only for T >= 1");
    let grid = sg.grid;
    let mut canvas = Canvas::new(grid, &format!("intra edges, T = {t} steps"));
    let r = grid.dx.min(grid.dy) * 0.25;
    for p in grid.points() {
        let edge = sg
            .edges_of_class(EdgeClass::Intra)
            .find(|e| e.src == p && e.lag == t);
        let (x, y) = grid.point_coords(p);
        match edge {
            None => canvas.circle(x, y, r, "none", "#555555"),
            Some(e) if e.weak => canvas.circle(x, y, r, &style.weak_color, "#555555"),
            Some(_) => canvas.circle(x, y, r, &style.strong_color, "#555555"),
        }
    }
    canvas.finish()
}

/// Inter-edge panel for travel time `T`: plain segments for concurrent edges
/// (T = 0), arrows along the minimal-image displacement for T > 0. Wrap-around
/// edges are drawn as an exit stub and an entry stub, both clipped at the
/// plot border.
pub fn render_inter_plot(sg: &SummaryGraph, t: usize, style: &PlotStyle) -> String {
    let grid = sg.grid;
    let mut canvas = Canvas::new(grid, &format!("inter edges, T = {t} steps")).with_markers(style);
    let dot = grid.dx.min(grid.dy) * 0.06;
    for p in grid.points() {
        let (x, y) = grid.point_coords(p);
        canvas.circle(x, y, dot, "#555555", "none");
    }
    let class = if t == 0 {
        EdgeClass::ConcurrentInter
    } else {
        EdgeClass::NonconcurrentInter
    };
    for e in sg.edges_of_class(class) {
        if e.lag != t {
            continue;
        }
        let (color, marker_id) = if e.weak {
            (&style.weak_color, "ah-weak")
        } else {
            (&style.strong_color, "ah-strong")
        };
        let marker = (t > 0).then_some(marker_id);
        let src = grid.point_coords(e.src);
        let dst = grid.point_coords(e.dst);
        let disp = grid.min_image_displacement(e.src, e.dst);
        let direct = (src.0 + disp.0 - dst.0).abs() < 1e-9 && (src.1 + disp.1 - dst.1).abs() < 1e-9;
        if direct {
            canvas.line(src, dst, color, marker, false);
        } else {
            // Periodic wrap: exit stub from the source, entry stub into the
            // destination.
            let exit = canvas.border_exit(src, disp);
            canvas.line(src, exit, color, marker, false);
            let entry_start = canvas.border_exit(dst, (-disp.0, -disp.1));
            canvas.line(entry_start, dst, color, marker, false);
        }
    }
    canvas.finish()
}

/// Velocity quiver: each point's arrow is the estimate times `display_dt`
/// meters; weak estimates are dashed; zero estimates draw the grid dot only.
pub fn render_velocity_plot(v: &VelocityEstimateField, style: &PlotStyle) -> String {
    let grid = v.grid;
    let mut canvas = Canvas::new(grid, "velocity estimate").with_markers(style);
    let dot = grid.dx.min(grid.dy) * 0.06;
    for p in grid.points() {
        let (x, y) = grid.point_coords(p);
        canvas.circle(x, y, dot, "#555555", "none");
        let i = grid.index_of(p);
        let (dx, dy) = (v.vx[i] * style.display_dt, v.vy[i] * style.display_dt);
        if dx == 0.0 && dy == 0.0 {
            continue;
        }
        let (color, marker) = if v.weak[i] {
            (&style.weak_color, "ah-weak")
        } else {
            (&style.strong_color, "ah-strong")
        };
        canvas.line((x, y), (x + dx, y + dy), color, Some(marker), v.weak[i]);
    }
    canvas.finish()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableFormat {
    Csv,
    Markdown,
}

/// Cost table: per-order rows for orders 0..=3 plus a summary row with the
/// maximum order, final edge count, and wall time.
pub fn render_stats_table(stats: &DiscoveryStats, format: TableFormat) -> String {
    let rows: Vec<&crate::discovery::OrderStats> = stats
        .per_order
        .iter()
        .filter(|o| o.order <= 3)
        .collect();
    match format {
        TableFormat::Csv => {
            let mut out = String::from("order,tests,edges_remaining\n");
            if stats.per_order.is_empty() {
                return out;
            }
            for o in rows {
                out.push_str(&format!("{},{},{}\n", o.order, o.tests, o.edges_after));
            }
            out.push_str("max_order,final_edges,wall_seconds\n");
            out.push_str(&format!(
                "{},{},{}\n",
                stats.max_order, stats.final_edges, stats.wall_seconds
            ));
            out
        }
        TableFormat::Markdown => {
            let mut out = String::from("| order | tests | edges remaining |\n|---|---|---|\n");
            if stats.per_order.is_empty() {
                return out;
            }
            for o in rows {
                out.push_str(&format!("| {} | {} | {} |\n", o.order, o.tests, o.edges_after));
            }
            out.push_str(&format!(
                "\nmax order {}, final edges {}, total time {} s\n",
                stats.max_order, stats.final_edges, stats.wall_seconds
            ));
            out
        }
    }
}
