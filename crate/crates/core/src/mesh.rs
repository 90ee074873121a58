//! Uniform chart grids, domain descriptions, and the assembled discrete
//! Laplace–Beltrami system.
//!
//! Grid nodes live on the global lattice `h·ℤ²` so that windows, condenser
//! sub-grids and random-walk lattices built with the same spacing share nodes.
//! The stiffness matrix is the unit-weight 5-point graph Laplacian on interior
//! nodes (the chart Dirichlet energy, exact for conformal metrics in 2-D); all
//! metric dependence sits in the lumped mass `a(node)·h²`.

use std::collections::VecDeque;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::elliptic::{self, ScalarField};
use crate::error::{Error, Result};
use crate::geometry::{ModelSurface, Point};
use crate::linalg::{Stencil, NONE};

/// Slack applied to open-set predicates so that nodes sitting exactly on a
/// boundary (up to rounding of `k·h`) are classified as outside.
const EDGE_EPS: f64 = 1e-9;

/// Lattice coordinates `(k, l)` of the node at chart point `(k·h, l·h)`.
pub type LatticeNode = (i64, i64);

/// Rectangular chart window snapped to the lattice `h·ℤ²`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Window {
    h: f64,
    kmin: i64,
    kmax: i64,
    lmin: i64,
    lmax: i64,
}

impl Window {
    pub fn new(umin: f64, umax: f64, vmin: f64, vmax: f64, h: f64) -> Result<Self> {
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::Domain(format!("grid spacing must be positive, got {h}")));
        }
        if ![umin, umax, vmin, vmax].iter().all(|x| x.is_finite()) {
            return Err(Error::Domain("window bounds must be finite".into()));
        }
        let kmin = (umin / h).round() as i64;
        let kmax = (umax / h).round() as i64;
        let lmin = (vmin / h).round() as i64;
        let lmax = (vmax / h).round() as i64;
        if kmax <= kmin || lmax <= lmin {
            return Err(Error::Domain("window has empty extent after snapping".into()));
        }
        Ok(Window { h, kmin, kmax, lmin, lmax })
    }

    /// Square window `[-half, half]²`.
    pub fn centered(half: f64, h: f64) -> Result<Self> {
        Self::new(-half, half, -half, half, h)
    }

    pub fn h(&self) -> f64 {
        self.h
    }
    pub fn umin(&self) -> f64 {
        self.kmin as f64 * self.h
    }
    pub fn umax(&self) -> f64 {
        self.kmax as f64 * self.h
    }
    pub fn vmin(&self) -> f64 {
        self.lmin as f64 * self.h
    }
    pub fn vmax(&self) -> f64 {
        self.lmax as f64 * self.h
    }

    /// Number of nodes along u and v.
    pub fn dims(&self) -> (usize, usize) {
        ((self.kmax - self.kmin + 1) as usize, (self.lmax - self.lmin + 1) as usize)
    }

    pub fn node_count(&self) -> usize {
        let (a, b) = self.dims();
        a * b
    }

    pub fn point(&self, (k, l): LatticeNode) -> Point {
        Point::new(k as f64 * self.h, l as f64 * self.h)
    }

    pub fn snap(&self, p: Point) -> LatticeNode {
        ((p.u / self.h).round() as i64, (p.v / self.h).round() as i64)
    }

    pub fn contains_node(&self, (k, l): LatticeNode) -> bool {
        k >= self.kmin && k <= self.kmax && l >= self.lmin && l <= self.lmax
    }

    pub fn is_border(&self, (k, l): LatticeNode) -> bool {
        k == self.kmin || k == self.kmax || l == self.lmin || l == self.lmax
    }

    /// Row-major grid index (rows are constant v).
    pub fn grid_index(&self, (k, l): LatticeNode) -> Option<usize> {
        if !self.contains_node((k, l)) {
            return None;
        }
        let (nu, _) = self.dims();
        Some((l - self.lmin) as usize * nu + (k - self.kmin) as usize)
    }

    pub fn lattice_of(&self, g: usize) -> LatticeNode {
        let (nu, _) = self.dims();
        (self.kmin + (g % nu) as i64, self.lmin + (g / nu) as i64)
    }

    /// True when the closed chart box lies inside this window with `margin` to spare.
    pub fn contains_box(&self, umin: f64, umax: f64, vmin: f64, vmax: f64, margin: f64) -> bool {
        let tol = 1e-12 * self.h;
        umin - margin >= self.umin() - tol
            && umax + margin <= self.umax() + tol
            && vmin - margin >= self.vmin() - tol
            && vmax + margin <= self.vmax() + tol
    }

    /// The lattice-aligned window covering a chart box, padded by `pad` cells.
    pub fn covering(umin: f64, umax: f64, vmin: f64, vmax: f64, h: f64, pad: i64) -> Result<Self> {
        let kmin = (umin / h).floor() as i64 - pad;
        let kmax = (umax / h).ceil() as i64 + pad;
        let lmin = (vmin / h).floor() as i64 - pad;
        let lmax = (vmax / h).ceil() as i64 + pad;
        if !(h > 0.0) || kmax <= kmin || lmax <= lmin {
            return Err(Error::Domain("degenerate covering window".into()));
        }
        Ok(Window { h, kmin, kmax, lmin, lmax })
    }
}

/// Description of an open set in the chart.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DomainSpec {
    /// Open geodesic ball.
    GeodesicBall { center: Point, radius: f64 },
    /// Geodesic annulus `inner < d(center, ·) < outer`.
    Annulus { center: Point, inner: f64, outer: f64 },
    /// Axis-aligned chart rectangle.
    Rectangle { center: Point, width: f64, height: f64 },
    /// Square of side `side` minus closed vertical teeth standing on its bottom
    /// edge. Gaps between successive teeth are `gap0·beta^k`.
    JohnComb {
        center: Point,
        side: f64,
        gap0: f64,
        beta: f64,
        teeth: usize,
        tooth_width: f64,
        tooth_height: f64,
    },
    /// `{0 < u - cu < length, 0 < v - cv < (u - cu)^exponent}`.
    Cusp { center: Point, exponent: f64, length: f64 },
    /// `{x ∈ base : G_base(x, pole) < level}`.
    Sublevel { base: Box<DomainSpec>, pole: Point, level: f64 },
    /// Node mask read from a plain PBM/PGM file matching the window.
    MaskFile { path: PathBuf },
}

fn positive(name: &str, x: f64) -> Result<()> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("{name} must be positive, got {x}")))
    }
}

fn nonnegative(name: &str, x: f64) -> Result<()> {
    if x >= 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("{name} must be nonnegative, got {x}")))
    }
}

impl DomainSpec {
    pub fn kind_name(&self) -> &'static str {
        match self {
            DomainSpec::GeodesicBall { .. } => "geodesic_ball",
            DomainSpec::Annulus { .. } => "annulus",
            DomainSpec::Rectangle { .. } => "rectangle",
            DomainSpec::JohnComb { .. } => "john_comb",
            DomainSpec::Cusp { .. } => "cusp",
            DomainSpec::Sublevel { .. } => "sublevel",
            DomainSpec::MaskFile { .. } => "mask_file",
        }
    }

    /// Parameter checks. Zero radii and zero sizes are allowed and yield empty sets.
    pub fn validate(&self) -> Result<()> {
        match self {
            DomainSpec::GeodesicBall { radius, .. } => nonnegative("radius", *radius),
            DomainSpec::Annulus { inner, outer, .. } => {
                nonnegative("inner radius", *inner)?;
                positive("outer radius", *outer)?;
                if inner >= outer {
                    return Err(Error::Domain(format!(
                        "annulus needs inner < outer, got {inner} >= {outer}"
                    )));
                }
                Ok(())
            }
            DomainSpec::Rectangle { width, height, .. } => {
                nonnegative("width", *width)?;
                nonnegative("height", *height)
            }
            DomainSpec::JohnComb { side, gap0, beta, tooth_width, tooth_height, teeth, .. } => {
                positive("side", *side)?;
                positive("gap0", *gap0)?;
                positive("tooth_width", *tooth_width)?;
                positive("tooth_height", *tooth_height)?;
                if !(*beta > 0.0 && *beta < 1.0) {
                    return Err(Error::Domain(format!("comb ratio beta must lie in (0,1), got {beta}")));
                }
                let span: f64 = (0..*teeth).map(|k| gap0 * beta.powi(k as i32) + tooth_width).sum();
                if span >= *side || *tooth_height >= *side {
                    return Err(Error::Domain("comb teeth do not fit in the square".into()));
                }
                Ok(())
            }
            DomainSpec::Cusp { exponent, length, .. } => {
                positive("length", *length)?;
                if !(*exponent > 1.0 && exponent.is_finite()) {
                    return Err(Error::Domain(format!("cusp exponent must exceed 1, got {exponent}")));
                }
                Ok(())
            }
            DomainSpec::Sublevel { base, .. } => base.validate(),
            DomainSpec::MaskFile { .. } => Ok(()),
        }
    }

    /// Membership predicate for the analytically described kinds; `None` for
    /// kinds that need a solve or a file.
    pub fn contains(&self, surface: &ModelSurface, p: Point) -> Option<bool> {
        if !surface.is_valid(p) {
            return Some(false);
        }
        let inside = match self {
            DomainSpec::GeodesicBall { center, radius } => {
                surface.dist_unchecked(*center, p) < radius - EDGE_EPS
            }
            DomainSpec::Annulus { center, inner, outer } => {
                let d = surface.dist_unchecked(*center, p);
                d > inner + EDGE_EPS && d < outer - EDGE_EPS
            }
            DomainSpec::Rectangle { center, width, height } => {
                (p.u - center.u).abs() < 0.5 * width - EDGE_EPS
                    && (p.v - center.v).abs() < 0.5 * height - EDGE_EPS
            }
            DomainSpec::JohnComb { center, side, gap0, beta, teeth, tooth_width, tooth_height } => {
                let left = center.u - 0.5 * side;
                let bottom = center.v - 0.5 * side;
                let du = p.u - left;
                let dv = p.v - bottom;
                let in_square = du > EDGE_EPS
                    && du < side - EDGE_EPS
                    && dv > EDGE_EPS
                    && dv < side - EDGE_EPS;
                in_square && !in_comb_tooth(du, dv, *gap0, *beta, *teeth, *tooth_width, *tooth_height)
            }
            DomainSpec::Cusp { center, exponent, length } => {
                let du = p.u - center.u;
                let dv = p.v - center.v;
                du > EDGE_EPS
                    && du < length - EDGE_EPS
                    && dv > EDGE_EPS
                    && dv < du.powf(*exponent) - EDGE_EPS
            }
            DomainSpec::Sublevel { .. } | DomainSpec::MaskFile { .. } => return None,
        };
        Some(inside)
    }

    /// Chart bounding box `(umin, umax, vmin, vmax)` for the analytic kinds.
    pub fn chart_bbox(&self, surface: &ModelSurface) -> Result<Option<(f64, f64, f64, f64)>> {
        Ok(match self {
            DomainSpec::GeodesicBall { center, radius: r }
            | DomainSpec::Annulus { center, outer: r, .. } => {
                let (c, s) = surface.chart_ball(*center, *r)?;
                Some((c.u - s, c.u + s, c.v - s, c.v + s))
            }
            DomainSpec::Rectangle { center, width, height } => Some((
                center.u - 0.5 * width,
                center.u + 0.5 * width,
                center.v - 0.5 * height,
                center.v + 0.5 * height,
            )),
            DomainSpec::JohnComb { center, side, .. } => Some((
                center.u - 0.5 * side,
                center.u + 0.5 * side,
                center.v - 0.5 * side,
                center.v + 0.5 * side,
            )),
            DomainSpec::Cusp { center, exponent, length } => Some((
                center.u,
                center.u + length,
                center.v,
                center.v + length.powf(*exponent),
            )),
            DomainSpec::Sublevel { base, .. } => base.chart_bbox(surface)?,
            DomainSpec::MaskFile { .. } => None,
        })
    }
}

fn in_comb_tooth(du: f64, dv: f64, gap0: f64, beta: f64, teeth: usize, tw: f64, th: f64) -> bool {
    if dv > th + EDGE_EPS {
        return false;
    }
    let mut x = gap0;
    let mut gap = gap0;
    for _ in 0..teeth {
        if du >= x - EDGE_EPS && du <= x + tw + EDGE_EPS {
            return true;
        }
        gap *= beta;
        x += tw + gap;
    }
    false
}

/// Discretized open set with its Laplace–Beltrami system.
#[derive(Debug, Clone)]
pub struct DomainSystem {
    surface: ModelSurface,
    window: Window,
    /// Grid index to interior index, or `NONE`.
    index_of: Vec<u32>,
    /// Interior index to lattice node.
    nodes: Vec<LatticeNode>,
    stencil: Stencil,
    mass: Vec<f64>,
}

impl DomainSystem {
    /// Assembles the system for the interior nodes selected by `keep` (grid
    /// indices). Border nodes of the window and nodes outside the chart are
    /// never interior. An empty result is allowed.
    pub fn from_predicate(
        surface: ModelSurface,
        window: Window,
        keep: impl Fn(LatticeNode, Point) -> bool,
    ) -> Self {
        let n = window.node_count();
        let mut index_of = vec![NONE; n];
        let mut nodes = Vec::new();
        for (g, slot) in index_of.iter_mut().enumerate() {
            let node = window.lattice_of(g);
            if window.is_border(node) {
                continue;
            }
            let p = window.point(node);
            if surface.is_valid(p) && keep(node, p) {
                *slot = nodes.len() as u32;
                nodes.push(node);
            }
        }
        let h2 = window.h() * window.h();
        let mass = nodes.iter().map(|&nd| surface.weight_unchecked(window.point(nd)) * h2).collect();
        let mut sys = DomainSystem { surface, window, index_of, nodes, stencil: Stencil::default(), mass };
        sys.stencil = sys.build_stencil();
        sys
    }

    fn build_stencil(&self) -> Stencil {
        let nbrs = self
            .nodes
            .iter()
            .map(|&(k, l)| {
                let mut out = [NONE; 4];
                for (slot, nb) in out.iter_mut().zip([(k + 1, l), (k - 1, l), (k, l + 1), (k, l - 1)]) {
                    if let Some(i) = self.index_at(nb) {
                        *slot = i as u32;
                    }
                }
                out
            })
            .collect();
        Stencil { nbrs }
    }

    pub fn surface(&self) -> &ModelSurface {
        &self.surface
    }
    pub fn window(&self) -> &Window {
        &self.window
    }
    pub fn h(&self) -> f64 {
        self.window.h()
    }
    /// Number of interior nodes.
    pub fn len(&self) -> usize {
        self.nodes.len()
    }
    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
    pub fn mass(&self) -> &[f64] {
        &self.mass
    }
    pub fn nodes(&self) -> &[LatticeNode] {
        &self.nodes
    }
    pub fn lattice(&self, i: usize) -> LatticeNode {
        self.nodes[i]
    }
    pub fn point(&self, i: usize) -> Point {
        self.window.point(self.nodes[i])
    }
    pub(crate) fn stencil(&self) -> &Stencil {
        &self.stencil
    }

    /// Interior neighbours (up to four) of interior node `i`.
    pub fn neighbors(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        self.stencil.nbrs[i].iter().filter(|&&j| j != NONE).map(|&j| j as usize)
    }

    pub fn index_at(&self, node: LatticeNode) -> Option<usize> {
        let g = self.window.grid_index(node)?;
        match self.index_of[g] {
            NONE => None,
            i => Some(i as usize),
        }
    }

    pub fn is_interior(&self, node: LatticeNode) -> bool {
        self.index_at(node).is_some()
    }

    /// Interior node nearest to `p`, if the snapped lattice node is interior.
    pub fn snap_interior(&self, p: Point) -> Option<usize> {
        self.index_at(self.window.snap(p))
    }

    /// Full interior mask over the window grid, row-major.
    pub fn interior_mask(&self) -> Vec<bool> {
        self.index_of.iter().map(|&i| i != NONE).collect()
    }

    /// Non-interior lattice nodes with at least one interior neighbour.
    pub fn boundary_nodes(&self) -> Vec<LatticeNode> {
        let mut seen = std::collections::BTreeSet::new();
        for &(k, l) in &self.nodes {
            for nb in [(k + 1, l), (k - 1, l), (k, l + 1), (k, l - 1)] {
                if !self.is_interior(nb) {
                    seen.insert(nb);
                }
            }
        }
        seen.into_iter().collect()
    }

    /// Interior-block stiffness entries `(i, j, value)`.
    pub fn stiffness_triplets(&self) -> Vec<(usize, usize, f64)> {
        let mut out = Vec::with_capacity(5 * self.len());
        for i in 0..self.len() {
            out.push((i, i, 4.0));
            for j in self.neighbors(i) {
                out.push((i, j, -1.0));
            }
        }
        out
    }

    pub fn apply_stiffness(&self, u: &[f64], out: &mut [f64]) {
        self.stencil.apply(u, out);
    }

    /// Chart Dirichlet energy `uᵀ S u` of the zero extension of `u`.
    pub fn energy(&self, u: &[f64]) -> f64 {
        self.stencil.energy(u)
    }

    /// Mass-weighted inner product.
    pub fn mass_dot(&self, a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).zip(&self.mass).map(|((x, y), m)| x * y * m).sum()
    }

    /// Sub-system on the interior nodes for which `keep(i)` holds.
    pub fn restrict(&self, keep: impl Fn(usize) -> bool) -> DomainSystem {
        let keep_grid: Vec<bool> = self
            .index_of
            .iter()
            .map(|&i| i != NONE && keep(i as usize))
            .collect();
        DomainSystem::from_predicate(self.surface, self.window, |node, _| {
            self.window.grid_index(node).is_some_and(|g| keep_grid[g])
        })
    }

    /// Connected components of the interior graph, largest first.
    pub fn components(&self) -> Vec<Vec<usize>> {
        let mut label = vec![usize::MAX; self.len()];
        let mut comps = Vec::new();
        for start in 0..self.len() {
            if label[start] != usize::MAX {
                continue;
            }
            let id = comps.len();
            let mut members = vec![start];
            label[start] = id;
            let mut queue = VecDeque::from([start]);
            while let Some(i) = queue.pop_front() {
                for j in self.neighbors(i) {
                    if label[j] == usize::MAX {
                        label[j] = id;
                        members.push(j);
                        queue.push_back(j);
                    }
                }
            }
            comps.push(members);
        }
        comps.sort_by(|a, b| b.len().cmp(&a.len()).then(a[0].cmp(&b[0])));
        comps
    }

    /// Geodesic distance from each interior node to the nearest non-interior node.
    pub fn depth(&self) -> Vec<f64> {
        let boundary: Vec<Point> = self.boundary_nodes().into_iter().map(|n| self.window.point(n)).collect();
        (0..self.len())
            .map(|i| {
                let p = self.point(i);
                boundary
                    .iter()
                    .map(|&q| {
                        if self.surface.is_valid(q) {
                            self.surface.dist_unchecked(p, q)
                        } else {
                            f64::INFINITY
                        }
                    })
                    .fold(f64::INFINITY, f64::min)
            })
            .collect()
    }

    /// Writes the window mask as a plain PGM (`P2`, maxval 1). Row `j` is
    /// `v = vmin + j·h`.
    pub fn write_mask(&self, path: &Path) -> Result<()> {
        let (nu, nv) = self.window.dims();
        let mut s = format!("P2\n{nu} {nv}\n1\n");
        let mask = self.interior_mask();
        for row in mask.chunks(nu) {
            let line: Vec<&str> = row.iter().map(|&b| if b { "1" } else { "0" }).collect();
            let _ = writeln!(s, "{}", line.join(" "));
        }
        std::fs::write(path, s)?;
        Ok(())
    }
}

/// Parses a plain PBM (`P1`), plain PGM (`P2`) or header-less
/// `width height values…` mask. Nonzero values mark interior nodes.
pub fn read_mask(text: &str) -> Result<(usize, usize, Vec<bool>)> {
    let mut tokens = text
        .lines()
        .map(|l| l.split('#').next().unwrap_or(""))
        .flat_map(str::split_whitespace);
    let bad = |m: &str| Error::Config(format!("mask file: {m}"));
    let mut first = tokens.next().ok_or_else(|| bad("empty file"))?;
    let mut has_maxval = false;
    match first {
        "P1" => first = tokens.next().ok_or_else(|| bad("missing width"))?,
        "P2" => {
            has_maxval = true;
            first = tokens.next().ok_or_else(|| bad("missing width"))?;
        }
        _ => {}
    }
    let width: usize = first.parse().map_err(|_| bad("bad width"))?;
    let height: usize = tokens
        .next()
        .ok_or_else(|| bad("missing height"))?
        .parse()
        .map_err(|_| bad("bad height"))?;
    if has_maxval {
        tokens.next().ok_or_else(|| bad("missing maxval"))?;
    }
    let values: Vec<bool> = tokens
        .map(|t| t.parse::<u32>().map(|v| v != 0).map_err(|_| bad("non-integer value")))
        .collect::<Result<_>>()?;
    if values.len() != width * height {
        return Err(bad(&format!("expected {} values, found {}", width * height, values.len())));
    }
    Ok((width, height, values))
}

/// Builds the discrete system for `spec` on `window`.
pub fn build_system(surface: ModelSurface, window: Window, spec: &DomainSpec) -> Result<DomainSystem> {
    spec.validate()?;
    let sys = match spec {
        DomainSpec::Sublevel { base, pole, level } => {
            let base_sys = build_system(surface, window, base)?;
            let g = elliptic::green(&base_sys, *pole, elliptic::DEFAULT_TOL)?;
            sublevel_domain(&base_sys, &g, *level)
        }
        DomainSpec::MaskFile { path } => {
            let text = std::fs::read_to_string(path)?;
            let (w, h, mask) = read_mask(&text)?;
            if (w, h) != window.dims() {
                return Err(Error::Config(format!(
                    "mask is {w}x{h} but the window grid is {}x{}",
                    window.dims().0,
                    window.dims().1
                )));
            }
            DomainSystem::from_predicate(surface, window, |node, _| {
                window.grid_index(node).is_some_and(|g| mask[g])
            })
        }
        _ => {
            if let DomainSpec::GeodesicBall { center, radius } = spec {
                let (c, s) = surface.chart_ball(*center, *radius)?;
                // Nodes on or outside the unit circle are never interior, so a
                // hyperbolic ball only has to fit the part of the window inside it.
                let lim = if surface.is_hyperbolic() { 1.0 - 2.0 * window.h() } else { f64::INFINITY };
                let clip = |x: f64| x.clamp(-lim, lim);
                if !window.contains_box(clip(c.u - s), clip(c.u + s), clip(c.v - s), clip(c.v + s), 2.0 * window.h()) {
                    return Err(Error::GeometryOverflow(format!(
                        "ball of radius {radius} at ({}, {}) does not fit the window with a 2h margin",
                        center.u, center.v
                    )));
                }
            }
            DomainSystem::from_predicate(surface, window, |_, p| spec.contains(&surface, p).unwrap_or(false))
        }
    };
    if sys.is_empty() {
        return Err(Error::EmptyDomain);
    }
    Ok(sys)
}

/// `μ(D)` as the total interior mass.
pub fn domain_measure(sys: &DomainSystem) -> f64 {
    sys.mass().iter().sum()
}

/// `{x ∈ D : field(x) < t}`. May be empty.
pub fn sublevel_domain(sys: &DomainSystem, field: &ScalarField<'_>, t: f64) -> DomainSystem {
    let values = field.values();
    sys.restrict(|i| values[i] < t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn disk(h: f64, half: f64) -> DomainSystem {
        build_system(
            ModelSurface::euclidean(),
            Window::centered(half, h).unwrap(),
            &DomainSpec::GeodesicBall { center: Point::ORIGIN, radius: 1.0 },
        )
        .unwrap()
    }

    #[test]
    fn window_snaps_to_lattice() {
        let w = Window::new(-1.201, 1.199, 0.0, 0.5, 0.1).unwrap();
        assert_eq!(w.dims(), (25, 6));
        assert!((w.umin() + 1.2).abs() < 1e-12);
        assert!(Window::new(0.0, 0.01, 0.0, 1.0, 0.1).is_err());
        assert!(Window::new(0.0, 1.0, 0.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn disk_interior_count() {
        let sys = disk(0.05, 1.2);
        let expected = PI / 0.0025;
        assert!(((sys.len() as f64) - expected).abs() < 0.03 * expected, "{}", sys.len());
    }

    #[test]
    fn zero_radius_is_empty() {
        let err = build_system(
            ModelSurface::euclidean(),
            Window::centered(1.0, 0.1).unwrap(),
            &DomainSpec::GeodesicBall { center: Point::ORIGIN, radius: 0.0 },
        )
        .unwrap_err();
        assert!(matches!(err, Error::EmptyDomain));
    }

    #[test]
    fn ball_must_fit_window() {
        let err = build_system(
            ModelSurface::euclidean(),
            Window::centered(1.0, 0.1).unwrap(),
            &DomainSpec::GeodesicBall { center: Point::ORIGIN, radius: 0.95 },
        )
        .unwrap_err();
        assert!(matches!(err, Error::GeometryOverflow(_)));
    }

    #[test]
    fn hyperbolic_ball_mask_is_chart_disk() {
        let h = 0.01;
        let sys = build_system(
            ModelSurface::hyperbolic(),
            Window::centered(0.6, h).unwrap(),
            &DomainSpec::GeodesicBall { center: Point::ORIGIN, radius: 1.0 },
        )
        .unwrap();
        let s = 0.5f64.tanh();
        assert!((s - 0.46212).abs() < 1e-5);
        let win = sys.window();
        let (nu, nv) = win.dims();
        for g in 0..nu * nv {
            let node = win.lattice_of(g);
            let r = win.point(node).norm();
            if (r - s).abs() > 1e-9 {
                assert_eq!(sys.is_interior(node), r < s, "node {node:?} r={r}");
            }
        }
    }

    #[test]
    fn measures() {
        let sys = disk(0.02, 1.1);
        assert!((domain_measure(&sys) / PI - 1.0).abs() < 0.01);

        let rect = build_system(
            ModelSurface::euclidean(),
            Window::new(-0.2, 1.2, -0.2, 2.2, 0.005).unwrap(),
            &DomainSpec::Rectangle { center: Point::new(0.5, 1.0), width: 1.0, height: 2.0 },
        )
        .unwrap();
        assert!((domain_measure(&rect) / 2.0 - 1.0).abs() < 0.01);
    }

    #[test]
    fn hyperbolic_ball_measure() {
        let sys = build_system(
            ModelSurface::hyperbolic(),
            Window::centered(0.5, 0.01).unwrap(),
            &DomainSpec::GeodesicBall { center: Point::ORIGIN, radius: 1.0 },
        )
        .unwrap();
        let exact = ModelSurface::hyperbolic().ball_volume(1.0).unwrap();
        assert!((domain_measure(&sys) / exact - 1.0).abs() < 0.02);
    }

    #[test]
    fn stiffness_structure() {
        let sys = disk(0.1, 1.2);
        let trip = sys.stiffness_triplets();
        let mut dense = vec![vec![0.0; sys.len()]; sys.len()];
        for &(i, j, v) in &trip {
            dense[i][j] += v;
        }
        for i in 0..sys.len() {
            let row_sum: f64 = dense[i].iter().sum();
            // Full-grid row sums vanish: the missing weight goes to Dirichlet neighbours.
            let dirichlet = 4 - sys.neighbors(i).count();
            assert_eq!(row_sum, dirichlet as f64);
            for j in 0..sys.len() {
                assert_eq!(dense[i][j], dense[j][i]);
                if i != j {
                    assert!(dense[i][j] <= 0.0);
                }
            }
        }
        assert!(sys.mass().iter().all(|&m| m > 0.0));
    }

    #[test]
    fn comb_and_cusp_predicates() {
        let s = ModelSurface::euclidean();
        let comb = DomainSpec::JohnComb {
            center: Point::new(0.5, 0.5),
            side: 1.0,
            gap0: 0.2,
            beta: 0.5,
            teeth: 3,
            tooth_width: 0.05,
            tooth_height: 0.5,
        };
        comb.validate().unwrap();
        // First tooth occupies u ∈ [0.2, 0.25] below v = 0.5.
        assert_eq!(comb.contains(&s, Point::new(0.22, 0.3)), Some(false));
        assert_eq!(comb.contains(&s, Point::new(0.22, 0.7)), Some(true));
        assert_eq!(comb.contains(&s, Point::new(0.1, 0.3)), Some(true));
        let cusp = DomainSpec::Cusp { center: Point::ORIGIN, exponent: 4.0, length: 1.0 };
        assert_eq!(cusp.contains(&s, Point::new(0.5, 0.05)), Some(true));
        assert_eq!(cusp.contains(&s, Point::new(0.5, 0.07)), Some(false));
        let bad = DomainSpec::JohnComb {
            center: Point::ORIGIN,
            side: 1.0,
            gap0: 0.2,
            beta: 1.5,
            teeth: 3,
            tooth_width: 0.05,
            tooth_height: 0.5,
        };
        assert!(bad.validate().is_err());
        assert!(DomainSpec::Annulus { center: Point::ORIGIN, inner: 0.5, outer: 0.5 }.validate().is_err());
    }

    #[test]
    fn mask_file_round_trip() {
        let sys = disk(0.1, 1.2);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("disk.pgm");
        sys.write_mask(&path).unwrap();
        let again = build_system(
            ModelSurface::euclidean(),
            *sys.window(),
            &DomainSpec::MaskFile { path: path.clone() },
        )
        .unwrap();
        assert_eq!(again.interior_mask(), sys.interior_mask());
        let wrong = Window::centered(1.0, 0.1).unwrap();
        assert!(build_system(ModelSurface::euclidean(), wrong, &DomainSpec::MaskFile { path }).is_err());
    }

    #[test]
    fn headerless_mask_parses() {
        let (w, h, m) = read_mask("3 2\n0 1 0\n1 1 1\n").unwrap();
        assert_eq!((w, h), (3, 2));
        assert_eq!(m, vec![false, true, false, true, true, true]);
        assert!(read_mask("2 2\n1 1 1").is_err());
    }

    #[test]
    fn components_sorted_by_size() {
        let s = ModelSurface::euclidean();
        let w = Window::new(-1.0, 3.0, -1.0, 1.0, 0.1).unwrap();
        let two = DomainSystem::from_predicate(s, w, |_, p| {
            p.norm() < 0.5 || (p.u - 2.0).hypot(p.v) < 0.3
        });
        let comps = two.components();
        assert_eq!(comps.len(), 2);
        assert!(comps[0].len() > comps[1].len());
    }
}
