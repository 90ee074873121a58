//! Capacitary width `w_η(D)`: the smallest radius `r` at which the complement
//! of `D` carries at least an `η`-fraction of the relative capacity of every
//! ball `B̄(x, r)`, `x ∈ D`.
//!
//! The infimum over centres is approximated by the deepest interior nodes plus
//! a coarse sublattice of the interior. Radii live on a fixed grid `rmax·k/K`
//! with spacing at most the bisection tolerance, so the result does not
//! depend on evaluation order.

use std::collections::{HashMap, VecDeque};
use std::sync::Mutex;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::elliptic::{capacity, capacity_at_least, DEFAULT_TOL};
use crate::error::{Error, Result};
use crate::geometry::{ModelSurface, Point};
use crate::mesh::{DomainSystem, LatticeNode};

/// How the per-centre threshold radius is located on the radius grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RadiusSearch {
    /// Bisection; assumes the capacity ratio is nondecreasing in `r`.
    Bisection,
    /// Scan every grid radius until all centres qualify.
    LinearScan,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CapWidthOptions {
    pub max_centers: usize,
    pub deep_centers: usize,
    /// Radius resolution; `None` means one grid cell.
    pub bisect_tol: Option<f64>,
    pub solver_tol: f64,
    pub search: RadiusSearch,
}

impl Default for CapWidthOptions {
    fn default() -> Self {
        CapWidthOptions {
            max_centers: 2000,
            deep_centers: 50,
            bisect_tol: None,
            solver_tol: DEFAULT_TOL,
            search: RadiusSearch::Bisection,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CapWidthResult {
    /// `+∞` when no radius up to `rmax` qualifies.
    pub w: f64,
    pub eta: f64,
    pub tested_centers: usize,
    pub worst_center: Option<Point>,
    pub radius_bracket: (f64, f64),
    pub search: RadiusSearch,
    /// Set when bisection was abandoned because the ratio was not monotone in `r`.
    pub monotonicity_fallback: bool,
}

impl CapWidthResult {
    pub fn is_finite(&self) -> bool {
        self.w.is_finite()
    }

    fn empty(eta: f64, search: RadiusSearch) -> Self {
        CapWidthResult {
            w: 0.0,
            eta,
            tested_centers: 0,
            worst_center: None,
            radius_bracket: (0.0, 0.0),
            search,
            monotonicity_fallback: false,
        }
    }
}

/// Lattice nodes of the closed geodesic ball `B̄(x, r)`.
pub(crate) fn closed_ball_nodes(surface: &ModelSurface, h: f64, x: Point, r: f64) -> Result<Vec<LatticeNode>> {
    let (c, s) = surface.chart_ball(x, r)?;
    let k0 = ((c.u - s) / h).floor() as i64;
    let k1 = ((c.u + s) / h).ceil() as i64;
    let l0 = ((c.v - s) / h).floor() as i64;
    let l1 = ((c.v + s) / h).ceil() as i64;
    let mut out = Vec::new();
    for l in l0..=l1 {
        for k in k0..=k1 {
            let p = Point::new(k as f64 * h, l as f64 * h);
            if surface.is_valid(p) && surface.dist_unchecked(x, p) <= r + 1e-9 {
                out.push((k, l));
            }
        }
    }
    Ok(out)
}

/// Evaluates capacity ratios, caching the ball capacities.
struct RatioEvaluator<'a> {
    sys: &'a DomainSystem,
    tol: f64,
    ball_cache: Mutex<HashMap<(u64, Option<LatticeNode>), f64>>,
}

impl<'a> RatioEvaluator<'a> {
    fn new(sys: &'a DomainSystem, tol: f64) -> Self {
        RatioEvaluator { sys, tol, ball_cache: Mutex::new(HashMap::new()) }
    }

    fn ball_capacity(&self, x: Point, r: f64) -> Result<f64> {
        let surface = *self.sys.surface();
        let win = self.sys.window();
        let snapped = win.snap(x);
        let on_lattice = {
            let p = win.point(snapped);
            (p.u - x.u).abs() < 1e-12 && (p.v - x.v).abs() < 1e-12
        };
        // Planar ball capacities are translation invariant between lattice nodes.
        let key = match (surface.is_hyperbolic(), on_lattice) {
            (false, true) => Some((r.to_bits(), None)),
            (true, true) => Some((r.to_bits(), Some(snapped))),
            _ => None,
        };
        if let Some(k) = key {
            if let Some(&v) = self.ball_cache.lock().unwrap().get(&k) {
                return Ok(v);
            }
        }
        let v = capacity(surface, win, x, r, |_| true, self.tol)?.value;
        if let Some(k) = key {
            self.ball_cache.lock().unwrap().insert(k, v);
        }
        Ok(v)
    }

    /// Checks the window and settles the trivial cases (ball inside or
    /// outside `D`); otherwise returns the nodes of the ball.
    fn classify(&self, x: Point, r: f64) -> Result<std::result::Result<f64, ()>> {
        let surface = *self.sys.surface();
        let win = self.sys.window();
        let (c, s) = surface.chart_ball(x, 2.0 * r)?;
        if !win.contains_box(c.u - s, c.u + s, c.v - s, c.v + s, 0.0) {
            return Err(Error::GeometryOverflow(format!(
                "B(({}, {}), {}) leaves the window",
                x.u,
                x.v,
                2.0 * r
            )));
        }
        let nodes = closed_ball_nodes(&surface, win.h(), x, r)?;
        let outside = nodes.iter().filter(|&&n| !self.sys.is_interior(n)).count();
        Ok(match outside {
            0 => Ok(0.0),
            o if o == nodes.len() => Ok(1.0),
            _ => Err(()),
        })
    }

    fn ratio(&self, x: Point, r: f64) -> Result<f64> {
        if let Ok(v) = self.classify(x, r)? {
            return Ok(v);
        }
        let surface = *self.sys.surface();
        let num = capacity(surface, self.sys.window(), x, r, |n| !self.sys.is_interior(n), self.tol)?.value;
        let den = self.ball_capacity(x, r)?;
        Ok((num / den).clamp(0.0, 1.0))
    }

    /// `ratio(x, r) >= eta`, usually without solving to full accuracy.
    fn reaches(&self, x: Point, r: f64, eta: f64) -> Result<bool> {
        if let Ok(v) = self.classify(x, r)? {
            return Ok(v >= eta);
        }
        let threshold = eta * self.ball_capacity(x, r)?;
        let surface = *self.sys.surface();
        capacity_at_least(surface, self.sys.window(), x, r, |n| !self.sys.is_interior(n), threshold, self.tol)
    }
}

pub fn capacity_ratio(sys: &DomainSystem, x: Point, r: f64, tol: f64) -> Result<f64> {
    sys.surface().check(x)?;
    if !(r > 0.0 && r.is_finite()) {
        return Err(Error::Domain(format!("radius must be positive, got {r}")));
    }
    RatioEvaluator::new(sys, tol).ratio(x, r)
}

/// Centres used for the infimum over `x ∈ D`: the `deep` nodes farthest from
/// the complement and every interior node on the coarsest sublattice with at
/// most `max_centers` nodes. Deepest first.
pub fn sample_centers(sys: &DomainSystem, max_centers: usize, deep: usize) -> Vec<usize> {
    if sys.is_empty() {
        return Vec::new();
    }
    let depth = sys.depth();
    let mut order: Vec<usize> = (0..sys.len()).collect();
    order.sort_by(|&a, &b| depth[b].total_cmp(&depth[a]).then(a.cmp(&b)));
    let mut stride = 1i64;
    let on_sub = |i: usize, s: i64| {
        let (k, l) = sys.lattice(i);
        k.rem_euclid(s) == 0 && l.rem_euclid(s) == 0
    };
    while (0..sys.len()).filter(|&i| on_sub(i, stride)).count() > max_centers.max(1) {
        stride += 1;
    }
    let mut chosen = vec![false; sys.len()];
    for &i in order.iter().take(deep) {
        chosen[i] = true;
    }
    for i in 0..sys.len() {
        if on_sub(i, stride) {
            chosen[i] = true;
        }
    }
    order.into_iter().filter(|&i| chosen[i]).collect()
}

/// Capacitary width with default center sampling.
pub fn cap_width(sys: &DomainSystem, eta: f64, rmax: f64, bisect_tol: Option<f64>) -> Result<CapWidthResult> {
    let opts = CapWidthOptions { bisect_tol, ..Default::default() };
    cap_width_with(sys, eta, rmax, &opts)
}

const BATCH: usize = 32;
const MAX_WITNESSES: usize = 256;

/// Complement footprint of a lattice-centred planar ball as a bitset over the
/// ball's node offsets.
type Footprint = Vec<u64>;

struct Record {
    k: usize,
    footprint: Footprint,
    pass: bool,
}

/// Settled footprints per radius index. Planar capacity is invariant under
/// lattice translations and monotone in the set, so a footprint containing a
/// qualifying one qualifies, and one contained in a failing one fails.
#[derive(Default)]
struct WitnessBook {
    pass: HashMap<usize, VecDeque<Footprint>>,
    fail: HashMap<usize, VecDeque<Footprint>>,
}

fn subset(a: &[u64], b: &[u64]) -> bool {
    a.iter().zip(b).all(|(x, y)| x & !y == 0)
}

impl WitnessBook {
    fn decide(&self, k: usize, f: &[u64]) -> Option<bool> {
        if self.pass.get(&k).is_some_and(|ws| ws.iter().any(|w| subset(w, f))) {
            return Some(true);
        }
        if self.fail.get(&k).is_some_and(|ws| ws.iter().any(|w| subset(f, w))) {
            return Some(false);
        }
        None
    }

    fn add(&mut self, rec: Record) {
        let book = if rec.pass { &mut self.pass } else { &mut self.fail };
        let list = book.entry(rec.k).or_default();
        if list.len() == MAX_WITNESSES {
            list.pop_front();
        }
        list.push_back(rec.footprint);
    }
}

struct WidthSearch<'a> {
    sys: &'a DomainSystem,
    eval: RatioEvaluator<'a>,
    eta: f64,
    rmax: f64,
    kmax: usize,
    /// Offsets of the origin-centred ball per radius index (planar only).
    offsets: Mutex<HashMap<usize, std::sync::Arc<HashMap<LatticeNode, usize>>>>,
    book: WitnessBook,
}

impl<'a> WidthSearch<'a> {
    fn radius(&self, k: usize) -> f64 {
        self.rmax * k as f64 / self.kmax as f64
    }

    fn footprint(&self, c: usize, k: usize) -> Result<Option<Footprint>> {
        if self.sys.surface().is_hyperbolic() {
            return Ok(None);
        }
        let h = self.sys.h();
        let r = self.radius(k);
        let table = {
            let mut map = self.offsets.lock().unwrap();
            match map.get(&k) {
                Some(t) => t.clone(),
                None => {
                    let nodes = closed_ball_nodes(self.sys.surface(), h, Point::ORIGIN, r)?;
                    let t: HashMap<LatticeNode, usize> = nodes.into_iter().enumerate().map(|(i, n)| (n, i)).collect();
                    let t = std::sync::Arc::new(t);
                    map.insert(k, t.clone());
                    t
                }
            }
        };
        let (k0, l0) = self.sys.lattice(c);
        let nodes = closed_ball_nodes(self.sys.surface(), h, self.sys.point(c), r)?;
        if nodes.len() != table.len() {
            return Ok(None);
        }
        let mut bits = vec![0u64; table.len().div_ceil(64)];
        for (k, l) in nodes {
            let Some(&i) = table.get(&(k - k0, l - l0)) else { return Ok(None) };
            if !self.sys.is_interior((k, l)) {
                bits[i / 64] |= 1 << (i % 64);
            }
        }
        Ok(Some(bits))
    }

    fn qualifies(&self, c: usize, k: usize, log: &mut Vec<Record>) -> Result<bool> {
        let footprint = self.footprint(c, k)?;
        if let Some(f) = &footprint {
            if let Some(known) = self.book.decide(k, f) {
                return Ok(known);
            }
        }
        let pass = self.eval.reaches(self.sys.point(c), self.radius(k), self.eta)?;
        if let Some(footprint) = footprint {
            log.push(Record { k, footprint, pass });
        }
        Ok(pass)
    }

    /// Runs `f` over `items` in parallel batches; witnesses found in a batch
    /// become visible to the next one in item order, which keeps the outcome
    /// independent of scheduling.
    fn batched<T: Send>(
        &mut self,
        items: &[usize],
        f: impl Fn(&Self, usize, &mut Vec<Record>) -> Result<T> + Sync,
        mut visit: impl FnMut(&mut Self, usize, T) -> bool,
    ) -> Result<()> {
        for batch in items.chunks(BATCH) {
            let this = &*self;
            let out: Vec<(Result<T>, Vec<Record>)> = batch
                .par_iter()
                .map(|&c| {
                    let mut log = Vec::new();
                    let r = f(this, c, &mut log);
                    (r, log)
                })
                .collect();
            for (&c, (res, log)) in batch.iter().zip(out) {
                for rec in log {
                    self.book.add(rec);
                }
                if !visit(self, c, res?) {
                    return Ok(());
                }
            }
        }
        Ok(())
    }
}

pub fn cap_width_with(sys: &DomainSystem, eta: f64, rmax: f64, opts: &CapWidthOptions) -> Result<CapWidthResult> {
    if !(eta > 0.0 && eta < 1.0) {
        return Err(Error::Domain(format!("eta must lie in (0,1), got {eta}")));
    }
    if !(rmax > 0.0 && rmax.is_finite()) {
        return Err(Error::Domain(format!("rmax must be positive, got {rmax}")));
    }
    if sys.is_empty() {
        return Ok(CapWidthResult::empty(eta, opts.search));
    }
    let step = opts.bisect_tol.unwrap_or(sys.h());
    if !(step > 0.0) {
        return Err(Error::Domain("bisection tolerance must be positive".into()));
    }
    let kmax = (rmax / step).ceil().max(1.0) as usize;
    let centers = sample_centers(sys, opts.max_centers, opts.deep_centers);
    let mut search = WidthSearch {
        sys,
        eval: RatioEvaluator::new(sys, opts.solver_tol),
        eta,
        rmax,
        kmax,
        offsets: Mutex::new(HashMap::new()),
        book: WitnessBook::default(),
    };

    let finish = |search: &WidthSearch<'_>, k: Option<usize>, worst: Option<usize>, mode, fallback| {
        let (w, bracket) = match k {
            Some(k) => (search.radius(k), (search.radius(k.saturating_sub(1)), search.radius(k))),
            None => (f64::INFINITY, (rmax, f64::INFINITY)),
        };
        CapWidthResult {
            w,
            eta,
            tested_centers: centers.len(),
            worst_center: worst.map(|i| sys.point(i)),
            radius_bracket: bracket,
            search: mode,
            monotonicity_fallback: fallback,
        }
    };

    if opts.search == RadiusSearch::LinearScan {
        let (k, worst) = linear_scan(&mut search, &centers)?;
        return Ok(finish(&search, k, worst, RadiusSearch::LinearScan, false));
    }

    // Per centre: None if it already qualifies at the running best radius,
    // Some(None) if it never qualifies, Some(Some(k)) for its threshold index.
    let mut best = 0usize;
    let mut worst: Option<usize> = None;
    let mut unbounded: Option<usize> = None;
    // Radius index each centre was last seen to need; guides a fallback scan.
    let mut need: HashMap<usize, usize> = HashMap::new();
    for batch in centers.chunks(BATCH) {
        let b = best;
        search.batched(
            batch,
            |s, c, log| -> Result<Option<Option<usize>>> {
                if b > 0 && s.qualifies(c, b, log)? {
                    return Ok(None);
                }
                if !s.qualifies(c, kmax, log)? {
                    return Ok(Some(None));
                }
                let (mut lo, mut hi) = (b, kmax);
                while hi - lo > 1 {
                    let mid = (lo + hi) / 2;
                    if s.qualifies(c, mid, log)? {
                        hi = mid;
                    } else {
                        lo = mid;
                    }
                }
                Ok(Some(Some(hi)))
            },
            |_, c, res| match res {
                None => {
                    need.insert(c, b);
                    true
                }
                Some(None) => {
                    unbounded = Some(c);
                    false
                }
                Some(Some(k)) => {
                    need.insert(c, k);
                    if k > best {
                        best = k;
                        worst = Some(c);
                    }
                    true
                }
            },
        )?;
        if unbounded.is_some() {
            return Ok(finish(&search, None, unbounded, RadiusSearch::Bisection, false));
        }
    }

    // Bisection presumes monotonicity; confirm it at the binding centre.
    if let Some(c) = worst {
        let mut log = Vec::new();
        for k in 1..best {
            if search.qualifies(c, k, &mut log)? {
                // Centres that needed large radii are the likeliest to fail
                // at small ones, so the scan tries them first.
                let mut order = centers.clone();
                order.sort_by_key(|c| std::cmp::Reverse(need.get(c).copied().unwrap_or(0)));
                let (k, worst) = linear_scan(&mut search, &order)?;
                return Ok(finish(&search, k, worst, RadiusSearch::LinearScan, true));
            }
        }
    }
    Ok(finish(&search, Some(best), worst, RadiusSearch::Bisection, false))
}

/// Centres that failed recently are retried first at each radius.
const MAX_BLOCKERS: usize = 64;

/// First grid radius at which every centre qualifies. Returns the centre that
/// failed last at the previous radius.
fn linear_scan(search: &mut WidthSearch<'_>, centers: &[usize]) -> Result<(Option<usize>, Option<usize>)> {
    let mut blockers: VecDeque<usize> = VecDeque::new();
    'radii: for k in 1..=search.kmax {
        for pos in 0..blockers.len() {
            let b = blockers[pos];
            let mut log = Vec::new();
            let pass = search.qualifies(b, k, &mut log)?;
            log.into_iter().for_each(|r| search.book.add(r));
            if !pass {
                blockers.remove(pos);
                blockers.push_front(b);
                continue 'radii;
            }
        }
        let mut failing = None;
        search.batched(centers, |s, c, log| s.qualifies(c, k, log), |_, c, pass| {
            if !pass {
                failing = Some(c);
            }
            pass
        })?;
        match failing {
            None => return Ok((Some(k), blockers.front().copied())),
            Some(c) => {
                blockers.push_front(c);
                blockers.truncate(MAX_BLOCKERS);
            }
        }
    }
    Ok((None, blockers.front().copied()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EtaRobustness {
    pub w1: CapWidthResult,
    pub w2: CapWidthResult,
    /// `w1 / w2`.
    pub ratio: f64,
}

/// Widths at `eta1 ≥ eta2` and their quotient.
pub fn eta_robustness(
    sys: &DomainSystem,
    eta1: f64,
    eta2: f64,
    rmax: f64,
    opts: &CapWidthOptions,
) -> Result<EtaRobustness> {
    if !(eta2 > 0.0 && eta2 <= eta1 && eta1 < 1.0) {
        return Err(Error::Domain(format!("need 0 < eta2 <= eta1 < 1, got {eta1}, {eta2}")));
    }
    let w1 = cap_width_with(sys, eta1, rmax, opts)?;
    let w2 = if eta1 == eta2 { w1.clone() } else { cap_width_with(sys, eta2, rmax, opts)? };
    let ratio = if w1.w == w2.w { 1.0 } else { w1.w / w2.w };
    Ok(EtaRobustness { w1, w2, ratio })
}
