//! Curves in the complex `E` plane on which the discriminant is real and lies
//! in `[-2, 2]`, traced by marching squares on `Im Delta = 0`.

use crate::error::{Error, Result};
use crate::floquet::SampledPropagator;
use crate::potential::PotentialSpec;
use num_complex::Complex64;
use rayon::prelude::*;
use std::collections::HashMap;

/// Largest grid resolution accepted per axis.
pub const MAX_RESOLUTION: usize = 2048;
/// Arc points satisfy `|Im Delta| <= ARC_TOL * (1 + |Delta|)`.
pub const ARC_TOL: f64 = 1e-3;
const PROPAGATOR_TOL: f64 = 1e-10;
const POLISH_ITERS: usize = 60;
const NEWTON_ITERS: usize = 30;

/// Rectangle `[re0, re1] x [im0, im1]` of the spectral plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Window {
    pub re: (f64, f64),
    pub im: (f64, f64),
}

impl Window {
    pub fn new(re0: f64, re1: f64, im0: f64, im1: f64) -> Result<Self> {
        let ok = [re0, re1, im0, im1].iter().all(|v| v.is_finite()) && re0 < re1 && im0 < im1;
        if !ok {
            return Err(Error::InvalidInput(format!("invalid window [{re0}, {re1}] x [{im0}, {im1}]")));
        }
        Ok(Window { re: (re0, re1), im: (im0, im1) })
    }

    pub fn contains(&self, e: Complex64) -> bool {
        let slack = 1e-12 * (self.re.1 - self.re.0).max(self.im.1 - self.im.0);
        e.re >= self.re.0 - slack && e.re <= self.re.1 + slack && e.im >= self.im.0 - slack && e.im <= self.im.1 + slack
    }

    fn corners(&self) -> [Complex64; 5] {
        let c = |re, im| Complex64::new(re, im);
        [
            c(self.re.0, self.im.0),
            c(self.re.1, self.im.0),
            c(self.re.0, self.im.1),
            c(self.re.1, self.im.1),
            c(0.5 * (self.re.0 + self.re.1), 0.5 * (self.im.0 + self.im.1)),
        ]
    }
}

/// A point of an arc with the discriminant there.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArcPoint {
    pub e: Complex64,
    pub delta: Complex64,
}

/// Polylines approximating `{E : Delta(E) in [-2, 2]}` inside a window.
#[derive(Debug, Clone, PartialEq)]
pub struct ArcSet {
    pub window: Window,
    pub resolution: usize,
    pub arcs: Vec<Vec<ArcPoint>>,
    /// Step count of the fixed-step propagator used for the grid.
    pub steps: usize,
}

impl ArcSet {
    pub fn points(&self) -> impl Iterator<Item = &ArcPoint> {
        self.arcs.iter().flatten()
    }

    pub fn len(&self) -> usize {
        self.arcs.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.arcs.iter().all(Vec::is_empty)
    }

    /// Grid spacing `(dx, dy)`.
    pub fn cell(&self) -> (f64, f64) {
        let k = (self.resolution - 1) as f64;
        ((self.window.re.1 - self.window.re.0) / k, (self.window.im.1 - self.window.im.0) / k)
    }

    /// Largest `|Im Delta| / (1 + |Delta|)` and largest `|Re Delta| - 2` over all points.
    pub fn defects(&self) -> (f64, f64) {
        self.points().fold((0.0, f64::NEG_INFINITY), |(a, b), p| {
            (a.max(p.delta.im.abs() / (1.0 + p.delta.norm())), b.max(p.delta.re.abs() - 2.0))
        })
    }

    /// Every point satisfies the arc tolerance.
    pub fn within_tolerance(&self) -> bool {
        let (im, re) = self.defects();
        im <= ARC_TOL && re <= ARC_TOL * 3.0
    }

    /// Largest distance from a point to the nearest conjugate of another
    /// point, in units of the cell diagonal. Points whose mirror image falls
    /// outside the window are skipped.
    pub fn conjugation_defect(&self) -> f64 {
        let (dx, dy) = self.cell();
        let diag = dx.hypot(dy);
        let key = |e: Complex64| ((e.re / dx).floor() as i64, (e.im / dy).floor() as i64);
        let mut buckets: HashMap<(i64, i64), Vec<Complex64>> = HashMap::new();
        for p in self.points() {
            buckets.entry(key(p.e)).or_default().push(p.e);
        }
        let mut worst: f64 = 0.0;
        for p in self.points() {
            let m = p.e.conj();
            if !self.window.contains(m) {
                continue;
            }
            let (i, j) = key(m);
            let mut best = f64::INFINITY;
            for di in -2..=2 {
                for dj in -2..=2 {
                    if let Some(v) = buckets.get(&(i + di, j + dj)) {
                        for q in v {
                            best = best.min((q - m).norm());
                        }
                    }
                }
            }
            worst = worst.max(best / diag);
        }
        worst
    }

    /// Largest `|Im E|` over all points.
    pub fn max_abs_im(&self) -> f64 {
        self.points().map(|p| p.e.im.abs()).fold(0.0, f64::max)
    }

    /// CSV with columns `arc_id,re_E,im_E,re_Delta`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("arc_id,re_E,im_E,re_Delta\n");
        for (id, arc) in self.arcs.iter().enumerate() {
            for p in arc {
                out.push_str(&format!(
                    "{id},{},{},{}\n",
                    crate::json::fmt_f64(p.e.re),
                    crate::json::fmt_f64(p.e.im),
                    crate::json::fmt_f64(p.delta.re)
                ));
            }
        }
        out
    }

    pub fn to_json_value(&self) -> serde_json::Value {
        serde_json::json!({
            "window": [self.window.re.0, self.window.re.1, self.window.im.0, self.window.im.1],
            "resolution": self.resolution,
            "arcs": self.arcs.iter().map(|a| a.iter().map(|p| [p.e.re, p.e.im, p.delta.re]).collect::<Vec<_>>()).collect::<Vec<_>>(),
        })
    }
}

/// Trace `{E : Im Delta(E) = 0, |Re Delta(E)| <= 2}` on a `resolution x
/// resolution` node grid over `window`.
///
/// Crossings of `Im Delta = 0` on cell edges are located by bracketing and
/// refined to machine precision; where an arc leaves `[-2, 2]` its endpoint
/// is refined by Newton's method on `Delta = +-2`.
pub fn stability_region(spec: &PotentialSpec, window: Window, resolution: usize) -> Result<ArcSet> {
    if !(2..=MAX_RESOLUTION).contains(&resolution) {
        return Err(Error::InvalidInput(format!(
            "resolution must lie in [2, {MAX_RESOLUTION}], got {resolution}"
        )));
    }
    let prop = SampledPropagator::calibrated(spec, &window.corners(), PROPAGATOR_TOL)?;
    let k = (resolution - 1) as f64;
    let xs: Vec<f64> = (0..resolution).map(|i| window.re.0 + (window.re.1 - window.re.0) * i as f64 / k).collect();
    let ys: Vec<f64> = (0..resolution).map(|j| window.im.0 + (window.im.1 - window.im.0) * j as f64 / k).collect();
    let node = |i: usize, j: usize| Complex64::new(xs[i], ys[j]);

    // row-major values of Delta at the nodes
    let values: Vec<Complex64> = (0..resolution * resolution)
        .into_par_iter()
        .map(|idx| prop.discriminant(node(idx % resolution, idx / resolution)))
        .collect();
    let at = |i: usize, j: usize| values[j * resolution + i];
    let sign = |d: Complex64| d.im >= 0.0;

    // crossing points on horizontal edges (i,j)-(i+1,j) and vertical edges (i,j)-(i,j+1)
    let mut edges: Vec<(bool, usize, usize)> = Vec::new();
    for j in 0..resolution {
        for i in 0..resolution {
            if i + 1 < resolution && sign(at(i, j)) != sign(at(i + 1, j)) {
                edges.push((true, i, j));
            }
            if j + 1 < resolution && sign(at(i, j)) != sign(at(i, j + 1)) {
                edges.push((false, i, j));
            }
        }
    }
    let points: Vec<ArcPoint> = edges
        .par_iter()
        .map(|&(horizontal, i, j)| {
            let (a, b) = if horizontal { (node(i, j), node(i + 1, j)) } else { (node(i, j), node(i, j + 1)) };
            let (fa, fb) = if horizontal { (at(i, j), at(i + 1, j)) } else { (at(i, j), at(i, j + 1)) };
            polish_on_edge(&prop, a, b, fa.im, fb.im)
        })
        .collect();
    let index: HashMap<(bool, usize, usize), usize> = edges.iter().enumerate().map(|(n, &e)| (e, n)).collect();

    // marching squares: connect crossings within each cell
    let mut adjacency: Vec<Vec<usize>> = vec![Vec::new(); points.len()];
    for j in 0..resolution - 1 {
        for i in 0..resolution - 1 {
            // edges in the order bottom, right, top, left
            let cell_edges = [(true, i, j), (false, i + 1, j), (true, i, j + 1), (false, i, j)];
            let hit: Vec<(usize, usize)> = cell_edges
                .iter()
                .enumerate()
                .filter_map(|(slot, e)| index.get(e).map(|&p| (slot, p)))
                .collect();
            let mut link = |a: usize, b: usize| {
                adjacency[a].push(b);
                adjacency[b].push(a);
            };
            match hit.len() {
                2 => link(hit[0].1, hit[1].1),
                4 => {
                    let centre = Complex64::new(0.5 * (xs[i] + xs[i + 1]), 0.5 * (ys[j] + ys[j + 1]));
                    let p = |slot: usize| hit[slot].1;
                    if sign(prop.discriminant(centre)) == sign(at(i, j)) {
                        // the bottom-left corner region reaches the centre
                        link(p(0), p(1));
                        link(p(2), p(3));
                    } else {
                        link(p(3), p(0));
                        link(p(1), p(2));
                    }
                }
                _ => {}
            }
        }
    }

    let chains = trace_chains(&adjacency);
    let cell = (xs[1] - xs[0]).hypot(ys[1] - ys[0]);
    let mut arcs = Vec::new();
    for chain in chains {
        let pts: Vec<ArcPoint> = chain.iter().map(|&n| points[n]).collect();
        clip_chain(&prop, &pts, cell, &window, &mut arcs);
    }
    Ok(ArcSet { window, resolution, arcs, steps: prop.steps() })
}

/// Root of `Im Delta` on the segment `a -> b` by the Illinois variant of
/// regula falsi.
fn polish_on_edge(prop: &SampledPropagator, a: Complex64, b: Complex64, fa: f64, fb: f64) -> ArcPoint {
    let (mut s0, mut s1, mut f0, mut f1) = (0.0f64, 1.0f64, fa, fb);
    let mut side = 0;
    let mut best = ArcPoint { e: a, delta: Complex64::new(0.0, f64::INFINITY) };
    for _ in 0..POLISH_ITERS {
        let s = if f1 != f0 { (s0 * f1 - s1 * f0) / (f1 - f0) } else { 0.5 * (s0 + s1) };
        let s = s.clamp(s0.min(s1), s0.max(s1));
        let e = a + (b - a) * s;
        let d = prop.discriminant(e);
        if d.im.abs() < best.delta.im.abs() {
            best = ArcPoint { e, delta: d };
        }
        if d.im == 0.0 || (s1 - s0).abs() < 1e-15 || d.im.abs() <= 1e-14 * (1.0 + d.norm()) {
            break;
        }
        if (d.im > 0.0) == (f1 > 0.0) {
            s1 = s;
            f1 = d.im;
            if side == 1 {
                f0 *= 0.5;
            }
            side = 1;
        } else {
            s0 = s;
            f0 = d.im;
            if side == -1 {
                f1 *= 0.5;
            }
            side = -1;
        }
    }
    best
}

/// Split a graph of maximum degree two into polylines.
fn trace_chains(adjacency: &[Vec<usize>]) -> Vec<Vec<usize>> {
    let mut seen = vec![false; adjacency.len()];
    let mut chains = Vec::new();
    let walk = |start: usize, seen: &mut Vec<bool>| {
        let mut chain = vec![start];
        seen[start] = true;
        let mut current = start;
        while let Some(&next) = adjacency[current].iter().find(|&&n| !seen[n]) {
            seen[next] = true;
            chain.push(next);
            current = next;
        }
        // close loops
        if chain.len() > 2 && adjacency[current].contains(&start) {
            chain.push(start);
        }
        chain
    };
    // open chains first, from their ends
    for s in 0..adjacency.len() {
        if !seen[s] && adjacency[s].len() <= 1 {
            chains.push(walk(s, &mut seen));
        }
    }
    for s in 0..adjacency.len() {
        if !seen[s] {
            chains.push(walk(s, &mut seen));
        }
    }
    chains
}

fn inside(p: &ArcPoint) -> bool {
    p.delta.re.abs() <= 2.0
}

/// Keep the runs of `chain` with `|Re Delta| <= 2`, closing each run at the
/// point where `Delta = +-2`.
fn clip_chain(prop: &SampledPropagator, chain: &[ArcPoint], cell: f64, window: &Window, out: &mut Vec<Vec<ArcPoint>>) {
    let mut run: Vec<ArcPoint> = Vec::new();
    for (k, p) in chain.iter().enumerate() {
        if inside(p) {
            if run.is_empty() && k > 0 {
                if let Some(end) = endpoint(prop, p, &chain[k - 1], cell, window) {
                    run.push(end);
                }
            }
            run.push(*p);
        } else if !run.is_empty() {
            if let Some(end) = endpoint(prop, &chain[k - 1], p, cell, window) {
                run.push(end);
            }
            out.push(std::mem::take(&mut run));
        }
    }
    if !run.is_empty() {
        out.push(run);
    }
}

/// Solve `Delta = +-2` near the transition from `a` (inside) to `b` (outside).
fn endpoint(prop: &SampledPropagator, a: &ArcPoint, b: &ArcPoint, cell: f64, window: &Window) -> Option<ArcPoint> {
    let level = 2.0f64.copysign(b.delta.re);
    let t = (level - a.delta.re) / (b.delta.re - a.delta.re);
    let start = a.e + (b.e - a.e) * t.clamp(0.0, 1.0);
    let mut e = start;
    for _ in 0..NEWTON_ITERS {
        let (d, dd) = prop.discriminant_with_derivative(e);
        if dd.norm() == 0.0 {
            return None;
        }
        let step = (d - level) / dd;
        e -= step;
        if step.norm() <= 1e-14 * (1.0 + e.norm()) {
            break;
        }
    }
    let d = prop.discriminant(e);
    let converged = (d - level).norm() <= 1e-9 * (1.0 + d.norm());
    (converged && (e - start).norm() <= 2.0 * cell && window.contains(e)).then_some(ArcPoint { e, delta: d })
}
