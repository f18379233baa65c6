//! Level sets of the rescaled Hamiltonian: phase portraits and separatrices
//! traced by marching squares on a ξ-periodic grid.

use std::collections::HashMap;
use std::f64::consts::PI;

use rayon::prelude::*;

use super::{
    leading_hamiltonian, refine_fixed_points, rescaled_hamiltonian, AnnulusFixedPoint, AnnulusParams,
    FixedPointKind, DEFAULT_DELTA0,
};
use crate::error::{Error, Result};

const TAU: f64 = 2.0 * PI;

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct PortraitSample {
    pub y: f64,
    pub xi: f64,
    pub h: f64,
}

/// Ĥ on a (y, ξ) grid with ξ ∈ [0, 2π).
pub fn phase_portrait(p: &AnnulusParams, y_range: (f64, f64), ny: usize, nxi: usize) -> Result<Vec<PortraitSample>> {
    if ny < 2 || nxi < 1 {
        return Err(Error::InvalidParameter("portrait grid needs ny >= 2 and nxi >= 1".into()));
    }
    let mut out = Vec::with_capacity(ny * nxi);
    for j in 0..ny {
        let y = y_range.0 + (y_range.1 - y_range.0) * j as f64 / (ny - 1) as f64;
        for i in 0..nxi {
            let xi = TAU * i as f64 / nxi as f64;
            out.push(PortraitSample {
                y,
                xi,
                h: rescaled_hamiltonian(y, xi, p)?,
            });
        }
    }
    Ok(out)
}

/// Level set of Ĥ through one saddle; points are (y, ξ) with ξ unwrapped
/// along each polyline.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct SeparatrixContour {
    pub saddle: AnnulusFixedPoint,
    pub level: f64,
    pub polylines: Vec<Vec<[f64; 2]>>,
    /// (Δy, Δξ) of the tracing grid.
    pub cell: (f64, f64),
    /// Largest start-to-end gap over the polylines, ξ taken mod 2π.
    pub closure_gap: f64,
}

impl SeparatrixContour {
    /// Whether some polyline of the contour, read as a closed polygon,
    /// contains (y, ξ) for some 2π shift of ξ.
    pub fn encloses(&self, y: f64, xi: f64) -> bool {
        self.polylines.iter().any(|pl| (-2..=2).any(|k| point_in_polygon(pl, y, xi + TAU * k as f64)))
    }

}

fn point_in_polygon(poly: &[[f64; 2]], y: f64, xi: f64) -> bool {
    let n = poly.len();
    if n < 3 {
        return false;
    }
    let mut inside = false;
    let mut j = n - 1;
    for i in 0..n {
        let (yi, xi_i) = (poly[i][0], poly[i][1]);
        let (yj, xi_j) = (poly[j][0], poly[j][1]);
        if (yi > y) != (yj > y) && xi < (xi_j - xi_i) * (y - yi) / (yj - yi) + xi_i {
            inside = !inside;
        }
        j = i;
    }
    inside
}

fn periodic_dist(a: &[f64; 2], b: &[f64; 2]) -> f64 {
    let dx = (a[1] - b[1] + PI).rem_euclid(TAU) - PI;
    (a[0] - b[0]).hypot(dx)
}

fn segment_dist(p: &[f64; 2], a: &[f64; 2], b: &[f64; 2]) -> f64 {
    // Shift p by a multiple of 2π in ξ so that it sits next to the segment.
    let shift = TAU * ((a[1] - p[1]) / TAU).round();
    let q = [p[0], p[1] + shift];
    let d = [b[0] - a[0], b[1] - a[1]];
    let len2 = d[0] * d[0] + d[1] * d[1];
    let t = if len2 > 0.0 {
        (((q[0] - a[0]) * d[0] + (q[1] - a[1]) * d[1]) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    (q[0] - a[0] - t * d[0]).hypot(q[1] - a[1] - t * d[1])
}

fn one_sided(x: &[Vec<[f64; 2]>], y: &[Vec<[f64; 2]>]) -> f64 {
    x.iter()
        .flatten()
        .map(|p| {
            y.iter()
                .flat_map(|pl| pl.windows(2))
                .map(|w| segment_dist(p, &w[0], &w[1]))
                .fold(f64::INFINITY, f64::min)
        })
        .fold(0.0, f64::max)
}

/// Symmetric Hausdorff distance between two sets of polylines, ξ periodic.
/// Vertices of one set are measured against the segments of the other.
pub fn hausdorff_distance(a: &[Vec<[f64; 2]>], b: &[Vec<[f64; 2]>]) -> f64 {
    one_sided(a, b).max(one_sided(b, a))
}

/// Grid resolution for [`separatrix_levels`].
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct ContourGrid {
    pub nxi: usize,
    pub ny: usize,
}

impl Default for ContourGrid {
    fn default() -> Self {
        ContourGrid { nxi: 256, ny: 128 }
    }
}

/// (horizontal = 0 | vertical = 1, i, j)
type EdgeKey = (u8, usize, usize);

struct Grid<'a> {
    nx: usize,
    ny: usize,
    xi0: f64,
    y0: f64,
    dxi: f64,
    dy: f64,
    f: Vec<f64>,
    excluded: &'a dyn Fn(usize, usize) -> bool,
}

impl Grid<'_> {
    fn val(&self, i: usize, j: usize) -> f64 {
        self.f[(i % self.nx) * (self.ny + 1) + j]
    }

    fn point(&self, key: EdgeKey) -> [f64; 2] {
        let (d, i, j) = key;
        let (a, b) = if d == 0 {
            (self.val(i, j), self.val(i + 1, j))
        } else {
            (self.val(i, j), self.val(i, j + 1))
        };
        let t = a / (a - b);
        let xi = self.xi0 + i as f64 * self.dxi;
        let y = self.y0 + j as f64 * self.dy;
        if d == 0 {
            [y, xi + t * self.dxi]
        } else {
            [y + t * self.dy, xi]
        }
    }

    fn touches_block(&self, key: EdgeKey) -> bool {
        let (d, i, j) = key;
        let i = i % self.nx;
        if d == 0 {
            (j > 0 && (self.excluded)(i, j - 1)) || (j < self.ny && (self.excluded)(i, j))
        } else {
            (self.excluded)((i + self.nx - 1) % self.nx, j) || (self.excluded)(i, j)
        }
    }
}

fn segments(g: &Grid) -> Vec<(EdgeKey, EdgeKey)> {
    let mut out = Vec::new();
    for i in 0..g.nx {
        for j in 0..g.ny {
            if (g.excluded)(i, j) {
                continue;
            }
            let ip = (i + 1) % g.nx;
            let c = [g.val(i, j), g.val(ip, j), g.val(ip, j + 1), g.val(i, j + 1)];
            let s: Vec<bool> = c.iter().map(|v| *v >= 0.0).collect();
            let edges: [EdgeKey; 4] = [(0, i, j), (1, ip, j), (0, i, j + 1), (1, i, j)];
            let cross = [s[0] != s[1], s[1] != s[2], s[3] != s[2], s[0] != s[3]];
            let hits: Vec<usize> = (0..4).filter(|&k| cross[k]).collect();
            match hits.len() {
                2 => out.push((edges[hits[0]], edges[hits[1]])),
                4 => {
                    let centre = 0.25 * c.iter().sum::<f64>() >= 0.0;
                    if centre == s[0] {
                        out.push((edges[0], edges[1]));
                        out.push((edges[2], edges[3]));
                    } else {
                        out.push((edges[0], edges[3]));
                        out.push((edges[1], edges[2]));
                    }
                }
                _ => {}
            }
        }
    }
    out
}

fn canonical(key: EdgeKey, nx: usize) -> EdgeKey {
    (key.0, key.1 % nx, key.2)
}

fn chains(segs: &[(EdgeKey, EdgeKey)], nx: usize) -> Vec<Vec<EdgeKey>> {
    let mut adj: HashMap<EdgeKey, Vec<usize>> = HashMap::new();
    for (k, (a, b)) in segs.iter().enumerate() {
        adj.entry(canonical(*a, nx)).or_default().push(k);
        adj.entry(canonical(*b, nx)).or_default().push(k);
    }
    let mut used = vec![false; segs.len()];
    let mut out = Vec::new();
    let walk = |start: EdgeKey, used: &mut Vec<bool>| {
        let mut chain = vec![start];
        let mut cur = start;
        loop {
            let next = adj[&cur].iter().copied().find(|&s| !used[s]);
            let Some(s) = next else { break };
            used[s] = true;
            let (a, b) = (canonical(segs[s].0, nx), canonical(segs[s].1, nx));
            cur = if a == cur { b } else { a };
            chain.push(cur);
        }
        chain
    };
    let mut ends: Vec<EdgeKey> = adj.iter().filter(|(_, v)| v.len() == 1).map(|(k, _)| *k).collect();
    ends.sort_unstable();
    for e in ends {
        if adj[&e].iter().any(|&s| !used[s]) {
            out.push(walk(e, &mut used));
        }
    }
    for k in 0..segs.len() {
        if !used[k] {
            out.push(walk(canonical(segs[k].0, nx), &mut used));
        }
    }
    out
}

fn unwrap_to(reference: f64, xi: f64) -> f64 {
    xi + TAU * ((reference - xi) / TAU).round()
}

fn trace_saddle(p: &AnnulusParams, saddle: &AnnulusFixedPoint, grid: ContourGrid) -> Result<SeparatrixContour> {
    let level = rescaled_hamiltonian(saddle.y, saddle.xi, p)?;
    // Extent in y from the η = 0 separatrix, with margin.
    let p0 = p.with_eta(0.0);
    let h0 = leading_hamiltonian(0.0, saddle.xi, &p0);
    let vmin = (0..512)
        .map(|k| leading_hamiltonian(0.0, TAU * k as f64 / 512.0, &p0))
        .fold(f64::INFINITY, f64::min);
    let ext = ((h0 - vmin).max(0.0) / (2.0 * p.omega)).sqrt();
    let mut half = 1.5 * ext + 0.1 * ext.max(1.0);
    if p.eta > 0.0 {
        half = half.min(0.99 * (p.omega / p.eta + saddle.y));
    }
    let nx = grid.nxi.max(8) & !1;
    let ny = grid.ny.max(8) & !1;
    let dxi = TAU / nx as f64;
    let dy = 2.0 * half / ny as f64;
    let (is, js) = (nx / 2, ny / 2);
    let xi0 = saddle.xi - PI;
    let y0 = saddle.y - half;
    let mut f = vec![0.0; nx * (ny + 1)];
    for i in 0..nx {
        for j in 0..=ny {
            let xi = xi0 + i as f64 * dxi;
            let y = y0 + j as f64 * dy;
            f[i * (ny + 1) + j] = rescaled_hamiltonian(y, xi, p)? - level;
        }
    }
    let excluded = move |i: usize, j: usize| i + 2 >= is && i < is + 2 && j + 2 >= js && j < js + 2;
    let g = Grid {
        nx,
        ny,
        xi0,
        y0,
        dxi,
        dy,
        f,
        excluded: &excluded,
    };
    let segs = segments(&g);
    let sp = [saddle.y, saddle.xi];
    let mut polylines = Vec::new();
    for chain in chains(&segs, nx) {
        let head = g.touches_block(chain[0]);
        let tail = chain.len() > 1 && g.touches_block(*chain.last().unwrap());
        if !head && !tail {
            continue;
        }
        let mut pts: Vec<[f64; 2]> = Vec::with_capacity(chain.len() + 2);
        if head {
            pts.push(sp);
        }
        for &k in &chain {
            let mut q = g.point(k);
            if let Some(prev) = pts.last() {
                q[1] = unwrap_to(prev[1], q[1]);
            }
            pts.push(q);
        }
        if tail {
            let prev = pts.last().unwrap()[1];
            pts.push([sp[0], unwrap_to(prev, sp[1])]);
        }
        polylines.push(pts);
    }
    let closure_gap = polylines
        .iter()
        .map(|pl| periodic_dist(&pl[0], pl.last().unwrap()))
        .fold(0.0, f64::max);
    Ok(SeparatrixContour {
        saddle: *saddle,
        level,
        polylines,
        cell: (dy, dxi),
        closure_gap,
    })
}

/// Separatrix level and traced contour for every saddle of the annulus
/// system, in parallel across saddles.
pub fn separatrix_levels(p: &AnnulusParams, grid: ContourGrid) -> Result<Vec<SeparatrixContour>> {
    let fps = refine_fixed_points(p, 8, DEFAULT_DELTA0)?;
    let saddles: Vec<AnnulusFixedPoint> = fps.into_iter().filter(|f| f.kind == FixedPointKind::Saddle).collect();
    if saddles.is_empty() {
        return Err(Error::NoSaddle);
    }
    saddles.par_iter().map(|s| trace_saddle(p, s, grid)).collect()
}
