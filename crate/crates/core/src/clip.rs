//! Cell of the origin by successive half-space clipping.
//!
//! Starts from the cube `[-R, R]^d` and cuts it with the bisector
//! half-spaces `⟨z, x⟩ <= ‖x‖² / 2` of the generators in order of
//! increasing norm, stopping once `‖x‖ / 2` exceeds the farthest vertex.
//! In general position every vertex lies on exactly `d` planes and two
//! vertices span an edge exactly when they share `d - 1` of them, which is
//! all the combinatorics a cut needs.

use crate::constants::MAX_DIM;
use crate::geometry::{circumcenter_into, pointy_test_with, HullTest};
use crate::linalg::System;
use crate::typical_cell::RawVertex;

/// Plane ids at or above this value are faces of the starting cube.
const CUBE_BASE: u32 = u32::MAX - 64;
const FILL: u32 = u32::MAX;
/// Relative band around a plane in which a vertex counts as a tie.
const PLANE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy)]
struct Corner {
    loc: [f64; MAX_DIM],
    planes: [u32; MAX_DIM],
    n2: f64,
}

type Key = [u32; MAX_DIM];

/// Result of [`Clipper::compute`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum CellOutcome {
    /// Bounded by generator bisectors only, and inside half the radius.
    Closed,
    /// Not certified at this radius.
    Open,
    /// A vertex tie, a singular solve or a boundary pointy test.
    Degenerate,
}

pub(crate) struct Clipper {
    d: usize,
    verts: Vec<Corner>,
    next: Vec<Corner>,
    side: Vec<f64>,
    removed: Vec<(Key, u32)>,
    order: Vec<(f64, u32)>,
    sys: System,
}

fn drop_plane(p: &Key, d: usize, j: usize) -> Key {
    let mut k = [FILL; MAX_DIM];
    let mut m = 0;
    for (i, &v) in p[..d].iter().enumerate() {
        if i != j {
            k[m] = v;
            m += 1;
        }
    }
    k
}

fn insert_plane(mut k: Key, d: usize, id: u32) -> Key {
    // k holds d - 1 sorted ids followed by FILL.
    let mut i = d - 1;
    while i > 0 && k[i - 1] > id {
        k[i] = k[i - 1];
        i -= 1;
    }
    k[i] = id;
    k
}

impl Clipper {
    pub(crate) fn new(d: usize) -> Self {
        Clipper {
            d,
            verts: Vec::new(),
            next: Vec::new(),
            side: Vec::new(),
            removed: Vec::new(),
            order: Vec::new(),
            sys: System::new(d, d),
        }
    }

    fn reset(&mut self, half_width: f64) {
        let d = self.d;
        self.verts.clear();
        for mask in 0u32..(1 << d) {
            let mut c = Corner {
                loc: [0.0; MAX_DIM],
                planes: [FILL; MAX_DIM],
                n2: d as f64 * half_width * half_width,
            };
            for k in 0..d {
                let upper = (mask >> k) & 1;
                c.loc[k] = if upper == 1 { half_width } else { -half_width };
                c.planes[k] = CUBE_BASE + 2 * k as u32 + upper;
            }
            self.verts.push(c);
        }
    }

    fn max_n2(&self) -> f64 {
        self.verts.iter().map(|v| v.n2).fold(0.0, f64::max)
    }

    /// Cuts with the bisector of `x`; `Err` on a vertex tie.
    fn clip(&mut self, id: u32, x: &[f64], n2: f64) -> Result<(), ()> {
        let d = self.d;
        let h = 0.5 * n2;
        let xn = n2.sqrt();
        self.side.clear();
        let mut any_out = false;
        for v in &self.verts {
            let mut s = -h;
            for k in 0..d {
                s += v.loc[k] * x[k];
            }
            if s.abs() <= PLANE_TOL * (h + v.n2.sqrt() * xn) {
                return Err(());
            }
            any_out |= s > 0.0;
            self.side.push(s);
        }
        if !any_out {
            return Ok(());
        }
        self.removed.clear();
        for (i, (v, &s)) in self.verts.iter().zip(&self.side).enumerate() {
            if s > 0.0 {
                for j in 0..d {
                    self.removed.push((drop_plane(&v.planes, d, j), i as u32));
                }
            }
        }
        self.removed.sort_unstable_by(|a, b| a.0.cmp(&b.0));
        self.next.clear();
        for (i, v) in self.verts.iter().enumerate() {
            let sk = self.side[i];
            if sk > 0.0 {
                continue;
            }
            self.next.push(*v);
            for j in 0..d {
                let key = drop_plane(&v.planes, d, j);
                if let Ok(pos) = self.removed.binary_search_by(|e| e.0.cmp(&key)) {
                    let w = &self.verts[self.removed[pos].1 as usize];
                    let sr = self.side[self.removed[pos].1 as usize];
                    let t = sk / (sk - sr);
                    let mut c = Corner {
                        loc: [0.0; MAX_DIM],
                        planes: insert_plane(key, d, id),
                        n2: 0.0,
                    };
                    for k in 0..d {
                        c.loc[k] = v.loc[k] + t * (w.loc[k] - v.loc[k]);
                        c.n2 += c.loc[k] * c.loc[k];
                    }
                    self.next.push(c);
                }
            }
        }
        std::mem::swap(&mut self.verts, &mut self.next);
        Ok(())
    }

    /// Cell of the origin among the `n` points `points(i)`, all points of
    /// norm at most `radius` being present. On `Closed`, `out` receives
    /// the vertices with locations recomputed from their nuclei.
    pub(crate) fn compute<'a>(
        &mut self,
        n: usize,
        points: impl Fn(usize) -> &'a [f64],
        radius: f64,
        classify: bool,
        out: &mut Vec<RawVertex>,
    ) -> CellOutcome {
        let d = self.d;
        debug_assert!(n < CUBE_BASE as usize);
        let r2 = radius * radius;
        self.order.clear();
        for i in 0..n {
            let n2: f64 = points(i)[..d].iter().map(|v| v * v).sum();
            if n2 <= r2 {
                self.order.push((n2, i as u32));
            }
        }
        self.order
            .sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        self.reset(radius);
        let mut far = self.max_n2();
        for k in 0..self.order.len() {
            let (n2, i) = self.order[k];
            if 0.25 * n2 > far * (1.0 + 1e-9) {
                break;
            }
            if self.clip(i, points(i as usize), n2).is_err() {
                return CellOutcome::Degenerate;
            }
            far = self.max_n2();
        }
        if far > 0.25 * r2 || self.verts.iter().any(|v| v.planes[0] >= CUBE_BASE || v.planes[d - 1] >= CUBE_BASE) {
            return CellOutcome::Open;
        }
        out.clear();
        for v in &self.verts {
            let mut c = [0.0; MAX_DIM];
            let nuclei = v.planes;
            if circumcenter_into(&mut self.sys, d, nuclei[..d].iter().map(|&g| points(g as usize)), &mut c[..d])
                .is_none()
            {
                return CellOutcome::Degenerate;
            }
            let pointy = if classify {
                let t = pointy_test_with(d, &c[..d], nuclei[..d].iter().map(|&g| points(g as usize)));
                if t == HullTest::Degenerate {
                    return CellOutcome::Degenerate;
                }
                Some(t)
            } else {
                None
            };
            let norm = c[..d].iter().map(|v| v * v).sum::<f64>().sqrt();
            out.push(RawVertex {
                location: c,
                norm,
                nuclei,
                pointy,
            });
        }
        CellOutcome::Closed
    }
}
