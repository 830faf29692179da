//! The Voronoi cell of the origin under `Φ ∪ {0}`: vertex enumeration,
//! certified construction and pointy-vertex counts.
//!
//! [`enumerate_vertices`] works by brute force over `d`-subsets of
//! generators: the sphere through the origin and the subset is a cell
//! vertex exactly when no generator lies strictly inside it. A vertex at
//! distance `ρ` has all its defining nuclei, and every generator that
//! could violate the empty ball, within `2ρ` of the origin, which makes the
//! norm-bounded enumeration exact.
//!
//! [`build_typical_cell`] clips a cube by bisectors instead, which scales
//! with the number of cell vertices rather than the number of subsets. A
//! build is certified once the cell is bounded by bisectors alone and lies
//! within half the sampled radius: no generator farther out can cut it.

use crate::clip::{CellOutcome, Clipper};
use crate::constants::{Dim, MAX_DIM};
use crate::error::{Error, Result};
use crate::geometry::{circumcenter_into, pointy_test_with, HullTest};
use crate::linalg::System;
use crate::sampling::{poisson_annulus, IntensityModel, RngStream};
use serde::{Deserialize, Serialize};

/// Relative tolerance of the empty-ball test.
pub const EMPTY_BALL_TOL: f64 = 1e-9;

/// A vertex of the cell of the origin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Vertex {
    pub location: Vec<f64>,
    /// Indices of the `d` defining generators, ascending.
    pub nucleus_indices: Vec<usize>,
    pub norm: f64,
    pub pointy: bool,
}

/// Output of [`enumerate_vertices`].
#[derive(Debug, Clone, Default, PartialEq)]
pub struct VertexEnumeration {
    pub vertices: Vec<Vertex>,
    /// `d`-subsets skipped because their circumcenter solve was singular.
    pub singular_subsets: u64,
    /// Vertices whose pointy test hit the boundary band.
    pub degenerate_pointy: u64,
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct RawVertex {
    pub(crate) location: [f64; MAX_DIM],
    pub(crate) norm: f64,
    /// Original generator indices, ascending.
    pub(crate) nuclei: [u32; MAX_DIM],
    pub(crate) pointy: Option<HullTest>,
}

/// Reusable scratch for subset enumeration.
pub(crate) struct Enumerator {
    d: usize,
    coords: Vec<f64>,
    norm2: Vec<f64>,
    index: Vec<u32>,
    order: Vec<(f64, u32)>,
    sys: System,
    pub(crate) singular: u64,
    pub(crate) degenerate: u64,
}

impl Enumerator {
    pub(crate) fn new(d: usize) -> Self {
        Enumerator {
            d,
            coords: Vec::new(),
            norm2: Vec::new(),
            index: Vec::new(),
            order: Vec::new(),
            sys: System::new(d, d),
            singular: 0,
            degenerate: 0,
        }
    }

    /// Loads the generators lying within `2 * bound` of the origin, sorted
    /// by norm. `points(i)` returns generator `i` of `n`.
    pub(crate) fn load<'a>(&mut self, n: usize, points: impl Fn(usize) -> &'a [f64], bound: f64) {
        let d = self.d;
        let lim2 = 4.0 * bound * bound;
        self.order.clear();
        for i in 0..n {
            let p = points(i);
            let r2: f64 = p[..d].iter().map(|v| v * v).sum();
            if r2 <= lim2 {
                self.order.push((r2, i as u32));
            }
        }
        self.order
            .sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        self.coords.clear();
        self.norm2.clear();
        self.index.clear();
        for &(r2, i) in &self.order {
            self.coords.extend_from_slice(&points(i as usize)[..d]);
            self.norm2.push(r2);
            self.index.push(i);
        }
        self.singular = 0;
        self.degenerate = 0;
    }

    #[inline]
    fn row(&self, k: usize) -> &[f64] {
        &self.coords[k * self.d..(k + 1) * self.d]
    }

    /// Appends to `out` every cell vertex with norm at most `bound` among
    /// the loaded generators.
    pub(crate) fn run(&mut self, bound: f64, classify: bool, out: &mut Vec<RawVertex>) {
        let d = self.d;
        let m = self.norm2.len();
        if m < d {
            return;
        }
        let bound2 = bound * bound;
        let shrink = (1.0 - EMPTY_BALL_TOL) * (1.0 - EMPTY_BALL_TOL);
        let mut idx = [0usize; MAX_DIM];
        for (k, v) in idx.iter_mut().take(d).enumerate() {
            *v = k;
        }
        let mut c = [0.0; MAX_DIM];
        loop {
            let solved = {
                let coords = &self.coords;
                circumcenter_into(
                    &mut self.sys,
                    d,
                    idx[..d].iter().map(|&k| &coords[k * d..(k + 1) * d]),
                    &mut c[..d],
                )
            };
            match solved {
                None => self.singular += 1,
                Some(()) => {
                    let cn2: f64 = c[..d].iter().map(|v| v * v).sum();
                    if cn2 <= bound2 && self.ball_is_empty(&c[..d], cn2 * shrink, 4.0 * cn2, &idx[..d]) {
                        let pointy = if classify {
                            let t = pointy_test_with(d, &c[..d], idx[..d].iter().map(|&k| self.row(k)));
                            if t == HullTest::Degenerate {
                                self.degenerate += 1;
                            }
                            Some(t)
                        } else {
                            None
                        };
                        let mut nuclei = [u32::MAX; MAX_DIM];
                        for (j, &k) in idx[..d].iter().enumerate() {
                            nuclei[j] = self.index[k];
                        }
                        nuclei[..d].sort_unstable();
                        out.push(RawVertex {
                            location: c,
                            norm: cn2.sqrt(),
                            nuclei,
                            pointy,
                        });
                    }
                }
            }
            if !next_combination(&mut idx[..d], m) {
                break;
            }
        }
    }

    /// No loaded generator other than the subset lies within squared
    /// distance `r2` of `c`. Generators are sorted by norm, and none with
    /// squared norm above `reach2` can be inside.
    #[inline]
    fn ball_is_empty(&self, c: &[f64], r2: f64, reach2: f64, subset: &[usize]) -> bool {
        let d = self.d;
        for (k, &n2) in self.norm2.iter().enumerate() {
            if n2 >= reach2 {
                break;
            }
            let p = &self.coords[k * d..(k + 1) * d];
            let mut s = 0.0;
            for j in 0..d {
                let t = p[j] - c[j];
                s += t * t;
            }
            if s < r2 && !subset.contains(&k) {
                return false;
            }
        }
        true
    }
}

/// Advances `idx` to the next ascending `k`-subset of `0..m`.
fn next_combination(idx: &mut [usize], m: usize) -> bool {
    let k = idx.len();
    let mut i = k;
    while i > 0 {
        i -= 1;
        if idx[i] < m - k + i {
            idx[i] += 1;
            for j in i + 1..k {
                idx[j] = idx[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

/// Whether every edge (a `(d-1)`-subset of a vertex's nuclei) is shared by
/// exactly two vertices of the set.
pub(crate) fn is_closed(vertices: &[RawVertex], d: usize) -> bool {
    if vertices.len() < d + 1 {
        return false;
    }
    let mut keys: Vec<[u32; MAX_DIM]> = Vec::with_capacity(vertices.len() * d);
    for v in vertices {
        for skip in 0..d {
            let mut key = [u32::MAX; MAX_DIM];
            let mut j = 0;
            for (i, &n) in v.nuclei[..d].iter().enumerate() {
                if i != skip {
                    key[j] = n;
                    j += 1;
                }
            }
            keys.push(key);
        }
    }
    keys.sort_unstable();
    let mut i = 0;
    while i < keys.len() {
        let mut j = i + 1;
        while j < keys.len() && keys[j] == keys[i] {
            j += 1;
        }
        if j - i != 2 {
            return false;
        }
        i = j;
    }
    true
}

fn to_vertex(v: &RawVertex, d: usize) -> Vertex {
    Vertex {
        location: v.location[..d].to_vec(),
        nucleus_indices: v.nuclei[..d].iter().map(|&i| i as usize).collect(),
        norm: v.norm,
        pointy: v.pointy.is_some_and(HullTest::is_interior),
    }
}

fn sort_vertices(vs: &mut [RawVertex], d: usize) {
    vs.sort_unstable_by(|a, b| a.nuclei[..d].cmp(&b.nuclei[..d]));
}

/// All vertices of the cell of the origin with norm at most `norm_bound`.
///
/// Generators must be pairwise distinct and differ from the origin.
pub fn enumerate_vertices<P: AsRef<[f64]>>(generators: &[P], norm_bound: f64) -> Result<VertexEnumeration> {
    let Some(first) = generators.first() else {
        return Ok(VertexEnumeration::default());
    };
    let d = first.as_ref().len();
    Dim::new(d)?;
    if let Some(bad) = generators.iter().find(|g| g.as_ref().len() != d) {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: bad.as_ref().len(),
        });
    }
    if generators.len() > u32::MAX as usize {
        return Err(Error::InvalidArgument("too many generators".into()));
    }
    let mut en = Enumerator::new(d);
    en.load(generators.len(), |i| generators[i].as_ref(), norm_bound);
    let mut raw = Vec::new();
    en.run(norm_bound, true, &mut raw);
    sort_vertices(&mut raw, d);
    Ok(VertexEnumeration {
        vertices: raw.iter().map(|v| to_vertex(v, d)).collect(),
        singular_subsets: en.singular,
        degenerate_pointy: en.degenerate,
    })
}

/// Options for [`build_typical_cell`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellOptions {
    /// First sampling radius; defaults to [`initial_radius`].
    pub initial_radius: Option<f64>,
    /// Cap on the sampling radius as a multiple of the initial radius.
    pub max_radius_factor: f64,
    /// Run the pointy test on every vertex.
    pub classify_pointy: bool,
}

impl Default for CellOptions {
    fn default() -> Self {
        CellOptions {
            initial_radius: None,
            max_radius_factor: 64.0,
            classify_pointy: true,
        }
    }
}

/// Radius `R0` whose ball carries mass `2^d` (twice the unit-intensity
/// length scale in the homogeneous case).
pub fn initial_radius(d: Dim, model: IntensityModel) -> f64 {
    model.radius_for_measure(d, 2f64.powi(d.get() as i32))
}

/// The certified cell of the origin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TypicalCell {
    pub dim: Dim,
    pub generators: Vec<Vec<f64>>,
    pub vertices: Vec<Vertex>,
    /// `D`, the largest vertex norm.
    pub max_vertex_distance: f64,
    pub sampled_radius: f64,
    pub model: IntensityModel,
}

/// Generates the cell of the origin by sampling annuli of doubling radius
/// until the vertex set within half the sampled radius is closed.
///
/// Returns [`Error::DegenerateCell`] when the final pass met a singular
/// subset or a boundary pointy test, and [`Error::RadiusCapExceeded`] when
/// the radius would pass the cap; callers resample in both cases.
pub fn build_typical_cell(
    d: Dim,
    model: IntensityModel,
    rng: &mut RngStream,
    opts: &CellOptions,
) -> Result<TypicalCell> {
    model.check(d)?;
    let dd = d.get();
    let r0 = opts.initial_radius.unwrap_or_else(|| initial_radius(d, model));
    let cap = r0 * opts.max_radius_factor;
    let mut radius = r0;
    let mut generators = poisson_annulus(d, model, 0.0, radius, rng)?;
    let mut clipper = Clipper::new(dd);
    let mut raw = Vec::new();
    loop {
        match clipper.compute(generators.len(), |i| generators[i].as_slice(), radius, opts.classify_pointy, &mut raw) {
            CellOutcome::Closed => {
                debug_assert!(is_closed(&raw, dd));
                sort_vertices(&mut raw, dd);
                let vertices: Vec<Vertex> = raw.iter().map(|v| to_vertex(v, dd)).collect();
                let max_vertex_distance = vertices.iter().map(|v| v.norm).fold(0.0, f64::max);
                return Ok(TypicalCell {
                    dim: d,
                    generators,
                    vertices,
                    max_vertex_distance,
                    sampled_radius: radius,
                    model,
                });
            }
            CellOutcome::Degenerate => return Err(Error::DegenerateCell(1)),
            CellOutcome::Open => {}
        }
        if 2.0 * radius > cap * (1.0 + 1e-12) {
            return Err(Error::RadiusCapExceeded { cap });
        }
        generators.extend(poisson_annulus(d, model, radius, 2.0 * radius, rng)?);
        radius *= 2.0;
    }
}

/// [`build_typical_cell`] with rejected draws resampled from the same
/// stream. Returns the cell and the number of rejections.
pub fn sample_typical_cell(
    d: Dim,
    model: IntensityModel,
    rng: &mut RngStream,
    opts: &CellOptions,
) -> Result<(TypicalCell, u64)> {
    const MAX_ATTEMPTS: u64 = 1000;
    let mut rejected = 0;
    loop {
        match build_typical_cell(d, model, rng, opts) {
            Ok(cell) => return Ok((cell, rejected)),
            Err(Error::DegenerateCell(_)) | Err(Error::RadiusCapExceeded { .. })
                if rejected < MAX_ATTEMPTS =>
            {
                rejected += 1
            }
            Err(e) => return Err(e),
        }
    }
}

/// Number of pointy vertices with norm at least `t`.
pub fn count_pointy_at_least(cell: &TypicalCell, t: f64) -> u64 {
    cell.vertices
        .iter()
        .filter(|v| v.pointy && v.norm >= t)
        .count() as u64
}

/// Unordered pairs of distinct pointy vertices with norm at least `t`,
/// `k (k - 1) / 2`.
pub fn count_pointy_pairs_at_least(cell: &TypicalCell, t: f64) -> u64 {
    pairs(count_pointy_at_least(cell, t))
}

#[inline]
pub fn pairs(k: u64) -> u64 {
    k * k.saturating_sub(1) / 2
}

/// JSON-friendly snapshot of a cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellDump {
    pub generators: Vec<Vec<f64>>,
    pub vertices: Vec<DumpVertex>,
    #[serde(rename = "D")]
    pub max_vertex_distance: f64,
    pub sampled_radius: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DumpVertex {
    pub location: Vec<f64>,
    pub nucleus_indices: Vec<usize>,
    pub pointy: bool,
}

impl TypicalCell {
    pub fn dump(&self, seed: u64) -> CellDump {
        CellDump {
            generators: self.generators.clone(),
            vertices: self
                .vertices
                .iter()
                .map(|v| DumpVertex {
                    location: v.location.clone(),
                    nucleus_indices: v.nucleus_indices.clone(),
                    pointy: v.pointy,
                })
                .collect(),
            max_vertex_distance: self.max_vertex_distance,
            sampled_radius: self.sampled_radius,
            seed,
        }
    }

    pub fn to_json(&self, seed: u64) -> String {
        serde_json::to_string(&self.dump(seed)).expect("cell dump serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::rng_stream;

    fn square() -> Vec<Vec<f64>> {
        vec![
            vec![2.0, 0.0],
            vec![0.0, 2.0],
            vec![-2.0, 0.0],
            vec![0.0, -2.0],
        ]
    }

    fn square_cell() -> TypicalCell {
        let e = enumerate_vertices(&square(), 10.0).unwrap();
        TypicalCell {
            dim: Dim::new(2).unwrap(),
            generators: square(),
            vertices: e.vertices,
            max_vertex_distance: 2f64.sqrt(),
            sampled_radius: 20.0,
            model: IntensityModel::Homogeneous,
        }
    }

    #[test]
    fn combinations_enumerate_all() {
        let mut idx = [0, 1, 2];
        let mut n = 1;
        while next_combination(&mut idx, 6) {
            n += 1;
        }
        assert_eq!(n, 20);
    }

    #[test]
    fn square_cell_vertices() {
        let e = enumerate_vertices(&square(), 10.0).unwrap();
        assert_eq!(e.vertices.len(), 4);
        for v in &e.vertices {
            assert!((v.norm - 2f64.sqrt()).abs() < 1e-14);
            assert!((v.location[0].abs() - 1.0).abs() < 1e-14);
            assert!((v.location[1].abs() - 1.0).abs() < 1e-14);
            assert!(v.pointy);
        }
        assert!(enumerate_vertices(&square(), 1.0).unwrap().vertices.is_empty());
    }

    #[test]
    fn square_cell_counts() {
        let cell = square_cell();
        assert_eq!(count_pointy_at_least(&cell, 1.0), 4);
        assert_eq!(count_pointy_at_least(&cell, 1.5), 0);
        assert_eq!(count_pointy_pairs_at_least(&cell, 1.0), 6);
        assert_eq!(pairs(1), 0);
        assert_eq!(pairs(0), 0);
    }

    #[test]
    fn closure_detects_open_sets() {
        let mut en = Enumerator::new(2);
        let sq = square();
        en.load(4, |i| sq[i].as_slice(), 10.0);
        let mut raw = Vec::new();
        en.run(10.0, false, &mut raw);
        assert!(is_closed(&raw, 2));
        raw.pop();
        assert!(!is_closed(&raw, 2));
        // Three generators in a half-plane give an unbounded cell.
        let open = [vec![1.0, 0.2], vec![1.0, -0.3], vec![0.2, 1.0]];
        en.load(3, |i| open[i].as_slice(), 100.0);
        raw.clear();
        en.run(100.0, false, &mut raw);
        assert!(!is_closed(&raw, 2));
    }

    #[test]
    fn built_cell_is_certified_and_deterministic() {
        let d = Dim::new(2).unwrap();
        let opts = CellOptions::default();
        let a = build_typical_cell(d, IntensityModel::Homogeneous, &mut rng_stream(3, 17), &opts).unwrap();
        let b = build_typical_cell(d, IntensityModel::Homogeneous, &mut rng_stream(3, 17), &opts).unwrap();
        assert_eq!(a, b);
        assert!(2.0 * a.max_vertex_distance <= a.sampled_radius);
        assert!(a.vertices.len() >= 3);
        let dump: CellDump = serde_json::from_str(&a.to_json(3)).unwrap();
        assert_eq!(dump.vertices.len(), a.vertices.len());
        assert_eq!(dump.max_vertex_distance, a.max_vertex_distance);
    }

    #[test]
    fn cap_is_enforced() {
        let d = Dim::new(2).unwrap();
        let opts = CellOptions {
            initial_radius: Some(0.05),
            max_radius_factor: 1.0,
            classify_pointy: true,
        };
        let r = build_typical_cell(d, IntensityModel::Homogeneous, &mut rng_stream(1, 1), &opts);
        assert!(matches!(r, Err(Error::RadiusCapExceeded { .. })));
    }
}
