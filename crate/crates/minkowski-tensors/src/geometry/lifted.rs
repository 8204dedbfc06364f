//! Lattice complexes in R^{n-1} lifted to the paraboloid `x -> x + |x|^2 e_n`.
//!
//! The lower faces of the convex hull of the lifted lattice are exactly the
//! lifts of the complex faces, so the face lattice is written down directly
//! instead of being recovered by a hull computation. Only cells whose center
//! lies in a finite window are materialized; faces on the window rim are
//! flagged incomplete.

use super::{hull, Face, Polytope};
use crate::error::{Error, Result};
use crate::linalg::{dot, intersect_convex_2d, norm, polygon_area_2d, scale, sub};
use crate::sphereint::Cap;
use crate::symtensor::Rotation;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, HashMap};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "type")]
pub enum ComplexKind {
    /// Cubes of side 2t with vertices on 2t Z^{n-1}.
    Cube,
    /// Triangles with angle pi/d at the origin, spanned by t b1 and t b2 (n = 3 only).
    Triangle { d: usize },
}

#[derive(Clone, Debug)]
pub struct LiftedComplex {
    pub n: usize,
    pub t: f64,
    pub kind: ComplexKind,
    /// Radius of the sphere through the vertices of one cell.
    pub circumradius: f64,
    /// Lower faces of the lifted hull inside the window; facets are the lifted cells.
    pub polytope: Polytope,
    /// Center z of the cell below each facet.
    pub cell_centers: Vec<Vec<f64>>,
    /// Direction class of the complex face below each face, per dimension
    /// (coordinate mask for cubes, edge direction 0/1/2 for triangles).
    pub face_class: Vec<Vec<usize>>,
}

/// `x + |x|^2 e_n` for x in R^{n-1}.
pub fn lift(x: &[f64]) -> Vec<f64> {
    let mut y = x.to_vec();
    y.push(dot(x, x));
    y
}

/// The affine map sending the cell with center z onto its lifted facet:
/// `y + 2<z,y> e_n + (r^2 - |z|^2) e_n`.
pub fn alpha(z: &[f64], r: f64, y: &[f64]) -> Vec<f64> {
    let mut out = y.to_vec();
    out.push(2.0 * dot(z, y) + r * r - dot(z, z));
    out
}

/// Outer unit normal of the lifted facet above the cell with center z.
pub fn facet_normal_above(z: &[f64]) -> Vec<f64> {
    let mut u: Vec<f64> = z.iter().map(|c| 2.0 * c).collect();
    u.push(-1.0);
    let l = norm(&u);
    scale(&u, 1.0 / l)
}

/// Triangle edge generators b1 = e1, b2 = (cos(pi/d), sin(pi/d)).
pub fn triangle_basis(d: usize) -> ([f64; 2], [f64; 2]) {
    let beta = std::f64::consts::PI / d as f64;
    ([1.0, 0.0], [beta.cos(), beta.sin()])
}

/// Lifts the cells of the complex whose centers lie within `window_radius`
/// of the origin.
pub fn lift_complex(n: usize, t: f64, kind: ComplexKind, window_radius: f64) -> Result<LiftedComplex> {
    if t <= 0.0 {
        return Err(Error::OutOfRange(format!("lattice parameter t = {t}")));
    }
    match kind {
        ComplexKind::Cube => {
            if !(n == 3 || n == 4) {
                return Err(Error::Unsupported(format!("cube complex in dimension {n}")));
            }
            lift_cubes(n, t, window_radius)
        }
        ComplexKind::Triangle { d } => {
            if n != 3 || d < 2 {
                return Err(Error::Unsupported(format!("triangle complex with n = {n}, d = {d}")));
            }
            lift_triangles(t, d, window_radius)
        }
    }
}

struct Builder {
    n: usize,
    vertex_ids: HashMap<Vec<i64>, usize>,
    vertices: Vec<Vec<f64>>,
    levels: Vec<Vec<Face>>,
    keys: Vec<HashMap<Vec<i64>, usize>>,
    classes: Vec<Vec<usize>>,
    /// Number of windowed cells containing each face.
    cover: Vec<Vec<usize>>,
}

impl Builder {
    fn new(n: usize) -> Self {
        Builder {
            n,
            vertex_ids: HashMap::new(),
            vertices: Vec::new(),
            levels: vec![Vec::new(); n],
            keys: vec![HashMap::new(); n],
            classes: vec![Vec::new(); n],
            cover: vec![Vec::new(); n],
        }
    }

    fn vertex(&mut self, key: Vec<i64>, x: Vec<f64>) -> usize {
        if let Some(&i) = self.vertex_ids.get(&key) {
            return i;
        }
        let i = self.vertices.len();
        self.vertex_ids.insert(key.clone(), i);
        self.vertices.push(lift(&x));
        self.levels[0].push(empty_face(0, vec![i]));
        self.keys[0].insert(key, i);
        self.classes[0].push(0);
        self.cover[0].push(0);
        i
    }

    fn face(&mut self, k: usize, key: Vec<i64>, verts: Vec<usize>, subs: Vec<usize>, class: usize) -> usize {
        if let Some(&i) = self.keys[k].get(&key) {
            return i;
        }
        let i = self.levels[k].len();
        let mut vs = verts;
        vs.sort_unstable();
        let mut f = empty_face(k, vs);
        f.subfaces = subs;
        self.levels[k].push(f);
        self.keys[k].insert(key, i);
        self.classes[k].push(class);
        self.cover[k].push(0);
        i
    }

    /// Marks a face and all its subfaces as covered once more by a cell.
    fn cover_down(&mut self, k: usize, i: usize, seen: &mut Vec<std::collections::BTreeSet<usize>>) {
        if !seen[k].insert(i) {
            return;
        }
        self.cover[k][i] += 1;
        if k > 0 {
            for s in self.levels[k][i].subfaces.clone() {
                self.cover_down(k - 1, s, seen);
            }
        }
    }

    fn finish(mut self, full_cover: impl Fn(usize, usize) -> usize, centers: Vec<Vec<f64>>, t: f64, kind: ComplexKind, r: f64) -> Result<LiftedComplex> {
        let n = self.n;
        for k in 0..n {
            for i in 0..self.levels[k].len() {
                let need = full_cover(k, self.classes[k][i]);
                self.levels[k][i].complete = self.cover[k][i] >= need;
            }
        }
        let normals: Vec<Vec<f64>> = centers.iter().map(|z| facet_normal_above(z)).collect();
        let mut faces = self.levels;
        faces.push(Vec::new());
        let polytope = Polytope::finish_with_normals(n, n, self.vertices, faces, normals, true)?;
        Ok(LiftedComplex { n, t, kind, circumradius: r, polytope, cell_centers: centers, face_class: self.classes })
    }
}

fn empty_face(dim: usize, vertices: Vec<usize>) -> Face {
    Face { dim, vertices, subfaces: Vec::new(), superfaces: Vec::new(), direction_basis: Vec::new(), measure: 0.0, complete: true }
}

fn lift_cubes(n: usize, t: f64, window: f64) -> Result<LiftedComplex> {
    let m = n - 1;
    let r = t * (m as f64).sqrt();
    let reach = (window / (2.0 * t)).ceil() as i64 + 1;
    let mut b = Builder::new(n);
    let mut centers = Vec::new();

    // face key: min corner followed by the direction mask
    fn build(b: &mut Builder, t: f64, corner: &[i64], mask: usize, m: usize) -> usize {
        let k = mask.count_ones() as usize;
        if k == 0 {
            let x: Vec<f64> = corner.iter().map(|&c| 2.0 * t * c as f64).collect();
            return b.vertex(corner.to_vec(), x);
        }
        let mut key = corner.to_vec();
        key.push(mask as i64);
        if let Some(&i) = b.keys[k].get(&key) {
            return i;
        }
        let mut subs = Vec::new();
        for i in 0..m {
            if mask >> i & 1 == 1 {
                let low = build(b, t, corner, mask & !(1 << i), m);
                let mut up = corner.to_vec();
                up[i] += 1;
                let high = build(b, t, &up, mask & !(1 << i), m);
                subs.push(low);
                subs.push(high);
            }
        }
        let mut verts = Vec::new();
        for s in 0..(1usize << m) {
            if s & !mask != 0 {
                continue;
            }
            let mut c = corner.to_vec();
            for i in 0..m {
                if s >> i & 1 == 1 {
                    c[i] += 1;
                }
            }
            verts.push(b.vertex(c.clone(), c.iter().map(|&x| 2.0 * t * x as f64).collect()));
        }
        b.face(k, key, verts, subs, mask)
    }

    let full = (1usize << m) - 1;
    let mut corner = vec![-reach; m];
    loop {
        let z: Vec<f64> = corner.iter().map(|&c| 2.0 * t * (c as f64 + 0.5)).collect();
        if norm(&z) <= window {
            let id = build(&mut b, t, &corner, full, m);
            debug_assert_eq!(id, centers.len());
            centers.push(z);
            let mut seen = vec![std::collections::BTreeSet::new(); n];
            b.cover_down(m, id, &mut seen);
        }
        // odometer over the cube of corners
        let mut i = 0;
        loop {
            if i == m {
                return b.finish(|k, _class| 1usize << (m - k), centers, t, ComplexKind::Cube, r);
            }
            corner[i] += 1;
            if corner[i] <= reach {
                break;
            }
            corner[i] = -reach;
            i += 1;
        }
    }
}

fn lift_triangles(t: f64, d: usize, window: f64) -> Result<LiftedComplex> {
    let (b1, b2) = triangle_basis(d);
    let pos = |i: i64, j: i64| vec![t * (i as f64 * b1[0] + j as f64 * b2[0]), t * (i as f64 * b1[1] + j as f64 * b2[1])];
    let beta = std::f64::consts::PI / d as f64;
    let r = t / (2.0 * (beta / 2.0).cos());
    let reach = (2.0 * window / (t * beta.sin())).ceil() as i64 + 2;
    let mut b = Builder::new(3);
    let mut centers = Vec::new();

    for i in -reach..=reach {
        for j in -reach..=reach {
            for up in [true, false] {
                let tri = if up { [(i, j), (i + 1, j), (i, j + 1)] } else { [(i + 1, j), (i, j + 1), (i + 1, j + 1)] };
                let pts: Vec<Vec<f64>> = tri.iter().map(|&(a, c)| pos(a, c)).collect();
                let z = circumcenter(&pts[0], &pts[1], &pts[2]);
                if norm(&z) > window {
                    continue;
                }
                let vs: Vec<usize> = tri.iter().map(|&(a, c)| b.vertex(vec![a, c], pos(a, c))).collect();
                let mut edges = Vec::new();
                for e in 0..3 {
                    let (p, q) = (tri[e], tri[(e + 1) % 3]);
                    let (p, q) = if p <= q { (p, q) } else { (q, p) };
                    let dir = edge_class(p, q);
                    let key = vec![p.0, p.1, q.0, q.1];
                    let ids = vec![vs[e], vs[(e + 1) % 3]];
                    edges.push(b.face(1, key, ids.clone(), ids, dir));
                }
                let key = vec![i, j, up as i64];
                let id = b.face(2, key, vs, edges, 0);
                debug_assert_eq!(id, centers.len());
                centers.push(z);
                let mut seen = vec![std::collections::BTreeSet::new(); 3];
                b.cover_down(2, id, &mut seen);
            }
        }
    }
    b.finish(|k, _| [6, 2, 1][k], centers, t, ComplexKind::Triangle { d }, r)
}

fn edge_class(p: (i64, i64), q: (i64, i64)) -> usize {
    match (q.0 - p.0, q.1 - p.1) {
        (1, 0) | (-1, 0) => 0,
        (0, 1) | (0, -1) => 1,
        _ => 2,
    }
}

fn circumcenter(a: &[f64], b: &[f64], c: &[f64]) -> Vec<f64> {
    let d = 2.0 * (a[0] * (b[1] - c[1]) + b[0] * (c[1] - a[1]) + c[0] * (a[1] - b[1]));
    let (a2, b2, c2) = (dot(a, a), dot(b, b), dot(c, c));
    vec![
        (a2 * (b[1] - c[1]) + b2 * (c[1] - a[1]) + c2 * (a[1] - b[1])) / d,
        (a2 * (c[0] - b[0]) + b2 * (a[0] - c[0]) + c2 * (b[0] - a[0])) / d,
    ]
}

/// The k-faces of `p` whose normal cones meet the open cap, after checking
/// that they are faces of `p ∩ {y_n <= h}` untouched by the cut.
///
/// `trusted`, when given, is a larger cap that must contain every facet
/// normal adjacent to a selected face; it guards hulls of windowed vertex sets.
pub fn truncate_and_filter(p: &Polytope, k: usize, h: f64, cap: &Cap, trusted: Option<&Cap>) -> Result<Vec<usize>> {
    let n = p.ambient_dim();
    let mut kept = Vec::new();
    for i in 0..p.count(k) {
        let cone = p.normal_cone(k, i);
        if !cap.meets_cone(&cone) {
            continue;
        }
        let f = p.face(k, i);
        if !f.complete {
            return Err(Error::WindowTooSmall(format!("{k}-face {i} meets the cap but lies on the window rim")));
        }
        if let Some(tc) = trusted {
            if cone.generators.iter().any(|g| !tc.contains(g)) {
                return Err(Error::WindowTooSmall(format!("{k}-face {i} has a facet normal outside the trusted cap")));
            }
        }
        if let Some(&v) = f.vertices.iter().find(|&&v| p.vertices()[v][n - 1] >= h) {
            return Err(Error::Regime(format!("{k}-face {i} reaches height {} >= h = {h}", p.vertices()[v][n - 1])));
        }
        kept.push(i);
    }
    Ok(kept)
}

impl LiftedComplex {
    /// `truncate_and_filter` plus the requirement that every cell containing
    /// a selected face has its center inside `|z|^2 <= h`.
    pub fn filter(&self, k: usize, h: f64, cap: &Cap) -> Result<Vec<usize>> {
        let kept = truncate_and_filter(&self.polytope, k, h, cap, None)?;
        for &i in &kept {
            for c in self.polytope.containing_facets(k, i) {
                let z = &self.cell_centers[c];
                if dot(z, z) > h {
                    return Err(Error::Regime(format!("{k}-face {i} lies on a cell with |z|^2 = {} > h", dot(z, z))));
                }
            }
        }
        Ok(kept)
    }
}

/// (1/d) Σ_l R_l P restricted to the vertices whose normal cones meet
/// `window`, for polytopes in R^3 whose relevant normal cones lie in the open
/// hemisphere around the cap axis.
///
/// Vertices of the sum are sums of vertices whose normal cones overlap in an
/// open set; overlaps are computed on gnomonic images in the tangent plane
/// at the cap axis, then the candidate sums are passed to the hull. Faces of
/// the result whose normal cones stay inside `window` agree with the full average.
pub fn minkowski_average_windowed(p: &Polytope, rotations: &[Rotation], window: &Cap) -> Result<Polytope> {
    if p.ambient_dim() != 3 {
        return Err(Error::Unsupported("windowed Minkowski average outside R^3".into()));
    }
    let axis = window.axis.clone();
    let tangent = crate::linalg::complement(3, &[axis.clone()]);
    let gnomonic = |u: &[f64]| -> Option<Vec<f64>> {
        let c = dot(u, &axis);
        if c <= 1e-12 {
            return None;
        }
        Some(vec![dot(u, &tangent[0]) / c, dot(u, &tangent[1]) / c])
    };

    let mut layers: Vec<Vec<(Vec<f64>, Vec<Vec<f64>>)>> = Vec::new();
    for rot in rotations {
        let q = p.rotate(rot);
        let mut layer = Vec::new();
        for i in 0..q.count(0) {
            let cone = q.normal_cone(0, i);
            if !window.meets_cone(&cone) {
                continue;
            }
            if !q.face(0, i).complete {
                return Err(Error::WindowTooSmall(format!("vertex {i} meets the averaging window on the rim")));
            }
            let mut g = Vec::new();
            for u in &cone.generators {
                g.push(gnomonic(u).ok_or_else(|| Error::WindowTooSmall("normal cone leaves the hemisphere".into()))?);
            }
            let cyc = hull::hull2d(&g);
            let poly: Vec<Vec<f64>> = cyc.iter().map(|&j| g[j].clone()).collect();
            layer.push((q.vertices()[i].clone(), poly));
        }
        layers.push(layer);
    }

    let mut acc = layers[0].clone();
    for layer in &layers[1..] {
        let cell = layer.iter().map(|(_, poly)| diameter_2d(poly)).fold(0.0f64, f64::max).max(1e-12);
        let mut grid: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
        for (j, (_, poly)) in layer.iter().enumerate() {
            let (lo, hi) = bbox(poly);
            for gx in (lo[0] / cell).floor() as i64..=(hi[0] / cell).floor() as i64 {
                for gy in (lo[1] / cell).floor() as i64..=(hi[1] / cell).floor() as i64 {
                    grid.entry((gx, gy)).or_default().push(j);
                }
            }
        }
        let mut next = Vec::new();
        for (s, poly) in &acc {
            let (lo, hi) = bbox(poly);
            let mut cand = std::collections::BTreeSet::new();
            for gx in (lo[0] / cell).floor() as i64..=(hi[0] / cell).floor() as i64 {
                for gy in (lo[1] / cell).floor() as i64..=(hi[1] / cell).floor() as i64 {
                    if let Some(v) = grid.get(&(gx, gy)) {
                        cand.extend(v.iter().cloned());
                    }
                }
            }
            let area = polygon_area_2d(poly).abs();
            for j in cand {
                let (v, other) = &layer[j];
                let inter = intersect_convex_2d(poly, other);
                if inter.len() >= 3 && polygon_area_2d(&inter).abs() > 1e-9 * area.min(polygon_area_2d(other).abs()) {
                    next.push((crate::linalg::add(s, v), inter));
                }
            }
        }
        acc = next;
    }
    let d = rotations.len() as f64;
    let pts: Vec<Vec<f64>> = acc.into_iter().map(|(s, _)| scale(&s, 1.0 / d)).collect();
    hull(&pts)
}

fn bbox(poly: &[Vec<f64>]) -> (Vec<f64>, Vec<f64>) {
    let mut lo = vec![f64::INFINITY; 2];
    let mut hi = vec![f64::NEG_INFINITY; 2];
    for p in poly {
        for i in 0..2 {
            lo[i] = lo[i].min(p[i]);
            hi[i] = hi[i].max(p[i]);
        }
    }
    (lo, hi)
}

fn diameter_2d(poly: &[Vec<f64>]) -> f64 {
    let (lo, hi) = bbox(poly);
    norm(&sub(&hi, &lo))
}

/// Face counts per class of the selected faces, keyed by class.
pub fn class_histogram(lc: &LiftedComplex, k: usize, faces: &[usize]) -> BTreeMap<usize, usize> {
    let mut h = BTreeMap::new();
    for &i in faces {
        *h.entry(lc.face_class[k][i]).or_insert(0) += 1;
    }
    h
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn cube_complex_circumradius_and_facet_planes() {
        let lc = lift_complex(4, 0.1, ComplexKind::Cube, 0.5).unwrap();
        assert_abs_diff_eq!(lc.circumradius, 0.1 * 3f64.sqrt(), epsilon = 1e-15);
        let p = &lc.polytope;
        for (c, z) in lc.cell_centers.iter().enumerate() {
            let f = p.face(3, c);
            assert_eq!(f.vertices.len(), 8);
            for &v in &f.vertices {
                let x = &p.vertices()[v][..3];
                let y = alpha(z, lc.circumradius, &sub(x, &[0.0; 3]));
                assert_abs_diff_eq!(norm(&sub(&y, &p.vertices()[v])), 0.0, epsilon = 1e-14);
            }
            let u = p.facet_normal(c);
            let e = sub(&p.vertices()[f.vertices[1]], &p.vertices()[f.vertices[0]]);
            assert_abs_diff_eq!(dot(u, &e), 0.0, epsilon = 1e-14);
            assert!(u[3] < 0.0);
        }
    }

    #[test]
    fn interior_faces_are_complete() {
        let lc = lift_complex(3, 0.1, ComplexKind::Cube, 0.6).unwrap();
        let p = &lc.polytope;
        for i in 0..p.count(1) {
            let f = p.face(1, i);
            let mid: Vec<f64> = (0..2).map(|c| 0.5 * (p.vertices()[f.vertices[0]][c] + p.vertices()[f.vertices[1]][c])).collect();
            if norm(&mid) < 0.3 {
                assert!(f.complete);
                assert_eq!(p.containing_facets(1, i).len(), 2);
            }
        }
    }

    #[test]
    fn equilateral_triangles() {
        let lc = lift_complex(3, 0.1, ComplexKind::Triangle { d: 3 }, 0.5).unwrap();
        let p = &lc.polytope;
        for i in 0..p.count(2) {
            let pts = p.face_points(2, i);
            let xy: Vec<Vec<f64>> = pts.iter().map(|v| v[..2].to_vec()).collect();
            for a in 0..3 {
                let e1 = sub(&xy[(a + 1) % 3], &xy[a]);
                let e2 = sub(&xy[(a + 2) % 3], &xy[a]);
                let ang = (dot(&e1, &e2) / (norm(&e1) * norm(&e2))).acos();
                assert_abs_diff_eq!(ang, std::f64::consts::PI / 3.0, epsilon = 1e-12);
            }
        }
        assert_abs_diff_eq!(lc.circumradius, 0.1 / 3f64.sqrt(), epsilon = 1e-15);
    }

    #[test]
    fn empty_cap_selects_nothing() {
        let lc = lift_complex(3, 0.1, ComplexKind::Cube, 0.5).unwrap();
        let cap = Cap::new(vec![0.0, 0.0, -1.0], 0.0).unwrap();
        assert!(lc.filter(1, 1.0, &cap).unwrap().is_empty());
    }

    #[test]
    fn large_cap_needs_larger_window() {
        let lc = lift_complex(3, 0.1, ComplexKind::Cube, 0.3).unwrap();
        let cap = Cap::new(vec![0.0, 0.0, -1.0], 0.5).unwrap();
        assert!(matches!(lc.filter(1, 10.0, &cap), Err(Error::WindowTooSmall(_))));
    }
}
