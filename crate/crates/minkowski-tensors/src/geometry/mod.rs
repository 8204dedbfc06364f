//! Convex polytopes with explicit face lattices.
//!
//! Faces are stored per dimension. `faces(0)[i]` is always the vertex `i`.
//! Normal cones are not stored; `normal_cone` derives them from the outer
//! normals of the facets containing a face, plus the orthogonal complement of
//! the affine hull for lower-dimensional polytopes.

pub mod hull;
pub mod lifted;

pub use hull::hull;

use crate::error::{Error, Result};
use crate::linalg::{add, affine_hull, axpy, centroid, complement, dist, dot, gram_volume, norm, orthonormalize, pivoted_basis, scale, sub};
use crate::symtensor::Rotation;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet, HashMap};

/// Closed halfspace `{ y : <y, normal> <= offset }` with unit normal.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Halfspace {
    pub normal: Vec<f64>,
    pub offset: f64,
}

impl Halfspace {
    /// Normalizes `normal`, rescaling the offset accordingly.
    pub fn new(normal: Vec<f64>, offset: f64) -> Result<Self> {
        let l = norm(&normal);
        if l == 0.0 {
            return Err(Error::InvalidSpec("zero halfspace normal".into()));
        }
        Ok(Halfspace { normal: scale(&normal, 1.0 / l), offset: offset / l })
    }

    /// The opposite closed halfspace, sharing the bounding hyperplane.
    pub fn flipped(&self) -> Halfspace {
        Halfspace { normal: scale(&self.normal, -1.0), offset: -self.offset }
    }

    pub fn signed_distance(&self, x: &[f64]) -> f64 {
        dot(x, &self.normal) - self.offset
    }
}

#[derive(Clone, Debug)]
pub struct Face {
    pub dim: usize,
    /// Sorted vertex ids.
    pub vertices: Vec<usize>,
    /// Indices into the faces of dimension `dim - 1`.
    pub subfaces: Vec<usize>,
    /// Indices into the faces of dimension `dim + 1`.
    pub superfaces: Vec<usize>,
    /// Orthonormal basis of the direction space L(F).
    pub direction_basis: Vec<Vec<f64>>,
    /// k-dimensional Hausdorff measure.
    pub measure: f64,
    /// False when the face was cut off by a finite construction window and
    /// its normal cone is not fully known.
    pub complete: bool,
}

/// Closed convex cone `cone(generators) + span(lineality)`.
#[derive(Clone, Debug)]
pub struct NormalCone {
    pub generators: Vec<Vec<f64>>,
    /// Orthonormal.
    pub lineality: Vec<Vec<f64>>,
}

#[derive(Clone, Debug)]
pub struct Polytope {
    n: usize,
    dim: usize,
    vertices: Vec<Vec<f64>>,
    faces: Vec<Vec<Face>>,
    facet_normals: Vec<Vec<f64>>,
    facet_offsets: Vec<f64>,
    /// Orthonormal basis of the orthogonal complement of L(P).
    orth: Vec<Vec<f64>>,
    partial: bool,
}

/// Face dimension and index, as used across the crate.
pub type FaceRef = (usize, usize);

impl Polytope {
    pub fn ambient_dim(&self) -> usize {
        self.n
    }

    /// Dimension of the affine hull.
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn vertices(&self) -> &[Vec<f64>] {
        &self.vertices
    }

    pub fn faces(&self, k: usize) -> &[Face] {
        self.faces.get(k).map(|v| v.as_slice()).unwrap_or(&[])
    }

    pub fn face(&self, k: usize, i: usize) -> &Face {
        &self.faces[k][i]
    }

    /// Number of faces of dimension `k`.
    pub fn count(&self, k: usize) -> usize {
        self.faces(k).len()
    }

    /// Outer unit normal of facet `i` (a face of dimension `dim - 1`), taken
    /// inside the direction space of the polytope.
    pub fn facet_normal(&self, i: usize) -> &[f64] {
        &self.facet_normals[i]
    }

    pub fn facet_offset(&self, i: usize) -> f64 {
        self.facet_offsets[i]
    }

    pub fn orthogonal_basis(&self) -> &[Vec<f64>] {
        &self.orth
    }

    /// True for windowed pieces of unbounded polyhedra, which carry no top face.
    pub fn is_partial(&self) -> bool {
        self.partial
    }

    pub fn face_points(&self, k: usize, i: usize) -> Vec<Vec<f64>> {
        self.faces[k][i].vertices.iter().map(|&v| self.vertices[v].clone()).collect()
    }

    /// Builds the full face lattice from the vertex sets of the facets.
    ///
    /// Faces of a face G are the intersections of G with facets; the
    /// inclusion-maximal proper ones are the facets of G.
    pub(crate) fn from_facet_sets(n: usize, vertices: Vec<Vec<f64>>, dim: usize, facets: Vec<Vec<usize>>) -> Result<Polytope> {
        if vertices.is_empty() {
            return Err(Error::Empty("polytope without vertices"));
        }
        let nv = vertices.len();
        let mut levels: Vec<Vec<Vec<usize>>> = vec![Vec::new(); dim + 1];
        let mut lookup: Vec<HashMap<Vec<usize>, usize>> = vec![HashMap::new(); dim + 1];
        let mut subs: Vec<Vec<Vec<usize>>> = vec![Vec::new(); dim + 1];

        for v in 0..nv {
            levels[0].push(vec![v]);
            lookup[0].insert(vec![v], v);
        }
        if dim == 0 {
            subs[0].push(Vec::new());
        } else {
            subs[0] = vec![Vec::new(); nv];
            let all: Vec<usize> = (0..nv).collect();
            if dim >= 2 {
                for f in &facets {
                    let mut f = f.clone();
                    f.sort_unstable();
                    if lookup[dim - 1].insert(f.clone(), levels[dim - 1].len()).is_none() {
                        levels[dim - 1].push(f);
                    }
                }
            }
            let mut vertex_facets: Vec<Vec<usize>> = vec![Vec::new(); nv];
            let facet_sets: Vec<Vec<usize>> = facets
                .iter()
                .map(|f| {
                    let mut f = f.clone();
                    f.sort_unstable();
                    f
                })
                .collect();
            for (i, f) in facet_sets.iter().enumerate() {
                for &v in f {
                    vertex_facets[v].push(i);
                }
            }
            for k in (1..dim).rev() {
                subs[k] = vec![Vec::new(); levels[k].len()];
                for gi in 0..levels[k].len() {
                    let g = levels[k][gi].clone();
                    let mut cands: BTreeSet<Vec<usize>> = BTreeSet::new();
                    let near: BTreeSet<usize> = g.iter().flat_map(|&v| vertex_facets[v].iter().cloned()).collect();
                    for h in near {
                        let s = intersect_sorted(&g, &facet_sets[h]);
                        if !s.is_empty() && s.len() < g.len() {
                            cands.insert(s);
                        }
                    }
                    let cands: Vec<Vec<usize>> = cands.into_iter().collect();
                    for s in &cands {
                        let maximal = !cands.iter().any(|t| t.len() > s.len() && is_subset_sorted(s, t));
                        if !maximal {
                            continue;
                        }
                        let idx = match lookup[k - 1].get(s) {
                            Some(&i) => i,
                            None => {
                                let i = levels[k - 1].len();
                                lookup[k - 1].insert(s.clone(), i);
                                levels[k - 1].push(s.clone());
                                i
                            }
                        };
                        subs[k][gi].push(idx);
                    }
                }
            }
            levels[dim] = vec![all];
            subs[dim] = vec![(0..levels[dim - 1].len()).collect()];
            if k_level_mismatch(&levels, nv) {
                return Err(Error::Numeric("face lattice lost vertices".into()));
            }
        }

        let mut faces: Vec<Vec<Face>> = Vec::with_capacity(dim + 1);
        for k in 0..=dim {
            let mut row = Vec::with_capacity(levels[k].len());
            for (i, vs) in levels[k].iter().enumerate() {
                let mut sf = subs[k][i].clone();
                sf.sort_unstable();
                sf.dedup();
                row.push(Face {
                    dim: k,
                    vertices: vs.clone(),
                    subfaces: if k == 0 { Vec::new() } else { sf },
                    superfaces: Vec::new(),
                    direction_basis: Vec::new(),
                    measure: 0.0,
                    complete: true,
                });
            }
            faces.push(row);
        }
        Polytope::finish(n, dim, vertices, faces, false)
    }

    /// Fills superfaces, direction bases, measures, facet normals and the
    /// orthogonal complement from vertices and subface links.
    pub(crate) fn finish(n: usize, dim: usize, vertices: Vec<Vec<f64>>, mut faces: Vec<Vec<Face>>, partial: bool) -> Result<Polytope> {
        for k in 1..faces.len() {
            for i in 0..faces[k].len() {
                for j in faces[k][i].subfaces.clone() {
                    faces[k - 1][j].superfaces.push(i);
                }
            }
        }
        for row in faces.iter_mut() {
            for f in row.iter_mut() {
                let pts: Vec<Vec<f64>> = f.vertices.iter().map(|&v| vertices[v].clone()).collect();
                f.direction_basis = affine_basis(&pts, f.dim);
            }
        }
        let all_pts = vertices.clone();
        let lp = affine_basis(&all_pts, dim);
        let orth = complement(n, &lp);
        let mut p = Polytope { n, dim, vertices, faces, facet_normals: Vec::new(), facet_offsets: Vec::new(), orth, partial };
        for k in 1..p.faces.len() {
            for i in 0..p.faces[k].len() {
                let m: f64 = p.face_simplices(k, i).iter().map(|s| simplex_volume(&p.vertices, s)).sum();
                p.faces[k][i].measure = m;
            }
        }
        for i in 0..p.faces.get(0).map_or(0, |r| r.len()) {
            p.faces[0][i].measure = 1.0;
        }
        if dim >= 1 {
            let refs: Vec<&[f64]> = p.vertices.iter().map(|v| v.as_slice()).collect();
            let cp = centroid(&refs);
            for i in 0..p.faces[dim - 1].len() {
                let f = &p.faces[dim - 1][i];
                let pts: Vec<&[f64]> = f.vertices.iter().map(|&v| p.vertices[v].as_slice()).collect();
                let cf = centroid(&pts);
                let nrm = facet_normal_in(&lp, &f.direction_basis, &sub(&cf, &cp))?;
                p.facet_offsets.push(dot(&nrm, &p.vertices[f.vertices[0]]));
                p.facet_normals.push(nrm);
            }
        }
        Ok(p)
    }

    /// Like `finish`, with facet normals supplied by the caller (used when the
    /// centroid of the vertex set is not an interior point, as for windows of
    /// unbounded polyhedra).
    pub(crate) fn finish_with_normals(
        n: usize,
        dim: usize,
        vertices: Vec<Vec<f64>>,
        mut faces: Vec<Vec<Face>>,
        normals: Vec<Vec<f64>>,
        partial: bool,
    ) -> Result<Polytope> {
        for k in 1..faces.len() {
            for i in 0..faces[k].len() {
                for j in faces[k][i].subfaces.clone() {
                    faces[k - 1][j].superfaces.push(i);
                }
            }
        }
        for row in faces.iter_mut() {
            for f in row.iter_mut() {
                let pts: Vec<Vec<f64>> = f.vertices.iter().map(|&v| vertices[v].clone()).collect();
                f.direction_basis = affine_basis(&pts, f.dim);
                f.measure = 1.0;
            }
        }
        let lp = affine_basis(&vertices, dim);
        let orth = complement(n, &lp);
        let mut p = Polytope { n, dim, vertices, faces, facet_normals: Vec::new(), facet_offsets: Vec::new(), orth, partial };
        for k in 1..p.faces.len() {
            for i in 0..p.faces[k].len() {
                p.faces[k][i].measure = p.face_simplices(k, i).iter().map(|s| simplex_volume(&p.vertices, s)).sum();
            }
        }
        for (i, nrm) in normals.into_iter().enumerate() {
            let v = p.faces[dim - 1][i].vertices[0];
            p.facet_offsets.push(dot(&nrm, &p.vertices[v]));
            p.facet_normals.push(nrm);
        }
        Ok(p)
    }

    /// Pulling triangulation of a face into simplices (vertex id lists).
    pub fn face_simplices(&self, k: usize, i: usize) -> Vec<Vec<usize>> {
        let f = &self.faces[k][i];
        if k == 0 {
            return vec![vec![f.vertices[0]]];
        }
        let v0 = f.vertices[0];
        let mut out = Vec::new();
        for &s in &f.subfaces {
            if self.faces[k - 1][s].vertices.binary_search(&v0).is_ok() {
                continue;
            }
            for mut simp in self.face_simplices(k - 1, s) {
                simp.insert(0, v0);
                out.push(simp);
            }
        }
        out
    }

    /// Indices of the facets containing face `(k, i)`.
    pub fn containing_facets(&self, k: usize, i: usize) -> Vec<usize> {
        if self.dim == 0 || k >= self.dim {
            return Vec::new();
        }
        let mut cur: BTreeSet<usize> = BTreeSet::from([i]);
        for level in k..self.dim - 1 {
            cur = cur.iter().flat_map(|&j| self.faces[level][j].superfaces.iter().cloned()).collect();
        }
        cur.into_iter().collect()
    }

    /// Normal cone N(P, F) as generators plus lineality space.
    pub fn normal_cone(&self, k: usize, i: usize) -> NormalCone {
        let generators = self.containing_facets(k, i).into_iter().map(|j| self.facet_normals[j].clone()).collect();
        NormalCone { generators, lineality: self.orth.clone() }
    }

    pub fn support(&self, u: &[f64]) -> f64 {
        self.vertices.iter().map(|v| dot(v, u)).fold(f64::NEG_INFINITY, f64::max)
    }

    /// Euler characteristic sum over faces of dimension < dim plus the polytope itself.
    pub fn euler_sum(&self) -> i64 {
        (0..self.faces.len()).map(|k| if k % 2 == 0 { 1 } else { -1 } * self.faces[k].len() as i64).sum()
    }

    /// k-volume in the affine hull (`dim`-dimensional measure).
    pub fn volume(&self) -> f64 {
        self.faces.get(self.dim).and_then(|r| r.first()).map_or(0.0, |f| f.measure)
    }

    pub fn diameter_bound(&self) -> f64 {
        let c = &self.vertices[0];
        2.0 * self.vertices.iter().map(|v| dist(v, c)).fold(0.0f64, f64::max)
    }

    /// Membership with absolute tolerance `tol`.
    pub fn contains(&self, x: &[f64], tol: f64) -> bool {
        let o = &self.vertices[0];
        let d = sub(x, o);
        if self.orth.iter().any(|b| dot(&d, b).abs() > tol) {
            return false;
        }
        (0..self.facet_normals.len()).all(|i| dot(x, &self.facet_normals[i]) <= self.facet_offsets[i] + tol)
    }

    /// Orthogonal projection onto the affine hull of face `(k, i)`.
    pub fn project_to_face_hull(&self, k: usize, i: usize, x: &[f64]) -> Vec<f64> {
        let f = &self.faces[k][i];
        let o = &self.vertices[f.vertices[0]];
        let d = sub(x, o);
        let mut y = o.clone();
        for b in &f.direction_basis {
            y = axpy(&y, dot(&d, b), b);
        }
        y
    }

    /// Metric projection p(P, x) together with the face containing it in its
    /// relative interior. Returns `None` for points of P.
    pub fn nearest_point(&self, x: &[f64]) -> Option<(Vec<f64>, FaceRef)> {
        let tol = 1e-12 * (1.0 + self.diameter_bound());
        if self.contains(x, 0.0) {
            return None;
        }
        let mut best: Option<(f64, Vec<f64>, FaceRef)> = None;
        for k in 0..self.faces.len() {
            for i in 0..self.faces[k].len() {
                let y = self.project_to_face_hull(k, i, x);
                if !self.contains(&y, tol) {
                    continue;
                }
                let d = dist(x, &y);
                match &best {
                    Some((bd, _, _)) if d >= *bd - tol => {}
                    _ => best = Some((d, y, (k, i))),
                }
            }
        }
        best.map(|(_, y, f)| (y, f))
    }

    pub fn translate(&self, t: &[f64]) -> Polytope {
        let mut p = self.clone();
        for v in p.vertices.iter_mut() {
            *v = add(v, t);
        }
        for i in 0..p.facet_offsets.len() {
            p.facet_offsets[i] += dot(&p.facet_normals[i], t);
        }
        p
    }

    /// Image under x -> lambda x, lambda > 0.
    pub fn scale(&self, lambda: f64) -> Polytope {
        let mut p = self.clone();
        for v in p.vertices.iter_mut() {
            *v = scale(v, lambda);
        }
        for row in p.faces.iter_mut() {
            for f in row.iter_mut() {
                f.measure *= lambda.powi(f.dim as i32);
            }
        }
        for o in p.facet_offsets.iter_mut() {
            *o *= lambda;
        }
        p
    }

    pub fn rotate(&self, rot: &Rotation) -> Polytope {
        let mut p = self.clone();
        for v in p.vertices.iter_mut() {
            *v = rot.apply(v);
        }
        for row in p.faces.iter_mut() {
            for f in row.iter_mut() {
                f.direction_basis = f.direction_basis.iter().map(|b| rot.apply(b)).collect();
            }
        }
        p.facet_normals = p.facet_normals.iter().map(|u| rot.apply(u)).collect();
        p.orth = p.orth.iter().map(|u| rot.apply(u)).collect();
        p
    }

    /// P ∩ H for a closed halfspace H.
    pub fn intersect_halfspace(&self, h: &Halfspace) -> Result<Polytope> {
        let tol = 1e-12 * (1.0 + self.diameter_bound());
        let sd: Vec<f64> = self.vertices.iter().map(|v| h.signed_distance(v)).collect();
        if sd.iter().all(|&s| s <= tol) {
            return Ok(self.clone());
        }
        let mut pts: Vec<Vec<f64>> = self.vertices.iter().zip(&sd).filter(|(_, &s)| s <= tol).map(|(v, _)| v.clone()).collect();
        pts.extend(self.edge_crossings(&sd, tol));
        if pts.is_empty() {
            return Err(Error::Empty("polytope misses the halfspace"));
        }
        hull(&pts)
    }

    /// P ∩ ∂H.
    pub fn intersect_hyperplane(&self, h: &Halfspace) -> Result<Polytope> {
        let tol = 1e-12 * (1.0 + self.diameter_bound());
        let sd: Vec<f64> = self.vertices.iter().map(|v| h.signed_distance(v)).collect();
        let mut pts: Vec<Vec<f64>> = self.vertices.iter().zip(&sd).filter(|(_, &s)| s.abs() <= tol).map(|(v, _)| v.clone()).collect();
        pts.extend(self.edge_crossings(&sd, tol));
        if pts.is_empty() {
            return Err(Error::Empty("polytope misses the hyperplane"));
        }
        hull(&pts)
    }

    fn edge_crossings(&self, sd: &[f64], tol: f64) -> Vec<Vec<f64>> {
        let mut out = Vec::new();
        let edges: Vec<(usize, usize)> = if self.dim == 1 {
            vec![(0, 1)]
        } else {
            self.faces(1).iter().map(|e| (e.vertices[0], e.vertices[1])).collect()
        };
        for (a, b) in edges {
            let (sa, sb) = (sd[a], sd[b]);
            if (sa < -tol && sb > tol) || (sa > tol && sb < -tol) {
                let t = sa / (sa - sb);
                out.push(axpy(&self.vertices[a], t, &sub(&self.vertices[b], &self.vertices[a])));
            }
        }
        out
    }

    /// Vertex-wise image, with the face lattice recomputed by the hull.
    pub fn map_vertices(&self, f: impl Fn(&[f64]) -> Vec<f64>) -> Result<Polytope> {
        let pts: Vec<Vec<f64>> = self.vertices.iter().map(|v| f(v)).collect();
        hull(&pts)
    }
}

fn k_level_mismatch(levels: &[Vec<Vec<usize>>], nv: usize) -> bool {
    levels[0].len() != nv
}

fn intersect_sorted(a: &[usize], b: &[usize]) -> Vec<usize> {
    let (mut i, mut j) = (0, 0);
    let mut out = Vec::new();
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                out.push(a[i]);
                i += 1;
                j += 1;
            }
        }
    }
    out
}

fn is_subset_sorted(a: &[usize], b: &[usize]) -> bool {
    intersect_sorted(a, b).len() == a.len()
}

/// Orthonormal basis of the k-dimensional direction space of a point set
/// known to span an affine k-flat.
pub(crate) fn affine_basis(points: &[Vec<f64>], k: usize) -> Vec<Vec<f64>> {
    if k == 0 {
        return Vec::new();
    }
    let n = points[0].len();
    let refs: Vec<&[f64]> = points.iter().map(|p| p.as_slice()).collect();
    let c = centroid(&refs);
    let centered: Vec<Vec<f64>> = points.iter().map(|p| sub(p, &c)).collect();
    pivoted_basis(&centered, k.min(n), 0.0)
}

fn facet_normal_in(lp: &[Vec<f64>], lf: &[Vec<f64>], outward: &[f64]) -> Result<Vec<f64>> {
    let mut cands: Vec<Vec<f64>> = lf.to_vec();
    cands.extend(lp.iter().cloned());
    let ortho = orthonormalize(&cands, 1e-8);
    let w = ortho
        .get(lf.len())
        .cloned()
        .ok_or_else(|| Error::Numeric("facet spans the whole affine hull".into()))?;
    Ok(if dot(&w, outward) < 0.0 { scale(&w, -1.0) } else { w })
}

/// k-volume of the simplex with the given vertex ids.
pub fn simplex_volume(vertices: &[Vec<f64>], simplex: &[usize]) -> f64 {
    let v0 = &vertices[simplex[0]];
    let edges: Vec<Vec<f64>> = simplex[1..].iter().map(|&i| sub(&vertices[i], v0)).collect();
    let k = edges.len();
    gram_volume(&edges) / crate::symtensor::factorial(k)
}

/// Minkowski sum as the hull of pairwise vertex sums.
pub fn minkowski_sum(p: &Polytope, r: &Polytope) -> Result<Polytope> {
    if p.n != r.n {
        return Err(Error::DimensionMismatch { expected: p.n, got: r.n });
    }
    let mut pts = Vec::with_capacity(p.vertices.len() * r.vertices.len());
    for a in &p.vertices {
        for b in &r.vertices {
            pts.push(add(a, b));
        }
    }
    hull(&pts)
}

// ---------------------------------------------------------------------------
// builders

pub fn point(x: Vec<f64>) -> Polytope {
    hull(&[x]).expect("single point")
}

pub fn segment(a: Vec<f64>, b: Vec<f64>) -> Result<Polytope> {
    hull(&[a, b])
}

/// Axis-parallel box `[lo, hi]` in dimension <= 3.
pub fn cuboid(lo: &[f64], hi: &[f64]) -> Result<Polytope> {
    let n = lo.len();
    let mut pts = Vec::new();
    for mask in 0..(1usize << n) {
        pts.push((0..n).map(|i| if mask >> i & 1 == 1 { hi[i] } else { lo[i] }).collect());
    }
    hull(&pts)
}

pub fn unit_cube(n: usize) -> Polytope {
    cuboid(&vec![0.0; n], &vec![1.0; n]).expect("unit cube")
}

/// Regular polygon in the plane spanned by the first two coordinates of R^n.
pub fn regular_polygon(n: usize, m: usize, radius: f64) -> Result<Polytope> {
    let pts: Vec<Vec<f64>> = (0..m)
        .map(|i| {
            let a = 2.0 * std::f64::consts::PI * i as f64 / m as f64;
            let mut p = vec![0.0; n];
            p[0] = radius * a.cos();
            p[1] = radius * a.sin();
            p
        })
        .collect();
    hull(&pts)
}

/// Inscribed polytope of the sphere of radius `radius` centered at 0, from
/// the icosahedron subdivided `level` times.
pub fn geodesic_sphere(radius: f64, level: usize) -> Polytope {
    let g = (1.0 + 5f64.sqrt()) / 2.0;
    let mut verts: Vec<Vec<f64>> = vec![
        vec![-1.0, g, 0.0],
        vec![1.0, g, 0.0],
        vec![-1.0, -g, 0.0],
        vec![1.0, -g, 0.0],
        vec![0.0, -1.0, g],
        vec![0.0, 1.0, g],
        vec![0.0, -1.0, -g],
        vec![0.0, 1.0, -g],
        vec![g, 0.0, -1.0],
        vec![g, 0.0, 1.0],
        vec![-g, 0.0, -1.0],
        vec![-g, 0.0, 1.0],
    ];
    for v in verts.iter_mut() {
        *v = scale(v, 1.0 / norm(v));
    }
    let mut tris: Vec<[usize; 3]> = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    for _ in 0..level {
        let mut mid: BTreeMap<(usize, usize), usize> = BTreeMap::new();
        let mut next = Vec::with_capacity(tris.len() * 4);
        let mut midpoint = |a: usize, b: usize, verts: &mut Vec<Vec<f64>>| -> usize {
            let key = (a.min(b), a.max(b));
            *mid.entry(key).or_insert_with(|| {
                let m = add(&verts[a], &verts[b]);
                verts.push(scale(&m, 1.0 / norm(&m)));
                verts.len() - 1
            })
        };
        for t in &tris {
            let ab = midpoint(t[0], t[1], &mut verts);
            let bc = midpoint(t[1], t[2], &mut verts);
            let ca = midpoint(t[2], t[0], &mut verts);
            next.push([t[0], ab, ca]);
            next.push([t[1], bc, ab]);
            next.push([t[2], ca, bc]);
            next.push([ab, bc, ca]);
        }
        tris = next;
    }
    let pts: Vec<Vec<f64>> = verts.iter().map(|v| scale(v, radius)).collect();
    let facets = tris.iter().map(|t| t.to_vec()).collect();
    Polytope::from_facet_sets(3, pts, 3, facets).expect("geodesic sphere")
}

/// Hull of `count` random points in the box `[-1, 1]^n`, n <= 3.
pub fn random_polytope<R: rand::Rng>(n: usize, count: usize, rng: &mut R) -> Polytope {
    loop {
        let pts: Vec<Vec<f64>> = (0..count).map(|_| (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
        if let Ok(p) = hull(&pts) {
            if p.dim() == n {
                return p;
            }
        }
    }
}

// ---------------------------------------------------------------------------
// file format

#[derive(Serialize, Deserialize, Debug, Clone)]
pub struct PolytopeFile {
    pub dimension: usize,
    pub vertices: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub faces: Option<BTreeMap<String, Vec<Vec<usize>>>>,
}

impl PolytopeFile {
    pub fn parse(text: &str) -> Result<PolytopeFile> {
        serde_json::from_str(text).map_err(|e| Error::Format(e.to_string()))
    }

    pub fn to_polytope(&self) -> Result<Polytope> {
        let n = self.dimension;
        if self.vertices.is_empty() {
            return Err(Error::Format("no vertices".into()));
        }
        if let Some(v) = self.vertices.iter().find(|v| v.len() != n) {
            return Err(Error::Format(format!("vertex of length {} in dimension {n}", v.len())));
        }
        match &self.faces {
            None if n <= 3 => hull(&self.vertices),
            None => Err(Error::Format(format!("faces are required in dimension {n}"))),
            Some(map) => {
                let (_, dirs) = affine_hull(&self.vertices, 1e-10);
                let d = dirs.len();
                if d == 0 {
                    return hull(&self.vertices);
                }
                let key = (d - 1).to_string();
                let facets = map
                    .get(&key)
                    .ok_or_else(|| Error::Format(format!("faces of dimension {} (facets) are required", d - 1)))?;
                for f in facets {
                    if let Some(&bad) = f.iter().find(|&&v| v >= self.vertices.len()) {
                        return Err(Error::Format(format!("vertex id {bad} out of range")));
                    }
                }
                Polytope::from_facet_sets(n, self.vertices.clone(), d, facets.clone())
            }
        }
    }

    pub fn from_polytope(p: &Polytope) -> PolytopeFile {
        let mut faces = BTreeMap::new();
        for k in 0..p.faces.len() {
            faces.insert(k.to_string(), p.faces[k].iter().map(|f| f.vertices.clone()).collect());
        }
        PolytopeFile { dimension: p.n, vertices: p.vertices.clone(), faces: Some(faces) }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn cube_measures() {
        let c = unit_cube(3);
        for f in c.faces(2) {
            assert_abs_diff_eq!(f.measure, 1.0, epsilon = 1e-12);
        }
        for f in c.faces(1) {
            assert_abs_diff_eq!(f.measure, 1.0, epsilon = 1e-12);
        }
        assert_abs_diff_eq!(c.volume(), 1.0, epsilon = 1e-12);
        assert_eq!(c.euler_sum(), 1);
    }

    #[test]
    fn equilateral_triangle_area() {
        let t = hull(&[vec![0.0, 0.0, 0.0], vec![2.0, 0.0, 0.0], vec![1.0, 3f64.sqrt(), 0.0]]).unwrap();
        assert_eq!(t.dim(), 2);
        assert_abs_diff_eq!(t.volume(), 3f64.sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn cube_normal_cones() {
        let c = unit_cube(3);
        let top = (0..6).find(|&i| c.facet_normal(i)[2] > 0.5).unwrap();
        let nc = c.normal_cone(2, top);
        assert_eq!(nc.generators.len(), 1);
        assert_abs_diff_eq!(nc.generators[0][2], 1.0, epsilon = 1e-12);
        for i in 0..12 {
            assert_eq!(c.normal_cone(1, i).generators.len(), 2);
        }
        for i in 0..8 {
            assert_eq!(c.normal_cone(0, i).generators.len(), 3);
        }
    }

    #[test]
    fn segment_in_space() {
        let s = segment(vec![0.0, 0.0, 0.0], vec![2.0, 0.0, 0.0]).unwrap();
        assert_eq!(s.dim(), 1);
        assert_eq!(s.orthogonal_basis().len(), 2);
        assert_abs_diff_eq!(s.volume(), 2.0, epsilon = 1e-12);
        assert_eq!(s.normal_cone(1, 0).generators.len(), 0);
        assert_eq!(s.normal_cone(0, 0).generators.len(), 1);
    }

    #[test]
    fn halfspace_cuts() {
        let c = unit_cube(3);
        let h = Halfspace::new(vec![1.0, 0.0, 0.0], 0.5).unwrap();
        let half = c.intersect_halfspace(&h).unwrap();
        assert_abs_diff_eq!(half.volume(), 0.5, epsilon = 1e-12);
        let far = Halfspace::new(vec![1.0, 0.0, 0.0], 2.0).unwrap();
        assert_abs_diff_eq!(c.intersect_halfspace(&far).unwrap().volume(), 1.0, epsilon = 1e-12);
        let flat = c.intersect_halfspace(&Halfspace::new(vec![1.0, 0.0, 0.0], 0.0).unwrap()).unwrap();
        assert_eq!(flat.dim(), 2);
        assert!(c.intersect_halfspace(&Halfspace::new(vec![1.0, 0.0, 0.0], -1.0).unwrap()).is_err());
    }

    #[test]
    fn minkowski_sums() {
        let a = segment(vec![0.0, 0.0], vec![1.0, 0.0]).unwrap();
        let b = segment(vec![0.0, 0.0], vec![0.0, 1.0]).unwrap();
        let sq = minkowski_sum(&a, &b).unwrap();
        assert_abs_diff_eq!(sq.volume(), 1.0, epsilon = 1e-12);
        let c = unit_cube(3);
        assert_abs_diff_eq!(minkowski_sum(&c, &c).unwrap().volume(), 8.0, epsilon = 1e-12);
        let moved = minkowski_sum(&c, &point(vec![1.0, 2.0, 3.0])).unwrap();
        assert_abs_diff_eq!(moved.support(&[0.0, 0.0, 1.0]), 4.0, epsilon = 1e-12);
    }

    #[test]
    fn geodesic_sphere_is_closed() {
        let g = geodesic_sphere(1.0, 2);
        assert_eq!(g.count(2), 320);
        assert_eq!(g.euler_sum(), 1);
        assert!(g.volume() < 4.0 * std::f64::consts::PI / 3.0);
    }

    #[test]
    fn file_round_trip() {
        let c = unit_cube(3);
        let text = serde_json::to_string(&PolytopeFile::from_polytope(&c)).unwrap();
        let back = PolytopeFile::parse(&text).unwrap().to_polytope().unwrap();
        assert_eq!(back.count(1), 12);
        assert!(PolytopeFile::parse("{\"dimension\": 3}").is_err());
        let four = PolytopeFile { dimension: 4, vertices: vec![vec![0.0; 4]], faces: None };
        assert!(four.to_polytope().is_err());
    }

    #[test]
    fn nearest_point_on_cube() {
        let c = unit_cube(3);
        let (p, (k, _)) = c.nearest_point(&[2.0, 0.5, 0.5]).unwrap();
        assert_eq!(k, 2);
        assert_abs_diff_eq!(p[0], 1.0, epsilon = 1e-12);
        let (_, (k, _)) = c.nearest_point(&[2.0, 2.0, 0.5]).unwrap();
        assert_eq!(k, 1);
        let (_, (k, _)) = c.nearest_point(&[2.0, 2.0, 2.0]).unwrap();
        assert_eq!(k, 0);
        assert!(c.nearest_point(&[0.5, 0.5, 0.5]).is_none());
    }
}
