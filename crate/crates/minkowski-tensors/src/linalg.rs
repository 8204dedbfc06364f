//! Small dense vector helpers on `&[f64]`.

use nalgebra::{DMatrix, DVector};

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

pub fn scale(a: &[f64], c: f64) -> Vec<f64> {
    a.iter().map(|x| x * c).collect()
}

/// `a + c * b`
pub fn axpy(a: &[f64], c: f64, b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + c * y).collect()
}

pub fn normalize(a: &[f64]) -> Vec<f64> {
    let l = norm(a);
    scale(a, 1.0 / l)
}

pub fn unit(n: usize, i: usize) -> Vec<f64> {
    let mut v = vec![0.0; n];
    v[i] = 1.0;
    v
}

pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    norm(&sub(a, b))
}

pub fn centroid(points: &[&[f64]]) -> Vec<f64> {
    let n = points[0].len();
    let mut c = vec![0.0; n];
    for p in points {
        for i in 0..n {
            c[i] += p[i];
        }
    }
    scale(&c, 1.0 / points.len() as f64)
}

pub fn cross3(a: &[f64], b: &[f64]) -> [f64; 3] {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

/// Gram-Schmidt on `vectors`; drops vectors whose residual falls below `tol`
/// relative to their original length.
pub fn orthonormalize(vectors: &[Vec<f64>], tol: f64) -> Vec<Vec<f64>> {
    let mut basis: Vec<Vec<f64>> = Vec::new();
    for v in vectors {
        let len = norm(v);
        if len == 0.0 {
            continue;
        }
        let mut w = v.clone();
        // two passes keep the basis orthogonal to machine precision
        for _ in 0..2 {
            for b in &basis {
                let c = dot(&w, b);
                w = axpy(&w, -c, b);
            }
        }
        let l = norm(&w);
        if l > tol * len {
            basis.push(scale(&w, 1.0 / l));
        }
    }
    basis
}

/// Orthonormal basis of the orthogonal complement of span(basis) in R^n.
/// `basis` must be orthonormal.
pub fn complement(n: usize, basis: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut all = basis.to_vec();
    let k = all.len();
    for i in 0..n {
        all.push(unit(n, i));
    }
    let full = orthonormalize(&all, 1e-8);
    full[k..].to_vec()
}

/// Affine hull of a point set: (origin, orthonormal direction basis).
/// Directions with singular value below `rel_tol * max` are dropped.
pub fn affine_hull(points: &[Vec<f64>], rel_tol: f64) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = points[0].len();
    let refs: Vec<&[f64]> = points.iter().map(|p| p.as_slice()).collect();
    let c = centroid(&refs);
    if points.len() == 1 {
        return (c, Vec::new());
    }
    let centered: Vec<Vec<f64>> = points.iter().map(|p| sub(p, &c)).collect();
    let scale_len = centered.iter().map(|v| norm(v)).fold(0.0f64, f64::max);
    if scale_len == 0.0 {
        return (c, Vec::new());
    }
    (c, pivoted_basis(&centered, n, rel_tol * scale_len))
}

/// Orthonormal basis of span(vectors) by Gram-Schmidt with largest-residual
/// pivoting; stops after `max_dim` directions or when every residual is
/// at most `abs_tol`.
///
/// Used instead of an SVD: nalgebra's SVD returns inaccurate singular
/// vectors for some rank-deficient wide matrices (two centred points in R^3).
pub fn pivoted_basis(vectors: &[Vec<f64>], max_dim: usize, abs_tol: f64) -> Vec<Vec<f64>> {
    let mut res: Vec<Vec<f64>> = vectors.to_vec();
    let mut basis: Vec<Vec<f64>> = Vec::new();
    while basis.len() < max_dim {
        let Some((i, l)) = res.iter().map(|v| norm(v)).enumerate().max_by(|a, b| a.1.total_cmp(&b.1)) else { break };
        if l <= abs_tol || l == 0.0 {
            break;
        }
        let mut q = scale(&res[i], 1.0 / l);
        // re-orthogonalize against the basis so far
        for b in &basis {
            q = axpy(&q, -dot(&q, b), b);
        }
        let q = scale(&q, 1.0 / norm(&q));
        for v in res.iter_mut() {
            for _ in 0..2 {
                let c = dot(v, &q);
                *v = axpy(v, -c, &q);
            }
        }
        basis.push(q);
    }
    basis
}

/// k-dimensional volume of the parallelotope spanned by `edges`.
///
/// Computed as the product of the modified Gram-Schmidt residual norms,
/// which stays accurate for nearly degenerate sets where the Gram
/// determinant loses half the digits.
pub fn gram_volume(edges: &[Vec<f64>]) -> f64 {
    let mut q: Vec<Vec<f64>> = Vec::with_capacity(edges.len());
    let mut vol = 1.0;
    for e in edges {
        let mut r = e.clone();
        for _ in 0..2 {
            for b in &q {
                let t = dot(&r, b);
                r = axpy(&r, -t, b);
            }
        }
        let l = norm(&r);
        if l == 0.0 {
            return 0.0;
        }
        vol *= l;
        q.push(scale(&r, 1.0 / l));
    }
    vol
}

/// Non-negative least squares `min ||A x - b||, x >= 0` (Lawson-Hanson), with
/// the columns of A given as `cols`.
pub fn nnls(cols: &[Vec<f64>], b: &[f64]) -> Vec<f64> {
    let m = cols.len();
    let n = b.len();
    let a = DMatrix::from_fn(n, m, |i, j| cols[j][i]);
    let bv = DVector::from_column_slice(b);
    let mut x = DVector::zeros(m);
    let mut passive = vec![false; m];
    let tol = 1e-12 * (1.0 + norm(b));
    for _outer in 0..(3 * m + 10) {
        let w = a.transpose() * (&bv - &a * &x);
        let mut best = None;
        for j in 0..m {
            if !passive[j] && w[j] > tol {
                if best.map_or(true, |(_, v)| w[j] > v) {
                    best = Some((j, w[j]));
                }
            }
        }
        let Some((jmax, _)) = best else { break };
        passive[jmax] = true;
        for _inner in 0..(3 * m + 10) {
            let idx: Vec<usize> = (0..m).filter(|&j| passive[j]).collect();
            let ap = DMatrix::from_fn(n, idx.len(), |i, k| a[(i, idx[k])]);
            let z_p = match ap.clone().svd(true, true).solve(&bv, 1e-14) {
                Ok(z) => z,
                Err(_) => break,
            };
            if z_p.iter().all(|&v| v > 0.0) {
                x.fill(0.0);
                for (k, &j) in idx.iter().enumerate() {
                    x[j] = z_p[k];
                }
                break;
            }
            let mut alpha = f64::INFINITY;
            for (k, &j) in idx.iter().enumerate() {
                if z_p[k] <= 0.0 {
                    let denom = x[j] - z_p[k];
                    if denom > 0.0 {
                        alpha = alpha.min(x[j] / denom);
                    }
                }
            }
            if !alpha.is_finite() {
                alpha = 0.0;
            }
            for (k, &j) in idx.iter().enumerate() {
                x[j] += alpha * (z_p[k] - x[j]);
            }
            for &j in &idx {
                if x[j] <= 1e-15 {
                    x[j] = 0.0;
                    passive[j] = false;
                }
            }
        }
    }
    x.iter().cloned().collect()
}

/// Euclidean projection of `c` onto the closed convex cone generated by
/// `gens` plus the linear span of `lineality`.
pub fn project_onto_cone(gens: &[Vec<f64>], lineality: &[Vec<f64>], c: &[f64]) -> Vec<f64> {
    let n = c.len();
    // split off the lineality space (orthonormal basis assumed)
    let mut along = vec![0.0; n];
    let mut rest = c.to_vec();
    for l in lineality {
        let t = dot(c, l);
        along = axpy(&along, t, l);
        rest = axpy(&rest, -t, l);
    }
    let gens_perp: Vec<Vec<f64>> = gens
        .iter()
        .map(|g| {
            let mut h = g.clone();
            for l in lineality {
                let t = dot(&h, l);
                h = axpy(&h, -t, l);
            }
            h
        })
        .filter(|g| norm(g) > 1e-14)
        .collect();
    if gens_perp.is_empty() {
        return along;
    }
    let x = nnls(&gens_perp, &rest);
    let mut p = along;
    for (g, xi) in gens_perp.iter().zip(&x) {
        p = axpy(&p, *xi, g);
    }
    p
}

/// `max <u, c>` over unit vectors `u` in the cone; for unit `c` outside the
/// polar cone this is the norm of the projection.
pub fn cone_max_dot(gens: &[Vec<f64>], lineality: &[Vec<f64>], c: &[f64]) -> f64 {
    let p = project_onto_cone(gens, lineality, c);
    let l = norm(&p);
    if l > 1e-14 {
        return l;
    }
    // c lies in the polar cone: the best unit vector is a generator
    gens.iter()
        .map(|g| dot(&normalize(g), c))
        .chain(lineality.iter().map(|_| 0.0))
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Clips a planar convex polygon (vertex cycle) against `{ y : <y, normal> <= offset }`.
pub fn clip_polygon(poly: &[Vec<f64>], normal: &[f64], offset: f64) -> Vec<Vec<f64>> {
    let m = poly.len();
    let mut out = Vec::with_capacity(m + 1);
    for i in 0..m {
        let a = &poly[i];
        let b = &poly[(i + 1) % m];
        let da = dot(a, normal) - offset;
        let db = dot(b, normal) - offset;
        if da <= 0.0 {
            out.push(a.clone());
        }
        if (da < 0.0 && db > 0.0) || (da > 0.0 && db < 0.0) {
            let t = da / (da - db);
            out.push(axpy(a, t, &sub(b, a)));
        }
    }
    out
}

/// Points of a convex set's vertex list kept by `<y, normal> <= offset`,
/// plus the crossings of all segments between kept and dropped points.
/// The hull of the result is the clipped set.
pub fn clip_points(pts: &[Vec<f64>], normal: &[f64], offset: f64) -> Vec<Vec<f64>> {
    let d: Vec<f64> = pts.iter().map(|p| dot(p, normal) - offset).collect();
    let mut out: Vec<Vec<f64>> = pts.iter().zip(&d).filter(|(_, &di)| di <= 0.0).map(|(p, _)| p.clone()).collect();
    for i in 0..pts.len() {
        for j in i + 1..pts.len() {
            if (d[i] < 0.0 && d[j] > 0.0) || (d[i] > 0.0 && d[j] < 0.0) {
                let t = d[i] / (d[i] - d[j]);
                out.push(axpy(&pts[i], t, &sub(&pts[j], &pts[i])));
            }
        }
    }
    out
}

/// Signed area of a polygon in the plane.
pub fn polygon_area_2d(poly: &[Vec<f64>]) -> f64 {
    let m = poly.len();
    let mut s = 0.0;
    for i in 0..m {
        let (a, b) = (&poly[i], &poly[(i + 1) % m]);
        s += a[0] * b[1] - a[1] * b[0];
    }
    0.5 * s
}

/// Intersection of two counter-clockwise convex polygons in the plane.
pub fn intersect_convex_2d(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut out = a.to_vec();
    let m = b.len();
    for i in 0..m {
        if out.is_empty() {
            break;
        }
        let p = &b[i];
        let q = &b[(i + 1) % m];
        // outward normal of a counter-clockwise edge
        let nrm = vec![q[1] - p[1], p[0] - q[0]];
        out = clip_polygon(&out, &nrm, dot(p, &nrm));
    }
    out
}
