//! Convex hulls in affine dimension up to three.
//!
//! The 3D hull is an incremental conflict-list construction driven by exact
//! orientation predicates. Its triangles are merged into planar facets
//! afterwards, and points that end up in the middle of an edge are dropped.

use super::Polytope;
use crate::error::{Error, Result};
use crate::linalg::{affine_hull, cross3, dist, dot, norm, sub};
use robust::{orient2d, orient3d, Coord, Coord3D};
use std::collections::HashMap;

/// Relative tolerance used to merge coplanar triangles and collinear edges.
pub const COPLANAR_TOL: f64 = 1e-9;

/// Convex hull of a finite point set whose affine hull has dimension <= 3.
pub fn hull(points: &[Vec<f64>]) -> Result<Polytope> {
    if points.is_empty() {
        return Err(Error::Empty("hull of no points"));
    }
    let n = points[0].len();
    if points.iter().any(|p| p.len() != n) {
        return Err(Error::DimensionMismatch { expected: n, got: points.iter().map(|p| p.len()).find(|&l| l != n).unwrap() });
    }
    let pts = dedupe(points);
    let (origin, dirs) = affine_hull(&pts, 1e-10);
    let d = dirs.len();
    if d > 3 {
        return Err(Error::Unsupported(format!("hull of affine dimension {d}")));
    }
    let local: Vec<Vec<f64>> = if d == n {
        pts.clone()
    } else {
        pts.iter().map(|p| dirs.iter().map(|b| dot(&sub(p, &origin), b)).collect()).collect()
    };
    let (verts, facets): (Vec<usize>, Vec<Vec<usize>>) = match d {
        0 => (vec![0], vec![]),
        1 => {
            let (mut lo, mut hi) = (0, 0);
            for (i, p) in local.iter().enumerate() {
                if p[0] < local[lo][0] {
                    lo = i;
                }
                if p[0] > local[hi][0] {
                    hi = i;
                }
            }
            (vec![lo, hi], vec![vec![lo], vec![hi]])
        }
        2 => {
            let cyc = hull2d(&local);
            let m = cyc.len();
            let facets = (0..m).map(|i| vec![cyc[i], cyc[(i + 1) % m]]).collect();
            (cyc, facets)
        }
        _ => {
            let facets = hull3d(&local)?;
            let mut vs: Vec<usize> = facets.iter().flatten().cloned().collect();
            vs.sort_unstable();
            vs.dedup();
            (vs, facets)
        }
    };
    let mut remap = HashMap::new();
    let mut vertices = Vec::with_capacity(verts.len());
    for &v in &verts {
        remap.insert(v, vertices.len());
        vertices.push(pts[v].clone());
    }
    let facets = facets.into_iter().map(|f| f.iter().map(|v| remap[v]).collect()).collect();
    Polytope::from_facet_sets(n, vertices, d, facets)
}

fn dedupe(points: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let scale = points.iter().map(|p| norm(p)).fold(0.0f64, f64::max).max(1e-300);
    let tol = 1e-13 * scale;
    let mut sorted: Vec<&Vec<f64>> = points.iter().collect();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    let mut out: Vec<Vec<f64>> = Vec::new();
    for p in sorted {
        // equal points are adjacent after lexicographic sorting, up to a few near-ties
        let dup = out.iter().rev().take(8).any(|q| dist(p, q) <= tol);
        if !dup {
            out.push(p.clone());
        }
    }
    out
}

/// Counter-clockwise hull cycle (Andrew's monotone chain, exact turns),
/// followed by removal of nearly collinear vertices.
pub(crate) fn hull2d(pts: &[Vec<f64>]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..pts.len()).collect();
    idx.sort_by(|&a, &b| pts[a].partial_cmp(&pts[b]).unwrap_or(std::cmp::Ordering::Equal));
    let c = |i: usize| Coord { x: pts[i][0], y: pts[i][1] };
    let mut lower: Vec<usize> = Vec::new();
    for &i in &idx {
        while lower.len() >= 2 && orient2d(c(lower[lower.len() - 2]), c(lower[lower.len() - 1]), c(i)) <= 0.0 {
            lower.pop();
        }
        lower.push(i);
    }
    let mut upper: Vec<usize> = Vec::new();
    for &i in idx.iter().rev() {
        while upper.len() >= 2 && orient2d(c(upper[upper.len() - 2]), c(upper[upper.len() - 1]), c(i)) <= 0.0 {
            upper.pop();
        }
        upper.push(i);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    drop_collinear_cycle(lower, pts)
}

fn drop_collinear_cycle(mut cyc: Vec<usize>, pts: &[Vec<f64>]) -> Vec<usize> {
    loop {
        let m = cyc.len();
        if m <= 3 {
            return cyc;
        }
        let bad = (0..m).find(|&i| {
            let a = &pts[cyc[(i + m - 1) % m]];
            let v = &pts[cyc[i]];
            let b = &pts[cyc[(i + 1) % m]];
            nearly_collinear(a, v, b)
        });
        match bad {
            Some(i) => {
                cyc.remove(i);
            }
            None => return cyc,
        }
    }
}

fn nearly_collinear(a: &[f64], v: &[f64], b: &[f64]) -> bool {
    let e1 = sub(v, a);
    let e2 = sub(b, v);
    let l1 = norm(&e1);
    let l2 = norm(&e2);
    if l1 == 0.0 || l2 == 0.0 {
        return true;
    }
    // |sin| of the turning angle, via the Gram determinant
    let c = dot(&e1, &e2);
    let s2 = (l1 * l1 * l2 * l2 - c * c).max(0.0);
    c > 0.0 && s2.sqrt() <= COPLANAR_TOL * l1 * l2
}

#[derive(Clone)]
struct Tri {
    v: [usize; 3],
    nb: [usize; 3],
    alive: bool,
    conflicts: Vec<usize>,
    normal: [f64; 3],
}

fn c3(p: &[f64]) -> Coord3D<f64> {
    Coord3D { x: p[0], y: p[1], z: p[2] }
}

fn visible(pts: &[Vec<f64>], t: &Tri, p: usize) -> bool {
    orient3d(c3(&pts[t.v[0]]), c3(&pts[t.v[1]]), c3(&pts[t.v[2]]), c3(&pts[p])) < 0.0
}

fn tri_normal(pts: &[Vec<f64>], v: [usize; 3]) -> [f64; 3] {
    let n = cross3(&sub(&pts[v[1]], &pts[v[0]]), &sub(&pts[v[2]], &pts[v[0]]));
    let l = norm(&n);
    if l == 0.0 {
        return n;
    }
    [n[0] / l, n[1] / l, n[2] / l]
}

fn height(pts: &[Vec<f64>], t: &Tri, p: usize) -> f64 {
    dot(&sub(&pts[p], &pts[t.v[0]]), &t.normal)
}

/// Facets of the 3D hull as vertex cycles, counter-clockwise seen from outside.
pub(crate) fn hull3d(pts: &[Vec<f64>]) -> Result<Vec<Vec<usize>>> {
    let tris = triangulated_hull3d(pts)?;
    merge_coplanar(pts, &tris)
}

fn initial_simplex(pts: &[Vec<f64>]) -> Result<[usize; 4]> {
    let np = pts.len();
    let i0 = (0..np).min_by(|&a, &b| pts[a][0].partial_cmp(&pts[b][0]).unwrap()).unwrap();
    let i1 = (0..np).max_by(|&a, &b| dist(&pts[a], &pts[i0]).partial_cmp(&dist(&pts[b], &pts[i0])).unwrap()).unwrap();
    let e = sub(&pts[i1], &pts[i0]);
    let line_dist = |p: &Vec<f64>| norm(&cross3(&sub(p, &pts[i0]), &e));
    let i2 = (0..np).max_by(|&a, &b| line_dist(&pts[a]).partial_cmp(&line_dist(&pts[b])).unwrap()).unwrap();
    let nrm = cross3(&e, &sub(&pts[i2], &pts[i0]));
    let plane_dist = |p: &Vec<f64>| dot(&sub(p, &pts[i0]), &nrm).abs();
    let i3 = (0..np).max_by(|&a, &b| plane_dist(&pts[a]).partial_cmp(&plane_dist(&pts[b])).unwrap()).unwrap();
    if orient3d(c3(&pts[i0]), c3(&pts[i1]), c3(&pts[i2]), c3(&pts[i3])) == 0.0 {
        return Err(Error::Numeric("hull seed points are coplanar".into()));
    }
    Ok([i0, i1, i2, i3])
}

fn triangulated_hull3d(pts: &[Vec<f64>]) -> Result<Vec<Tri>> {
    let s = initial_simplex(pts)?;
    let mut tris: Vec<Tri> = Vec::new();
    // faces of the seed tetrahedron, each opposite one seed vertex
    let faces = [[s[1], s[2], s[3], s[0]], [s[0], s[3], s[2], s[1]], [s[0], s[1], s[3], s[2]], [s[0], s[2], s[1], s[3]]];
    for f in faces {
        let mut v = [f[0], f[1], f[2]];
        if orient3d(c3(&pts[v[0]]), c3(&pts[v[1]]), c3(&pts[v[2]]), c3(&pts[f[3]])) < 0.0 {
            v.swap(1, 2);
        }
        tris.push(Tri { v, nb: [usize::MAX; 3], alive: true, conflicts: Vec::new(), normal: tri_normal(pts, v) });
    }
    link_all(&mut tris);

    for p in 0..pts.len() {
        if s.contains(&p) {
            continue;
        }
        if let Some(t) = (0..4).find(|&t| visible(pts, &tris[t], p)) {
            tris[t].conflicts.push(p);
        }
    }

    let mut stack: Vec<usize> = (0..4).collect();
    while let Some(f) = stack.pop() {
        if !tris[f].alive || tris[f].conflicts.is_empty() {
            continue;
        }
        let apex = *tris[f]
            .conflicts
            .iter()
            .max_by(|&&a, &&b| height(pts, &tris[f], a).partial_cmp(&height(pts, &tris[f], b)).unwrap())
            .unwrap();

        // visible region by flood fill
        let mut vis = vec![f];
        let mut is_vis: HashMap<usize, bool> = HashMap::new();
        is_vis.insert(f, true);
        let mut k = 0;
        while k < vis.len() {
            let t = vis[k];
            k += 1;
            for e in 0..3 {
                let g = tris[t].nb[e];
                if is_vis.contains_key(&g) {
                    continue;
                }
                let v = visible(pts, &tris[g], apex);
                is_vis.insert(g, v);
                if v {
                    vis.push(g);
                }
            }
        }

        // horizon edges and new cone faces
        let mut new_faces = Vec::new();
        let mut edge_owner: HashMap<(usize, usize), usize> = HashMap::new();
        for &t in &vis {
            for e in 0..3 {
                let g = tris[t].nb[e];
                if is_vis[&g] {
                    continue;
                }
                let a = tris[t].v[e];
                let b = tris[t].v[(e + 1) % 3];
                let v = [a, b, apex];
                let id = tris.len();
                tris.push(Tri { v, nb: [g, usize::MAX, usize::MAX], alive: true, conflicts: Vec::new(), normal: tri_normal(pts, v) });
                let ge = (0..3).find(|&i| tris[g].nb[i] == t).unwrap();
                tris[g].nb[ge] = id;
                edge_owner.insert((b, apex), id);
                edge_owner.insert((apex, a), id);
                new_faces.push(id);
            }
        }
        for &id in &new_faces {
            let [a, b, _] = tris[id].v;
            // across (b, apex) lies the face owning (apex, b); across (apex, a) the face owning (a, apex)
            let n1 = *edge_owner.get(&(apex, b)).ok_or_else(|| Error::Numeric("broken horizon".into()))?;
            let n2 = *edge_owner.get(&(a, apex)).ok_or_else(|| Error::Numeric("broken horizon".into()))?;
            tris[id].nb[1] = n1;
            tris[id].nb[2] = n2;
        }

        let mut orphans = Vec::new();
        for &t in &vis {
            tris[t].alive = false;
            orphans.append(&mut tris[t].conflicts);
        }
        for q in orphans {
            if q == apex {
                continue;
            }
            if let Some(&id) = new_faces.iter().find(|&&id| visible(pts, &tris[id], q)) {
                tris[id].conflicts.push(q);
            }
        }
        stack.extend(new_faces.iter().cloned());
    }
    Ok(tris.into_iter().filter(|t| t.alive).collect())
}

fn link_all(tris: &mut [Tri]) {
    let mut owner = HashMap::new();
    for (i, t) in tris.iter().enumerate() {
        if !t.alive {
            continue;
        }
        for e in 0..3 {
            owner.insert((t.v[e], t.v[(e + 1) % 3]), i);
        }
    }
    for i in 0..tris.len() {
        if !tris[i].alive {
            continue;
        }
        for e in 0..3 {
            let (a, b) = (tris[i].v[e], tris[i].v[(e + 1) % 3]);
            tris[i].nb[e] = owner[&(b, a)];
        }
    }
}

fn find(parent: &mut [usize], mut i: usize) -> usize {
    while parent[i] != i {
        parent[i] = parent[parent[i]];
        i = parent[i];
    }
    i
}

fn merge_coplanar(pts: &[Vec<f64>], tris_in: &[Tri]) -> Result<Vec<Vec<usize>>> {
    let mut tris = tris_in.to_vec();
    link_all(&mut tris);
    let diam = {
        let vs: Vec<usize> = tris.iter().flat_map(|t| t.v).collect();
        let c = &pts[vs[0]];
        2.0 * vs.iter().map(|&v| dist(&pts[v], c)).fold(0.0f64, f64::max)
    };
    let tol = COPLANAR_TOL * diam;
    let m = tris.len();
    let mut parent: Vec<usize> = (0..m).collect();
    for i in 0..m {
        for e in 0..3 {
            let j = tris[i].nb[e];
            if j < i {
                continue;
            }
            let opp_j = tris[j].v.iter().cloned().find(|v| !tris[i].v.contains(v)).unwrap();
            let opp_i = tris[i].v[(e + 2) % 3];
            if height(pts, &tris[i], opp_j).abs() <= tol && height(pts, &tris[j], opp_i).abs() <= tol {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                parent[a] = b;
            }
        }
    }
    let mut groups: HashMap<usize, Vec<usize>> = HashMap::new();
    for i in 0..m {
        let r = find(&mut parent, i);
        groups.entry(r).or_default().push(i);
    }
    let mut roots: Vec<usize> = groups.keys().cloned().collect();
    roots.sort_unstable();

    let mut cycles = Vec::new();
    for r in roots {
        let g = &groups[&r];
        let mut next: HashMap<usize, usize> = HashMap::new();
        for &t in g {
            for e in 0..3 {
                let nbr = tris[t].nb[e];
                if find(&mut parent, nbr) == r {
                    continue;
                }
                let (a, b) = (tris[t].v[e], tris[t].v[(e + 1) % 3]);
                if next.insert(a, b).is_some() {
                    return Err(Error::Numeric("merged facet is not a disk".into()));
                }
            }
        }
        let start = *next.keys().min().unwrap();
        let mut cyc = vec![start];
        let mut cur = next[&start];
        while cur != start {
            cyc.push(cur);
            cur = *next.get(&cur).ok_or_else(|| Error::Numeric("open facet boundary".into()))?;
            if cyc.len() > next.len() {
                return Err(Error::Numeric("facet boundary does not close".into()));
            }
        }
        if cyc.len() != next.len() {
            return Err(Error::Numeric("facet boundary has several loops".into()));
        }
        cycles.push(cyc);
    }

    // a vertex lying on a straight edge of any facet is not extreme
    loop {
        let mut drop = None;
        'outer: for cyc in &cycles {
            let k = cyc.len();
            for i in 0..k {
                if k > 3 && nearly_collinear(&pts[cyc[(i + k - 1) % k]], &pts[cyc[i]], &pts[cyc[(i + 1) % k]]) {
                    drop = Some(cyc[i]);
                    break 'outer;
                }
            }
        }
        match drop {
            Some(v) => {
                for cyc in cycles.iter_mut() {
                    cyc.retain(|&w| w != v);
                }
            }
            None => break,
        }
    }
    Ok(cycles)
}
