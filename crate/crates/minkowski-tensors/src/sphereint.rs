//! Integration of `f(u) u^s` over spherical images of normal cones.
//!
//! Regions are unions of pieces of dimension 0 to 3: points, great-circle
//! arcs, geodesic triangles and geodesic tetrahedra. Triangles and tetrahedra
//! are stored through flat vertices `p_i` with positive scaling; the piece is
//! the radial projection of their convex hull, so clipping a piece by a
//! linear halfspace is clipping the flat simplex.

use crate::error::{Error, Result};
use crate::geometry::{hull, NormalCone};
use crate::linalg::{add, axpy, cone_max_dot, dot, gram_volume, norm, normalize, orthonormalize, scale, sub};
use crate::symtensor::{multi_indices, SymTensor};
use gauss_quad::legendre::GaussLegendre;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::sync::{Arc, OnceLock};

/// Open cap `{ u : <u, axis> > 1 - mu }`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cap {
    pub axis: Vec<f64>,
    pub mu: f64,
}

impl Cap {
    pub fn new(axis: Vec<f64>, mu: f64) -> Result<Cap> {
        let l = norm(&axis);
        if l == 0.0 {
            return Err(Error::InvalidSpec("zero cap axis".into()));
        }
        if !(0.0..=2.0).contains(&mu) {
            return Err(Error::OutOfRange(format!("cap parameter mu = {mu}")));
        }
        Ok(Cap { axis: scale(&axis, 1.0 / l), mu })
    }

    pub fn dimension(&self) -> usize {
        self.axis.len()
    }

    /// Angular radius.
    pub fn angle(&self) -> f64 {
        (1.0 - self.mu).clamp(-1.0, 1.0).acos()
    }

    pub fn contains(&self, u: &[f64]) -> bool {
        dot(u, &self.axis) > (1.0 - self.mu) * norm(u)
    }

    /// Whether the open cap meets the cone (minus the apex).
    pub fn meets_cone(&self, cone: &NormalCone) -> bool {
        if self.mu <= 0.0 {
            return false;
        }
        cone_max_dot(&cone.generators, &cone.lineality, &self.axis) > 1.0 - self.mu
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadratureSpec {
    pub rel_tol: f64,
    pub max_depth: usize,
    /// Points per randomized shift for 3-dimensional pieces.
    pub samples: usize,
    pub seed: u64,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        QuadratureSpec { rel_tol: 1e-11, max_depth: 12, samples: 1 << 12, seed: 0x5eed }
    }
}

impl QuadratureSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tol > 0.0) {
            return Err(Error::Config(format!("quadrature tolerance {} must be positive", self.rel_tol)));
        }
        if self.samples == 0 {
            return Err(Error::Config("quadrature sample count must be positive".into()));
        }
        Ok(())
    }
}

/// Scalar weight on the sphere.
#[derive(Clone)]
pub enum SphereWeight {
    One,
    /// `max(0, <u, axis> - (1 - mu))^2`.
    Bump(Cap),
    Indicator(Cap),
    /// Any continuous function with a bound on its absolute value.
    Func { f: Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>, sup: f64 },
}

impl std::fmt::Debug for SphereWeight {
    fn fmt(&self, fm: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SphereWeight::One => write!(fm, "One"),
            SphereWeight::Bump(c) => write!(fm, "Bump({c:?})"),
            SphereWeight::Indicator(c) => write!(fm, "Indicator({c:?})"),
            SphereWeight::Func { sup, .. } => write!(fm, "Func {{ sup: {sup} }}"),
        }
    }
}

impl SphereWeight {
    pub fn func(f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static, sup: f64) -> SphereWeight {
        SphereWeight::Func { f: Arc::new(f), sup }
    }

    pub fn eval(&self, u: &[f64]) -> f64 {
        match self {
            SphereWeight::One => 1.0,
            SphereWeight::Bump(c) => {
                let v = dot(u, &c.axis) - (1.0 - c.mu);
                if v > 0.0 {
                    v * v
                } else {
                    0.0
                }
            }
            SphereWeight::Indicator(c) => c.contains(u) as u8 as f64,
            SphereWeight::Func { f, .. } => f(u),
        }
    }

    pub fn sup(&self) -> f64 {
        match self {
            SphereWeight::One | SphereWeight::Indicator(_) => 1.0,
            SphereWeight::Bump(c) => c.mu * c.mu,
            SphereWeight::Func { sup, .. } => *sup,
        }
    }

    /// A cap outside which the weight vanishes, if any.
    pub fn support_cap(&self) -> Option<&Cap> {
        match self {
            SphereWeight::Bump(c) | SphereWeight::Indicator(c) => Some(c),
            _ => None,
        }
    }

    fn is_one(&self) -> bool {
        matches!(self, SphereWeight::One)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Piece {
    Point(Vec<f64>),
    /// `cos(theta) a + sin(theta) b` for theta in `[0, angle]`, a ⟂ b unit.
    Arc { a: Vec<f64>, b: Vec<f64>, angle: f64 },
    Triangle([Vec<f64>; 3]),
    Tetrahedron([Vec<f64>; 4]),
}

impl Piece {
    pub fn dim(&self) -> usize {
        match self {
            Piece::Point(_) => 0,
            Piece::Arc { .. } => 1,
            Piece::Triangle(_) => 2,
            Piece::Tetrahedron(_) => 3,
        }
    }
}

/// ν(P,F) as a union of pieces with disjoint relative interiors.
#[derive(Clone, Debug, PartialEq)]
pub struct SphericalRegion {
    pub n: usize,
    pub dim: usize,
    pub pieces: Vec<Piece>,
}

/// Open polyhedral cone `{ u : <u, w_i> < 0 for all i }`; no normals means all directions.
#[derive(Clone, Debug, PartialEq, Default, Serialize, Deserialize)]
pub struct OpenCone {
    pub normals: Vec<Vec<f64>>,
}

impl OpenCone {
    pub fn contains(&self, u: &[f64]) -> bool {
        self.normals.iter().all(|w| dot(u, w) < 0.0)
    }
}

/// Tensor value with an error estimate (0 on exact paths).
#[derive(Clone, Debug)]
pub struct Integral {
    pub tensor: SymTensor,
    pub error: f64,
    /// Set when the tolerance was not reached within the depth limit.
    pub unconverged: bool,
}

impl Integral {
    pub fn zeros(n: usize, s: usize) -> Integral {
        Integral { tensor: SymTensor::zeros(n, s), error: 0.0, unconverged: false }
    }

    pub fn accumulate(&mut self, other: &Integral) {
        self.tensor.axpy(1.0, &other.tensor).expect("matching shapes");
        self.error += other.error;
        self.unconverged |= other.unconverged;
    }
}

impl SphericalRegion {
    pub fn empty(n: usize, dim: usize) -> SphericalRegion {
        SphericalRegion { n, dim, pieces: Vec::new() }
    }

    /// The whole unit sphere in R^n for n <= 4.
    pub fn full_sphere(n: usize) -> Result<SphericalRegion> {
        if !(1..=4).contains(&n) {
            return Err(Error::Unsupported(format!("full sphere in dimension {n}")));
        }
        let basis: Vec<Vec<f64>> = (0..n).map(|i| crate::linalg::unit(n, i)).collect();
        cone_region(&NormalCone { generators: Vec::new(), lineality: basis })
    }

    /// Region of a single great-circle arc.
    pub fn arc(a: &[f64], b: &[f64]) -> Result<SphericalRegion> {
        let n = a.len();
        let a = normalize(a);
        let bn = normalize(b);
        let angle = dot(&a, &bn).clamp(-1.0, 1.0).acos();
        let perp = sub(&bn, &scale(&a, dot(&a, &bn)));
        if norm(&perp) < 1e-14 {
            return Err(Error::InvalidSpec("arc endpoints must not be parallel".into()));
        }
        Ok(SphericalRegion { n, dim: 1, pieces: vec![Piece::Arc { a, b: normalize(&perp), angle }] })
    }

    pub fn is_empty(&self) -> bool {
        self.pieces.is_empty()
    }

    /// Intersection with an open polyhedral cone.
    pub fn clip(&self, omega: &OpenCone) -> Result<SphericalRegion> {
        if omega.normals.is_empty() {
            return Ok(self.clone());
        }
        let mut pieces = Vec::new();
        for p in &self.pieces {
            match p {
                Piece::Point(u) => {
                    if omega.contains(u) {
                        pieces.push(p.clone());
                    }
                }
                Piece::Arc { a, b, angle } => pieces.extend(clip_arc(a, b, *angle, omega)),
                Piece::Triangle(v) => {
                    let mut poly: Vec<Vec<f64>> = v.to_vec();
                    for w in &omega.normals {
                        if poly.len() < 3 {
                            break;
                        }
                        poly = crate::linalg::clip_polygon(&poly, w, 0.0);
                    }
                    if poly.len() >= 3 {
                        for i in 1..poly.len() - 1 {
                            let t = [poly[0].clone(), poly[i].clone(), poly[i + 1].clone()];
                            if !degenerate_triangle(&t) {
                                pieces.push(Piece::Triangle(t));
                            }
                        }
                    }
                }
                Piece::Tetrahedron(v) => {
                    let mut pts: Vec<Vec<f64>> = v.to_vec();
                    for w in &omega.normals {
                        pts = crate::linalg::clip_points(&pts, w, 0.0);
                        if pts.len() < 4 {
                            break;
                        }
                    }
                    if pts.len() >= 4 {
                        pieces.extend(tetrahedralize(&pts)?.into_iter().map(Piece::Tetrahedron));
                    }
                }
            }
        }
        Ok(SphericalRegion { n: self.n, dim: self.dim, pieces })
    }

    /// Spherical measure of the region.
    pub fn measure(&self, spec: &QuadratureSpec) -> Result<f64> {
        Ok(integrate_monomial(self, 0, &SphereWeight::One, spec)?.tensor.value())
    }

    /// Unit directions at the corners of the pieces.
    pub fn directions(&self) -> Vec<Vec<f64>> {
        let mut out = Vec::new();
        for p in &self.pieces {
            match p {
                Piece::Point(u) => out.push(u.clone()),
                Piece::Arc { a, b, angle } => {
                    out.push(a.clone());
                    out.push(add(&scale(a, angle.cos()), &scale(b, angle.sin())));
                }
                Piece::Triangle(v) => out.extend(v.iter().map(|x| normalize(x))),
                Piece::Tetrahedron(v) => out.extend(v.iter().map(|x| normalize(x))),
            }
        }
        out
    }
}

/// Splits the convex hull of points spanning a 3-dimensional affine subspace into tetrahedra.
fn tetrahedralize(pts: &[Vec<f64>]) -> Result<Vec<[Vec<f64>; 4]>> {
    let p = hull(pts)?;
    if p.dim() < 3 {
        return Ok(Vec::new());
    }
    let v = p.vertices();
    let refs: Vec<&[f64]> = v.iter().map(|x| x.as_slice()).collect();
    let c = crate::linalg::centroid(&refs);
    let mut out = Vec::new();
    for f in 0..p.count(2) {
        for s in p.face_simplices(2, f) {
            out.push([c.clone(), v[s[0]].clone(), v[s[1]].clone(), v[s[2]].clone()]);
        }
    }
    Ok(out)
}

fn clip_arc(a: &[f64], b: &[f64], angle: f64, omega: &OpenCone) -> Vec<Piece> {
    let mut cuts = vec![0.0, angle];
    for w in &omega.normals {
        let (ca, cb) = (dot(a, w), dot(b, w));
        let r = ca.hypot(cb);
        if r < 1e-300 {
            continue;
        }
        // zeros of ca cos(t) + cb sin(t)
        let phi = cb.atan2(ca);
        for k in -2..=4 {
            let t = phi + PI / 2.0 + k as f64 * PI;
            if t > 0.0 && t < angle {
                cuts.push(t);
            }
        }
    }
    cuts.sort_by(|x, y| x.partial_cmp(y).unwrap());
    let at = |t: f64| add(&scale(a, t.cos()), &scale(b, t.sin()));
    let mut out = Vec::new();
    let mut run: Option<f64> = None;
    for win in cuts.windows(2) {
        let (t0, t1) = (win[0], win[1]);
        let inside = t1 - t0 > 1e-15 && omega.contains(&at(0.5 * (t0 + t1)));
        match (inside, run) {
            (true, None) => run = Some(t0),
            (false, Some(s)) => {
                out.push(arc_piece(a, b, s, t0));
                run = None;
            }
            _ => {}
        }
    }
    if let Some(s) = run {
        out.push(arc_piece(a, b, s, angle));
    }
    out
}

fn arc_piece(a: &[f64], b: &[f64], t0: f64, t1: f64) -> Piece {
    let a2 = add(&scale(a, t0.cos()), &scale(b, t0.sin()));
    let b2 = add(&scale(a, -t0.sin()), &scale(b, t0.cos()));
    Piece::Arc { a: a2, b: b2, angle: t1 - t0 }
}

/// ν(P,F) = N(P,F) ∩ S^{n-1} split into pieces.
///
/// The lineality space is split into its coordinate orthants, which turns
/// the cone into pointed cones with disjoint interiors.
pub fn cone_region(cone: &NormalCone) -> Result<SphericalRegion> {
    let n = cone.generators.first().or(cone.lineality.first()).map(|v| v.len()).unwrap_or(0);
    let l = cone.lineality.len();
    let span = orthonormalize(&cone.generators.iter().chain(&cone.lineality).cloned().collect::<Vec<_>>(), 1e-12);
    let dim = span.len();
    if dim == 0 {
        return Ok(SphericalRegion::empty(n, 0));
    }
    if cone.generators.is_empty() && l == 2 {
        let (a, b) = (cone.lineality[0].clone(), cone.lineality[1].clone());
        return Ok(SphericalRegion { n, dim: 1, pieces: vec![Piece::Arc { a, b, angle: 2.0 * PI }] });
    }
    let mut pieces = Vec::new();
    for signs in 0..(1usize << l) {
        let mut gens: Vec<Vec<f64>> = cone.generators.iter().map(|g| normalize(g)).collect();
        for (i, v) in cone.lineality.iter().enumerate() {
            gens.push(if signs >> i & 1 == 1 { scale(v, -1.0) } else { v.clone() });
        }
        pieces.extend(pointed_pieces(&gens, dim)?);
    }
    Ok(SphericalRegion { n, dim: dim - 1, pieces })
}

/// A direction with positive inner product with every generator of a pointed cone.
fn interior_axis(gens: &[Vec<f64>]) -> Result<Vec<f64>> {
    let mut c = gens.iter().fold(vec![0.0; gens[0].len()], |acc, g| add(&acc, g));
    for _ in 0..100_000 {
        let cn = normalize(&c);
        let (i, m) = gens.iter().enumerate().map(|(i, g)| (i, dot(g, &cn))).fold((0, f64::INFINITY), |a, b| if b.1 < a.1 { b } else { a });
        if m > 1e-9 {
            return Ok(cn);
        }
        c = add(&cn, &gens[i]);
    }
    Err(Error::Numeric("normal cone is not pointed".into()))
}

fn pointed_pieces(gens: &[Vec<f64>], dim: usize) -> Result<Vec<Piece>> {
    if dim == 1 {
        return Ok(vec![Piece::Point(gens[0].clone())]);
    }
    let c = match interior_axis(gens) {
        Ok(c) => c,
        Err(_) if dim <= 3 => return wide_pieces(gens, dim),
        Err(e) => return Err(e),
    };
    let basis = orthonormalize(gens, 1e-12);
    // orthonormal frame of c^⟂ inside the span
    let tangent = orthonormalize(
        &basis.iter().map(|b| sub(b, &scale(&c, dot(b, &c)))).collect::<Vec<_>>(),
        1e-10,
    );
    let flat: Vec<Vec<f64>> = gens.iter().map(|g| scale(g, 1.0 / dot(g, &c))).collect();
    let coords: Vec<Vec<f64>> = flat.iter().map(|y| tangent.iter().map(|t| dot(y, t)).collect()).collect();
    match dim {
        2 => {
            let (lo, hi) = coords.iter().enumerate().fold((0, 0), |(lo, hi), (i, x)| {
                (if x[0] < coords[lo][0] { i } else { lo }, if x[0] > coords[hi][0] { i } else { hi })
            });
            let a = gens[lo].clone();
            let bdir = normalize(&sub(&gens[hi], &scale(&a, dot(&a, &gens[hi]))));
            let angle = dot(&a, &gens[hi]).clamp(-1.0, 1.0).acos();
            Ok(vec![Piece::Arc { a, b: bdir, angle }])
        }
        3 => {
            let cyc = crate::geometry::hull::hull2d(&coords);
            let mut out = Vec::new();
            for i in 0..cyc.len() {
                let (p, q) = (&flat[cyc[i]], &flat[cyc[(i + 1) % cyc.len()]]);
                out.push(Piece::Triangle([c.clone(), p.clone(), q.clone()]));
            }
            Ok(out)
        }
        4 => {
            let p = hull(&coords)?;
            let mut out = Vec::new();
            let lift = |x: &[f64]| x.iter().zip(&tangent).fold(c.clone(), |acc, (xi, t)| axpy(&acc, *xi, t));
            for f in 0..p.count(2) {
                for s in p.face_simplices(2, f) {
                    let v = p.vertices();
                    out.push(Piece::Tetrahedron([c.clone(), lift(&v[s[0]]), lift(&v[s[1]]), lift(&v[s[2]])]));
                }
            }
            Ok(out)
        }
        _ => Err(Error::Unsupported(format!("normal cone of dimension {dim}"))),
    }
}

/// Pieces of a pointed cone of dimension 2 or 3 that is too wide for a
/// common projection axis: the arc between the two extreme generators, or
/// the fan of triangles around the generator sum in angular order.
fn wide_pieces(gens: &[Vec<f64>], dim: usize) -> Result<Vec<Piece>> {
    let unit: Vec<Vec<f64>> = gens.iter().map(|g| normalize(g)).collect();
    if dim == 2 {
        let mut best = (0, 0, -2.0);
        for i in 0..unit.len() {
            for j in i + 1..unit.len() {
                let a = dot(&unit[i], &unit[j]);
                if best.2 < -1.5 || a < best.2 {
                    best = (i, j, a);
                }
            }
        }
        let a = unit[best.0].clone();
        let bdir = normalize(&sub(&unit[best.1], &scale(&a, best.2)));
        return Ok(vec![Piece::Arc { a, b: bdir, angle: best.2.clamp(-1.0, 1.0).acos() }]);
    }
    let c = normalize(&unit.iter().fold(vec![0.0; unit[0].len()], |acc, g| add(&acc, g)));
    let basis = orthonormalize(&unit, 1e-12);
    let tangent = orthonormalize(&basis.iter().map(|b| sub(b, &scale(&c, dot(b, &c)))).collect::<Vec<_>>(), 1e-10);
    if tangent.len() != 2 {
        return Err(Error::Numeric("degenerate normal cone".into()));
    }
    let mut order: Vec<(f64, usize)> = unit.iter().enumerate().map(|(i, g)| (dot(g, &tangent[1]).atan2(dot(g, &tangent[0])), i)).collect();
    order.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok((0..order.len())
        .map(|i| Piece::Triangle([c.clone(), unit[order[i].1].clone(), unit[order[(i + 1) % order.len()].1].clone()]))
        .collect())
}

/// Accumulates `w u^s` on a fixed multi-index list.
struct Monomials {
    idx: Vec<Vec<usize>>,
}

impl Monomials {
    fn new(n: usize, s: usize) -> Self {
        Monomials { idx: multi_indices(n, s) }
    }

    fn add(&self, acc: &mut [f64], u: &[f64], w: f64) {
        for (a, c) in self.idx.iter().zip(acc.iter_mut()) {
            *c += w * a.iter().map(|&i| u[i]).product::<f64>();
        }
    }
}

fn gl(m: usize) -> &'static [(f64, f64)] {
    static RULES: OnceLock<Vec<Vec<(f64, f64)>>> = OnceLock::new();
    let rules = RULES.get_or_init(|| {
        (0..=24)
            .map(|k| {
                if k == 0 {
                    return Vec::new();
                }
                // nodes and weights on [0, 1]
                GaussLegendre::new(k.try_into().unwrap())
                    .as_node_weight_pairs()
                    .iter()
                    .map(|&(x, w)| (0.5 * (x + 1.0), 0.5 * w))
                    .collect()
            })
            .collect()
    });
    &rules[m]
}

const TRI_ORDER: usize = 7;
const ARC_ORDER: usize = 12;

/// `∫_ω f(u) u^s dH^d(u)` over a spherical region.
pub fn integrate_monomial(region: &SphericalRegion, s: usize, f: &SphereWeight, spec: &QuadratureSpec) -> Result<Integral> {
    spec.validate()?;
    let n = region.n;
    let mono = Monomials::new(n, s);
    let mut total = Integral::zeros(n, s);
    for (k, piece) in region.pieces.iter().enumerate() {
        let part = match piece {
            Piece::Point(u) => {
                let mut acc = vec![0.0; mono.idx.len()];
                mono.add(&mut acc, u, f.eval(u));
                Integral { tensor: SymTensor::from_coeffs(n, s, acc)?, error: 0.0, unconverged: false }
            }
            Piece::Arc { a, b, angle } => integrate_arc(&mono, n, s, a, b, *angle, f, spec)?,
            Piece::Triangle(v) => integrate_triangle(&mono, n, s, v, f, spec)?,
            Piece::Tetrahedron(v) => integrate_tetrahedron(&mono, n, s, v, f, spec, k as u64)?,
        };
        total.accumulate(&part);
    }
    Ok(total)
}

/// `∫_0^angle cos^p sin^q` by the standard reduction formulas.
pub fn trig_moment(p: usize, q: usize, angle: f64) -> f64 {
    let (c, s) = (angle.cos(), angle.sin());
    if p >= 2 {
        let m = (p + q) as f64;
        return c.powi(p as i32 - 1) * s.powi(q as i32 + 1) / m + (p as f64 - 1.0) / m * trig_moment(p - 2, q, angle);
    }
    if p == 1 {
        return s.powi(q as i32 + 1) / (q as f64 + 1.0);
    }
    match q {
        0 => angle,
        1 => 1.0 - c,
        _ => -s.powi(q as i32 - 1) * c / q as f64 + (q as f64 - 1.0) / q as f64 * trig_moment(0, q - 2, angle),
    }
}

#[allow(clippy::too_many_arguments)]
fn integrate_arc(mono: &Monomials, n: usize, s: usize, a: &[f64], b: &[f64], angle: f64, f: &SphereWeight, spec: &QuadratureSpec) -> Result<Integral> {
    if f.is_one() {
        // u^s = Σ_i C(s,i) cos^{s-i} sin^i a^{s-i} ⊙ b^i
        let mut t = SymTensor::zeros(n, s);
        for i in 0..=s {
            let c = crate::symtensor::binomial(s, i) * trig_moment(s - i, i, angle);
            if c == 0.0 {
                continue;
            }
            let term = crate::symtensor::vector_power(a, s - i).sym_product(&crate::symtensor::vector_power(b, i))?;
            t.axpy(c, &term)?;
        }
        return Ok(Integral { tensor: t, error: 0.0, unconverged: false });
    }
    let eval = |t0: f64, t1: f64| {
        let mut acc = vec![0.0; mono.idx.len()];
        for &(x, w) in gl(ARC_ORDER) {
            let t = t0 + (t1 - t0) * x;
            let u = add(&scale(a, t.cos()), &scale(b, t.sin()));
            mono.add(&mut acc, &u, w * (t1 - t0) * f.eval(&u));
        }
        acc
    };
    let tol = spec.rel_tol * f.sup().max(1e-300) * angle.max(1e-300);
    let mut acc = vec![0.0; mono.idx.len()];
    let mut err = 0.0;
    let mut unconverged = false;
    let mut stack = vec![(0.0, angle, eval(0.0, angle), 0usize)];
    while let Some((t0, t1, coarse, depth)) = stack.pop() {
        let mid = 0.5 * (t0 + t1);
        let (l, r) = (eval(t0, mid), eval(mid, t1));
        let fine: Vec<f64> = l.iter().zip(&r).map(|(x, y)| x + y).collect();
        let diff = fine.iter().zip(&coarse).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        let local_tol = tol * (t1 - t0) / angle.max(1e-300);
        if diff <= local_tol || depth >= spec.max_depth + 8 {
            if diff > local_tol {
                unconverged = true;
            }
            for (c, v) in acc.iter_mut().zip(&fine) {
                *c += v;
            }
            err += diff;
        } else {
            stack.push((t0, mid, l, depth + 1));
            stack.push((mid, t1, r, depth + 1));
        }
    }
    Ok(Integral { tensor: SymTensor::from_coeffs(n, s, acc)?, error: err, unconverged })
}

/// Largest edge angle of a spherical triangle handed to the flat rule. Near a
/// hemisphere the flat triangle passes close to the origin and `1/|p|^3`
/// defeats the subdivision estimate, so wider triangles are split at
/// geodesic edge midpoints first (the four children tile the parent).
const WIDE_EDGE: f64 = 1.0;

fn integrate_triangle(mono: &Monomials, n: usize, s: usize, v: &[Vec<f64>; 3], f: &SphereWeight, spec: &QuadratureSpec) -> Result<Integral> {
    if degenerate_triangle(v) {
        return Ok(Integral::zeros(n, s));
    }
    let u: Vec<Vec<f64>> = v.iter().map(|x| scale(x, 1.0 / norm(x))).collect();
    let widest = (0..3).map(|i| dot(&u[i], &u[(i + 1) % 3]).clamp(-1.0, 1.0).acos()).fold(0.0, f64::max);
    if widest <= WIDE_EDGE {
        return integrate_flat_triangle(mono, n, s, v, f, spec);
    }
    let mid = |a: &[f64], b: &[f64]| {
        let c = add(a, b);
        scale(&c, 1.0 / norm(&c))
    };
    let (ab, bc, ca) = (mid(&u[0], &u[1]), mid(&u[1], &u[2]), mid(&u[2], &u[0]));
    let kids = [
        [u[0].clone(), ab.clone(), ca.clone()],
        [ab.clone(), u[1].clone(), bc.clone()],
        [ca.clone(), bc.clone(), u[2].clone()],
        [ab, bc, ca],
    ];
    let mut total = Integral::zeros(n, s);
    for k in &kids {
        let part = integrate_triangle(mono, n, s, k, f, spec)?;
        total.tensor = total.tensor.add(&part.tensor)?;
        total.error += part.error;
        total.unconverged |= part.unconverged;
    }
    Ok(total)
}

/// Triangle quadrature on the radial projection of a flat triangle:
/// `dσ = |det(A,B,C)| / |p|^3 dλ` for `p = λ_1 A + λ_2 B + λ_3 C`.
fn integrate_flat_triangle(mono: &Monomials, n: usize, s: usize, v: &[Vec<f64>; 3], f: &SphereWeight, spec: &QuadratureSpec) -> Result<Integral> {
    let m = mono.idx.len();
    // Collapsed Gauss rule on the barycentric simplex with vertices v0, v1, v2.
    let eval = |p0: &[f64], p1: &[f64], p2: &[f64]| -> (Vec<f64>, f64) {
        let mut acc = vec![0.0; m];
        let mut area = 0.0;
        let scale_det = gram_det3(p0, p1, p2);
        for &(x, wx) in gl(TRI_ORDER) {
            for &(y, wy) in gl(TRI_ORDER) {
                // (x, y(1-x)) in the unit triangle with Jacobian (1-x)
                let l1 = x;
                let l2 = y * (1.0 - x);
                let l0 = 1.0 - l1 - l2;
                let mut p = scale(p0, l0);
                p = axpy(&p, l1, p1);
                p = axpy(&p, l2, p2);
                let r = norm(&p);
                let w = wx * wy * (1.0 - x) * scale_det / (r * r * r);
                let u = scale(&p, 1.0 / r);
                area += w;
                mono.add(&mut acc, &u, w * f.eval(&u));
            }
        }
        (acc, area)
    };
    let (root, root_area) = eval(&v[0], &v[1], &v[2]);
    let tol = spec.rel_tol * f.sup().max(1e-300) * root_area.max(1e-300);
    let mut acc = vec![0.0; m];
    let mut err = 0.0;
    let mut unconverged = false;
    let mut stack = vec![(v[0].clone(), v[1].clone(), v[2].clone(), root, root_area, 0usize)];
    while let Some((a, b, c, coarse, area, depth)) = stack.pop() {
        let ab = scale(&add(&a, &b), 0.5);
        let bc = scale(&add(&b, &c), 0.5);
        let ca = scale(&add(&c, &a), 0.5);
        let kids = [
            (a.clone(), ab.clone(), ca.clone()),
            (ab.clone(), b.clone(), bc.clone()),
            (ca.clone(), bc.clone(), c.clone()),
            (ab.clone(), bc.clone(), ca.clone()),
        ];
        let evals: Vec<(Vec<f64>, f64)> = kids.iter().map(|(p, q, r)| eval(p, q, r)).collect();
        let mut fine = vec![0.0; m];
        for (e, _) in &evals {
            for (x, y) in fine.iter_mut().zip(e) {
                *x += y;
            }
        }
        let diff = fine.iter().zip(&coarse).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        let local_tol = (tol * area / root_area.max(1e-300)).max(1e-15 * tol / spec.rel_tol);
        if (diff <= local_tol && depth >= 1) || depth >= spec.max_depth {
            if diff > local_tol {
                unconverged = true;
            }
            for (x, y) in acc.iter_mut().zip(&fine) {
                *x += y;
            }
            err += diff;
        } else {
            for ((p, q, r), (e, ar)) in kids.into_iter().zip(evals) {
                stack.push((p, q, r, e, ar, depth + 1));
            }
        }
    }
    Ok(Integral { tensor: SymTensor::from_coeffs(n, s, acc)?, error: err, unconverged })
}

/// Slivers below this relative size carry no measure worth resolving, and
/// their rounding noise would defeat the subdivision error estimate.
fn degenerate_triangle(v: &[Vec<f64>; 3]) -> bool {
    gram_det3(&v[0], &v[1], &v[2]) <= 1e-13 * norm(&v[0]) * norm(&v[1]) * norm(&v[2])
}

/// `|det(a, b, c)|` measured inside the span of the three vectors.
fn gram_det3(a: &[f64], b: &[f64], c: &[f64]) -> f64 {
    gram_volume(&[a.to_vec(), b.to_vec(), c.to_vec()])
}

/// Quasi-Monte Carlo over the radial projection of a flat tetrahedron:
/// `dσ = |det(A,B,C,D)| / |p|^4 dλ`, Halton points with random shifts.
#[allow(clippy::too_many_arguments)]
fn integrate_tetrahedron(mono: &Monomials, n: usize, s: usize, v: &[Vec<f64>; 4], f: &SphereWeight, spec: &QuadratureSpec, stream: u64) -> Result<Integral> {
    let m = mono.idx.len();
    let det = gram_volume(&v.to_vec());
    if det <= 0.0 {
        return Ok(Integral::zeros(n, s));
    }
    const SHIFTS: usize = 8;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(stream);
    let mut estimates = Vec::with_capacity(SHIFTS);
    for _ in 0..SHIFTS {
        let shift: [f64; 3] = [rng.gen(), rng.gen(), rng.gen()];
        let mut acc = vec![0.0; m];
        for i in 1..=spec.samples {
            let mut x = [halton(i, 2), halton(i, 3), halton(i, 5)];
            for (xi, sh) in x.iter_mut().zip(&shift) {
                *xi = (*xi + sh).fract();
            }
            x.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let lam = [x[0], x[1] - x[0], x[2] - x[1], 1.0 - x[2]];
            let mut p = vec![0.0; n];
            for (l, vi) in lam.iter().zip(v.iter()) {
                p = axpy(&p, *l, vi);
            }
            let r = norm(&p);
            let u = scale(&p, 1.0 / r);
            let w = det / (6.0 * r.powi(4)) / spec.samples as f64;
            mono.add(&mut acc, &u, w * f.eval(&u));
        }
        estimates.push(acc);
    }
    let mut mean = vec![0.0; m];
    for e in &estimates {
        for (a, b) in mean.iter_mut().zip(e) {
            *a += b / SHIFTS as f64;
        }
    }
    let mut se = 0.0f64;
    for c in 0..m {
        let var = estimates.iter().map(|e| (e[c] - mean[c]).powi(2)).sum::<f64>() / ((SHIFTS - 1) * SHIFTS) as f64;
        se = se.max(var.sqrt());
    }
    Ok(Integral { tensor: SymTensor::from_coeffs(n, s, mean)?, error: se, unconverged: false })
}

fn halton(mut i: usize, base: usize) -> f64 {
    let mut f = 1.0;
    let mut r = 0.0;
    while i > 0 {
        f /= base as f64;
        r += f * (i % base) as f64;
        i /= base;
    }
    r
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::unit;
    use crate::symtensor::{metric_tensor, Rotation};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn spec() -> QuadratureSpec {
        QuadratureSpec::default()
    }

    fn sphere_area(n: usize) -> f64 {
        2.0 * PI.powf(n as f64 / 2.0) / libm_gamma(n as f64 / 2.0)
    }

    fn libm_gamma(x: f64) -> f64 {
        // x is a positive half-integer here
        if (x - x.round()).abs() < 1e-12 {
            (1..x.round() as usize).map(|k| k as f64).product()
        } else {
            let mut g = PI.sqrt();
            let mut y = 0.5;
            while y < x - 1e-12 {
                g *= y;
                y += 1.0;
            }
            g
        }
    }

    /// Uniform sampling oracle: `ω_n E[f(u) u^s 1_region(u)]`.
    fn mc_full_sphere(n: usize, s: usize, samples: usize, seed: u64) -> SymTensor {
        use rand_distr::{Distribution, StandardNormal};
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mono = Monomials::new(n, s);
        let mut acc = vec![0.0; mono.idx.len()];
        for _ in 0..samples {
            let g: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
            let u = normalize(&g);
            mono.add(&mut acc, &u, sphere_area(n) / samples as f64);
        }
        SymTensor::from_coeffs(n, s, acc).unwrap()
    }

    #[test]
    fn full_sphere_measure() {
        for n in 2..=3 {
            let r = SphericalRegion::full_sphere(n).unwrap();
            assert_abs_diff_eq!(r.measure(&spec()).unwrap(), sphere_area(n), epsilon = 1e-10);
        }
        let r = SphericalRegion::full_sphere(4).unwrap();
        let v = integrate_monomial(&r, 0, &SphereWeight::One, &spec()).unwrap();
        assert_abs_diff_eq!(v.tensor.value(), 2.0 * PI * PI, epsilon = 1e-3);
    }

    #[test]
    fn full_sphere_odd_moment_vanishes() {
        let r = SphericalRegion::full_sphere(3).unwrap();
        let v = integrate_monomial(&r, 1, &SphereWeight::One, &spec()).unwrap();
        assert!(v.tensor.max_abs() < 1e-12);
    }

    #[test]
    fn full_sphere_second_moment() {
        let r = SphericalRegion::full_sphere(3).unwrap();
        let v = integrate_monomial(&r, 2, &SphereWeight::One, &spec()).unwrap();
        let expect = metric_tensor(3).scale(4.0 * PI / 3.0);
        assert!(v.tensor.max_abs_diff(&expect).unwrap() < 1e-11);
        let trace: f64 = (0..3).map(|i| v.tensor.get(&[i, i])).sum();
        assert_abs_diff_eq!(trace, 4.0 * PI, epsilon = 1e-11);
        let mc = mc_full_sphere(3, 2, 200_000, 7);
        assert!(v.tensor.max_abs_diff(&mc).unwrap() < 0.05);
    }

    #[test]
    fn quarter_arc_first_moment() {
        let r = SphericalRegion::arc(&unit(3, 1), &unit(3, 2)).unwrap();
        let v = integrate_monomial(&r, 1, &SphereWeight::One, &spec()).unwrap();
        assert_abs_diff_eq!(v.tensor.coeffs()[0], 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(v.tensor.coeffs()[1], 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(v.tensor.coeffs()[2], 1.0, epsilon = 1e-15);
    }

    #[test]
    fn weighted_arc_matches_exact_path() {
        let r = SphericalRegion::arc(&[1.0, 0.2, 0.0], &[0.0, 1.0, 0.7]).unwrap();
        let exact = integrate_monomial(&r, 3, &SphereWeight::One, &spec()).unwrap();
        let num = integrate_monomial(&r, 3, &SphereWeight::func(|_| 1.0, 1.0), &spec()).unwrap();
        assert!(exact.tensor.max_abs_diff(&num.tensor).unwrap() < 1e-13);
    }

    #[test]
    fn trig_moments() {
        assert_abs_diff_eq!(trig_moment(2, 0, 2.0 * PI), PI, epsilon = 1e-14);
        assert_abs_diff_eq!(trig_moment(2, 2, 2.0 * PI), PI / 4.0, epsilon = 1e-14);
        assert_abs_diff_eq!(trig_moment(0, 3, PI), 4.0 / 3.0, epsilon = 1e-14);
        assert_abs_diff_eq!(trig_moment(3, 1, PI / 2.0), 0.25, epsilon = 1e-14);
    }

    #[test]
    fn segment_normal_cone_is_great_circle() {
        let cone = NormalCone { generators: vec![], lineality: vec![unit(3, 1), unit(3, 2)] };
        let r = cone_region(&cone).unwrap();
        assert_eq!(r.pieces.len(), 1);
        let v = integrate_monomial(&r, 2, &SphereWeight::One, &spec()).unwrap();
        assert_abs_diff_eq!(v.tensor.get(&[1, 1]), PI, epsilon = 1e-14);
        assert_abs_diff_eq!(v.tensor.get(&[0, 0]), 0.0, epsilon = 1e-14);
    }

    #[test]
    fn octant_area() {
        let cone = NormalCone { generators: vec![unit(3, 0), unit(3, 1), unit(3, 2)], lineality: vec![] };
        let r = cone_region(&cone).unwrap();
        assert_abs_diff_eq!(r.measure(&spec()).unwrap(), PI / 2.0, epsilon = 1e-12);
    }

    #[test]
    fn cap_membership() {
        let cap = Cap::new(vec![0.0, 0.0, -1.0], 0.1).unwrap();
        assert!(cap.contains(&[0.0, 0.0, -1.0]));
        assert!(!cap.contains(&[1.0, 0.0, 0.0]));
        let cone = NormalCone { generators: vec![unit(3, 0), scale(&unit(3, 2), -1.0)], lineality: vec![] };
        assert!(cap.meets_cone(&cone));
        let cone = NormalCone { generators: vec![unit(3, 0), unit(3, 1)], lineality: vec![] };
        assert!(!cap.meets_cone(&cone));
    }

    #[test]
    fn clip_splits_measure() {
        let r = SphericalRegion::full_sphere(3).unwrap();
        let w = vec![0.3, -0.5, 0.8];
        let a = r.clip(&OpenCone { normals: vec![w.clone()] }).unwrap();
        let b = r.clip(&OpenCone { normals: vec![scale(&w, -1.0)] }).unwrap();
        assert_abs_diff_eq!(a.measure(&spec()).unwrap(), 2.0 * PI, epsilon = 1e-10);
        let ia = integrate_monomial(&a, 2, &SphereWeight::One, &spec()).unwrap();
        let ib = integrate_monomial(&b, 2, &SphereWeight::One, &spec()).unwrap();
        let sum = ia.tensor.add(&ib.tensor).unwrap();
        assert!(sum.max_abs_diff(&metric_tensor(3).scale(4.0 * PI / 3.0)).unwrap() < 1e-10);
        let circle = cone_region(&NormalCone { generators: vec![], lineality: vec![unit(3, 0), unit(3, 1)] }).unwrap();
        let half = circle.clip(&OpenCone { normals: vec![vec![0.0, -1.0, 0.0]] }).unwrap();
        assert_abs_diff_eq!(half.measure(&spec()).unwrap(), PI, epsilon = 1e-13);
    }

    #[test]
    fn tetrahedra_cover_four_sphere_orthant() {
        let cone = NormalCone { generators: (0..4).map(|i| unit(4, i)).collect(), lineality: vec![] };
        let r = cone_region(&cone).unwrap();
        let spec = QuadratureSpec { samples: 1 << 14, ..QuadratureSpec::default() };
        let v = integrate_monomial(&r, 0, &SphereWeight::One, &spec).unwrap();
        assert_abs_diff_eq!(v.tensor.value(), 2.0 * PI * PI / 16.0, epsilon = 5.0 * v.error.max(1e-4));
    }

    #[test]
    fn bump_is_supported_in_cap() {
        let cap = Cap::new(vec![0.0, 0.0, -1.0], 0.2).unwrap();
        let f = SphereWeight::Bump(cap);
        assert_abs_diff_eq!(f.eval(&[0.0, 0.0, -1.0]), 0.04, epsilon = 1e-15);
        assert_eq!(f.eval(&[1.0, 0.0, 0.0]), 0.0);
    }

    fn arb_unit3() -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(-1.0f64..1.0, 3).prop_filter("nonzero", |v| norm(v) > 0.2).prop_map(|v| normalize(&v))
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn rotation_equivariance(g in prop::collection::vec(arb_unit3(), 3), seed in 0u64..1000, s in 0usize..4) {
            let rot = Rotation::random(3, &mut ChaCha8Rng::seed_from_u64(seed));
            let basis = orthonormalize(&g, 1e-3);
            prop_assume!(basis.len() == 3);
            let gens: Vec<Vec<f64>> = g.iter().map(|v| normalize(&add(v, &scale(&g[0], 2.0)))).collect();
            let cone = NormalCone { generators: gens.clone(), lineality: vec![] };
            let rcone = NormalCone { generators: gens.iter().map(|v| rot.apply(v)).collect(), lineality: vec![] };
            let a = integrate_monomial(&cone_region(&cone).unwrap(), s, &SphereWeight::One, &spec()).unwrap();
            let b = integrate_monomial(&cone_region(&rcone).unwrap(), s, &SphereWeight::One, &spec()).unwrap();
            prop_assert!(a.tensor.rotate(&rot).unwrap().max_abs_diff(&b.tensor).unwrap() < 1e-9);
        }

        #[test]
        fn arc_additivity(a in arb_unit3(), b in arb_unit3(), split in 0.05f64..0.95, s in 0usize..5) {
            prop_assume!(dot(&a, &b).abs() < 0.95);
            let whole = SphericalRegion::arc(&a, &b).unwrap();
            let Piece::Arc { a: a0, b: b0, angle } = whole.pieces[0].clone() else { unreachable!() };
            let p1 = SphericalRegion { n: 3, dim: 1, pieces: vec![arc_piece(&a0, &b0, 0.0, split * angle)] };
            let p2 = SphericalRegion { n: 3, dim: 1, pieces: vec![arc_piece(&a0, &b0, split * angle, angle)] };
            let w = integrate_monomial(&whole, s, &SphereWeight::One, &spec()).unwrap().tensor;
            let x = integrate_monomial(&p1, s, &SphereWeight::One, &spec()).unwrap().tensor;
            let y = integrate_monomial(&p2, s, &SphereWeight::One, &spec()).unwrap().tensor;
            assert_abs_diff_eq!(w.max_abs_diff(&x.add(&y).unwrap()).unwrap(), 0.0, epsilon = 1e-13);
        }

        #[test]
        fn triangle_additivity(w in arb_unit3(), s in 0usize..4) {
            let cone = NormalCone { generators: vec![unit(3, 0), unit(3, 1), unit(3, 2)], lineality: vec![] };
            let r = cone_region(&cone).unwrap();
            let plus = r.clip(&OpenCone { normals: vec![w.clone()] }).unwrap();
            let minus = r.clip(&OpenCone { normals: vec![scale(&w, -1.0)] }).unwrap();
            let whole = integrate_monomial(&r, s, &SphereWeight::One, &spec()).unwrap().tensor;
            let a = integrate_monomial(&plus, s, &SphereWeight::One, &spec()).unwrap().tensor;
            let b = integrate_monomial(&minus, s, &SphereWeight::One, &spec()).unwrap().tensor;
            assert_abs_diff_eq!(whole.max_abs_diff(&a.add(&b).unwrap()).unwrap(), 0.0, epsilon = 1e-10);
        }
    }
}
