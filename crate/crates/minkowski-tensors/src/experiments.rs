//! Lifted-paraboloid polytopes approximating a paraboloid cap, and the
//! rotation-defect study that separates the j = 1 generalized tensors
//! (weakly continuous) from j >= 2 (not).

use crate::error::{Error, Result};
use crate::geometry::lifted::{class_histogram, lift_complex, minkowski_average_windowed, truncate_and_filter, ComplexKind};
use crate::geometry::Polytope;
use crate::linalg::{dot, norm};
use crate::smoothbody::{phi_j1_smooth, SmoothSurface};
use crate::sphereint::{Cap, QuadratureSpec, SphereWeight};
use crate::symtensor::{factorial, metric_tensor, projection_tensor, Rotation, SymTensor};
use crate::valuations::{constant_upper_c, face_terms, TestFunction};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::f64::consts::PI;
use std::hash::{Hash, Hasher};
use std::time::Instant;

/// One term `c · Q^m φ_k^{0,s,j}` of a combination Γ.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Coefficient {
    #[serde(default)]
    pub m: usize,
    pub j: usize,
    #[serde(default)]
    pub s: usize,
    pub c: f64,
}

/// `Γ = Σ c_{mjs} Q^m φ_k^{0,s,j}` with a common rank p = 2m + 2j + s.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Combination {
    pub n: usize,
    pub k: usize,
    pub terms: Vec<Coefficient>,
}

impl Combination {
    pub fn validate(&self) -> Result<()> {
        if self.terms.is_empty() {
            return Err(Error::Config("empty coefficient list".into()));
        }
        if self.k == 0 || self.k + 2 > self.n {
            return Err(Error::Config(format!("k = {} outside 1..=n-2 for n = {}", self.k, self.n)));
        }
        let p = self.rank();
        if let Some(t) = self.terms.iter().find(|t| 2 * t.m + 2 * t.j + t.s != p) {
            return Err(Error::Config(format!("term {t:?} has rank {} but the combination has rank {p}", 2 * t.m + 2 * t.j + t.s)));
        }
        Ok(())
    }

    pub fn rank(&self) -> usize {
        let t = &self.terms[0];
        2 * t.m + 2 * t.j + t.s
    }

    fn upper(&self) -> impl Iterator<Item = &Coefficient> {
        self.terms.iter().filter(|t| t.j >= 2 && t.c != 0.0)
    }

    /// Smallest s among the nonzero j >= 2 terms.
    pub fn s0(&self) -> Option<usize> {
        self.upper().map(|t| t.s).min()
    }

    pub fn q(&self) -> Option<usize> {
        self.s0().map(|s0| (self.rank() - s0) / 2)
    }

    /// `c_j = ((2q)! s0! / p!) c_{(q-j) j s0} C_{n,k}^{0,s0}` for j = 2..=q.
    pub fn reduced_coefficients(&self) -> Result<Vec<(usize, f64)>> {
        let (Some(s0), Some(q)) = (self.s0(), self.q()) else { return Ok(Vec::new()) };
        let norm_c = factorial(2 * q) * factorial(s0) / factorial(self.rank()) * constant_upper_c(self.n, self.k, 0, s0)?;
        Ok((2..=q)
            .map(|j| {
                let c: f64 = self.terms.iter().filter(|t| t.j == j && t.s == s0 && t.m == q - j).map(|t| t.c).sum();
                (j, norm_c * c)
            })
            .collect())
    }

    /// Largest j with c_j != 0.
    pub fn degree(&self) -> Result<Option<usize>> {
        Ok(self.reduced_coefficients()?.into_iter().filter(|&(_, c)| c != 0.0).map(|(j, _)| j).max())
    }
}

/// Whether the cap about `-e_n` is ε-close to `-e_n`: every direction has
/// `<u,-e_n> > 1-ε` and `|<u,a>| < ε|a|` for horizontal a.
pub fn eps_close_check(cap: &Cap, eps: f64) -> bool {
    let n = cap.dimension();
    if !(eps > 0.0 && eps < 1.0) || n == 0 || -cap.axis[n - 1] < 1.0 - 1e-12 {
        return false;
    }
    let c = 1.0 - cap.mu;
    c > 1.0 - eps && (1.0 - c * c).max(0.0).sqrt() < eps
}

/// Normals of the part of the paraboloid cap below height h/2.
pub fn omega_h(n: usize, h: f64) -> Result<Cap> {
    let mut axis = vec![0.0; n];
    axis[n - 1] = -1.0;
    Cap::new(axis, 1.0 - 1.0 / (1.0 + 2.0 * h).sqrt())
}

/// `f(u) = max(0, <u,-e_n> - (1-μ))^2`.
pub fn bump_function(cap: &Cap) -> SphereWeight {
    SphereWeight::Bump(cap.clone())
}

/// Per-face data shared by all evaluations on one polytope.
struct FaceData {
    measure: f64,
    projection: SymTensor,
    /// `∫ f u^s` and its error, per s.
    u: BTreeMap<usize, (SymTensor, f64)>,
}

fn collect_faces(p: &Polytope, k: usize, faces: &[usize], svals: &BTreeSet<usize>, f: &SphereWeight, quad: &QuadratureSpec) -> Result<Vec<FaceData>> {
    let n = p.ambient_dim();
    let eta = TestFunction::SphericalWeight(f.clone());
    let mut map: HashMap<usize, FaceData> = HashMap::new();
    for &s in svals {
        for term in face_terms(p, k, 0, s, &eta, Some(faces), quad)? {
            let entry = match map.entry(term.face) {
                std::collections::hash_map::Entry::Occupied(o) => o.into_mut(),
                std::collections::hash_map::Entry::Vacant(v) => {
                    let face = p.face(k, term.face);
                    v.insert(FaceData { measure: term.x_moment.value(), projection: projection_tensor(n, &face.direction_basis)?, u: BTreeMap::new() })
                }
            };
            entry.u.insert(s, (term.u_moment, term.error));
        }
    }
    let mut out: Vec<(usize, FaceData)> = map.into_iter().collect();
    out.sort_by_key(|(i, _)| *i);
    Ok(out.into_iter().map(|(_, d)| d).collect())
}

/// Γ(P, f) and its by-products on a fixed set of k-faces.
#[derive(Clone, Debug)]
pub struct GammaEval {
    pub gamma: SymTensor,
    /// The j >= 2 part of Γ.
    pub gamma_upper: SymTensor,
    /// Δ(P, f) of rank 2q, when Γ has j >= 2 terms.
    pub delta: Option<SymTensor>,
    /// `W_k(P,f) = Σ_F H^k(F) ∫_{ν(P,F)} f`.
    pub w_k: f64,
    pub quad_err: f64,
    pub faces: usize,
}

/// Evaluates the combination on the listed k-faces of `p` against the weight f.
pub fn gamma_eval(p: &Polytope, comb: &Combination, faces: &[usize], f: &SphereWeight, quad: &QuadratureSpec) -> Result<GammaEval> {
    comb.validate()?;
    let n = p.ambient_dim();
    if n != comb.n {
        return Err(Error::DimensionMismatch { expected: comb.n, got: n });
    }
    let k = comb.k;
    let rank = comb.rank();
    let mut svals: BTreeSet<usize> = comb.terms.iter().map(|t| t.s).collect();
    svals.insert(0);
    let data = collect_faces(p, k, faces, &svals, f, quad)?;

    let w_k: f64 = data.iter().map(|d| d.measure * d.u[&0].0.value()).sum();
    let mut quad_err: f64 = data.iter().map(|d| d.measure * d.u[&0].1).sum();

    // Σ_F H^k(F) Q_{L(F)}^j ⊙ ∫ f u^s, per (j, s)
    let mut sums: BTreeMap<(usize, usize), SymTensor> = BTreeMap::new();
    for t in &comb.terms {
        if sums.contains_key(&(t.j, t.s)) {
            continue;
        }
        let mut acc = SymTensor::zeros(n, 2 * t.j + t.s);
        for d in &data {
            let (u, _) = &d.u[&t.s];
            acc.axpy(d.measure, &d.projection.power(t.j).sym_product(u)?)?;
        }
        sums.insert((t.j, t.s), acc);
    }
    let q = metric_tensor(n);
    let mut gamma = SymTensor::zeros(n, rank);
    let mut gamma_upper = SymTensor::zeros(n, rank);
    for t in &comb.terms {
        let c = t.c * constant_upper_c(n, k, 0, t.s)?;
        let term = q.power(t.m).sym_product(&sums[&(t.j, t.s)])?;
        gamma.axpy(c, &term)?;
        if t.j >= 2 {
            gamma_upper.axpy(c, &term)?;
        }
        quad_err += c.abs() * data.iter().map(|d| d.measure * d.u[&t.s].1).sum::<f64>();
    }

    let delta = match comb.q() {
        None => None,
        Some(qq) => {
            let mut acc = SymTensor::zeros(n, 2 * qq);
            for (j, cj) in comb.reduced_coefficients()? {
                if cj == 0.0 {
                    continue;
                }
                let mut inner = SymTensor::zeros(n, 2 * j);
                for d in &data {
                    inner.axpy(d.measure * d.u[&0].0.value(), &d.projection.power(j))?;
                }
                acc.axpy(cj, &q.power(qq - j).sym_product(&inner)?)?;
            }
            Some(acc)
        }
    };
    Ok(GammaEval { gamma, gamma_upper, delta, w_k, quad_err, faces: data.len() })
}

/// `Δ(P,f)` alone.
pub fn delta_eval(p: &Polytope, comb: &Combination, faces: &[usize], f: &SphereWeight, quad: &QuadratureSpec) -> Result<SymTensor> {
    gamma_eval(p, comb, faces, f, quad)?.delta.ok_or_else(|| Error::Config("combination has no j >= 2 terms".into()))
}

/// The tuple `(a,…,a, -e_n,…,-e_n)` with 2q copies of a.
pub fn e_tuple(a: &[f64], q2: usize, s0: usize) -> Vec<Vec<f64>> {
    let n = a.len();
    let mut down = vec![0.0; n];
    down[n - 1] = -1.0;
    let mut out = vec![a.to_vec(); q2];
    out.extend(std::iter::repeat(down).take(s0));
    out
}

fn eval_tuple(t: &SymTensor, tuple: &[Vec<f64>]) -> Result<f64> {
    let refs: Vec<&[f64]> = tuple.iter().map(|v| v.as_slice()).collect();
    t.evaluate(&refs)
}

// ---------------------------------------------------------------------------
// Exact polynomials for the non-invariance certificates.

/// Multivariate polynomial with rational coefficients, keyed by exponent vector.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Poly {
    pub terms: BTreeMap<Vec<u32>, BigRational>,
}

impl Poly {
    pub fn constant(vars: usize, c: BigRational) -> Poly {
        let mut terms = BTreeMap::new();
        if !c.is_zero() {
            terms.insert(vec![0; vars], c);
        }
        Poly { terms }
    }

    pub fn var(vars: usize, i: usize) -> Poly {
        let mut e = vec![0; vars];
        e[i] = 1;
        Poly { terms: BTreeMap::from([(e, BigRational::one())]) }
    }

    pub fn add(&self, o: &Poly) -> Poly {
        let mut out = self.clone();
        for (e, c) in &o.terms {
            let v = out.terms.entry(e.clone()).or_insert_with(BigRational::zero);
            *v += c;
            if v.is_zero() {
                out.terms.remove(e);
            }
        }
        out
    }

    pub fn scale(&self, c: &BigRational) -> Poly {
        if c.is_zero() {
            return Poly::default();
        }
        Poly { terms: self.terms.iter().map(|(e, v)| (e.clone(), v * c)).collect() }
    }

    pub fn mul(&self, o: &Poly) -> Poly {
        let mut out = Poly::default();
        for (e1, c1) in &self.terms {
            for (e2, c2) in &o.terms {
                let e: Vec<u32> = e1.iter().zip(e2).map(|(a, b)| a + b).collect();
                let term = Poly { terms: BTreeMap::from([(e, c1 * c2)]) };
                out = out.add(&term);
            }
        }
        out
    }

    pub fn pow(&self, k: u32, vars: usize) -> Poly {
        let mut out = Poly::constant(vars, BigRational::one());
        for _ in 0..k {
            out = out.mul(self);
        }
        out
    }

    pub fn coefficient(&self, e: &[u32]) -> BigRational {
        self.terms.get(e).cloned().unwrap_or_else(BigRational::zero)
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.terms.iter().map(|(e, c)| c.to_f64().unwrap_or(f64::NAN) * e.iter().zip(x).map(|(&p, &v)| v.powi(p as i32)).product::<f64>()).sum()
    }

    pub fn is_constant(&self) -> bool {
        self.terms.keys().all(|e| e.iter().all(|&p| p == 0))
    }
}

fn rat(v: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(v))
}

fn binom_int(n: i64, k: i64) -> BigRational {
    if k < 0 || n < 0 || k > n {
        return BigRational::zero();
    }
    let mut r = BigInt::one();
    for i in 0..k {
        r = r * BigInt::from(n - i) / BigInt::from(i + 1);
    }
    BigRational::from_integer(r)
}

/// Subspace family entering Υ.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum SubspaceFamily {
    /// All k-dimensional coordinate subspaces of R^dim.
    Coordinate { dim: usize, k: usize },
    /// The lines at angles rπ/d in the plane, r = 0..d-1.
    Lines { d: usize },
}

/// `Υ = Σ_j c_j Q^{q-j} Σ_i Q_{L_i}^j` with rational c_j.
#[derive(Clone, Debug, PartialEq)]
pub struct Upsilon {
    pub family: SubspaceFamily,
    pub q: usize,
    pub coefficients: Vec<(usize, BigRational)>,
}

/// `Σ_{r<d} cos^a(rπ/d) sin^b(rπ/d)` for even a, b, exactly.
pub fn trig_power_sum(a: usize, b: usize, d: usize) -> BigRational {
    assert!(a % 2 == 0 && b % 2 == 0, "odd powers do not give rational sums");
    let (ai, bi, di) = (a as i64, b as i64, d as i64);
    let mut acc = BigInt::zero();
    for p in 0..=ai {
        for q in 0..=bi {
            // exponent of e^{iθ} is 2(p + q) - a - b = 2l'
            let l = p + q - (ai + bi) / 2;
            if l.rem_euclid(di) != 0 {
                continue;
            }
            let term = binom_int(ai, p).numer().clone() * binom_int(bi, q).numer().clone();
            if (bi - q) % 2 == 0 {
                acc += term;
            } else {
                acc -= term;
            }
        }
    }
    let sign = if (b / 2) % 2 == 0 { 1 } else { -1 };
    BigRational::new(acc * BigInt::from(d as i64 * sign), BigInt::from(2).pow((a + b) as u32))
}

impl Upsilon {
    pub fn new(family: SubspaceFamily, q: usize, coefficients: Vec<(usize, BigRational)>) -> Result<Upsilon> {
        if let Some((j, _)) = coefficients.iter().find(|(j, _)| *j < 2 || *j > q) {
            return Err(Error::Config(format!("Υ coefficient index j = {j} outside 2..=q = {q}")));
        }
        match family {
            SubspaceFamily::Coordinate { dim, k } if k == 0 || k > dim => return Err(Error::Config(format!("no {k}-dimensional coordinate subspaces in R^{dim}"))),
            SubspaceFamily::Lines { d } if d < 2 => return Err(Error::Config(format!("line family needs d >= 2, got {d}"))),
            _ => {}
        }
        Ok(Upsilon { family, q, coefficients })
    }

    /// From floating coefficients rounded to rationals with the given denominator bound.
    pub fn from_f64(family: SubspaceFamily, q: usize, coefficients: &[(usize, f64)]) -> Result<Upsilon> {
        let cs = coefficients
            .iter()
            .map(|&(j, c)| BigRational::from_float(c).map(|r| (j, r)).ok_or_else(|| Error::Numeric(format!("coefficient {c} is not finite"))))
            .collect::<Result<Vec<_>>>()?;
        Upsilon::new(family, q, cs)
    }

    pub fn degree(&self) -> Option<usize> {
        self.coefficients.iter().filter(|(_, c)| !c.is_zero()).map(|(j, _)| *j).max()
    }

    fn plane_dim(&self) -> usize {
        match self.family {
            SubspaceFamily::Coordinate { dim, .. } => dim,
            SubspaceFamily::Lines { .. } => 2,
        }
    }

    fn subspaces(&self) -> Vec<Vec<Vec<f64>>> {
        match self.family {
            SubspaceFamily::Coordinate { dim, k } => (0usize..1 << dim)
                .filter(|m| m.count_ones() as usize == k)
                .map(|m| {
                    (0..dim)
                        .filter(|i| m >> i & 1 == 1)
                        .map(|i| {
                            let mut e = vec![0.0; dim];
                            e[i] = 1.0;
                            e
                        })
                        .collect()
                })
                .collect(),
            SubspaceFamily::Lines { d } => (0..d).map(|r| vec![vec![(r as f64 * PI / d as f64).cos(), (r as f64 * PI / d as f64).sin()]]).collect(),
        }
    }

    /// The tensor in R^n (n >= plane dimension), with the subspaces in the first coordinates.
    pub fn tensor(&self, n: usize) -> Result<SymTensor> {
        let pd = self.plane_dim();
        if n < pd {
            return Err(Error::DimensionMismatch { expected: pd, got: n });
        }
        let q = metric_tensor(n);
        let projections = self
            .subspaces()
            .into_iter()
            .map(|b| {
                let basis: Vec<Vec<f64>> = b.into_iter().map(|mut v| {
                    v.resize(n, 0.0);
                    v
                }).collect();
                projection_tensor(n, &basis)
            })
            .collect::<Result<Vec<_>>>()?;
        let mut out = SymTensor::zeros(n, 2 * self.q);
        for (j, c) in &self.coefficients {
            let mut inner = SymTensor::zeros(n, 2 * j);
            for pr in &projections {
                inner.axpy(1.0, &pr.power(*j))?;
            }
            out.axpy(c.to_f64().unwrap_or(f64::NAN), &q.power(self.q - j).sym_product(&inner)?)?;
        }
        Ok(out)
    }

    /// `p_Υ(x) = Υ(x, …, x)`.
    pub fn eval(&self, x: &[f64]) -> f64 {
        let nx = dot(x, x);
        let subspaces = self.subspaces();
        self.coefficients
            .iter()
            .map(|(j, c)| {
                let s: f64 = subspaces.iter().map(|b| b.iter().map(|v| dot(v, &x[..v.len()]).powi(2)).sum::<f64>().powi(*j as i32)).sum();
                c.to_f64().unwrap_or(f64::NAN) * nx.powi((self.q - j) as i32) * s
            })
            .sum()
    }

    /// `p_Υ` on the coordinate family as an exact polynomial in x_1, …, x_dim.
    pub fn coordinate_poly(&self) -> Result<Poly> {
        let SubspaceFamily::Coordinate { dim, k } = self.family else {
            return Err(Error::Unsupported("exact polynomial in x for the line family".into()));
        };
        let sq: Vec<Poly> = (0..dim).map(|i| Poly::var(dim, i).pow(2, dim)).collect();
        let norm2 = sq.iter().fold(Poly::default(), |a, b| a.add(b));
        let mut out = Poly::default();
        for (j, c) in &self.coefficients {
            let mut inner = Poly::default();
            for m in (0usize..1 << dim).filter(|m| m.count_ones() as usize == k) {
                let s = (0..dim).filter(|i| m >> i & 1 == 1).fold(Poly::default(), |a, i| a.add(&sq[i]));
                inner = inner.add(&s.pow(*j as u32, dim));
            }
            out = out.add(&norm2.pow((self.q - j) as u32, dim).mul(&inner).scale(c));
        }
        Ok(out)
    }

    /// `p_Υ(x(λ))` with `x(λ) = (λ, sqrt(1-λ^2), 0, …)`, as a polynomial in λ.
    pub fn poly_lambda(&self) -> Result<Poly> {
        let lam = Poly::var(1, 0);
        let one = Poly::constant(1, BigRational::one());
        let lam2 = lam.pow(2, 1);
        let w2 = one.add(&lam2.scale(&rat(-1)));
        match self.family {
            SubspaceFamily::Coordinate { dim, .. } => {
                let mut sub = vec![lam2.clone(), w2];
                sub.resize(dim, Poly::default());
                Ok(self.substitute_squares(&sub))
            }
            SubspaceFamily::Lines { d } => {
                // Σ_r (λ c_r + w s_r)^{2j}: odd powers of w cancel between r and d - r
                let mut out = Poly::default();
                for (j, c) in &self.coefficients {
                    let jj = 2 * j;
                    let mut pj = Poly::default();
                    for b in (0..=jj).step_by(2) {
                        let coef = binom_int(jj as i64, b as i64) * trig_power_sum(jj - b, b, d);
                        let term = lam.pow((jj - b) as u32, 1).mul(&w2.pow((b / 2) as u32, 1)).scale(&coef);
                        pj = pj.add(&term);
                    }
                    out = out.add(&pj.scale(c));
                }
                Ok(out)
            }
        }
    }

    /// `p_Υ(x(λ, μ))` with `x = (λ, μ sqrt(1-λ^2), sqrt(1-μ^2) sqrt(1-λ^2), 0, …)`,
    /// as a polynomial in (λ, μ); coordinate family with dim >= 3 only.
    pub fn poly_lambda_mu(&self) -> Result<Poly> {
        let SubspaceFamily::Coordinate { dim, .. } = self.family else {
            return Err(Error::Unsupported("two-parameter curve for the line family".into()));
        };
        if dim < 3 {
            return Err(Error::Unsupported("two-parameter curve needs three coordinates".into()));
        }
        let one = Poly::constant(2, BigRational::one());
        let l2 = Poly::var(2, 0).pow(2, 2);
        let m2 = Poly::var(2, 1).pow(2, 2);
        let wl = one.add(&l2.scale(&rat(-1)));
        let wm = one.add(&m2.scale(&rat(-1)));
        let mut sub = vec![l2, m2.mul(&wl), wm.mul(&wl)];
        sub.resize(dim, Poly::default());
        Ok(self.substitute_squares(&sub))
    }

    /// Coordinate family with x_i^2 replaced by the given polynomials of a unit vector.
    fn substitute_squares(&self, sq: &[Poly]) -> Poly {
        let SubspaceFamily::Coordinate { dim, k } = self.family else { unreachable!() };
        let vars = sq.iter().flat_map(|p| p.terms.keys().map(|e| e.len())).next().unwrap_or(1);
        let mut out = Poly::default();
        for (j, c) in &self.coefficients {
            let mut inner = Poly::default();
            for m in (0usize..1 << dim).filter(|m| m.count_ones() as usize == k) {
                let s = (0..dim).filter(|i| m >> i & 1 == 1).fold(Poly::default(), |a, i| a.add(&sq[i]));
                inner = inner.add(&s.pow(*j as u32, vars));
            }
            out = out.add(&inner.scale(c));
        }
        out
    }
}

/// Υ for the subspace family of a run: coordinate k-subspaces of R^{n-1}
/// for the cube complex, the d lines for the triangle route.
pub fn upsilon(config: &ExperimentConfig) -> Result<Upsilon> {
    let comb = config.combination();
    let q = comb.q().ok_or_else(|| Error::Config("Υ needs j >= 2 terms".into()))?;
    let family = match config.complex {
        ComplexKind::Cube => SubspaceFamily::Coordinate { dim: config.n - 1, k: config.k },
        ComplexKind::Triangle { d } => SubspaceFamily::Lines { d },
    };
    Upsilon::from_f64(family, q, &comb.reduced_coefficients()?)
}

// ---------------------------------------------------------------------------
// Configuration and the convergence study.

fn default_quadrature() -> QuadratureSpec {
    QuadratureSpec { rel_tol: 1e-9, max_depth: 9, ..Default::default() }
}

fn default_window_margin() -> f64 {
    4.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub name: String,
    pub n: usize,
    pub k: usize,
    pub coefficients: Vec<Coefficient>,
    pub epsilon: f64,
    pub h: f64,
    /// Cap parameter of the bump's support about -e_n.
    pub mu: f64,
    /// Lattice parameters, decreasing.
    pub t: Vec<f64>,
    pub complex: ComplexKind,
    /// Replace P by its Minkowski average over the rotations by multiples of π/d.
    #[serde(default)]
    pub average: bool,
    /// Unit vector a in R^{n-1}; defaults to e_1.
    #[serde(default)]
    pub a: Option<Vec<f64>>,
    /// Angle of the rotation in the e_1 e_2 plane.
    #[serde(default)]
    pub theta: Option<f64>,
    /// Compare against the curvature integral on the smooth cap (j = 1 runs, n = 3).
    #[serde(default)]
    pub smooth_target: bool,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_quadrature")]
    pub quadrature: QuadratureSpec,
    /// Extra window radius around sqrt(h), in cell circumradii.
    #[serde(default = "default_window_margin")]
    pub window_margin: f64,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<ExperimentConfig> {
        let c: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    pub fn combination(&self) -> Combination {
        Combination { n: self.n, k: self.k, terms: self.coefficients.clone() }
    }

    pub fn support_cap(&self) -> Result<Cap> {
        let mut axis = vec![0.0; self.n];
        axis[self.n - 1] = -1.0;
        Cap::new(axis, self.mu)
    }

    pub fn a_vector(&self) -> Vec<f64> {
        let mut a = self.a.clone().unwrap_or_else(|| {
            let mut e = vec![0.0; self.n - 1];
            e[0] = 1.0;
            e
        });
        a.push(0.0);
        a
    }

    pub fn angle(&self) -> f64 {
        self.theta.unwrap_or(match self.complex {
            ComplexKind::Triangle { d } => PI / (2.0 * d as f64),
            ComplexKind::Cube => PI / 4.0,
        })
    }

    pub fn rotation(&self) -> Rotation {
        Rotation::plane(self.n, 0, 1, self.angle())
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(self.n == 3 || self.n == 4) {
            return bad(format!("n = {} (supported: 3, 4)", self.n));
        }
        if self.n == 3 && self.k != 1 {
            return bad(format!("k = {} for n = 3 (only k = 1)", self.k));
        }
        self.combination().validate()?;
        self.quadrature.validate()?;
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return bad(format!("epsilon = {} outside (0, 1)", self.epsilon));
        }
        if !(self.h > 0.0) {
            return bad(format!("h = {} must be positive", self.h));
        }
        let om = omega_h(self.n, self.h)?;
        if !eps_close_check(&om, self.epsilon) {
            return bad(format!("the normal image of the cap below h/2 (mu = {:.4}) is not {}-close to -e_n", om.mu, self.epsilon));
        }
        if !(self.mu > 0.0 && self.mu < om.mu) {
            return bad(format!("bump cap mu = {} must lie in (0, {:.6}) to stay inside that normal image", self.mu, om.mu));
        }
        if self.t.is_empty() || self.t.iter().any(|&t| !(t > 0.0)) || self.t.windows(2).any(|w| w[1] >= w[0]) {
            return bad("t-sequence must be positive and strictly decreasing".into());
        }
        if let Some(a) = &self.a {
            if a.len() != self.n - 1 || (norm(a) - 1.0).abs() > 1e-12 {
                return bad("a must be a unit vector in R^{n-1}".into());
            }
        }
        match self.complex {
            ComplexKind::Triangle { d } if self.n != 3 || d < 2 => return bad(format!("triangle complex needs n = 3 and d >= 2 (d = {d})")),
            ComplexKind::Cube if self.average => return bad("Minkowski averaging is only used with the triangle complex".into()),
            ComplexKind::Triangle { d } if self.average && d % 2 == 0 => return bad(format!("averaging route needs odd d, got {d}")),
            _ => {}
        }
        if self.smooth_target {
            if self.n != 3 || self.k != 1 {
                return bad("smooth target needs n = 3, k = 1".into());
            }
            if self.coefficients.iter().any(|t| t.j != 1) {
                return bad("smooth target covers j = 1 terms only".into());
            }
        }
        Ok(())
    }

    pub fn hash_hex(&self) -> String {
        let mut h = std::collections::hash_map::DefaultHasher::new();
        serde_json::to_string(self).unwrap_or_default().hash(&mut h);
        format!("{:016x}", h.finish())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRow {
    pub t: f64,
    #[serde(rename = "W_k")]
    pub w_k: f64,
    pub gamma_e: f64,
    #[serde(rename = "gamma_thetaE")]
    pub gamma_theta_e: f64,
    pub defect: f64,
    #[serde(rename = "delta_Eprime")]
    pub delta_eprime: f64,
    pub lemma51_ratio: f64,
    pub quad_err: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct LevelInfo {
    pub t: f64,
    pub faces: usize,
    /// Retained faces per direction class (not available after averaging).
    pub classes: BTreeMap<usize, usize>,
    /// `|Γ(P_t,f) - target|_max / |target|_max` for smooth-target runs.
    pub target_error: Option<f64>,
    /// Max-norm of Γ(P_t, f).
    pub value_norm: f64,
    pub seconds: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct TargetInfo {
    pub tensor: Vec<f64>,
    pub value_e: f64,
    pub quad_err: f64,
    /// Richardson extrapolation of the E-values from the last three levels.
    pub richardson: Option<f64>,
    pub observed_order: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct Certificate {
    /// `|d_1 - d_2| / max(d_1, d_2)` for the two smallest t.
    pub relative_spread: f64,
    /// `min(d_1, d_2) / max(quad_err)` over those levels.
    pub margin_over_error: f64,
    pub positive: bool,
    /// `|Υ(ϑE') - Υ(E')|`.
    pub upsilon_gap: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ExperimentReport {
    pub name: String,
    pub config_hash: String,
    pub rows: Vec<ExperimentRow>,
    pub levels: Vec<LevelInfo>,
    pub target: Option<TargetInfo>,
    pub certificate: Option<Certificate>,
    pub total_seconds: f64,
}

impl ExperimentReport {
    /// The CSV table; byte-identical across runs of the same config.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for r in &self.rows {
            w.serialize(r).map_err(|e| Error::Numeric(e.to_string()))?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Numeric(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| Error::Numeric(e.to_string()))
    }

    pub fn summary_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Numeric(e.to_string()))
    }
}

/// Polytope and retained k-faces for one lattice parameter.
pub fn level_polytope(config: &ExperimentConfig, t: f64) -> Result<(Polytope, Vec<usize>, BTreeMap<usize, usize>)> {
    let cap = config.support_cap()?;
    let cells = match config.complex {
        ComplexKind::Cube => t * ((config.n - 1) as f64).sqrt(),
        ComplexKind::Triangle { .. } => t,
    };
    let radius = config.h.sqrt() + config.window_margin * cells;
    let lc = lift_complex(config.n, t, config.complex, radius)?;
    if config.average {
        let ComplexKind::Triangle { d } = config.complex else { unreachable!() };
        let rotations: Vec<Rotation> = (0..d).map(|l| Rotation::plane(3, 0, 1, l as f64 * PI / d as f64)).collect();
        let window = omega_h(config.n, config.h)?;
        let avg = minkowski_average_windowed(&lc.polytope, &rotations, &window)?;
        let faces = truncate_and_filter(&avg, config.k, config.h, &cap, Some(&window))?;
        Ok((avg, faces, BTreeMap::new()))
    } else {
        let faces = lc.filter(config.k, config.h, &cap)?;
        let classes = class_histogram(&lc, config.k, &faces);
        Ok((lc.polytope, faces, classes))
    }
}

/// The smooth comparison value `Σ c Q^m φ_1^{0,s,1}(K_h, f)`.
pub fn smooth_target(config: &ExperimentConfig) -> Result<(SymTensor, f64)> {
    let f = bump_function(&config.support_cap()?);
    let quad = QuadratureSpec { rel_tol: 1e-11, max_depth: 10, ..config.quadrature.clone() };
    let surface = SmoothSurface::Paraboloid { h: config.h };
    let n = config.n;
    let mut out = SymTensor::zeros(n, config.combination().rank());
    let mut err = 0.0;
    for t in &config.coefficients {
        let (v, e) = phi_j1_smooth(&surface, 0, t.s, &f, &quad)?;
        out.axpy(t.c, &metric_tensor(n).power(t.m).sym_product(&v)?)?;
        err += t.c.abs() * e;
    }
    Ok((out, err))
}

pub fn convergence_study(config: &ExperimentConfig) -> Result<ExperimentReport> {
    config.validate()?;
    let start = Instant::now();
    let comb = config.combination();
    let f = bump_function(&config.support_cap()?);
    let quad = QuadratureSpec { seed: config.quadrature.seed ^ config.seed, ..config.quadrature.clone() };
    let rot = config.rotation();
    let a = config.a_vector();
    let ta = rot.apply(&a);
    let p = comb.rank();
    let (q2, s0) = match comb.q() {
        Some(q) => (2 * q, comb.s0().unwrap_or(0)),
        None => (p, 0),
    };
    let e = e_tuple(&a, q2, s0);
    let te = e_tuple(&ta, q2, s0);

    let target = if config.smooth_target { Some(smooth_target(config)?) } else { None };

    let levels: Vec<Result<(ExperimentRow, LevelInfo)>> = config
        .t
        .par_iter()
        .map(|&t| {
            let t0 = Instant::now();
            let (poly, faces, classes) = level_polytope(config, t)?;
            let g = gamma_eval(&poly, &comb, &faces, &f, &quad)?;
            let gamma_e = eval_tuple(&g.gamma, &e)?;
            let gamma_theta_e = eval_tuple(&g.gamma, &te)?;
            let (delta_eprime, lemma51_ratio) = match &g.delta {
                Some(d) => {
                    let de = eval_tuple(d, &e[..q2])?;
                    let upper_e = eval_tuple(&g.gamma_upper, &e)?;
                    let ratio = if g.w_k > 0.0 { (upper_e - de).abs() / (g.w_k * config.epsilon) } else { 0.0 };
                    (de, ratio)
                }
                None => (0.0, 0.0),
            };
            let target_error = match &target {
                Some((tt, _)) => Some(g.gamma.max_abs_diff(tt)? / tt.max_abs().max(1e-300)),
                None => None,
            };
            let row = ExperimentRow { t, w_k: g.w_k, gamma_e, gamma_theta_e, defect: (gamma_theta_e - gamma_e).abs(), delta_eprime, lemma51_ratio, quad_err: g.quad_err };
            let info = LevelInfo { t, faces: g.faces, classes, target_error, value_norm: g.gamma.max_abs(), seconds: t0.elapsed().as_secs_f64() };
            Ok((row, info))
        })
        .collect();
    let mut rows = Vec::new();
    let mut infos = Vec::new();
    for l in levels {
        let (r, i) = l?;
        rows.push(r);
        infos.push(i);
    }

    let target = match target {
        Some((tt, err)) => {
            let value_e = eval_tuple(&tt, &e)?;
            let (richardson, observed_order) = richardson(&rows.iter().map(|r| (r.t, r.gamma_e)).collect::<Vec<_>>());
            Some(TargetInfo { tensor: tt.coeffs().to_vec(), value_e, quad_err: err, richardson, observed_order })
        }
        None => None,
    };

    let certificate = if comb.q().is_some() && rows.len() >= 2 {
        let (r1, r2) = (&rows[rows.len() - 2], &rows[rows.len() - 1]);
        let dmax = r1.defect.max(r2.defect);
        let spread = if dmax > 0.0 { (r1.defect - r2.defect).abs() / dmax } else { 0.0 };
        let err = r1.quad_err.max(r2.quad_err).max(f64::MIN_POSITIVE);
        let margin = r1.defect.min(r2.defect) / err;
        let ups = upsilon(config)?;
        let ut = ups.tensor(config.n)?;
        let gap = (eval_tuple(&ut, &te[..q2])? - eval_tuple(&ut, &e[..q2])?).abs();
        Some(Certificate { relative_spread: spread, margin_over_error: margin, positive: spread <= 0.2 && margin > 10.0, upsilon_gap: gap })
    } else {
        None
    };

    Ok(ExperimentReport { name: config.name.clone(), config_hash: config.hash_hex(), rows, levels: infos, target, certificate, total_seconds: start.elapsed().as_secs_f64() })
}

/// Extrapolated limit and observed order from values at t, t/2, t/4.
fn richardson(vals: &[(f64, f64)]) -> (Option<f64>, Option<f64>) {
    if vals.len() < 3 {
        return (None, None);
    }
    let m = vals.len();
    let (t0, v0) = vals[m - 3];
    let (t1, v1) = vals[m - 2];
    let (t2, v2) = vals[m - 1];
    let ratio = t0 / t1;
    if ((t1 / t2) - ratio).abs() > 1e-9 * ratio || (v1 - v2).abs() == 0.0 {
        return (None, None);
    }
    let order = ((v0 - v1) / (v1 - v2)).abs().ln() / ratio.ln();
    if !order.is_finite() || order <= 0.0 {
        return (None, Some(order));
    }
    let factor = ratio.powf(order);
    (Some(v2 + (v2 - v1) / (factor - 1.0)), Some(order))
}

/// Exact leading coefficient predicted for `p_Υ(x(λ))` (coordinate family,
/// even d) or of `μ^{2d-2} λ^{2d}` in `p_Υ(x(λ, μ))` (odd d), with the
/// family's dim = n - 1.
pub fn predicted_leading(dim: usize, k: usize, d: usize, cd: &BigRational) -> BigRational {
    let n = dim as i64 + 1;
    let k = k as i64;
    if d % 2 == 0 {
        cd * rat(2) * binom_int(n - 3, k - 1)
    } else {
        cd * rat(d as i64) * (binom_int(n - 4, k - 2) - binom_int(n - 4, k - 1))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::lifted::{facet_normal_above, lift};
    use approx::assert_abs_diff_eq;

    fn base_config() -> ExperimentConfig {
        ExperimentConfig {
            name: "test".into(),
            n: 3,
            k: 1,
            coefficients: vec![Coefficient { m: 0, j: 2, s: 0, c: 1.0 }],
            epsilon: 0.35,
            h: 0.045,
            mu: 0.03,
            t: vec![0.04],
            complex: ComplexKind::Cube,
            average: false,
            a: None,
            theta: None,
            smooth_target: false,
            seed: 1,
            quadrature: default_quadrature(),
            window_margin: 4.0,
        }
    }

    #[test]
    fn eps_close_examples() {
        let tiny = Cap::new(vec![0.0, 0.0, -1.0], 1e-6).unwrap();
        assert!(eps_close_check(&tiny, 0.01));
        let full = Cap::new(vec![0.0, 0.0, -1.0], 2.0).unwrap();
        assert!(!eps_close_check(&full, 0.5));
        // mu = eps/2: sqrt(1 - (1-mu)^2) = sqrt(0.0975) > 0.1
        let half = Cap::new(vec![0.0, 0.0, -1.0], 0.05).unwrap();
        assert!(!eps_close_check(&half, 0.1));
        let side = Cap::new(vec![1.0, 0.0, 0.0], 1e-6).unwrap();
        assert!(!eps_close_check(&side, 0.5));
    }

    #[test]
    fn bump_values() {
        let cap = Cap::new(vec![0.0, 0.0, -1.0], 0.2).unwrap();
        let f = bump_function(&cap);
        assert_abs_diff_eq!(f.eval(&[0.0, 0.0, -1.0]), 0.04, epsilon = 1e-15);
        assert_eq!(f.eval(&[1.0, 0.0, 0.0]), 0.0);
        let u = [0.1, 0.2, -(1.0f64 - 0.05).sqrt()];
        let r = Rotation::plane(3, 0, 1, 0.9);
        assert_abs_diff_eq!(f.eval(&r.apply(&u)), f.eval(&u), epsilon = 1e-15);
    }

    #[test]
    fn reduced_coefficients_and_degree() {
        let comb = Combination {
            n: 4,
            k: 1,
            terms: vec![Coefficient { m: 1, j: 2, s: 0, c: 2.0 }, Coefficient { m: 0, j: 2, s: 2, c: 1.0 }],
        };
        assert_eq!(comb.s0(), Some(0));
        assert_eq!(comb.q(), Some(3));
        let cj = comb.reduced_coefficients().unwrap();
        let c = constant_upper_c(4, 1, 0, 0).unwrap();
        assert_abs_diff_eq!(cj[0].1, 2.0 * c, epsilon = 1e-15);
        assert_eq!(cj[1].1, 0.0);
        assert_eq!(comb.degree().unwrap(), Some(2));
    }

    #[test]
    fn zero_weight_gives_zero() {
        let cfg = base_config();
        let (p, faces, _) = level_polytope(&cfg, 0.04).unwrap();
        let g = gamma_eval(&p, &cfg.combination(), &faces, &SphereWeight::func(|_| 0.0, 0.0), &cfg.quadrature).unwrap();
        assert_eq!(g.w_k, 0.0);
        assert_eq!(g.gamma.max_abs(), 0.0);
    }

    #[test]
    fn eprime_residual_vanishes_without_higher_s() {
        let cfg = base_config();
        let rep = convergence_study(&cfg).unwrap();
        let r = &rep.rows[0];
        assert!(r.w_k > 0.0);
        assert!(r.lemma51_ratio < 1e-12, "{r:?}");
        assert_abs_diff_eq!(r.gamma_e, r.delta_eprime, epsilon = 1e-12 * r.gamma_e.abs());
    }

    #[test]
    fn identity_rotation_no_defect() {
        let mut cfg = base_config();
        cfg.theta = Some(0.0);
        let rep = convergence_study(&cfg).unwrap();
        assert_eq!(rep.rows[0].defect, 0.0);
    }

    #[test]
    fn j0_term_matches_local_tensor() {
        use crate::valuations::{local_tensor, LocalTensorSpec};
        let mut cfg = base_config();
        cfg.coefficients = vec![Coefficient { m: 1, j: 0, s: 0, c: 1.0 }];
        let (p, faces, _) = level_polytope(&cfg, 0.04).unwrap();
        let f = bump_function(&cfg.support_cap().unwrap());
        let g = gamma_eval(&p, &cfg.combination(), &faces, &f, &cfg.quadrature).unwrap();
        let lt = local_tensor(&p, &LocalTensorSpec::new(1, 0, 0, 0, 1), &TestFunction::SphericalWeight(f), &cfg.quadrature).unwrap();
        assert!(g.gamma.max_abs_diff(&lt.tensor).unwrap() < 1e-12 * lt.tensor.max_abs());
    }

    /// Independent enumeration of lifted lattice edges for the square lattice.
    #[test]
    fn brute_force_edge_sum() {
        let cfg = base_config();
        let t = 0.04;
        let (p, faces, _) = level_polytope(&cfg, t).unwrap();
        let f = bump_function(&cfg.support_cap().unwrap());
        let g = gamma_eval(&p, &cfg.combination(), &faces, &f, &cfg.quadrature).unwrap();

        let s = 2.0 * t;
        let mut total = SymTensor::zeros(3, 4);
        let mut w = 0.0;
        let m = (0.6 / s) as i64 + 2;
        for i in -m..=m {
            for j in -m..=m {
                for dir in 0..2 {
                    let a = [i as f64 * s, j as f64 * s];
                    let b = if dir == 0 { [a[0] + s, a[1]] } else { [a[0], a[1] + s] };
                    // cells on either side of the edge
                    let (z1, z2) = if dir == 0 {
                        ([a[0] + t, a[1] + t], [a[0] + t, a[1] - t])
                    } else {
                        ([a[0] + t, a[1] + t], [a[0] - t, a[1] + t])
                    };
                    let (n1, n2) = (facet_normal_above(&z1), facet_normal_above(&z2));
                    let (la, lb) = (lift(&a), lift(&b));
                    let edge: Vec<f64> = lb.iter().zip(&la).map(|(x, y)| x - y).collect();
                    let len = norm(&edge);
                    let dirv: Vec<f64> = edge.iter().map(|x| x / len).collect();
                    // Simpson on the great-circle arc from n1 to n2
                    let ang = dot(&n1, &n2).clamp(-1.0, 1.0).acos();
                    let nsteps = 400;
                    let mut integral = 0.0;
                    for st in 0..=nsteps {
                        let th = ang * st as f64 / nsteps as f64;
                        let (sa, sb) = (((ang - th).sin()) / ang.sin(), th.sin() / ang.sin());
                        let u: Vec<f64> = n1.iter().zip(&n2).map(|(x, y)| sa * x + sb * y).collect();
                        let wgt = if st == 0 || st == nsteps { 1.0 } else if st % 2 == 1 { 4.0 } else { 2.0 };
                        integral += wgt * f.eval(&u);
                    }
                    integral *= ang / (3.0 * nsteps as f64);
                    if integral == 0.0 {
                        continue;
                    }
                    w += len * integral;
                    let pl = projection_tensor(3, &[dirv]).unwrap();
                    total.axpy(len * integral, &pl.power(2)).unwrap();
                }
            }
        }
        let c = constant_upper_c(3, 1, 0, 0).unwrap();
        assert!((g.w_k - w).abs() < 1e-8 * w, "{} vs {}", g.w_k, w);
        assert!(g.gamma.max_abs_diff(&total.scale(c)).unwrap() < 1e-8 * g.gamma.max_abs());
    }

    #[test]
    fn permutation_symmetry_of_cube_complex() {
        let mut cfg = base_config();
        cfg.coefficients = vec![Coefficient { m: 0, j: 2, s: 0, c: 1.0 }, Coefficient { m: 0, j: 1, s: 2, c: 0.7 }];
        let (p, faces, classes) = level_polytope(&cfg, 0.04).unwrap();
        assert_eq!(classes.len(), 2);
        let counts: Vec<usize> = classes.values().cloned().collect();
        assert_eq!(counts[0], counts[1]);
        let f = bump_function(&cfg.support_cap().unwrap());
        let g = gamma_eval(&p, &cfg.combination(), &faces, &f, &cfg.quadrature).unwrap();
        let swap = Rotation::new(nalgebra::DMatrix::from_row_slice(3, 3, &[0.0, 1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0])).unwrap();
        let a = [0.6, 0.8, 0.0];
        let e = e_tuple(&a, 4, 0);
        let se = e_tuple(&swap.apply(&a), 4, 0);
        assert_abs_diff_eq!(eval_tuple(&g.gamma, &e).unwrap(), eval_tuple(&g.gamma, &se).unwrap(), epsilon = 1e-9 * g.gamma.max_abs());
        // Δ is unchanged under coordinate permutations of E'
        let d = g.delta.unwrap();
        assert_abs_diff_eq!(eval_tuple(&d, &e).unwrap(), eval_tuple(&d, &se).unwrap(), epsilon = 1e-9 * d.max_abs());
    }

    #[test]
    fn upsilon_two_dim_invariant_case() {
        let u = Upsilon::new(SubspaceFamily::Coordinate { dim: 2, k: 1 }, 3, vec![(2, rat(3)), (3, rat(-2))]).unwrap();
        let p = u.coordinate_poly().unwrap();
        let x2 = Poly::var(2, 0).pow(2, 2).add(&Poly::var(2, 1).pow(2, 2));
        assert_eq!(p, x2.pow(3, 2));
        for th in [0.0, 0.3, 1.1, 2.5] {
            assert_abs_diff_eq!(u.eval(&[f64::cos(th), f64::sin(th)]), 1.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn upsilon_lines_leading_coefficient() {
        for d in [3usize, 5] {
            let cd = rat(7);
            let u = Upsilon::new(SubspaceFamily::Lines { d }, d, vec![(2, rat(-1)), (d, cd.clone())]).unwrap();
            let p = u.poly_lambda().unwrap();
            let deg = p.terms.keys().map(|e| e[0]).max().unwrap();
            assert_eq!(deg as usize, 2 * d);
            assert_eq!(p.coefficient(&[2 * d as u32]), cd * rat(d as i64));
            // polynomial agrees with direct evaluation
            for lam in [0.1, 0.5, 0.9] {
                let x = [lam, (1.0f64 - lam * lam).sqrt(), 0.0];
                assert_abs_diff_eq!(p.eval(&[lam]), u.eval(&x), epsilon = 1e-11);
            }
        }
    }

    #[test]
    fn upsilon_coordinate_leading_coefficients() {
        // even d: 2 c_d C(n-3, k-1)
        let (n, k, d) = (5usize, 2usize, 2usize);
        let u = Upsilon::new(SubspaceFamily::Coordinate { dim: n - 1, k }, 2, vec![(2, rat(3))]).unwrap();
        let p = u.poly_lambda().unwrap();
        assert_eq!(p.coefficient(&[4]), predicted_leading(n - 1, k, d, &rat(3)));
        // odd d: d c_d [C(n-4,k-2) - C(n-4,k-1)] for μ^{2d-2} λ^{2d}
        let (n, k, d) = (6usize, 1usize, 3usize);
        let u = Upsilon::new(SubspaceFamily::Coordinate { dim: n - 1, k }, 3, vec![(2, rat(1)), (3, rat(5))]).unwrap();
        let p = u.poly_lambda_mu().unwrap();
        assert_eq!(p.coefficient(&[6, 4]), predicted_leading(n - 1, k, d, &rat(5)));
        assert!(!p.is_constant());
    }

    #[test]
    fn upsilon_tensor_matches_polynomial() {
        let u = Upsilon::new(SubspaceFamily::Lines { d: 3 }, 3, vec![(2, rat(1)), (3, rat(2))]).unwrap();
        let t = u.tensor(3).unwrap();
        let x = [0.3, -0.5, 0.2];
        assert_abs_diff_eq!(t.evaluate_diag(&x).unwrap(), u.eval(&x), epsilon = 1e-12);
        let zero = Upsilon::new(SubspaceFamily::Lines { d: 3 }, 3, vec![]).unwrap();
        assert_eq!(zero.tensor(3).unwrap().max_abs(), 0.0);
    }

    #[test]
    fn trig_sums() {
        // Σ_{r<3} cos^2(rπ/3) = 1 + 1/4 + 1/4
        assert_eq!(trig_power_sum(2, 0, 3), BigRational::new(BigInt::from(3), BigInt::from(2)));
        assert_eq!(trig_power_sum(0, 2, 3), BigRational::new(BigInt::from(3), BigInt::from(2)));
        let direct: f64 = (0..5).map(|r| (r as f64 * PI / 5.0).cos().powi(4) * (r as f64 * PI / 5.0).sin().powi(6)).sum();
        assert_abs_diff_eq!(trig_power_sum(4, 6, 5).to_f64().unwrap(), direct, epsilon = 1e-14);
    }

    #[test]
    fn config_validation() {
        let mut c = base_config();
        assert!(c.validate().is_ok());
        c.epsilon = 0.1;
        assert!(c.validate().is_err());
        let mut c = base_config();
        c.mu = 0.5;
        assert!(c.validate().is_err());
        let mut c = base_config();
        c.t = vec![0.01, 0.02];
        assert!(c.validate().is_err());
        let text = r#"
            n = 3
            k = 1
            epsilon = 0.35
            h = 0.045
            mu = 0.03
            t = [0.04, 0.02]
            complex = { type = "cube" }
            [[coefficients]]
            j = 1
            c = 1.0
        "#;
        let c = ExperimentConfig::from_toml(text).unwrap();
        assert_eq!(c.coefficients[0].m, 0);
        assert!(ExperimentConfig::from_toml("n = 3").is_err());
    }
}
