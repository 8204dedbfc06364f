//! Local, generalized local and global Minkowski tensors of polytopes.
//!
//! `φ_k^{r,s,j}(P,η) = C_{n,k}^{r,s} Σ_{F ∈ F_k(P)} Q_{L(F)}^j ∫_F ∫_{ν(P,F)} 1_η(x,u) x^r u^s`,
//! optionally multiplied by `Q^m`.

use crate::error::{Error, Result};
use crate::geometry::{hull, Halfspace, Polytope};
use crate::linalg::{clip_points, dist, dot, gram_volume, scale, sub};
use crate::sphereint::{cone_region, integrate_monomial, OpenCone, QuadratureSpec, SphereWeight};
use crate::symtensor::{factorial, metric_tensor, projection_tensor, vector_power, Rotation, SymTensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Surface area of the unit sphere in R^n.
pub fn omega(n: usize) -> f64 {
    match n {
        0 => 0.0,
        1 => 2.0,
        2 => 2.0 * PI,
        _ => 2.0 * PI * omega(n - 2) / (n - 2) as f64,
    }
}

/// Volume of the unit ball in R^n.
pub fn kappa(n: usize) -> f64 {
    if n == 0 {
        return 1.0;
    }
    omega(n) / n as f64
}

fn check_k(n: usize, k: usize) -> Result<()> {
    if k >= n {
        return Err(Error::OutOfRange(format!("k = {k} must be below n = {n}")));
    }
    Ok(())
}

/// `c_{n,k}^{r,s} = ω_{n-k} / (r! s! ω_{n-k+s})`.
pub fn constant_c(n: usize, k: usize, r: usize, s: usize) -> Result<f64> {
    check_k(n, k)?;
    Ok(omega(n - k) / (factorial(r) * factorial(s) * omega(n - k + s)))
}

/// `C_{n,k}^{r,s} = 1 / (r! s! ω_{n-k+s})`.
pub fn constant_upper_c(n: usize, k: usize, r: usize, s: usize) -> Result<f64> {
    check_k(n, k)?;
    Ok(1.0 / (factorial(r) * factorial(s) * omega(n - k + s)))
}

/// Selects `Q^m φ_k^{r,s,j}`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LocalTensorSpec {
    pub k: usize,
    pub r: usize,
    pub s: usize,
    pub j: usize,
    pub m: usize,
}

impl LocalTensorSpec {
    pub fn new(k: usize, r: usize, s: usize, j: usize, m: usize) -> Self {
        LocalTensorSpec { k, r, s, j, m }
    }

    pub fn rank(&self) -> usize {
        2 * self.m + 2 * self.j + self.r + self.s
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        check_k(n, self.k)?;
        if self.k == 0 && self.j > 0 {
            return Err(Error::InvalidSpec("φ_0^{r,s,j} is undefined for j >= 1".into()));
        }
        Ok(())
    }

    /// Whether the map belongs to the basis of local tensor valuations
    /// (`j = 0` when k is 0 or n-1).
    pub fn basis_member(&self, n: usize) -> bool {
        self.validate(n).is_ok() && (self.j == 0 || (self.k != 0 && self.k != n - 1))
    }

    /// All basis maps of rank p in R^n.
    pub fn basis(n: usize, p: usize) -> Vec<LocalTensorSpec> {
        let mut out = Vec::new();
        for m in 0..=p / 2 {
            for j in 0..=(p - 2 * m) / 2 {
                for r in 0..=p - 2 * m - 2 * j {
                    let s = p - 2 * m - 2 * j - r;
                    for k in 0..n {
                        let spec = LocalTensorSpec { k, r, s, j, m };
                        if spec.basis_member(n) {
                            out.push(spec);
                        }
                    }
                }
            }
        }
        out
    }
}

impl std::fmt::Display for LocalTensorSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Q^{}phi_{}^({},{},{})", self.m, self.k, self.r, self.s, self.j)
    }
}

/// Open polytope `{ x : <x, a_i> < b_i }`; no halfspaces means all of R^n.
#[derive(Clone, Debug, PartialEq, Default, Serialize, Deserialize)]
pub struct Beta {
    pub halfspaces: Vec<Halfspace>,
}

impl Beta {
    pub fn all() -> Beta {
        Beta::default()
    }

    /// Open axis-parallel box.
    pub fn open_box(lo: &[f64], hi: &[f64]) -> Result<Beta> {
        let n = lo.len();
        let mut halfspaces = Vec::new();
        for i in 0..n {
            let e = crate::linalg::unit(n, i);
            halfspaces.push(Halfspace::new(e.clone(), hi[i])?);
            halfspaces.push(Halfspace::new(scale(&e, -1.0), -lo[i])?);
        }
        Ok(Beta { halfspaces })
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        self.halfspaces.iter().all(|h| h.signed_distance(x) < 0.0)
    }

    pub fn translate(&self, t: &[f64]) -> Beta {
        Beta { halfspaces: self.halfspaces.iter().map(|h| Halfspace { normal: h.normal.clone(), offset: h.offset + dot(&h.normal, t) }).collect() }
    }

    pub fn scale(&self, lambda: f64) -> Beta {
        Beta { halfspaces: self.halfspaces.iter().map(|h| Halfspace { normal: h.normal.clone(), offset: h.offset * lambda }).collect() }
    }

    pub fn rotate(&self, rot: &Rotation) -> Beta {
        Beta { halfspaces: self.halfspaces.iter().map(|h| Halfspace { normal: rot.apply(&h.normal), offset: h.offset }).collect() }
    }
}

/// The computable class of test sets and test functions on Σ^n.
#[derive(Clone, Debug)]
pub enum TestFunction {
    Full,
    /// Indicator of β × ω with open β and open ω.
    ProductIndicator { beta: Beta, omega: OpenCone },
    /// Continuous weight on the normal directions.
    SphericalWeight(SphereWeight),
}

impl TestFunction {
    pub fn translate(&self, t: &[f64]) -> TestFunction {
        match self {
            TestFunction::ProductIndicator { beta, omega } => TestFunction::ProductIndicator { beta: beta.translate(t), omega: omega.clone() },
            other => other.clone(),
        }
    }

    /// `λη = {(λx, u) : (x, u) ∈ η}`.
    pub fn scale(&self, lambda: f64) -> TestFunction {
        match self {
            TestFunction::ProductIndicator { beta, omega } => TestFunction::ProductIndicator { beta: beta.scale(lambda), omega: omega.clone() },
            other => other.clone(),
        }
    }

    pub fn rotate(&self, rot: &Rotation) -> TestFunction {
        match self {
            TestFunction::Full => TestFunction::Full,
            TestFunction::ProductIndicator { beta, omega } => TestFunction::ProductIndicator {
                beta: beta.rotate(rot),
                omega: OpenCone { normals: omega.normals.iter().map(|w| rot.apply(w)).collect() },
            },
            TestFunction::SphericalWeight(f) => TestFunction::SphericalWeight(rotate_weight(f, rot)),
        }
    }

    /// Membership of a support element, with faces treated as relatively open.
    pub fn contains(&self, x: &[f64], u: &[f64]) -> bool {
        match self {
            TestFunction::Full | TestFunction::SphericalWeight(_) => true,
            TestFunction::ProductIndicator { beta, omega } => beta.contains(x) && omega.contains(u),
        }
    }

    fn parts(&self) -> (Option<&Beta>, Option<&OpenCone>, SphereWeight) {
        match self {
            TestFunction::Full => (None, None, SphereWeight::One),
            TestFunction::ProductIndicator { beta, omega } => (Some(beta), Some(omega), SphereWeight::One),
            TestFunction::SphericalWeight(f) => (None, None, f.clone()),
        }
    }
}

/// `f ∘ ϑ^{-1}`.
pub fn rotate_weight(f: &SphereWeight, rot: &Rotation) -> SphereWeight {
    match f {
        SphereWeight::One => SphereWeight::One,
        SphereWeight::Bump(c) => SphereWeight::Bump(crate::sphereint::Cap { axis: rot.apply(&c.axis), mu: c.mu }),
        SphereWeight::Indicator(c) => SphereWeight::Indicator(crate::sphereint::Cap { axis: rot.apply(&c.axis), mu: c.mu }),
        SphereWeight::Func { f, sup } => {
            let f = f.clone();
            let inv = rot.inverse();
            SphereWeight::func(move |u| f(&inv.apply(u)), *sup)
        }
    }
}

#[derive(Clone, Debug)]
pub struct TensorMeasureValue {
    pub tensor: SymTensor,
    /// Quadrature error estimate, 0 on exact paths.
    pub error_estimate: f64,
}

/// `Σ_{|β| = r} v_0^{β_0} ⊙ ... ⊙ v_k^{β_k}`.
fn complete_homogeneous(vs: &[&[f64]], r: usize) -> Result<SymTensor> {
    let n = vs[0].len();
    if vs.len() == 1 {
        return Ok(vector_power(vs[0], r));
    }
    let (last, rest) = vs.split_last().unwrap();
    let mut out = SymTensor::zeros(n, r);
    for a in 0..=r {
        let h = complete_homogeneous(rest, r - a)?;
        out.axpy(1.0, &vector_power(last, a).sym_product(&h)?)?;
    }
    Ok(out)
}

/// `∫_S x^r dH^k` over a k-simplex: `vol k! r!/(k+r)! Σ_{|β|=r} ⊙ v_i^{β_i}`.
pub fn simplex_moment(vertices: &[&[f64]], r: usize) -> Result<SymTensor> {
    let k = vertices.len() - 1;
    let edges: Vec<Vec<f64>> = vertices[1..].iter().map(|v| sub(v, vertices[0])).collect();
    let vol = gram_volume(&edges) / factorial(k);
    if r == 0 {
        return Ok(SymTensor::scalar(vertices[0].len(), vol));
    }
    let c = vol * factorial(k) * factorial(r) / factorial(k + r);
    Ok(complete_homogeneous(vertices, r)?.scale(c))
}

/// `∫_{F ∩ β} x^r dH^k` for the face `(k, i)`.
pub fn face_moment(p: &Polytope, k: usize, i: usize, r: usize, beta: Option<&Beta>) -> Result<SymTensor> {
    let n = p.ambient_dim();
    let pts = p.face_points(k, i);
    let beta = match beta {
        Some(b) if !b.halfspaces.is_empty() => b,
        _ => return whole_face_moment(p, k, i, r),
    };
    if k == 0 {
        return Ok(if beta.contains(&pts[0]) { vector_power(&pts[0], r) } else { SymTensor::zeros(n, r) });
    }
    if pts.iter().all(|x| beta.contains(x)) {
        return whole_face_moment(p, k, i, r);
    }
    let mut cur = pts;
    for h in &beta.halfspaces {
        cur = clip_points(&cur, &h.normal, h.offset);
        if cur.len() <= k {
            return Ok(SymTensor::zeros(n, r));
        }
    }
    let q = hull(&cur)?;
    if q.dim() < k {
        return Ok(SymTensor::zeros(n, r));
    }
    whole_face_moment(&q, k, 0, r)
}

fn whole_face_moment(p: &Polytope, k: usize, i: usize, r: usize) -> Result<SymTensor> {
    let n = p.ambient_dim();
    if r == 0 {
        return Ok(SymTensor::scalar(n, p.face(k, i).measure));
    }
    let mut out = SymTensor::zeros(n, r);
    for simp in p.face_simplices(k, i) {
        let vs: Vec<&[f64]> = simp.iter().map(|&v| p.vertices()[v].as_slice()).collect();
        out.axpy(1.0, &simplex_moment(&vs, r)?)?;
    }
    Ok(out)
}

/// Per-face factors `∫_{F∩β} x^r` and `∫_{ν(P,F)∩ω} f u^s` of a local tensor.
#[derive(Clone, Debug)]
pub struct FaceTerm {
    pub face: usize,
    pub x_moment: SymTensor,
    pub u_moment: SymTensor,
    pub error: f64,
}

/// Face terms for the given k-faces (all k-faces when `faces` is `None`).
pub fn face_terms(p: &Polytope, k: usize, r: usize, s: usize, eta: &TestFunction, faces: Option<&[usize]>, quad: &QuadratureSpec) -> Result<Vec<FaceTerm>> {
    let (beta, omega, f) = eta.parts();
    let all: Vec<usize>;
    let list = match faces {
        Some(l) => l,
        None => {
            all = (0..p.count(k)).collect();
            &all
        }
    };
    let terms: Vec<Result<Option<FaceTerm>>> = list
        .par_iter()
        .map(|&i| {
            let x_moment = face_moment(p, k, i, r, beta)?;
            if x_moment.max_abs() == 0.0 && r == 0 {
                return Ok(None);
            }
            let mut region = cone_region(&p.normal_cone(k, i))?;
            if let Some(w) = omega {
                region = region.clip(w)?;
            }
            if region.is_empty() {
                return Ok(None);
            }
            let u = integrate_monomial(&region, s, &f, quad)?;
            Ok(Some(FaceTerm { face: i, x_moment, u_moment: u.tensor, error: u.error }))
        })
        .collect();
    let mut out = Vec::new();
    for t in terms {
        if let Some(t) = t? {
            out.push(t);
        }
    }
    Ok(out)
}

/// `Q^m φ_k^{r,s,j}(P, η)`.
pub fn local_tensor(p: &Polytope, spec: &LocalTensorSpec, eta: &TestFunction, quad: &QuadratureSpec) -> Result<TensorMeasureValue> {
    let n = p.ambient_dim();
    spec.validate(n)?;
    let terms = face_terms(p, spec.k, spec.r, spec.s, eta, None, quad)?;
    assemble(p, spec, &terms)
}

/// Combines precomputed face terms (for the same k, r, s) into `Q^m φ_k^{r,s,j}`.
pub fn assemble(p: &Polytope, spec: &LocalTensorSpec, terms: &[FaceTerm]) -> Result<TensorMeasureValue> {
    let n = p.ambient_dim();
    let c = constant_upper_c(n, spec.k, spec.r, spec.s)?;
    let mut total = SymTensor::zeros(n, spec.r + spec.s + 2 * spec.j);
    let mut err = 0.0;
    for t in terms {
        let mut term = t.x_moment.sym_product(&t.u_moment)?;
        if spec.j > 0 {
            let ql = projection_tensor(n, &p.face(spec.k, t.face).direction_basis)?.power(spec.j);
            term = ql.sym_product(&term)?;
        }
        total.axpy(1.0, &term)?;
        err += t.error * t.x_moment.max_abs();
    }
    let mut tensor = total.scale(c);
    if spec.m > 0 {
        tensor = metric_tensor(n).power(spec.m).sym_product(&tensor)?;
    }
    Ok(TensorMeasureValue { tensor, error_estimate: c * err })
}

/// `Φ_k^{r,s}(P)`; the c/C normalizations cancel against Λ_k.
pub fn global_tensor(p: &Polytope, k: usize, r: usize, s: usize, quad: &QuadratureSpec) -> Result<SymTensor> {
    Ok(local_tensor(p, &LocalTensorSpec::new(k, r, s, 0, 0), &TestFunction::Full, quad)?.tensor)
}

/// `Ψ_r(P) = (1/r!) ∫_P x^r`; zero for lower-dimensional P.
pub fn moment_tensor(p: &Polytope, r: usize) -> Result<SymTensor> {
    let n = p.ambient_dim();
    if p.dim() < n {
        return Ok(SymTensor::zeros(n, r));
    }
    Ok(whole_face_moment(p, n, 0, r)?.scale(1.0 / factorial(r)))
}

/// `Λ_k(P, η)`.
pub fn support_measure_eval(p: &Polytope, k: usize, eta: &TestFunction, quad: &QuadratureSpec) -> Result<f64> {
    let n = p.ambient_dim();
    let v = local_tensor(p, &LocalTensorSpec::new(k, 0, 0, 0, 0), eta, quad)?.tensor.value();
    Ok(v / constant_c(n, k, 0, 0)?)
}

/// Monte Carlo estimate against its exact counterpart.
#[derive(Clone, Debug)]
pub struct SteinerReport {
    pub estimate: SymTensor,
    pub standard_error: SymTensor,
    pub exact: SymTensor,
    /// Largest |estimate - exact| / standard error over components (0/0 counts as 0).
    pub max_sigma: f64,
}

impl SteinerReport {
    fn new(estimate: SymTensor, standard_error: SymTensor, exact: SymTensor) -> SteinerReport {
        let mut max_sigma = 0.0f64;
        for ((e, s), x) in estimate.coeffs().iter().zip(standard_error.coeffs()).zip(exact.coeffs()) {
            let d = (e - x).abs();
            let z = if *s > 0.0 { d / s } else if d < 1e-12 { 0.0 } else { f64::INFINITY };
            max_sigma = max_sigma.max(z);
        }
        SteinerReport { estimate, standard_error, exact, max_sigma }
    }
}

fn bounding_box(p: &Polytope, rho: f64) -> (Vec<f64>, Vec<f64>) {
    let n = p.ambient_dim();
    let mut lo = vec![f64::INFINITY; n];
    let mut hi = vec![f64::NEG_INFINITY; n];
    for v in p.vertices() {
        for i in 0..n {
            lo[i] = lo[i].min(v[i] - rho);
            hi[i] = hi[i].max(v[i] + rho);
        }
    }
    (lo, hi)
}

/// Right side of the Steiner formula for `Ψ_r(P + ρB)`:
/// `Σ_{k} ρ^{n+r-k} κ_{n+r-k} Σ_s Φ_{k-r+s}^{r-s,s}(P)`, with `Φ_n^{r,0} = Ψ_r`.
pub fn steiner_moment_exact(p: &Polytope, rho: f64, r: usize, quad: &QuadratureSpec) -> Result<SymTensor> {
    let n = p.ambient_dim();
    let mut out = SymTensor::zeros(n, r);
    for k in 0..=n + r {
        let coef = rho.powi((n + r - k) as i32) * kappa(n + r - k);
        for s in 0..=r {
            let idx = k as i64 - r as i64 + s as i64;
            if idx < 0 || idx as usize > n {
                continue;
            }
            let idx = idx as usize;
            let phi = if idx == n {
                if s > 0 {
                    continue;
                }
                moment_tensor(p, r)?
            } else {
                global_tensor(p, idx, r - s, s, quad)?
            };
            out.axpy(coef, &phi)?;
        }
    }
    Ok(out)
}

/// Global Steiner formula for moment tensors against a Monte Carlo estimate
/// of `(1/r!) ∫_{P+ρB} x^r`.
pub fn steiner_moment_check(p: &Polytope, rho: f64, r: usize, samples: usize, seed: u64, quad: &QuadratureSpec) -> Result<SteinerReport> {
    let n = p.ambient_dim();
    let exact = steiner_moment_exact(p, rho, r, quad)?;
    let (lo, hi) = bounding_box(p, rho);
    let vol: f64 = lo.iter().zip(&hi).map(|(a, b)| b - a).product();
    let idx = crate::symtensor::multi_indices(n, r);
    let m = idx.len();
    let (sum, sum2) = mc_blocks(samples, seed, m, |rng, acc, acc2| {
        let x: Vec<f64> = (0..n).map(|i| rng.gen_range(lo[i]..hi[i])).collect();
        let inside = match p.nearest_point(&x) {
            None => true,
            Some((y, _)) => dist(&x, &y) <= rho,
        };
        if inside {
            for (c, a) in idx.iter().enumerate() {
                let v = a.iter().map(|&i| x[i]).product::<f64>() / factorial(r);
                acc[c] += v;
                acc2[c] += v * v;
            }
        }
    });
    let (est, se) = mean_and_se(&sum, &sum2, samples, vol);
    Ok(SteinerReport::new(SymTensor::from_coeffs(n, r, est)?, SymTensor::from_coeffs(n, r, se)?, exact))
}

/// Local Steiner formula `H^n(M_ρ(P,η)) = Σ_k ρ^{n-k} κ_{n-k} Λ_k(P,η)` against
/// a Monte Carlo estimate classifying points by their metric projection.
pub fn local_steiner_check(p: &Polytope, rho: f64, eta: &TestFunction, samples: usize, seed: u64, quad: &QuadratureSpec) -> Result<SteinerReport> {
    let n = p.ambient_dim();
    let mut exact = 0.0;
    for k in 0..n {
        exact += rho.powi((n - k) as i32) * kappa(n - k) * support_measure_eval(p, k, eta, quad)?;
    }
    let (lo, hi) = bounding_box(p, rho);
    let vol: f64 = lo.iter().zip(&hi).map(|(a, b)| b - a).product();
    let (sum, sum2) = mc_blocks(samples, seed, 1, |rng, acc, acc2| {
        let x: Vec<f64> = (0..n).map(|i| rng.gen_range(lo[i]..hi[i])).collect();
        if let Some((y, _)) = p.nearest_point(&x) {
            let d = dist(&x, &y);
            if d <= rho && d > 0.0 && eta.contains(&y, &scale(&sub(&x, &y), 1.0 / d)) {
                acc[0] += 1.0;
                acc2[0] += 1.0;
            }
        }
    });
    let (est, se) = mean_and_se(&sum, &sum2, samples, vol);
    Ok(SteinerReport::new(SymTensor::scalar(n, est[0]), SymTensor::scalar(n, se[0]), SymTensor::scalar(n, exact)))
}

/// Sums of a sampled statistic over fixed blocks, each with its own RNG
/// stream, so results do not depend on the thread count.
fn mc_blocks<F>(samples: usize, seed: u64, m: usize, body: F) -> (Vec<f64>, Vec<f64>)
where
    F: Fn(&mut ChaCha8Rng, &mut [f64], &mut [f64]) + Sync,
{
    const BLOCK: usize = 1 << 14;
    let blocks = samples.div_ceil(BLOCK);
    let parts: Vec<(Vec<f64>, Vec<f64>)> = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(b as u64);
            let mut acc = vec![0.0; m];
            let mut acc2 = vec![0.0; m];
            let count = BLOCK.min(samples - b * BLOCK);
            for _ in 0..count {
                body(&mut rng, &mut acc, &mut acc2);
            }
            (acc, acc2)
        })
        .collect();
    let mut sum = vec![0.0; m];
    let mut sum2 = vec![0.0; m];
    for (a, a2) in parts {
        for c in 0..m {
            sum[c] += a[c];
            sum2[c] += a2[c];
        }
    }
    (sum, sum2)
}

fn mean_and_se(sum: &[f64], sum2: &[f64], samples: usize, vol: f64) -> (Vec<f64>, Vec<f64>) {
    let nf = samples as f64;
    let mean: Vec<f64> = sum.iter().map(|s| vol * s / nf).collect();
    let se: Vec<f64> = sum
        .iter()
        .zip(sum2)
        .map(|(s, s2)| {
            let mu = s / nf;
            let var = (s2 / nf - mu * mu).max(0.0);
            vol * (var / (nf - 1.0)).sqrt()
        })
        .collect();
    (mean, se)
}

/// Terms `(coefficient, power of Q, s')` with
/// `φ_{n-1}^{r,s,j} = Σ_i coefficient · Q^{j-i} φ_{n-1}^{r,s+2i}`.
pub fn reduce_phi_top(r: usize, s: usize, j: usize) -> Vec<(f64, usize, usize)> {
    let _ = r;
    (0..=j)
        .map(|i| {
            let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
            let c = sign * crate::symtensor::binomial(j, i) * factorial(s + 2 * i) * omega(1 + s + 2 * i) / (factorial(s) * omega(1 + s));
            (c, j - i, s + 2 * i)
        })
        .collect()
}

/// Right side of the top-degree reduction evaluated on P.
pub fn reduce_phi_top_eval(p: &Polytope, r: usize, s: usize, j: usize, eta: &TestFunction, quad: &QuadratureSpec) -> Result<SymTensor> {
    let n = p.ambient_dim();
    let mut out = SymTensor::zeros(n, r + s + 2 * j);
    for (c, m, s2) in reduce_phi_top(r, s, j) {
        let v = local_tensor(p, &LocalTensorSpec::new(n - 1, r, s2, 0, m), eta, quad)?.tensor;
        out.axpy(c, &v)?;
    }
    Ok(out)
}

/// Components `φ_k^{r-i,s,j}(P, η)` for i = 0..r, with the largest defect of
/// `φ^{r}(P+t, η+t) = Σ_i φ^{r-i}(P,η) ⊙ t^i / i!`.
#[derive(Clone, Debug)]
pub struct TranslationExpansion {
    pub components: Vec<SymTensor>,
    pub shifted: SymTensor,
    pub defect: f64,
}

pub fn translation_expand(p: &Polytope, spec: &LocalTensorSpec, eta: &TestFunction, t: &[f64], quad: &QuadratureSpec) -> Result<TranslationExpansion> {
    let n = p.ambient_dim();
    let mut components = Vec::new();
    let mut predicted = SymTensor::zeros(n, spec.rank());
    for i in 0..=spec.r {
        let sp = LocalTensorSpec { r: spec.r - i, ..*spec };
        let c = local_tensor(p, &sp, eta, quad)?.tensor;
        predicted.axpy(1.0 / factorial(i), &c.sym_product(&vector_power(t, i))?)?;
        components.push(c);
    }
    let shifted = local_tensor(&p.translate(t), spec, &eta.translate(t), quad)?.tensor;
    let defect = shifted.max_abs_diff(&predicted)?;
    Ok(TranslationExpansion { components, shifted, defect })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{cuboid, segment, unit_cube};
    use crate::linalg::unit;
    use approx::assert_abs_diff_eq;

    fn q() -> QuadratureSpec {
        QuadratureSpec::default()
    }

    #[test]
    fn sphere_constants() {
        assert_abs_diff_eq!(omega(2), 2.0 * PI, epsilon = 1e-15);
        assert_abs_diff_eq!(omega(4), 2.0 * PI * PI, epsilon = 1e-14);
        assert_abs_diff_eq!(kappa(3), 4.0 * PI / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(kappa(2), PI, epsilon = 1e-15);
    }

    #[test]
    fn normalizing_constants() {
        assert_abs_diff_eq!(constant_c(3, 1, 0, 0).unwrap(), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(constant_c(3, 1, 0, 2).unwrap(), 1.0 / (2.0 * PI), epsilon = 1e-15);
        assert_abs_diff_eq!(constant_upper_c(3, 1, 0, 0).unwrap(), 1.0 / (2.0 * PI), epsilon = 1e-15);
        assert!(constant_c(3, 3, 0, 0).is_err());
    }

    #[test]
    fn cube_intrinsic_volumes() {
        let p = unit_cube(3);
        for (k, v) in [1.0, 3.0, 3.0].iter().enumerate() {
            let t = local_tensor(&p, &LocalTensorSpec::new(k, 0, 0, 0, 0), &TestFunction::Full, &q()).unwrap();
            assert_abs_diff_eq!(t.tensor.value(), *v, epsilon = 1e-10);
        }
    }

    #[test]
    fn segment_values() {
        let p = segment(vec![0.0; 3], vec![2.0, 0.0, 0.0]).unwrap();
        let v = local_tensor(&p, &LocalTensorSpec::new(1, 0, 0, 0, 0), &TestFunction::Full, &q()).unwrap();
        assert_abs_diff_eq!(v.tensor.value(), 2.0, epsilon = 1e-12);
        let v = local_tensor(&p, &LocalTensorSpec::new(1, 0, 1, 0, 0), &TestFunction::Full, &q()).unwrap();
        assert!(v.tensor.max_abs() < 1e-14);
        // Φ_1^{0,2} = C L π (Q - e1^2) with C = 1/(2! ω_3)
        let v = global_tensor(&p, 1, 0, 2, &q()).unwrap();
        let expect = metric_tensor(3).sub(&vector_power(&unit(3, 0), 2)).unwrap().scale(2.0 / (4.0 * PI));
        assert!(v.max_abs_diff(&expect).unwrap() < 1e-14);
    }

    #[test]
    fn cube_generalized_edge_tensor() {
        let p = unit_cube(3);
        let v = local_tensor(&p, &LocalTensorSpec::new(1, 0, 0, 1, 0), &TestFunction::Full, &q()).unwrap();
        let e1 = unit(3, 0);
        assert_abs_diff_eq!(v.tensor.evaluate(&[&e1, &e1]).unwrap(), 1.0, epsilon = 1e-13);
    }

    #[test]
    fn moment_tensors() {
        let p = unit_cube(3);
        assert_abs_diff_eq!(moment_tensor(&p, 0).unwrap().value(), 1.0, epsilon = 1e-14);
        let m1 = moment_tensor(&p, 1).unwrap();
        for c in m1.coeffs() {
            assert_abs_diff_eq!(*c, 0.5, epsilon = 1e-14);
        }
        let t = [0.3, -1.0, 2.0];
        let shifted = moment_tensor(&p.translate(&t), 1).unwrap();
        for i in 0..3 {
            assert_abs_diff_eq!(shifted.coeffs()[i], 0.5 + t[i], epsilon = 1e-13);
        }
        // (1/2) ∫ x^2 over the unit cube: 1/6 on the diagonal, 1/8 off it
        let m2 = moment_tensor(&p, 2).unwrap();
        assert_abs_diff_eq!(m2.get(&[0, 0]), 1.0 / 6.0, epsilon = 1e-14);
        assert_abs_diff_eq!(m2.get(&[0, 1]), 1.0 / 8.0, epsilon = 1e-14);
    }

    #[test]
    fn steiner_exact_box() {
        let p = unit_cube(3);
        let v = steiner_moment_exact(&p, 1.0, 0, &q()).unwrap().value();
        assert_abs_diff_eq!(v, 1.0 + 6.0 + 3.0 * PI + 4.0 * PI / 3.0, epsilon = 1e-10);
    }

    #[test]
    fn steiner_monte_carlo() {
        let p = unit_cube(3);
        let rep = steiner_moment_check(&p, 1.0, 1, 200_000, 3, &q()).unwrap();
        assert!(rep.max_sigma < 4.0, "{rep:?}");
    }

    #[test]
    fn box_intrinsic_volumes() {
        let p = cuboid(&[0.0; 3], &[1.5, 0.5, 2.0]).unwrap();
        let v1 = global_tensor(&p, 1, 0, 0, &q()).unwrap().value();
        let v2 = global_tensor(&p, 2, 0, 0, &q()).unwrap().value();
        assert_abs_diff_eq!(v1, 4.0, epsilon = 1e-10);
        assert_abs_diff_eq!(v2, 0.75 + 1.0 + 3.0, epsilon = 1e-10);
    }

    #[test]
    fn facet_indicator_support_measure() {
        let p = unit_cube(3);
        let eta = TestFunction::ProductIndicator {
            beta: Beta::all(),
            omega: OpenCone { normals: vec![vec![0.0, 0.0, -1.0], vec![1.0, 0.0, -1.0], vec![-1.0, 0.0, -1.0], vec![0.0, 1.0, -1.0], vec![0.0, -1.0, -1.0]] },
        };
        // ω = {u_3 > |u_1|, u_3 > |u_2|}: the top facet, a π/4 arc at each top
        // edge and a third of the octant at each top vertex
        assert_abs_diff_eq!(support_measure_eval(&p, 2, &eta, &q()).unwrap(), 0.5, epsilon = 1e-14);
        assert_abs_diff_eq!(support_measure_eval(&p, 1, &eta, &q()).unwrap(), 0.5, epsilon = 1e-13);
        assert_abs_diff_eq!(support_measure_eval(&p, 0, &eta, &q()).unwrap(), 1.0 / 6.0, epsilon = 1e-10);
        let rep = local_steiner_check(&p, 0.5, &eta, 200_000, 9, &q()).unwrap();
        assert!(rep.max_sigma < 4.0, "{rep:?}");
    }

    #[test]
    fn disjoint_indicator_vanishes() {
        let p = unit_cube(3);
        let eta = TestFunction::ProductIndicator { beta: Beta::open_box(&[5.0; 3], &[6.0; 3]).unwrap(), omega: OpenCone::default() };
        for k in 0..3 {
            let v = local_tensor(&p, &LocalTensorSpec::new(k, 1, 1, 0, 0), &eta, &q()).unwrap();
            assert_eq!(v.tensor.max_abs(), 0.0);
        }
    }

    #[test]
    fn top_reduction_coefficients() {
        let r = reduce_phi_top(0, 0, 1);
        assert_eq!(r.len(), 2);
        assert_abs_diff_eq!(r[0].0, 1.0, epsilon = 1e-15);
        assert_eq!((r[0].1, r[0].2), (1, 0));
        assert_abs_diff_eq!(r[1].0, -4.0 * PI, epsilon = 1e-13);
        assert_eq!((r[1].1, r[1].2), (0, 2));
        assert_eq!(reduce_phi_top(1, 2, 0), vec![(1.0, 0, 2)]);
    }

    #[test]
    fn top_reduction_on_cube() {
        let p = unit_cube(3);
        let lhs = local_tensor(&p, &LocalTensorSpec::new(2, 0, 0, 1, 0), &TestFunction::Full, &q()).unwrap().tensor;
        let rhs = reduce_phi_top_eval(&p, 0, 0, 1, &TestFunction::Full, &q()).unwrap();
        assert!(lhs.max_abs_diff(&rhs).unwrap() < 1e-10);
    }

    #[test]
    fn translation_expansion_first_order() {
        let p = cuboid(&[0.0; 3], &[1.0, 2.0, 0.5]).unwrap();
        let eta = TestFunction::ProductIndicator { beta: Beta::open_box(&[-0.5, 0.3, -1.0], &[0.7, 3.0, 0.25]).unwrap(), omega: OpenCone::default() };
        let e = translation_expand(&p, &LocalTensorSpec::new(1, 1, 2, 0, 0), &eta, &[0.4, -0.2, 1.1], &q()).unwrap();
        assert!(e.defect < 1e-10);
        let e = translation_expand(&p, &LocalTensorSpec::new(0, 0, 1, 0, 0), &eta, &[0.4, -0.2, 1.1], &q()).unwrap();
        assert!(e.defect < 1e-10);
    }

    #[test]
    fn basis_counts() {
        assert_eq!(LocalTensorSpec::basis(3, 0).len(), 3);
        assert_eq!(LocalTensorSpec::basis(3, 1).len(), 6);
        assert_eq!(LocalTensorSpec::basis(3, 2).len(), 13);
        assert_eq!(LocalTensorSpec::basis(3, 3).len(), 20);
    }
}
