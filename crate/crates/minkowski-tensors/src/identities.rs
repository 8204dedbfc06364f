//! Structural identities as executable checks: component extraction from
//! translates and dilates, the valuation property, linear independence of
//! the local basis, and the global McMullen-type relation.

use crate::error::{Error, Result};
use crate::geometry::{hull, Halfspace, Polytope};
use crate::linalg::{normalize, scale};
use crate::sphereint::{OpenCone, QuadratureSpec};
use crate::symtensor::{metric_tensor, Rotation, SymTensor};
use crate::valuations::{assemble, face_terms, global_tensor, local_tensor, Beta, FaceTerm, LocalTensorSpec, TestFunction};
use nalgebra::{DMatrix, DVector};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::f64::consts::PI;

/// A linear combination of the local tensor valuations `Q^m φ_k^{r,s,j}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MappingHandle {
    pub name: String,
    pub n: usize,
    pub terms: Vec<(f64, LocalTensorSpec)>,
}

impl MappingHandle {
    pub fn single(n: usize, spec: LocalTensorSpec) -> MappingHandle {
        MappingHandle { name: spec.to_string(), n, terms: vec![(1.0, spec)] }
    }

    pub fn combination(name: &str, n: usize, terms: Vec<(f64, LocalTensorSpec)>) -> Result<MappingHandle> {
        let h = MappingHandle { name: name.into(), n, terms };
        h.validate()?;
        Ok(h)
    }

    pub fn validate(&self) -> Result<()> {
        let Some((_, first)) = self.terms.first() else {
            return Err(Error::InvalidSpec("mapping without terms".into()));
        };
        for (_, s) in &self.terms {
            s.validate(self.n)?;
            if s.rank() != first.rank() {
                return Err(Error::InvalidSpec(format!("{s} has rank {} but {first} has rank {}", s.rank(), first.rank())));
            }
        }
        Ok(())
    }

    pub fn rank(&self) -> usize {
        self.terms.first().map(|(_, s)| s.rank()).unwrap_or(0)
    }

    /// Degree of the polynomial translation behavior.
    pub fn translation_degree(&self) -> usize {
        self.terms.iter().map(|(_, s)| s.r).max().unwrap_or(0)
    }

    /// Largest homogeneity degree k + r among the terms.
    pub fn homogeneity_degree(&self) -> usize {
        self.terms.iter().map(|(_, s)| s.k + s.r).max().unwrap_or(0)
    }

    /// Γ(P, η); `None` stands for the empty set, where Γ vanishes.
    pub fn eval(&self, p: Option<&Polytope>, eta: &TestFunction, quad: &QuadratureSpec) -> Result<SymTensor> {
        self.validate()?;
        let Some(p) = p else { return Ok(SymTensor::zeros(self.n, self.rank())) };
        let mut cache = TermCache::default();
        let mut out = SymTensor::zeros(self.n, self.rank());
        for (c, s) in &self.terms {
            out.axpy(*c, &cache.eval(p, s, eta, quad)?)?;
        }
        Ok(out)
    }
}

/// Face terms shared between specs with equal (k, r, s).
#[derive(Default)]
struct TermCache {
    terms: HashMap<(usize, usize, usize), Vec<FaceTerm>>,
}

impl TermCache {
    fn eval(&mut self, p: &Polytope, spec: &LocalTensorSpec, eta: &TestFunction, quad: &QuadratureSpec) -> Result<SymTensor> {
        let key = (spec.k, spec.r, spec.s);
        if !self.terms.contains_key(&key) {
            self.terms.insert(key, face_terms(p, spec.k, spec.r, spec.s, eta, None, quad)?);
        }
        Ok(assemble(p, spec, &self.terms[&key])?.tensor)
    }
}

/// Values of several specs on one (P, η), sharing face integrals.
pub fn evaluate_specs(p: &Polytope, specs: &[LocalTensorSpec], eta: &TestFunction, quad: &QuadratureSpec) -> Result<Vec<SymTensor>> {
    let mut cache = TermCache::default();
    specs.iter().map(|s| cache.eval(p, s, eta, quad)).collect()
}

/// Inverse of the Vandermonde matrix `V[m][j] = λ_m^j`, exactly.
pub fn vandermonde_inverse(lambdas: &[i64]) -> Result<Vec<Vec<BigRational>>> {
    let n = lambdas.len();
    let mut a: Vec<Vec<BigRational>> = lambdas
        .iter()
        .enumerate()
        .map(|(row, &l)| {
            let mut r: Vec<BigRational> = (0..n).map(|j| BigRational::from_integer(BigInt::from(l).pow(j as u32))).collect();
            r.extend((0..n).map(|j| if j == row { BigRational::one() } else { BigRational::zero() }));
            r
        })
        .collect();
    for col in 0..n {
        let piv = (col..n).find(|&r| !a[r][col].is_zero()).ok_or_else(|| Error::Numeric("singular Vandermonde system".into()))?;
        a.swap(col, piv);
        let inv = BigRational::one() / a[col][col].clone();
        for v in a[col].iter_mut() {
            *v = &*v * &inv;
        }
        for r in 0..n {
            if r != col && !a[r][col].is_zero() {
                let f = a[r][col].clone();
                for c in 0..2 * n {
                    let d = &f * &a[col][c];
                    a[r][c] = &a[r][c] - d;
                }
            }
        }
    }
    Ok(a.into_iter().map(|r| r[n..].to_vec()).collect())
}

/// Solves `Σ_j λ_m^j X_j = G_m` for the X_j.
fn vandermonde_solve(lambdas: &[i64], values: &[SymTensor]) -> Result<Vec<SymTensor>> {
    let inv = vandermonde_inverse(lambdas)?;
    // V X = G, so X_j = Σ_m (V^{-1})_{j m} G_m
    let mut out = Vec::new();
    for row in inv.iter().take(lambdas.len()) {
        let mut acc = SymTensor::zeros(values[0].dimension(), values[0].rank());
        for (m, v) in values.iter().enumerate() {
            acc.axpy(row[m].to_f64().unwrap_or(f64::NAN), v)?;
        }
        out.push(acc);
    }
    Ok(out)
}

/// The components `Γ_{p-j}(P, η) ⊙ t^j / j!`, j = 0..=q, from the translates
/// by t, 2t, …, (q+1)t.
pub fn translation_components(gamma: &MappingHandle, p: &Polytope, eta: &TestFunction, t: &[f64], quad: &QuadratureSpec) -> Result<Vec<SymTensor>> {
    let q = gamma.translation_degree();
    if q > 8 {
        return Err(Error::OutOfRange(format!("translation degree {q} > 8")));
    }
    let lambdas: Vec<i64> = (1..=q as i64 + 1).collect();
    let values = lambdas
        .par_iter()
        .map(|&m| {
            let shift = scale(t, m as f64);
            gamma.eval(Some(&p.translate(&shift)), &eta.translate(&shift), quad)
        })
        .collect::<Result<Vec<_>>>()?;
    // Γ(P + λt) = Σ_j λ^j A_j
    vandermonde_solve(&lambdas, &values)
}

/// Degree components `Γ_i` with `Γ(λP, λη) = Σ_i λ^i Γ_i`, i = 0..=D, and
/// the defect of that expansion at one further λ.
pub fn homogeneity_components(gamma: &MappingHandle, p: &Polytope, eta: &TestFunction, quad: &QuadratureSpec) -> Result<(Vec<SymTensor>, f64)> {
    let d = gamma.homogeneity_degree().max(gamma.n - 1);
    let lambdas: Vec<i64> = (1..=d as i64 + 1).collect();
    let values = lambdas.par_iter().map(|&l| gamma.eval(Some(&p.scale(l as f64)), &eta.scale(l as f64), quad)).collect::<Result<Vec<_>>>()?;
    let comps = vandermonde_solve(&lambdas, &values)?;
    let extra = (d + 2) as f64;
    let direct = gamma.eval(Some(&p.scale(extra)), &eta.scale(extra), quad)?;
    let mut recon = SymTensor::zeros(gamma.n, gamma.rank());
    for (i, c) in comps.iter().enumerate() {
        recon.axpy(extra.powi(i as i32), c)?;
    }
    let defect = direct.max_abs_diff(&recon)? / direct.max_abs().max(1.0);
    Ok((comps, defect))
}

fn cut(r: Result<Polytope>) -> Result<Option<Polytope>> {
    match r {
        Ok(p) => Ok(Some(p)),
        Err(Error::Empty(_)) => Ok(None),
        Err(e) => Err(e),
    }
}

/// `Γ(P∩H⁻) + Γ(P∩H⁺) - Γ(P) - Γ(P∩H)`, with Γ(∅) = 0.
pub fn valuation_defect(gamma: &MappingHandle, p: &Polytope, h: &Halfspace, eta: &TestFunction, quad: &QuadratureSpec) -> Result<SymTensor> {
    let minus = cut(p.intersect_halfspace(h))?;
    let plus = cut(p.intersect_halfspace(&h.flipped()))?;
    let mid = cut(p.intersect_hyperplane(h))?;
    let vals = [minus.as_ref(), plus.as_ref(), Some(p), mid.as_ref()]
        .par_iter()
        .map(|q| gamma.eval(*q, eta, quad))
        .collect::<Result<Vec<_>>>()?;
    vals[0].add(&vals[1])?.sub(&vals[2])?.sub(&vals[3])
}

/// `φ_k^{0,s,1}(P, Σ) - [Q Φ_k^{0,s}(P) - 2π(s+2) Φ_k^{0,s+2}(P)]`.
pub fn mcmullen_global(p: &Polytope, k: usize, s: usize, quad: &QuadratureSpec) -> Result<SymTensor> {
    let n = p.ambient_dim();
    if k == 0 || k + 2 > n {
        return Err(Error::OutOfRange(format!("k = {k} outside 1..=n-2")));
    }
    let lhs = local_tensor(p, &LocalTensorSpec::new(k, 0, s, 1, 0), &TestFunction::Full, quad)?.tensor;
    let a = metric_tensor(n).sym_product(&global_tensor(p, k, 0, s, quad)?)?;
    let b = global_tensor(p, k, 0, s + 2, quad)?;
    let mut rhs = a;
    rhs.axpy(-2.0 * PI * (s + 2) as f64, &b)?;
    lhs.sub(&rhs)
}

// ---------------------------------------------------------------------------
// Linear independence on a fixed probe family.

/// A probe `(P, β × ω)`: a k-dimensional body, an open box around a point of
/// its relative interior, and an open polyhedral cone of normal directions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeSpec {
    pub face_dim: usize,
    pub vertices: Vec<Vec<f64>>,
    pub beta_lo: Vec<f64>,
    pub beta_hi: Vec<f64>,
    pub omega: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeFamily {
    pub version: u32,
    pub n: usize,
    pub seed: u64,
    pub probes: Vec<ProbeSpec>,
}

const GOLDEN_PROBES_N3: &str = include_str!("../data/probes_n3.json");

impl ProbeFamily {
    pub fn golden_n3() -> Result<ProbeFamily> {
        serde_json::from_str(GOLDEN_PROBES_N3).map_err(|e| Error::Format(e.to_string()))
    }

    /// Deterministic family: `per_dim` probes for each face dimension 0..n-1.
    pub fn generate(n: usize, per_dim: usize, seed: u64) -> ProbeFamily {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut probes = Vec::new();
        for k in 0..n {
            for _ in 0..per_dim {
                let rot = Rotation::random(n, &mut rng);
                let frame: Vec<Vec<f64>> = (0..n)
                    .map(|i| {
                        let mut e = vec![0.0; n];
                        e[i] = 1.0;
                        rot.apply(&e)
                    })
                    .collect();
                let center: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let half: f64 = rng.gen_range(0.5..1.0);
                // the body: a k-cube of side 2·half in the span of the first k frame vectors
                let mut vertices = Vec::new();
                for mask in 0usize..1 << k {
                    let mut v = center.clone();
                    for (i, f) in frame.iter().take(k).enumerate() {
                        let sgn = if mask >> i & 1 == 1 { half } else { -half };
                        for (vv, ff) in v.iter_mut().zip(f) {
                            *vv += sgn * ff;
                        }
                    }
                    vertices.push(v);
                }
                // a relative-interior point at distance >= half/2 from the relative boundary
                let mut y = center.clone();
                for f in frame.iter().take(k) {
                    let c: f64 = rng.gen_range(-0.5 * half..0.5 * half);
                    for (yy, ff) in y.iter_mut().zip(f) {
                        *yy += c * ff;
                    }
                }
                let w = 0.2 * half / (n as f64).sqrt();
                let beta_lo: Vec<f64> = y.iter().map(|v| v - w).collect();
                let beta_hi: Vec<f64> = y.iter().map(|v| v + w).collect();
                // a normal direction v in L^⊥ and a cone of half-angle γ around it
                let mut v = vec![0.0; n];
                for f in frame.iter().skip(k) {
                    let c: f64 = rng.gen_range(-1.0..1.0);
                    for (vv, ff) in v.iter_mut().zip(f) {
                        *vv += c * ff;
                    }
                }
                let v = normalize(&v);
                let gamma: f64 = rng.gen_range(0.4..0.9);
                let perp = crate::linalg::complement(n, &[v.clone()]);
                let mut omega = Vec::new();
                for d in &perp {
                    for sgn in [1.0, -1.0] {
                        omega.push(v.iter().zip(d).map(|(a, b)| sgn * b - gamma.tan() * a).collect());
                    }
                }
                probes.push(ProbeSpec { face_dim: k, vertices, beta_lo, beta_hi, omega });
            }
        }
        ProbeFamily { version: 1, n, seed, probes }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("probe family serializes")
    }
}

impl ProbeSpec {
    pub fn polytope(&self) -> Result<Polytope> {
        hull(&self.vertices)
    }

    pub fn test_function(&self) -> Result<TestFunction> {
        Ok(TestFunction::ProductIndicator { beta: Beta::open_box(&self.beta_lo, &self.beta_hi)?, omega: OpenCone { normals: self.omega.clone() } })
    }
}

/// Probe matrix: one column per spec, rows are tensor components over all probes.
pub fn probe_matrix(specs: &[LocalTensorSpec], family: &ProbeFamily, quad: &QuadratureSpec) -> Result<DMatrix<f64>> {
    let blocks = family
        .probes
        .par_iter()
        .map(|pr| {
            let p = pr.polytope()?;
            let eta = pr.test_function()?;
            evaluate_specs(&p, specs, &eta, quad)
        })
        .collect::<Result<Vec<_>>>()?;
    let per = blocks.first().and_then(|b| b.first()).map(|t| t.coeffs().len()).unwrap_or(0);
    let mut m = DMatrix::zeros(per * blocks.len(), specs.len());
    for (b, vals) in blocks.iter().enumerate() {
        for (c, v) in vals.iter().enumerate() {
            for (i, x) in v.coeffs().iter().enumerate() {
                m[(b * per + i, c)] = *x;
            }
        }
    }
    Ok(m)
}

#[derive(Clone, Debug, Serialize)]
pub struct RankReport {
    pub columns: usize,
    pub rank: usize,
    /// Singular values of the column-normalized matrix, divided by the largest.
    pub normalized_singular_values: Vec<f64>,
}

/// Numerical rank of a matrix after scaling its columns to unit length.
pub fn numerical_rank(m: &DMatrix<f64>, rel_tol: f64) -> RankReport {
    let mut a = m.clone();
    for mut col in a.column_iter_mut() {
        let l = col.norm();
        if l > 0.0 {
            col /= l;
        }
    }
    let sv = a.svd(false, false).singular_values;
    let mut vals: Vec<f64> = sv.iter().cloned().collect();
    vals.sort_by(|x, y| y.total_cmp(x));
    let top = vals.first().cloned().unwrap_or(0.0).max(f64::MIN_POSITIVE);
    let normalized: Vec<f64> = vals.iter().map(|v| v / top).collect();
    let rank = normalized.iter().filter(|&&v| v > rel_tol).count();
    RankReport { columns: m.ncols(), rank, normalized_singular_values: normalized }
}

/// Rank of the basis maps of rank p on the probe family.
pub fn independence_rank(p: usize, family: &ProbeFamily, quad: &QuadratureSpec) -> Result<RankReport> {
    let specs = LocalTensorSpec::basis(family.n, p);
    let m = probe_matrix(&specs, family, quad)?;
    Ok(numerical_rank(&m, 1e-9))
}

/// Least-squares coefficients of `target` in the columns of `m`, with the residual norm.
pub fn fit_columns(m: &DMatrix<f64>, target: &DVector<f64>) -> Result<(DVector<f64>, f64)> {
    let svd = m.clone().svd(true, true);
    let x = svd.solve(target, 1e-12).map_err(|e| Error::Numeric(e.to_string()))?;
    let r = (m * &x - target).norm();
    Ok((x, r))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{random_polytope, unit_cube};
    use crate::sphereint::SphereWeight;
    use crate::symtensor::vector_power;
    use approx::assert_abs_diff_eq;

    fn quad() -> QuadratureSpec {
        QuadratureSpec::default()
    }

    fn box_eta() -> TestFunction {
        TestFunction::ProductIndicator {
            beta: Beta::open_box(&[-0.2, -0.1, -0.3], &[0.7, 0.8, 0.6]).unwrap(),
            omega: OpenCone { normals: vec![vec![-0.3, 0.2, -1.0], vec![0.1, -1.0, -0.2]] },
        }
    }

    #[test]
    fn vandermonde_inverse_exact() {
        let inv = vandermonde_inverse(&[1, 2, 3]).unwrap();
        // V = [[1,1,1],[1,2,4],[1,3,9]]
        let v = [[1, 1, 1], [1, 2, 4], [1, 3, 9]];
        for i in 0..3 {
            for j in 0..3 {
                let s: BigRational = (0..3).map(|k| &inv[i][k] * BigRational::from_integer(BigInt::from(v[k][j]))).sum();
                assert_eq!(s, if i == j { BigRational::one() } else { BigRational::zero() });
            }
        }
    }

    #[test]
    fn translation_components_r1() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let p = random_polytope(3, 9, &mut rng);
        let eta = box_eta();
        let g = MappingHandle::single(3, LocalTensorSpec::new(1, 1, 1, 0, 0));
        let t = [0.3, -0.2, 0.1];
        let comps = translation_components(&g, &p, &eta, &t, &quad()).unwrap();
        assert_eq!(comps.len(), 2);
        let base = g.eval(Some(&p), &eta, &quad()).unwrap();
        assert!(comps[0].max_abs_diff(&base).unwrap() < 1e-9);
        let low = local_tensor(&p, &LocalTensorSpec::new(1, 0, 1, 0, 0), &eta, &quad()).unwrap().tensor;
        let expect = low.sym_product(&vector_power(&t, 1)).unwrap();
        assert!(comps[1].max_abs_diff(&expect).unwrap() < 1e-9);
        // the lowest component does not move under a further translation
        let shifted = translation_components(&g, &p.translate(&[0.1, 0.1, 0.0]), &eta.translate(&[0.1, 0.1, 0.0]), &t, &quad()).unwrap();
        assert!(shifted[1].max_abs_diff(&comps[1]).unwrap() < 1e-9);
    }

    #[test]
    fn translation_invariant_single_component() {
        let g = MappingHandle::single(3, LocalTensorSpec::new(2, 0, 2, 0, 0));
        let comps = translation_components(&g, &unit_cube(3), &box_eta(), &[0.2, 0.1, 0.0], &quad()).unwrap();
        assert_eq!(comps.len(), 1);
    }

    #[test]
    fn homogeneity_split() {
        let p = unit_cube(3).translate(&[-0.4, -0.3, -0.2]);
        let g = MappingHandle::combination("sum", 3, vec![(1.0, LocalTensorSpec::new(0, 0, 0, 0, 0)), (1.0, LocalTensorSpec::new(2, 0, 0, 0, 0))]).unwrap();
        let eta = TestFunction::Full;
        let (comps, defect) = homogeneity_components(&g, &p, &eta, &quad()).unwrap();
        assert!(defect < 1e-10);
        assert_abs_diff_eq!(comps[0].value(), 1.0, epsilon = 1e-9);
        assert_abs_diff_eq!(comps[1].value(), 0.0, epsilon = 1e-9);
        assert_abs_diff_eq!(comps[2].value(), 3.0, epsilon = 1e-9);
        let single = MappingHandle::single(3, LocalTensorSpec::new(1, 0, 0, 0, 0));
        let (c1, _) = homogeneity_components(&single, &p, &eta, &quad()).unwrap();
        assert!(c1[0].max_abs() < 1e-9 && c1[2].max_abs() < 1e-9);
        assert_abs_diff_eq!(c1[1].value(), 3.0, epsilon = 1e-9);
    }

    #[test]
    fn valuation_defect_cases() {
        let cube = unit_cube(3);
        let f = SphereWeight::func(|u| 1.0 + 0.5 * u[0] - 0.3 * u[1] * u[2] + 0.2 * u[2] * u[2], 2.0);
        let eta = TestFunction::SphericalWeight(f);
        let g = MappingHandle::single(3, LocalTensorSpec::new(1, 0, 0, 1, 0));
        let mid = Halfspace::new(vec![1.0, 0.0, 0.0], 0.5).unwrap();
        let d = valuation_defect(&g, &cube, &mid, &eta, &quad()).unwrap();
        assert!(d.max_abs() < 1e-8, "{d:?}");
        let miss = Halfspace::new(vec![1.0, 0.0, 0.0], 3.0).unwrap();
        let d = valuation_defect(&g, &cube, &miss, &eta, &quad()).unwrap();
        assert_eq!(d.max_abs(), 0.0);
        let facet = Halfspace::new(vec![0.0, 0.0, 1.0], 1.0).unwrap();
        let d = valuation_defect(&g, &cube, &facet, &eta, &quad()).unwrap();
        assert!(d.max_abs() < 1e-8, "{d:?}");
        let oblique = Halfspace::new(vec![1.0, 1.0, 0.5], 1.1).unwrap();
        let g2 = MappingHandle::single(3, LocalTensorSpec::new(1, 1, 1, 0, 0));
        let d = valuation_defect(&g2, &cube, &oblique, &eta, &quad()).unwrap();
        assert!(d.max_abs() < 1e-8, "{d:?}");
    }

    #[test]
    fn mcmullen_examples() {
        let cube = unit_cube(3);
        let lhs = local_tensor(&cube, &LocalTensorSpec::new(1, 0, 0, 1, 0), &TestFunction::Full, &quad()).unwrap().tensor;
        assert_abs_diff_eq!(lhs.get(&[0, 0]) + lhs.get(&[1, 1]) + lhs.get(&[2, 2]), 3.0, epsilon = 1e-12);
        assert!(mcmullen_global(&cube, 1, 0, &quad()).unwrap().max_abs() < 1e-9);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let simplex = random_polytope(3, 4, &mut rng);
        assert!(mcmullen_global(&simplex, 1, 1, &quad()).unwrap().max_abs() < 1e-8);
        let seg = crate::geometry::segment(vec![0.0, 0.0, 0.0], vec![0.3, 0.4, 1.2]).unwrap();
        assert!(mcmullen_global(&seg, 1, 0, &quad()).unwrap().max_abs() < 1e-9);
        assert!(mcmullen_global(&cube, 2, 0, &quad()).is_err());
    }

    #[test]
    fn golden_probes_match_generator() {
        let g = ProbeFamily::golden_n3().unwrap();
        let fresh = ProbeFamily::generate(g.n, g.probes.len() / g.n, g.seed);
        assert_eq!(g.probes.len(), fresh.probes.len());
        let flat = |p: &ProbeSpec| -> Vec<f64> { p.vertices.iter().chain(&p.omega).flatten().chain(&p.beta_lo).chain(&p.beta_hi).cloned().collect() };
        for (a, b) in g.probes.iter().zip(&fresh.probes) {
            assert_eq!(a.face_dim, b.face_dim);
            for (x, y) in flat(a).iter().zip(flat(b).iter()) {
                assert_abs_diff_eq!(x, y, epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn rank_p0_p1_and_duplicates() {
        let fam = ProbeFamily::golden_n3().unwrap();
        let r0 = independence_rank(0, &fam, &quad()).unwrap();
        assert_eq!((r0.columns, r0.rank), (3, 3));
        let r1 = independence_rank(1, &fam, &quad()).unwrap();
        assert_eq!((r1.columns, r1.rank), (6, 6));
        let mut specs = LocalTensorSpec::basis(3, 1);
        specs.push(specs[2]);
        let m = probe_matrix(&specs, &fam, &quad()).unwrap();
        assert_eq!(numerical_rank(&m, 1e-9).rank, 6);
    }

    #[test]
    fn combination_round_trip() {
        let fam = ProbeFamily::golden_n3().unwrap();
        let specs = LocalTensorSpec::basis(3, 2);
        let m = probe_matrix(&specs, &fam, &quad()).unwrap();
        let coef: Vec<f64> = (0..specs.len()).map(|i| (i as f64 * 0.37).sin()).collect();
        let target = &m * DVector::from_vec(coef.clone());
        let (x, res) = fit_columns(&m, &target).unwrap();
        assert!(res < 1e-8);
        for (a, b) in x.iter().zip(&coef) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-7);
        }
    }

    #[test]
    #[ignore = "rewrites the golden probe file"]
    fn regenerate_golden_probes() {
        let fam = ProbeFamily::generate(3, 8, 20_141);
        std::fs::write(concat!(env!("CARGO_MANIFEST_DIR"), "/data/probes_n3.json"), fam.to_json()).unwrap();
    }
}
