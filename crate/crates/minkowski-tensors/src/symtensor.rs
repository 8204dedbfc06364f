//! Symmetric tensors on R^n.
//!
//! A rank-p tensor is stored by its components on weakly increasing
//! multi-indices `i_1 <= ... <= i_p`, so symmetry holds by construction.
//! The component at `alpha` is the value `T(e_{alpha_1}, ..., e_{alpha_p})`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Binomial coefficient as f64 (exact for the small arguments used here).
pub fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    let mut acc = 1.0;
    for i in 0..k {
        acc = acc * (n - i) as f64 / (i + 1) as f64;
    }
    acc.round()
}

pub fn factorial(n: usize) -> f64 {
    (1..=n).fold(1.0, |acc, i| acc * i as f64)
}

/// Number of weakly increasing multi-indices of length `p` over `n` values.
pub fn component_count(n: usize, p: usize) -> usize {
    if p == 0 {
        return 1;
    }
    binomial(n + p - 1, p) as usize
}

/// All weakly increasing multi-indices of length `p` over `0..n`, in lex order.
pub fn multi_indices(n: usize, p: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::with_capacity(component_count(n, p));
    let mut cur = vec![0usize; p];
    fn rec(n: usize, pos: usize, start: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if pos == cur.len() {
            out.push(cur.clone());
            return;
        }
        for v in start..n {
            cur[pos] = v;
            rec(n, pos + 1, v, cur, out);
        }
    }
    rec(n, 0, 0, &mut cur, &mut out);
    out
}

/// Position of a weakly increasing multi-index in lex order.
fn index_of(n: usize, alpha: &[usize]) -> usize {
    let p = alpha.len();
    let mut idx = 0usize;
    let mut prev = 0usize;
    for (i, &a) in alpha.iter().enumerate() {
        let rest = p - i - 1;
        for v in prev..a {
            idx += component_count(n - v, rest);
        }
        prev = a;
    }
    idx
}

/// Number of distinct orderings of a multi-index.
fn multiplicity(alpha: &[usize]) -> f64 {
    let mut m = factorial(alpha.len());
    let mut i = 0;
    while i < alpha.len() {
        let mut j = i;
        while j < alpha.len() && alpha[j] == alpha[i] {
            j += 1;
        }
        m /= factorial(j - i);
        i = j;
    }
    m
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymTensor {
    dimension: usize,
    rank: usize,
    coeffs: Vec<f64>,
}

impl SymTensor {
    pub fn zeros(dimension: usize, rank: usize) -> Self {
        SymTensor { dimension, rank, coeffs: vec![0.0; component_count(dimension, rank)] }
    }

    pub fn scalar(dimension: usize, value: f64) -> Self {
        SymTensor { dimension, rank: 0, coeffs: vec![value] }
    }

    pub fn from_coeffs(dimension: usize, rank: usize, coeffs: Vec<f64>) -> Result<Self> {
        let want = component_count(dimension, rank);
        if coeffs.len() != want {
            return Err(Error::DimensionMismatch { expected: want, got: coeffs.len() });
        }
        Ok(SymTensor { dimension, rank, coeffs })
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [f64] {
        &mut self.coeffs
    }

    /// Component at an arbitrary (not necessarily sorted) multi-index.
    pub fn get(&self, alpha: &[usize]) -> f64 {
        let mut a = alpha.to_vec();
        a.sort_unstable();
        self.coeffs[index_of(self.dimension, &a)]
    }

    pub fn set(&mut self, alpha: &[usize], value: f64) {
        let mut a = alpha.to_vec();
        a.sort_unstable();
        let i = index_of(self.dimension, &a);
        self.coeffs[i] = value;
    }

    /// Value of a rank-0 tensor.
    pub fn value(&self) -> f64 {
        debug_assert_eq!(self.rank, 0);
        self.coeffs[0]
    }

    pub fn multi_indices(&self) -> Vec<Vec<usize>> {
        multi_indices(self.dimension, self.rank)
    }

    /// Text form: `dimension n`, `rank p`, then one `i1 i2 ... ip: value`
    /// line per sorted multi-index (a bare `: value` for rank 0).
    pub fn to_text(&self) -> String {
        let mut out = format!("dimension {}\nrank {}\n", self.dimension, self.rank);
        for (alpha, v) in self.multi_indices().iter().zip(&self.coeffs) {
            let idx: Vec<String> = alpha.iter().map(|i| i.to_string()).collect();
            out.push_str(&format!("{}: {:e}\n", idx.join(" "), v));
        }
        out
    }

    pub fn from_text(text: &str) -> Result<SymTensor> {
        let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#'));
        let mut header = |key: &str| -> Result<usize> {
            let line = lines.next().ok_or_else(|| Error::Format(format!("missing `{key}` line")))?;
            line.strip_prefix(key)
                .and_then(|v| v.trim().parse().ok())
                .ok_or_else(|| Error::Format(format!("expected `{key} <integer>`, got `{line}`")))
        };
        let dimension = header("dimension")?;
        let rank = header("rank")?;
        let mut t = SymTensor::zeros(dimension, rank);
        let mut seen = vec![false; t.coeffs.len()];
        for line in lines {
            let (idx, val) = line.split_once(':').ok_or_else(|| Error::Format(format!("expected `indices: value`, got `{line}`")))?;
            let alpha: Vec<usize> = idx
                .split_whitespace()
                .map(|s| s.parse::<usize>().ok().filter(|&i| i < dimension))
                .collect::<Option<_>>()
                .ok_or_else(|| Error::Format(format!("bad multi-index `{idx}`")))?;
            if alpha.len() != rank {
                return Err(Error::Format(format!("multi-index `{idx}` has length {} but rank is {rank}", alpha.len())));
            }
            let v: f64 = val.trim().parse().map_err(|_| Error::Format(format!("bad value `{}`", val.trim())))?;
            let mut a = alpha;
            a.sort_unstable();
            let i = index_of(dimension, &a);
            if seen[i] {
                return Err(Error::Format(format!("multi-index `{idx}` repeated")));
            }
            seen[i] = true;
            t.coeffs[i] = v;
        }
        Ok(t)
    }

    fn check_same(&self, other: &SymTensor) -> Result<()> {
        if self.dimension != other.dimension {
            return Err(Error::DimensionMismatch { expected: self.dimension, got: other.dimension });
        }
        if self.rank != other.rank {
            return Err(Error::ArityMismatch { rank: self.rank, got: other.rank });
        }
        Ok(())
    }

    pub fn add(&self, other: &SymTensor) -> Result<SymTensor> {
        self.check_same(other)?;
        let coeffs = self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a + b).collect();
        Ok(SymTensor { dimension: self.dimension, rank: self.rank, coeffs })
    }

    pub fn sub(&self, other: &SymTensor) -> Result<SymTensor> {
        self.check_same(other)?;
        let coeffs = self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a - b).collect();
        Ok(SymTensor { dimension: self.dimension, rank: self.rank, coeffs })
    }

    /// `self += c * other`.
    pub fn axpy(&mut self, c: f64, other: &SymTensor) -> Result<()> {
        self.check_same(other)?;
        for (a, b) in self.coeffs.iter_mut().zip(&other.coeffs) {
            *a += c * b;
        }
        Ok(())
    }

    pub fn scale(&self, c: f64) -> SymTensor {
        SymTensor {
            dimension: self.dimension,
            rank: self.rank,
            coeffs: self.coeffs.iter().map(|a| a * c).collect(),
        }
    }

    /// Frobenius norm of the full (unsymmetrized) array.
    pub fn norm(&self) -> f64 {
        multi_indices(self.dimension, self.rank)
            .iter()
            .zip(&self.coeffs)
            .map(|(a, c)| multiplicity(a) * c * c)
            .sum::<f64>()
            .sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.coeffs.iter().fold(0.0f64, |m, c| m.max(c.abs()))
    }

    pub fn max_abs_diff(&self, other: &SymTensor) -> Result<f64> {
        self.check_same(other)?;
        Ok(self.coeffs.iter().zip(&other.coeffs).fold(0.0f64, |m, (a, b)| m.max((a - b).abs())))
    }

    /// Multilinear evaluation `T(v_1, ..., v_p)`.
    pub fn evaluate(&self, args: &[&[f64]]) -> Result<f64> {
        if args.len() != self.rank {
            return Err(Error::ArityMismatch { rank: self.rank, got: args.len() });
        }
        for a in args {
            if a.len() != self.dimension {
                return Err(Error::DimensionMismatch { expected: self.dimension, got: a.len() });
            }
        }
        let mut idx = vec![0usize; self.rank];
        Ok(self.eval_rec(args, 0, 1.0, &mut idx))
    }

    fn eval_rec(&self, args: &[&[f64]], pos: usize, w: f64, idx: &mut Vec<usize>) -> f64 {
        if pos == args.len() {
            return w * self.get(idx);
        }
        let mut acc = 0.0;
        for i in 0..self.dimension {
            let c = args[pos][i];
            if c == 0.0 {
                continue;
            }
            idx[pos] = i;
            acc += self.eval_rec(args, pos + 1, w * c, idx);
        }
        acc
    }

    /// Evaluation with the same vector in every slot, `T(x, ..., x)`.
    pub fn evaluate_diag(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dimension {
            return Err(Error::DimensionMismatch { expected: self.dimension, got: x.len() });
        }
        Ok(multi_indices(self.dimension, self.rank)
            .iter()
            .zip(&self.coeffs)
            .map(|(a, c)| multiplicity(a) * c * a.iter().map(|&i| x[i]).product::<f64>())
            .sum())
    }

    /// Symmetric tensor product `self ⊙ other`.
    pub fn sym_product(&self, other: &SymTensor) -> Result<SymTensor> {
        if self.dimension != other.dimension {
            return Err(Error::DimensionMismatch { expected: self.dimension, got: other.dimension });
        }
        let (p, q) = (self.rank, other.rank);
        if p == 0 {
            return Ok(other.scale(self.coeffs[0]));
        }
        if q == 0 {
            return Ok(self.scale(other.coeffs[0]));
        }
        let n = self.dimension;
        let subsets = subsets_of_size(p + q, p);
        let norm = 1.0 / binomial(p + q, p);
        let indices = multi_indices(n, p + q);
        let mut coeffs = Vec::with_capacity(indices.len());
        let mut a = vec![0usize; p];
        let mut b = vec![0usize; q];
        for gamma in &indices {
            let mut acc = 0.0;
            for s in &subsets {
                let (mut ia, mut ib) = (0, 0);
                for (pos, &g) in gamma.iter().enumerate() {
                    if s & (1 << pos) != 0 {
                        a[ia] = g;
                        ia += 1;
                    } else {
                        b[ib] = g;
                        ib += 1;
                    }
                }
                // gamma is sorted, so both parts are sorted already
                acc += self.coeffs[index_of(n, &a)] * other.coeffs[index_of(n, &b)];
            }
            coeffs.push(acc * norm);
        }
        Ok(SymTensor { dimension: n, rank: p + q, coeffs })
    }

    /// `self^m` under the symmetric product; `T^0` is the scalar 1.
    pub fn power(&self, m: usize) -> SymTensor {
        let mut out = SymTensor::scalar(self.dimension, 1.0);
        for _ in 0..m {
            out = out.sym_product(self).expect("same dimension");
        }
        out
    }

    /// Full n^p array in row-major order over (i_1, ..., i_p).
    pub fn to_full(&self) -> Vec<f64> {
        let n = self.dimension;
        let total = n.pow(self.rank as u32);
        let mut out = vec![0.0; total];
        let mut idx = vec![0usize; self.rank];
        for (flat, slot) in out.iter_mut().enumerate() {
            let mut r = flat;
            for k in (0..self.rank).rev() {
                idx[k] = r % n;
                r /= n;
            }
            *slot = self.get(&idx);
        }
        out
    }

    /// Reads the sorted components out of a full array (assumed symmetric).
    pub fn from_full(dimension: usize, rank: usize, full: &[f64]) -> SymTensor {
        let n = dimension;
        let coeffs = multi_indices(n, rank)
            .iter()
            .map(|a| {
                let flat = a.iter().fold(0usize, |acc, &i| acc * n + i);
                full[flat]
            })
            .collect();
        SymTensor { dimension, rank, coeffs }
    }

    /// Action of an orthogonal map: `(ϑT)(x_1..x_p) = T(ϑ^{-1}x_1, ..., ϑ^{-1}x_p)`.
    pub fn rotate(&self, rot: &Rotation) -> Result<SymTensor> {
        let n = self.dimension;
        if rot.dimension() != n {
            return Err(Error::DimensionMismatch { expected: n, got: rot.dimension() });
        }
        if self.rank == 0 {
            return Ok(self.clone());
        }
        // components transform as T'_{i..} = Σ ϑ_{i a} ... T_{a..}
        let m = &rot.matrix;
        let mut full = self.to_full();
        let p = self.rank;
        for mode in 0..p {
            let stride = n.pow((p - 1 - mode) as u32);
            let mut next = vec![0.0; full.len()];
            for (flat, slot) in next.iter_mut().enumerate() {
                let i = (flat / stride) % n;
                let base = flat - i * stride;
                let mut acc = 0.0;
                for a in 0..n {
                    acc += m[(i, a)] * full[base + a * stride];
                }
                *slot = acc;
            }
            full = next;
        }
        Ok(SymTensor::from_full(n, p, &full))
    }
}

fn subsets_of_size(total: usize, size: usize) -> Vec<u32> {
    (0u32..(1u32 << total)).filter(|s| s.count_ones() as usize == size).collect()
}

/// `x^r`; `x^0` is the scalar 1 for every x, including x = 0.
pub fn vector_power(x: &[f64], r: usize) -> SymTensor {
    let n = x.len();
    let coeffs = multi_indices(n, r).iter().map(|a| a.iter().map(|&i| x[i]).product()).collect();
    SymTensor { dimension: n, rank: r, coeffs }
}

/// The metric tensor Q.
pub fn metric_tensor(n: usize) -> SymTensor {
    let mut t = SymTensor::zeros(n, 2);
    for i in 0..n {
        t.set(&[i, i], 1.0);
    }
    t
}

/// Q_L for the subspace spanned by an orthonormal basis.
pub fn projection_tensor(n: usize, basis: &[Vec<f64>]) -> Result<SymTensor> {
    for b in basis {
        if b.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: b.len() });
        }
    }
    let mut dev = 0.0f64;
    for (i, a) in basis.iter().enumerate() {
        for (j, b) in basis.iter().enumerate() {
            let d: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
            let want = if i == j { 1.0 } else { 0.0 };
            dev = dev.max((d - want).abs());
        }
    }
    if dev > 1e-10 {
        return Err(Error::NotOrthonormal(dev));
    }
    let mut t = SymTensor::zeros(n, 2);
    for i in 0..n {
        for j in i..n {
            let v: f64 = basis.iter().map(|b| b[i] * b[j]).sum();
            t.set(&[i, j], v);
        }
    }
    Ok(t)
}

/// An orthogonal n×n matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Rotation {
    matrix: DMatrix<f64>,
}

impl Rotation {
    pub fn new(matrix: DMatrix<f64>) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() {
            return Err(Error::DimensionMismatch { expected: matrix.nrows(), got: matrix.ncols() });
        }
        let n = matrix.nrows();
        let dev = (matrix.transpose() * &matrix - DMatrix::identity(n, n)).amax();
        if dev > 1e-12 {
            return Err(Error::NotOrthogonal(dev));
        }
        Ok(Rotation { matrix })
    }

    pub fn identity(n: usize) -> Self {
        Rotation { matrix: DMatrix::identity(n, n) }
    }

    /// Rotation by `angle` in the oriented plane spanned by `e_i, e_j`.
    pub fn plane(n: usize, i: usize, j: usize, angle: f64) -> Self {
        let mut m = DMatrix::identity(n, n);
        let (s, c) = angle.sin_cos();
        m[(i, i)] = c;
        m[(j, j)] = c;
        m[(i, j)] = -s;
        m[(j, i)] = s;
        Rotation { matrix: m }
    }

    /// Haar-random orthogonal matrix (QR of a Gaussian matrix with sign fix).
    pub fn random<R: rand::Rng>(n: usize, rng: &mut R) -> Self {
        use rand::distributions::Distribution;
        let normal = rand::distributions::Standard;
        let g = DMatrix::from_fn(n, n, |_, _| {
            // Box-Muller keeps the dependency list short
            let u1: f64 = normal.sample(rng);
            let u2: f64 = normal.sample(rng);
            (-2.0 * (1.0 - u1).ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
        });
        let qr = g.qr();
        let mut q = qr.q();
        let r = qr.r();
        for k in 0..n {
            if r[(k, k)] < 0.0 {
                for i in 0..n {
                    q[(i, k)] = -q[(i, k)];
                }
            }
        }
        Rotation { matrix: q }
    }

    pub fn dimension(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let n = self.dimension();
        (0..n).map(|i| (0..n).map(|j| self.matrix[(i, j)] * x[j]).sum()).collect()
    }

    pub fn inverse(&self) -> Rotation {
        Rotation { matrix: self.matrix.transpose() }
    }

    /// `self ∘ other`.
    pub fn compose(&self, other: &Rotation) -> Rotation {
        Rotation { matrix: &self.matrix * &other.matrix }
    }
}
