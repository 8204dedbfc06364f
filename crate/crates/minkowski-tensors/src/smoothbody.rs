//! C² convex surfaces in R³ with principal curvatures, and the curvature
//! integrals that give φ_1^{r,s,1} of a smooth body.

use crate::error::{Error, Result};
use crate::linalg::{cross3, dot, norm, scale, sub};
use crate::sphereint::{QuadratureSpec, SphereWeight};
use crate::symtensor::{vector_power, SymTensor};
use crate::valuations::constant_upper_c;
use gauss_quad::legendre::GaussLegendre;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::sync::OnceLock;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum SmoothSurface {
    Ball { radius: f64 },
    /// `K_h = { x : |x'|^2 <= x_3 <= h }`; only the curved part is charted.
    Paraboloid { h: f64 },
    /// Semi-axes a, b, c along e1, e2, e3.
    Ellipsoid { a: f64, b: f64, c: f64 },
}

/// Point, first and second derivatives of a chart at (t, φ).
#[derive(Clone, Debug)]
pub struct ChartPoint {
    pub x: [f64; 3],
    pub xt: [f64; 3],
    pub xp: [f64; 3],
    pub xtt: [f64; 3],
    pub xtp: [f64; 3],
    pub xpp: [f64; 3],
}

#[derive(Clone, Debug)]
pub struct PrincipalData {
    pub k1: f64,
    pub k2: f64,
    pub b1: Vec<f64>,
    pub b2: Vec<f64>,
    pub u: Vec<f64>,
}

impl SmoothSurface {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            SmoothSurface::Ball { radius } => radius > 0.0,
            SmoothSurface::Paraboloid { h } => h > 0.0,
            SmoothSurface::Ellipsoid { a, b, c } => a > 0.0 && b > 0.0 && c > 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidSpec(format!("nonpositive surface parameter in {self:?}")))
        }
    }

    /// Chart domain `[t0, t1] × [0, 2π]`.
    pub fn chart_domain(&self) -> (f64, f64) {
        match *self {
            SmoothSurface::Ball { .. } | SmoothSurface::Ellipsoid { .. } => (0.0, PI),
            SmoothSurface::Paraboloid { h } => (0.0, h.sqrt()),
        }
    }

    fn interior_point(&self) -> [f64; 3] {
        match *self {
            SmoothSurface::Paraboloid { h } => [0.0, 0.0, 0.5 * h],
            _ => [0.0; 3],
        }
    }

    /// Spherical-type chart for ball and ellipsoid (t from the south pole),
    /// polar graph chart for the paraboloid.
    pub fn chart(&self, t: f64, p: f64) -> ChartPoint {
        let (ct, st, cp, sp) = (t.cos(), t.sin(), p.cos(), p.sin());
        match *self {
            SmoothSurface::Ball { radius } => ellipsoid_chart(radius, radius, radius, ct, st, cp, sp),
            SmoothSurface::Ellipsoid { a, b, c } => ellipsoid_chart(a, b, c, ct, st, cp, sp),
            SmoothSurface::Paraboloid { .. } => ChartPoint {
                x: [t * cp, t * sp, t * t],
                xt: [cp, sp, 2.0 * t],
                xp: [-t * sp, t * cp, 0.0],
                xtt: [0.0, 0.0, 2.0],
                xtp: [-sp, cp, 0.0],
                xpp: [-t * cp, -t * sp, 0.0],
            },
        }
    }

    /// Principal curvatures and directions from the fundamental forms.
    pub fn principal_at(&self, t: f64, p: f64) -> Result<PrincipalData> {
        let c = self.chart(t, p);
        principal_from_chart(&c, &self.interior_point())
    }
}

fn ellipsoid_chart(a: f64, b: f64, c: f64, ct: f64, st: f64, cp: f64, sp: f64) -> ChartPoint {
    ChartPoint {
        x: [a * st * cp, b * st * sp, -c * ct],
        xt: [a * ct * cp, b * ct * sp, c * st],
        xp: [-a * st * sp, b * st * cp, 0.0],
        xtt: [-a * st * cp, -b * st * sp, c * ct],
        xtp: [-a * ct * sp, b * ct * cp, 0.0],
        xpp: [-a * st * cp, -b * st * sp, 0.0],
    }
}

fn principal_from_chart(c: &ChartPoint, inner: &[f64; 3]) -> Result<PrincipalData> {
    let n = cross3(&c.xt, &c.xp);
    let area = norm(&n);
    if area < 1e-300 {
        return Err(Error::DegenerateChart("vanishing area element".into()));
    }
    let mut u = scale(&n, 1.0 / area);
    if dot(&u, &sub(&c.x, inner)) < 0.0 {
        u = scale(&u, -1.0);
    }
    let (e, f, g) = (dot(&c.xt, &c.xt), dot(&c.xt, &c.xp), dot(&c.xp, &c.xp));
    // second fundamental form with respect to the inner normal
    let (l, m, nn) = (-dot(&c.xtt, &u), -dot(&c.xtp, &u), -dot(&c.xpp, &u));
    let det_i = e * g - f * f;
    if det_i <= 0.0 {
        return Err(Error::DegenerateChart("singular first fundamental form".into()));
    }
    // shape operator in the orthonormal frame e1 = xt/|xt|, e2 ⟂ e1
    let se = e.sqrt();
    let d = (det_i / e).sqrt();
    let (i11, i21, i22) = (1.0 / se, -f / (se * d), 1.0 / d);
    let s11 = i11 * i11 * l;
    let s12 = i11 * (i21 * l + i22 * m);
    let s22 = i21 * i21 * l + 2.0 * i21 * i22 * m + i22 * i22 * nn;
    let mean = 0.5 * (s11 + s22);
    let rad = (0.5 * (s11 - s22)).hypot(s12);
    let (k1, k2) = (mean - rad, mean + rad);
    // eigenvector of the larger eigenvalue at angle θ in the frame
    let theta = 0.5 * (2.0 * s12).atan2(s11 - s22);
    let e1 = scale(&c.xt, 1.0 / se);
    let e2 = scale(&crate::linalg::axpy(&c.xp.to_vec(), -f / e, &c.xt.to_vec()), 1.0 / d);
    let b2 = crate::linalg::normalize(&crate::linalg::axpy(&scale(&e1, theta.cos()), theta.sin(), &e2));
    let b1 = cross3(&b2, &u).to_vec();
    Ok(PrincipalData { k1, k2, b1, b2, u })
}

fn gl10() -> &'static [(f64, f64)] {
    static RULE: OnceLock<Vec<(f64, f64)>> = OnceLock::new();
    RULE.get_or_init(|| GaussLegendre::new(10.try_into().unwrap()).as_node_weight_pairs().iter().map(|&(x, w)| (0.5 * (x + 1.0), 0.5 * w)).collect())
}

/// Chart rectangle containing the support of f, or an error when f reaches
/// the uncharted part of the surface.
fn integration_domain(surface: &SmoothSurface, f: &SphereWeight) -> Result<(f64, f64)> {
    let (t0, t1) = surface.chart_domain();
    match *surface {
        SmoothSurface::Paraboloid { h } => {
            let cap = f.support_cap().ok_or_else(|| Error::InvalidSpec("weight on the paraboloid cap needs a support cap about -e3".into()))?;
            let down = [0.0, 0.0, -1.0];
            if dot(&cap.axis, &down) < 1.0 - 1e-12 {
                return Err(Error::InvalidSpec("support cap must be centered at -e3".into()));
            }
            // <u, -e3> = 1/sqrt(1+4r^2) > 1 - mu  <=>  r < r_f
            let c = 1.0 - cap.mu;
            if c <= 0.0 {
                return Err(Error::InvalidSpec("weight support escapes the paraboloid chart".into()));
            }
            let rf = ((1.0 / (c * c) - 1.0) / 4.0).sqrt();
            // support must stay below height h/2, away from the rim
            if rf * rf > 0.5 * h {
                return Err(Error::InvalidSpec(format!("weight support reaches height {} above h/2 = {}", rf * rf, 0.5 * h)));
            }
            Ok((0.0, rf.min(t1)))
        }
        _ => Ok((t0, t1)),
    }
}

/// Integrand tensor `f(u) x^r u^s B` at a chart point, with the curvature tensor B supplied.
type CurvatureTensor = fn(&PrincipalData) -> SymTensor;

fn surface_integral(surface: &SmoothSurface, r: usize, s: usize, f: &SphereWeight, quad: &QuadratureSpec, curv: CurvatureTensor) -> Result<(SymTensor, f64)> {
    surface.validate()?;
    quad.validate()?;
    let (t0, t1) = integration_domain(surface, f)?;
    let inner = surface.interior_point();
    let rank = r + s + 2;
    let cell = |a0: f64, a1: f64, p0: f64, p1: f64| -> Result<SymTensor> {
        let mut acc = SymTensor::zeros(3, rank);
        for &(x, wx) in gl10() {
            let t = a0 + (a1 - a0) * x;
            for &(y, wy) in gl10() {
                let p = p0 + (p1 - p0) * y;
                let c = surface.chart(t, p);
                let pd = principal_from_chart(&c, &inner)?;
                let fu = f.eval(&pd.u);
                if fu == 0.0 {
                    continue;
                }
                let da = norm(&cross3(&c.xt, &c.xp));
                let w = wx * wy * (a1 - a0) * (p1 - p0) * da * fu;
                let term = vector_power(&c.x, r).sym_product(&vector_power(&pd.u, s))?.sym_product(&curv(&pd))?;
                acc.axpy(w, &term)?;
            }
        }
        Ok(acc)
    };
    // initial grid, then adaptive refinement by 4-way splitting
    let (nt, np) = (4usize, 8usize);
    let mut cells = Vec::new();
    for i in 0..nt {
        for j in 0..np {
            let (a0, a1) = (t0 + (t1 - t0) * i as f64 / nt as f64, t0 + (t1 - t0) * (i + 1) as f64 / nt as f64);
            let (p0, p1) = (2.0 * PI * j as f64 / np as f64, 2.0 * PI * (j + 1) as f64 / np as f64);
            cells.push((a0, a1, p0, p1, cell(a0, a1, p0, p1)?, 0usize));
        }
    }
    let scale_est = cells.iter().map(|c| c.4.norm()).sum::<f64>().max(1e-300);
    let total_area = (t1 - t0) * 2.0 * PI;
    let tol = quad.rel_tol.max(1e-14) * scale_est;
    let mut total = SymTensor::zeros(3, rank);
    let mut err = 0.0;
    while let Some((a0, a1, p0, p1, coarse, depth)) = cells.pop() {
        let (am, pm) = (0.5 * (a0 + a1), 0.5 * (p0 + p1));
        let kids = [(a0, am, p0, pm), (am, a1, p0, pm), (a0, am, pm, p1), (am, a1, pm, p1)];
        let vals: Vec<SymTensor> = kids.iter().map(|&(b0, b1, q0, q1)| cell(b0, b1, q0, q1)).collect::<Result<_>>()?;
        let mut fine = SymTensor::zeros(3, rank);
        for v in &vals {
            fine.axpy(1.0, v)?;
        }
        let diff = fine.max_abs_diff(&coarse)?;
        let local = tol * (a1 - a0) * (p1 - p0) / total_area;
        if diff <= local || depth >= quad.max_depth {
            total.axpy(1.0, &fine)?;
            err += diff;
        } else {
            for (k, v) in kids.into_iter().zip(vals) {
                cells.push((k.0, k.1, k.2, k.3, v, depth + 1));
            }
        }
    }
    Ok((total, err))
}

fn j1_curvature(pd: &PrincipalData) -> SymTensor {
    vector_power(&pd.b2, 2).scale(pd.k1).add(&vector_power(&pd.b1, 2).scale(pd.k2)).expect("same shape")
}

/// `φ_1^{r,s,1}(K, f) = C_{3,1}^{r,s} ∫_{∂K} f(u_x) x^r u_x^s (k_1 b_2^2 + k_2 b_1^2) dH^2`.
pub fn phi_j1_smooth(surface: &SmoothSurface, r: usize, s: usize, f: &SphereWeight, quad: &QuadratureSpec) -> Result<(SymTensor, f64)> {
    let c = constant_upper_c(3, 1, r, s)?;
    let (t, e) = surface_integral(surface, r, s, f, quad, j1_curvature)?;
    Ok((t.scale(c), e * c))
}

/// The general-k curvature form `Σ_i b_i^2 Σ_{|I| = n-1-k, i ∉ I} Π_{l∈I} k_l`, in R³.
pub fn phi_general_curvature(surface: &SmoothSurface, k: usize, r: usize, s: usize, f: &SphereWeight, quad: &QuadratureSpec) -> Result<(SymTensor, f64)> {
    if k != 1 {
        return Err(Error::Unsupported(format!("curvature form for n = 3, k = {k}")));
    }
    fn general(pd: &PrincipalData) -> SymTensor {
        let n = 3usize;
        let k = 1usize;
        let ks = [pd.k1, pd.k2];
        let bs = [&pd.b1, &pd.b2];
        let size = n - 1 - k;
        let mut out = SymTensor::zeros(3, 2);
        for i in 0..n - 1 {
            let mut sym = 0.0;
            for mask in 0usize..(1 << (n - 1)) {
                if mask.count_ones() as usize != size || mask >> i & 1 == 1 {
                    continue;
                }
                sym += (0..n - 1).filter(|l| mask >> l & 1 == 1).map(|l| ks[l]).product::<f64>();
            }
            out.axpy(sym, &vector_power(bs[i], 2)).expect("same shape");
        }
        out
    }
    let c = constant_upper_c(3, k, r, s)?;
    let (t, e) = surface_integral(surface, r, s, f, quad, general)?;
    Ok((t.scale(c), e * c))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sphereint::Cap;
    use crate::symtensor::{metric_tensor, Rotation};
    use crate::valuations::rotate_weight;
    use approx::assert_abs_diff_eq;

    fn quad() -> QuadratureSpec {
        QuadratureSpec { rel_tol: 1e-10, max_depth: 8, ..Default::default() }
    }

    #[test]
    fn sphere_curvatures() {
        let s = SmoothSurface::Ball { radius: 1.0 };
        for (t, p) in [(0.3, 1.0), (1.5, 4.0), (2.9, 0.1)] {
            let pd = s.principal_at(t, p).unwrap();
            assert_abs_diff_eq!(pd.k1, 1.0, epsilon = 1e-12);
            assert_abs_diff_eq!(pd.k2, 1.0, epsilon = 1e-12);
            assert_abs_diff_eq!(dot(&pd.b1, &pd.b2), 0.0, epsilon = 1e-12);
            assert_abs_diff_eq!(dot(&pd.b1, &pd.u), 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn paraboloid_apex_and_profile() {
        let s = SmoothSurface::Paraboloid { h: 1.0 };
        let pd = s.principal_at(1e-6, 0.4).unwrap();
        assert_abs_diff_eq!(pd.k1, 2.0, epsilon = 1e-9);
        assert_abs_diff_eq!(pd.k2, 2.0, epsilon = 1e-9);
        assert!(pd.u[2] < 0.0);
        let r: f64 = 0.4;
        let pd = s.principal_at(r, 1.1).unwrap();
        let merid = 2.0 / (1.0 + 4.0 * r * r).powf(1.5);
        let circ = 2.0 / (1.0 + 4.0 * r * r).sqrt();
        assert_abs_diff_eq!(pd.k1, merid, epsilon = 1e-12);
        assert_abs_diff_eq!(pd.k2, circ, epsilon = 1e-12);
    }

    #[test]
    fn ellipsoid_pole() {
        let s = SmoothSurface::Ellipsoid { a: 2.0, b: 2.0, c: 3.0 };
        let pd = s.principal_at(PI - 1e-6, 0.2).unwrap();
        assert_abs_diff_eq!(pd.k1, 3.0 / 4.0, epsilon = 1e-8);
        assert_abs_diff_eq!(pd.k2, 3.0 / 4.0, epsilon = 1e-8);
    }

    #[test]
    fn ball_value() {
        let rad = 1.7;
        let s = SmoothSurface::Ball { radius: rad };
        let (v, _) = phi_j1_smooth(&s, 0, 0, &SphereWeight::One, &quad()).unwrap();
        let expect = metric_tensor(3).scale(4.0 * rad / 3.0);
        assert!(v.max_abs_diff(&expect).unwrap() < 1e-9, "{v:?}");
        let (g, _) = phi_general_curvature(&s, 1, 0, 0, &SphereWeight::One, &quad()).unwrap();
        assert!(g.max_abs_diff(&v).unwrap() < 1e-12);
    }

    #[test]
    fn odd_moment_vanishes_on_symmetric_body() {
        let s = SmoothSurface::Ellipsoid { a: 1.0, b: 1.5, c: 0.7 };
        let (v, _) = phi_j1_smooth(&s, 0, 1, &SphereWeight::One, &quad()).unwrap();
        assert!(v.max_abs() < 1e-9);
    }

    #[test]
    fn zero_weight() {
        let s = SmoothSurface::Ball { radius: 1.0 };
        let (v, _) = phi_general_curvature(&s, 1, 1, 0, &SphereWeight::func(|_| 0.0, 0.0), &quad()).unwrap();
        assert_eq!(v.max_abs(), 0.0);
    }

    #[test]
    fn paraboloid_support_check() {
        let s = SmoothSurface::Paraboloid { h: 0.1 };
        assert!(phi_j1_smooth(&s, 0, 0, &SphereWeight::One, &quad()).is_err());
        let wide = SphereWeight::Bump(Cap::new(vec![0.0, 0.0, -1.0], 0.5).unwrap());
        assert!(phi_j1_smooth(&s, 0, 0, &wide, &quad()).is_err());
        let ok = SphereWeight::Bump(Cap::new(vec![0.0, 0.0, -1.0], 0.03).unwrap());
        let (v, _) = phi_j1_smooth(&s, 0, 0, &ok, &quad()).unwrap();
        assert!(v.max_abs() > 0.0);
    }

    #[test]
    fn rotation_covariance_about_axis() {
        let s = SmoothSurface::Ellipsoid { a: 1.2, b: 1.2, c: 0.8 };
        let f = SphereWeight::func(|u| (1.0 + u[0] + 0.5 * u[1] * u[2]).max(0.0), 2.5);
        let rot = Rotation::plane(3, 0, 1, 0.7);
        let (v, _) = phi_j1_smooth(&s, 1, 1, &f, &quad()).unwrap();
        let (w, _) = phi_j1_smooth(&s, 1, 1, &rotate_weight(&f, &rot), &quad()).unwrap();
        assert!(v.rotate(&rot).unwrap().max_abs_diff(&w).unwrap() < 1e-7);
    }
}
