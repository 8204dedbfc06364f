//! Identity checks on a fixed set of bodies, reported as a pass/fail table.

use minkowski_tensors::error::Result;
use minkowski_tensors::geometry::{hull, segment, unit_cube, Halfspace, Polytope};
use minkowski_tensors::identities::{homogeneity_components, independence_rank, mcmullen_global, translation_components, valuation_defect, MappingHandle, ProbeFamily};
use minkowski_tensors::sphereint::{OpenCone, QuadratureSpec, SphereWeight};
use minkowski_tensors::symtensor::{factorial, metric_tensor, vector_power};
use minkowski_tensors::valuations::{local_tensor, Beta, LocalTensorSpec, TestFunction};
use rayon::prelude::*;
use serde::Serialize;

#[derive(Clone, Copy, Debug, Default)]
pub struct Scope {
    pub translation: bool,
    pub homogeneity: bool,
    pub valuation: bool,
    pub independence: bool,
    pub mcmullen: bool,
}

impl Scope {
    pub fn all() -> Scope {
        Scope { translation: true, homogeneity: true, valuation: true, independence: true, mcmullen: true }
    }

    pub fn is_empty(&self) -> bool {
        !(self.translation || self.homogeneity || self.valuation || self.independence || self.mcmullen)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Row {
    pub check: &'static str,
    pub case: String,
    pub mapping: String,
    pub defect: f64,
    pub tolerance: f64,
    pub status: &'static str,
}

fn row(check: &'static str, case: &str, mapping: String, defect: f64, tolerance: f64) -> Row {
    let status = if defect <= tolerance { "PASS" } else { "FAIL" };
    Row { check, case: case.into(), mapping, defect, tolerance, status }
}

fn bodies() -> Vec<(&'static str, Polytope)> {
    let tetra = hull(&[vec![0.1, 0.0, -0.2], vec![1.2, 0.1, 0.0], vec![0.3, 0.9, 0.1], vec![0.2, 0.3, 1.1]]).expect("tetrahedron");
    vec![
        ("cube", unit_cube(3)),
        ("tetrahedron", tetra),
        ("segment", segment(vec![-0.2, 0.1, 0.0], vec![0.6, 0.5, 0.7]).expect("segment")),
    ]
}

fn smooth_weight() -> SphereWeight {
    SphereWeight::func(|u| 1.0 + 0.4 * u[0] - 0.3 * u[1] * u[2] + 0.25 * u[2] * u[2] * u[0], 2.0)
}

fn window() -> TestFunction {
    TestFunction::ProductIndicator {
        beta: Beta::open_box(&[-0.3, -0.2, -0.4], &[0.8, 0.7, 0.75]).expect("box"),
        omega: OpenCone { normals: vec![vec![-0.2, 0.3, -1.0]] },
    }
}

fn translation_rows(specs: &[LocalTensorSpec], quad: &QuadratureSpec) -> Result<Vec<Row>> {
    let t = [0.3, -0.15, 0.2];
    let eta = window();
    let cases: Vec<_> = bodies().into_iter().flat_map(|(name, p)| specs.iter().filter(|s| s.r > 0).map(move |s| (name, p.clone(), *s))).collect();
    cases
        .par_iter()
        .map(|(name, p, s)| {
            let g = MappingHandle::single(3, *s);
            let comps = translation_components(&g, p, &eta, &t, quad)?;
            let mut defect: f64 = 0.0;
            let mut scale: f64 = 1.0;
            for (j, c) in comps.iter().enumerate() {
                let low = LocalTensorSpec { r: s.r - j, ..*s };
                let direct = local_tensor(p, &low, &eta, quad)?.tensor.sym_product(&vector_power(&t, j))?.scale(1.0 / factorial(j));
                defect = defect.max(c.max_abs_diff(&direct)?);
                scale = scale.max(direct.max_abs());
            }
            Ok(row("translation", name, s.to_string(), defect / scale, 1e-8))
        })
        .collect()
}

fn homogeneity_rows(specs: &[LocalTensorSpec], quad: &QuadratureSpec) -> Result<Vec<Row>> {
    let eta = window();
    let cases: Vec<_> = bodies().into_iter().flat_map(|(name, p)| specs.iter().map(move |s| (name, p.clone(), *s))).collect();
    cases
        .par_iter()
        .map(|(name, p, s)| {
            let g = MappingHandle::single(3, *s);
            let (comps, fit) = homogeneity_components(&g, p, &eta, quad)?;
            let whole = g.eval(Some(p), &eta, quad)?;
            let scale = whole.max_abs().max(1.0);
            let mut defect = fit;
            for (i, c) in comps.iter().enumerate() {
                let d = if i == s.k + s.r { c.max_abs_diff(&whole)? } else { c.max_abs() };
                defect = defect.max(d / scale);
            }
            Ok(row("homogeneity", name, s.to_string(), defect, 1e-8))
        })
        .collect()
}

fn valuation_rows(specs: &[LocalTensorSpec], quad: &QuadratureSpec) -> Result<Vec<Row>> {
    let f = TestFunction::SphericalWeight(smooth_weight());
    let cube = unit_cube(3);
    let planes = [
        ("cube|x1=1/2", Halfspace::new(vec![1.0, 0.0, 0.0], 0.5)?),
        ("cube|facet", Halfspace::new(vec![0.0, 0.0, 1.0], 1.0)?),
        ("cube|vertex", Halfspace::new(vec![1.0, 1.0, 1.0], 0.0)?),
        ("cube|oblique", Halfspace::new(vec![0.7, -0.4, 0.5], 0.3)?),
        ("cube|miss", Halfspace::new(vec![1.0, 0.0, 0.0], 2.0)?),
    ];
    let cases: Vec<_> = planes.iter().flat_map(|(name, h)| specs.iter().map(move |s| (*name, h, *s))).collect();
    cases
        .par_iter()
        .map(|(name, h, s)| {
            let g = MappingHandle::single(3, *s);
            let d = valuation_defect(&g, &cube, h, &f, quad)?;
            Ok(row("valuation", name, s.to_string(), d.max_abs(), 1e-8))
        })
        .collect()
}

fn independence_rows(quad: &QuadratureSpec) -> Result<Vec<Row>> {
    let fam = ProbeFamily::golden_n3()?;
    (0..=2)
        .map(|p| {
            let r = independence_rank(p, &fam, quad)?;
            let smallest = r.normalized_singular_values.last().cloned().unwrap_or(0.0);
            let mut out = row("independence", &format!("p={p}"), format!("{} basis maps, rank {}", r.columns, r.rank), (r.columns - r.rank) as f64, 0.0);
            if smallest <= 1e-6 {
                out.status = "FAIL";
            }
            Ok(out)
        })
        .collect()
}

fn mcmullen_rows(quad: &QuadratureSpec) -> Result<Vec<Row>> {
    let mut out = Vec::new();
    for (name, p) in bodies() {
        for s in 0..=2 {
            let d = mcmullen_global(&p, 1, s, quad)?;
            out.push(row("mcmullen", name, format!("k=1,s={s}"), d.max_abs(), 1e-8));
        }
    }
    Ok(out)
}

pub fn run(scope: Scope, quad: &QuadratureSpec) -> Result<Vec<Row>> {
    let specs: Vec<LocalTensorSpec> = (0..=2).flat_map(|p| LocalTensorSpec::basis(3, p)).collect();
    let mut rows = Vec::new();
    if scope.translation {
        rows.extend(translation_rows(&specs, quad)?);
    }
    if scope.homogeneity {
        rows.extend(homogeneity_rows(&specs, quad)?);
    }
    if scope.valuation {
        rows.extend(valuation_rows(&specs, quad)?);
    }
    if scope.independence {
        rows.extend(independence_rows(quad)?);
    }
    if scope.mcmullen {
        rows.extend(mcmullen_rows(quad)?);
        // the worked cube value: trace of φ_1^{0,0,1}(cube) is 3
        let v = local_tensor(&unit_cube(3), &LocalTensorSpec::new(1, 0, 0, 1, 0), &TestFunction::Full, quad)?.tensor;
        let q = metric_tensor(3);
        let trace: f64 = (0..3).map(|i| v.get(&[i, i]) * q.get(&[i, i])).sum();
        rows.push(row("mcmullen", "cube", "trace of phi_1^(0,0,1)".into(), (trace - 3.0).abs(), 1e-9));
    }
    Ok(rows)
}
