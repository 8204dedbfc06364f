//! Parsers for the `name:key=value,...` body, surface and weight arguments.

use minkowski_tensors::error::{Error, Result};
use minkowski_tensors::geometry::{cuboid, geodesic_sphere, hull, random_polytope, regular_polygon, segment, Polytope, PolytopeFile};
use minkowski_tensors::smoothbody::SmoothSurface;
use minkowski_tensors::sphereint::{Cap, OpenCone, SphereWeight};
use minkowski_tensors::valuations::{Beta, TestFunction};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeMap;

/// `name` or `name:key=value,key=value`.
pub struct Item {
    pub name: String,
    params: BTreeMap<String, String>,
}

impl Item {
    pub fn parse(text: &str) -> Result<Item> {
        let (name, rest) = text.split_once(':').unwrap_or((text, ""));
        let mut params = BTreeMap::new();
        for kv in rest.split(',').filter(|s| !s.trim().is_empty()) {
            let (k, v) = kv.split_once('=').ok_or_else(|| Error::Config(format!("expected key=value, got `{kv}`")))?;
            params.insert(k.trim().to_string(), v.trim().to_string());
        }
        Ok(Item { name: name.trim().to_lowercase(), params })
    }

    pub fn num(&self, key: &str, default: f64) -> Result<f64> {
        match self.params.get(key) {
            None => Ok(default),
            Some(v) => v.parse().map_err(|_| Error::Config(format!("{}: `{key}={v}` is not a number", self.name))),
        }
    }

    pub fn int(&self, key: &str, default: usize) -> Result<usize> {
        match self.params.get(key) {
            None => Ok(default),
            Some(v) => v.parse().map_err(|_| Error::Config(format!("{}: `{key}={v}` is not a non-negative integer", self.name))),
        }
    }

    /// Semicolon-separated vector.
    pub fn vector(&self, key: &str) -> Result<Option<Vec<f64>>> {
        let Some(v) = self.params.get(key) else { return Ok(None) };
        v.split(';')
            .map(|x| x.trim().parse::<f64>().map_err(|_| Error::Config(format!("{}: bad vector `{key}={v}`", self.name))))
            .collect::<Result<Vec<_>>>()
            .map(Some)
    }

    fn only(&self, keys: &[&str]) -> Result<()> {
        match self.params.keys().find(|k| !keys.contains(&k.as_str())) {
            Some(k) => Err(Error::Config(format!("{}: unknown parameter `{k}` (allowed: {})", self.name, keys.join(", ")))),
            None => Ok(()),
        }
    }
}

fn pos(name: &str, v: f64) -> Result<f64> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(Error::Config(format!("{name} must be positive, got {v}")))
    }
}

/// Built-in polytopes in R^n.
pub fn body(text: &str, n: usize) -> Result<Polytope> {
    let it = Item::parse(text)?;
    let dim_at_least = |d: usize| {
        if n < d {
            Err(Error::Config(format!("body `{}` needs dimension >= {d}", it.name)))
        } else {
            Ok(())
        }
    };
    match it.name.as_str() {
        "point" => {
            it.only(&[])?;
            Ok(minkowski_tensors::geometry::point(vec![0.0; n]))
        }
        "segment" => {
            it.only(&["L"])?;
            let l = pos("L", it.num("L", 1.0)?)?;
            let mut b = vec![0.0; n];
            b[0] = l;
            segment(vec![0.0; n], b)
        }
        "square" => {
            it.only(&["a"])?;
            dim_at_least(2)?;
            let a = pos("a", it.num("a", 1.0)?)?;
            let hi: Vec<f64> = (0..n).map(|i| if i < 2 { a } else { 0.0 }).collect();
            cuboid(&vec![0.0; n], &hi)
        }
        "cube" => {
            it.only(&["a"])?;
            let a = pos("a", it.num("a", 1.0)?)?;
            cuboid(&vec![0.0; n], &vec![a; n])
        }
        "box" => {
            it.only(&["a", "b", "c"])?;
            let sides = [it.num("a", 1.0)?, it.num("b", 1.0)?, it.num("c", 1.0)?];
            if n > 3 {
                return Err(Error::Config("box is available for n <= 3".into()));
            }
            let hi = sides[..n].iter().map(|&s| pos("side", s)).collect::<Result<Vec<_>>>()?;
            cuboid(&vec![0.0; n], &hi)
        }
        "simplex" => {
            it.only(&[])?;
            let mut pts = vec![vec![0.0; n]];
            for i in 0..n {
                let mut e = vec![0.0; n];
                e[i] = 1.0;
                pts.push(e);
            }
            hull(&pts)
        }
        "polygon" => {
            it.only(&["m", "r"])?;
            dim_at_least(2)?;
            let m = it.int("m", 6)?;
            if m < 3 {
                return Err(Error::Config("polygon needs m >= 3".into()));
            }
            regular_polygon(n, m, pos("r", it.num("r", 1.0)?)?)
        }
        "geodesic" => {
            it.only(&["R", "level"])?;
            if n != 3 {
                return Err(Error::Config("geodesic sphere is available for n = 3".into()));
            }
            Ok(geodesic_sphere(pos("R", it.num("R", 1.0)?)?, it.int("level", 2)?))
        }
        "random" => {
            it.only(&["count", "seed"])?;
            let count = it.int("count", 2 * n + 2)?;
            if count < n + 1 {
                return Err(Error::Config(format!("random body needs count >= {}", n + 1)));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(it.int("seed", 0)? as u64);
            Ok(random_polytope(n, count, &mut rng))
        }
        other => Err(Error::Config(format!(
            "unknown body `{other}` (point, segment, square, cube, box, simplex, polygon, geodesic, random)"
        ))),
    }
}

pub fn polytope_file(path: &std::path::Path) -> Result<Polytope> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    PolytopeFile::parse(&text)?.to_polytope()
}

/// Smooth surfaces of revolution in R^3.
pub fn surface(text: &str) -> Result<SmoothSurface> {
    let it = Item::parse(text)?;
    let s = match it.name.as_str() {
        "ball" => {
            it.only(&["R"])?;
            SmoothSurface::Ball { radius: it.num("R", 1.0)? }
        }
        "paraboloid" => {
            it.only(&["h"])?;
            SmoothSurface::Paraboloid { h: it.num("h", 1.0)? }
        }
        "ellipsoid" => {
            it.only(&["a", "b", "c"])?;
            SmoothSurface::Ellipsoid { a: it.num("a", 1.0)?, b: it.num("b", 1.0)?, c: it.num("c", 1.0)? }
        }
        other => Err(Error::Config(format!("unknown surface `{other}` (ball, paraboloid, ellipsoid)")))?,
    };
    s.validate().map_err(|e| Error::Config(e.to_string()))?;
    Ok(s)
}

fn cap(it: &Item, n: usize) -> Result<Cap> {
    let axis = it.vector("axis")?.unwrap_or_else(|| {
        let mut a = vec![0.0; n];
        a[n - 1] = -1.0;
        a
    });
    if axis.len() != n {
        return Err(Error::Config(format!("axis has length {} in dimension {n}", axis.len())));
    }
    Cap::new(axis, it.num("mu", 0.5)?).map_err(|e| Error::Config(e.to_string()))
}

/// Test functions: `full`, `bump:mu=..,axis=..`, `indicator:mu=..,axis=..`,
/// `box:lo=..,hi=..[,cone=..]` where `cone` lists normals separated by `|`.
pub fn eta(text: &str, n: usize) -> Result<TestFunction> {
    let it = Item::parse(text)?;
    match it.name.as_str() {
        "full" => {
            it.only(&[])?;
            Ok(TestFunction::Full)
        }
        "bump" => {
            it.only(&["mu", "axis"])?;
            Ok(TestFunction::SphericalWeight(SphereWeight::Bump(cap(&it, n)?)))
        }
        "indicator" => {
            it.only(&["mu", "axis"])?;
            Ok(TestFunction::SphericalWeight(SphereWeight::Indicator(cap(&it, n)?)))
        }
        "box" => {
            it.only(&["lo", "hi", "cone"])?;
            let lo = it.vector("lo")?.ok_or_else(|| Error::Config("box needs lo".into()))?;
            let hi = it.vector("hi")?.ok_or_else(|| Error::Config("box needs hi".into()))?;
            if lo.len() != n || hi.len() != n {
                return Err(Error::Config(format!("box corners must have length {n}")));
            }
            let beta = Beta::open_box(&lo, &hi).map_err(|e| Error::Config(e.to_string()))?;
            let mut normals = Vec::new();
            if let Some(c) = it.params.get("cone") {
                for part in c.split('|') {
                    let v = part
                        .split(';')
                        .map(|x| x.trim().parse::<f64>())
                        .collect::<std::result::Result<Vec<_>, _>>()
                        .map_err(|_| Error::Config(format!("bad cone normal `{part}`")))?;
                    if v.len() != n {
                        return Err(Error::Config(format!("cone normal `{part}` must have length {n}")));
                    }
                    normals.push(v);
                }
            }
            Ok(TestFunction::ProductIndicator { beta, omega: OpenCone { normals } })
        }
        other => Err(Error::Config(format!("unknown test function `{other}` (full, bump, indicator, box)"))),
    }
}

/// Spherical weight for smooth surfaces: `one`, `bump:..`, `indicator:..`.
pub fn weight(text: &str) -> Result<SphereWeight> {
    if text.trim() == "full" || text.trim() == "one" {
        return Ok(SphereWeight::One);
    }
    match eta(text, 3)? {
        TestFunction::SphericalWeight(f) => Ok(f),
        _ => Err(Error::Config(format!("smooth surfaces take a spherical weight, got `{text}`"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_items() {
        let it = Item::parse("segment:L=2").unwrap();
        assert_eq!(it.name, "segment");
        assert_eq!(it.num("L", 1.0).unwrap(), 2.0);
        assert!(Item::parse("box:a").is_err());
        assert!(body("segment:X=1", 3).is_err());
        assert!(body("nothing", 3).is_err());
        assert!((body("cube", 3).unwrap().volume() - 1.0).abs() < 1e-14);
        assert!(matches!(eta("box:lo=0;0;0,hi=1;1;1,cone=0;0;-1|1;0;0", 3).unwrap(), TestFunction::ProductIndicator { .. }));
        assert!(eta("bump:mu=3", 3).is_err());
        assert!(surface("ellipsoid:a=1,b=1,c=3").is_ok());
        assert!(surface("ball:R=-1").is_err());
    }
}
