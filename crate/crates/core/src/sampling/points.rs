use super::SamplePoint;
use crate::error::{Error, Result};
use crate::field::FieldOracle;
use crate::mesh::{sample_surface_with, TriangleMesh};
use crate::point::Point3;
use rand::prelude::*;
use rand_distr::Normal;

/// Where on-surface seed points come from.
#[derive(Debug, Clone, Copy)]
pub enum SurfaceSource<'a> {
    /// Area-uniform samples of a mesh.
    Mesh(&'a TriangleMesh),
    /// Random points pulled onto the field's zero distance set.
    Field,
}

const PROJECTION_STEPS: usize = 64;
const PROJECTION_TOL: f64 = 1e-12;
const GRAD_STEP: f64 = 1e-7;

/// Newton-projects `p` onto the zero set of the signed distance; `None` if
/// it does not converge or leaves the NDC cube.
pub fn project_to_surface(oracle: &FieldOracle, mut p: Point3) -> Option<Point3> {
    for _ in 0..PROJECTION_STEPS {
        let d = oracle.signed_distance(p);
        if !d.is_finite() {
            return None;
        }
        if d.abs() <= PROJECTION_TOL {
            return (p.abs().max_elem() <= 1.0).then_some(p);
        }
        let g = Point3::new(
            oracle.signed_distance(p + Point3::new(GRAD_STEP, 0.0, 0.0))
                - oracle.signed_distance(p - Point3::new(GRAD_STEP, 0.0, 0.0)),
            oracle.signed_distance(p + Point3::new(0.0, GRAD_STEP, 0.0))
                - oracle.signed_distance(p - Point3::new(0.0, GRAD_STEP, 0.0)),
            oracle.signed_distance(p + Point3::new(0.0, 0.0, GRAD_STEP))
                - oracle.signed_distance(p - Point3::new(0.0, 0.0, GRAD_STEP)),
        ) * (0.5 / GRAD_STEP);
        let g2 = g.norm_squared();
        if g2 < 1e-12 {
            return None;
        }
        p = p - g * (d / g2);
    }
    None
}

fn uniform_cube(rng: &mut impl Rng) -> Point3 {
    Point3::new(
        rng.random_range(-1.0..=1.0),
        rng.random_range(-1.0..=1.0),
        rng.random_range(-1.0..=1.0),
    )
}

/// `n - floor(n*u)` surface samples displaced by isotropic Gaussian noise of
/// std `sigma`, then `floor(n*u)` uniform points in the cube. Labels are the
/// oracle's binarized occupancy.
pub fn importance_sample_points(
    oracle: &FieldOracle,
    source: SurfaceSource<'_>,
    n: usize,
    sigma: f64,
    uniform_fraction: f64,
    rng: &mut impl Rng,
) -> Result<Vec<SamplePoint>> {
    if n == 0 {
        return Err(Error::InvalidConfig("need at least one sample point".into()));
    }
    if !(0.0..=1.0).contains(&uniform_fraction) || !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(Error::InvalidConfig(format!(
            "uniform fraction {uniform_fraction} / sigma {sigma} out of range"
        )));
    }
    let n_uniform = (n as f64 * uniform_fraction).floor() as usize;
    let n_surface = n - n_uniform;

    let mut surface: Vec<Point3> = match source {
        SurfaceSource::Mesh(mesh) => sample_surface_with(mesh, n_surface, rng)?.points,
        SurfaceSource::Field => {
            let mut out = Vec::with_capacity(n_surface);
            let mut attempts = 0usize;
            while out.len() < n_surface {
                attempts += 1;
                if attempts > 100 * n_surface + 1000 {
                    return Err(Error::EmptyInput("surface of the scene"));
                }
                if let Some(p) = project_to_surface(oracle, uniform_cube(rng)) {
                    out.push(p);
                }
            }
            out
        }
    };
    if sigma > 0.0 {
        let noise = Normal::new(0.0, sigma).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        for p in &mut surface {
            *p = *p + Point3::new(noise.sample(rng), noise.sample(rng), noise.sample(rng));
        }
    }
    let mut positions = surface;
    positions.extend((0..n_uniform).map(|_| uniform_cube(rng)));
    let occ = oracle.eval_occupancy_batch(&positions);
    Ok(positions
        .into_iter()
        .zip(occ)
        .map(|(p, o)| SamplePoint::new(p, o >= 0.5))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::SceneSpec;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn split_and_projection() {
        let o = FieldOracle::new(&SceneSpec::sphere(0.5)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let pts = importance_sample_points(&o, SurfaceSource::Field, 160, 0.0, 0.0, &mut rng).unwrap();
        assert_eq!(pts.len(), 160);
        for p in &pts {
            assert!(o.signed_distance(p.position).abs() <= 1e-9);
        }
        let pts = importance_sample_points(&o, SurfaceSource::Field, 17, 0.05, 1.0 / 16.0, &mut rng).unwrap();
        assert_eq!(pts.len(), 17);
        assert!(importance_sample_points(&o, SurfaceSource::Field, 0, 0.05, 0.0, &mut rng).is_err());
        let empty = FieldOracle::new(&SceneSpec::empty()).unwrap();
        assert!(importance_sample_points(&empty, SurfaceSource::Field, 4, 0.0, 0.0, &mut rng).is_err());
        // uniform-only needs no surface
        assert_eq!(importance_sample_points(&empty, SurfaceSource::Field, 4, 0.0, 1.0, &mut rng).unwrap().len(), 4);
    }
}
