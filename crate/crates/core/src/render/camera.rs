use crate::error::{Error, Result};
use crate::field::{FieldOracle, OccupancyOracle};
use crate::point::{Mat3, Point3};
use rayon::prelude::*;

/// Rigid world-to-view transform plus a uniform x/y scale.
///
/// A world point `p` lands at view NDC `q = R p + t` with `q.x, q.y`
/// multiplied by `scale`; `scale = 1` is orthographic and anything else is
/// weak perspective. View `k = 0` (NDC `z = +1`) is nearest to the viewer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraSpec {
    pub rotation: Mat3,
    pub translation: Point3,
    pub scale: f64,
}

impl Default for CameraSpec {
    fn default() -> Self {
        Self::front()
    }
}

impl CameraSpec {
    /// Looks down world `-z`; view coordinates equal world coordinates.
    pub fn front() -> Self {
        Self {
            rotation: Mat3::IDENTITY,
            translation: Point3::ORIGIN,
            scale: 1.0,
        }
    }

    /// Turns the object by `yaw` about world y, then `pitch` about x, and
    /// shrinks it on screen by `1 / distance`.
    pub fn orbit(yaw_deg: f64, pitch_deg: f64, distance: f64) -> Result<Self> {
        if !(distance.is_finite() && distance > 0.0) {
            return Err(Error::InvalidConfig(format!("camera distance {distance} must be positive")));
        }
        let r = |d: f64| d.rem_euclid(360.0).to_radians();
        let cam = Self {
            rotation: Mat3::rot_x(r(pitch_deg)).mul_mat(&Mat3::rot_y(r(yaw_deg))),
            translation: Point3::ORIGIN,
            scale: 1.0 / distance,
        };
        cam.validate()?;
        Ok(cam)
    }

    pub fn validate(&self) -> Result<()> {
        if self.rotation.orthonormality_error() > 1e-9 {
            return Err(Error::InvalidConfig("camera rotation is not orthonormal".into()));
        }
        if !(self.scale.is_finite() && self.scale > 0.0) || !self.translation.is_finite() {
            return Err(Error::InvalidConfig("camera scale/translation out of range".into()));
        }
        Ok(())
    }

    #[inline]
    pub fn view_to_world(&self, q: Point3) -> Point3 {
        let unscaled = Point3::new(q.x / self.scale, q.y / self.scale, q.z);
        self.rotation.apply_transpose(unscaled - self.translation)
    }

    #[inline]
    pub fn world_to_view(&self, p: Point3) -> Point3 {
        let r = self.rotation.apply(p) + self.translation;
        Point3::new(r.x * self.scale, r.y * self.scale, r.z)
    }
}

/// The field as seen from a camera: `O(camera^-1 q)` for view points `q`.
/// Evaluations are counted on the wrapped oracle.
#[derive(Debug)]
pub struct ViewOracle<'a> {
    inner: &'a FieldOracle,
    camera: CameraSpec,
}

impl<'a> ViewOracle<'a> {
    pub fn new(inner: &'a FieldOracle, camera: CameraSpec) -> Self {
        Self { inner, camera }
    }

    pub fn camera(&self) -> &CameraSpec {
        &self.camera
    }

    pub fn inner(&self) -> &FieldOracle {
        self.inner
    }
}

impl OccupancyOracle for ViewOracle<'_> {
    fn eval_batch(&self, points: &[Point3]) -> Vec<f64> {
        let world: Vec<Point3> = points.par_iter().map(|q| self.camera.view_to_world(*q)).collect();
        self.inner.eval_occupancy_batch(&world)
    }

    fn calls(&self) -> u64 {
        self.inner.calls()
    }
}
