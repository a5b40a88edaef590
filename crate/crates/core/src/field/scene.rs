//! Scene description documents.
//!
//! A scene is a list of posed primitives, an optional CSG tree over them and an
//! optional procedural color rule. See `docs/scene-format.md` for the JSON
//! schema.

use super::sdf;
use crate::error::{Error, Result};
use crate::point::{Mat3, Point3};
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::path::Path;

/// Tolerance used when checking that primitives stay inside the unit cube.
const BOUNDS_EPS: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Shape {
    Sphere { radius: f64 },
    Box { half_extents: [f64; 3] },
    Capsule { a: [f64; 3], b: [f64; 3], radius: f64 },
    /// Ring around the local y axis.
    Torus { major: f64, minor: f64 },
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct Pose {
    pub translation: [f64; 3],
    /// Euler angles in degrees, applied x, then y, then z.
    pub rotation_deg: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrimitiveSpec {
    pub id: String,
    pub shape: Shape,
    #[serde(default)]
    pub pose: Pose,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub color: Option<[f64; 3]>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CsgOp {
    Union,
    Intersection,
    Difference,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CsgNode {
    Ref {
        #[serde(rename = "ref")]
        reference: String,
    },
    Op {
        op: CsgOp,
        children: Vec<CsgNode>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    fn index(self) -> usize {
        match self {
            Axis::X => 0,
            Axis::Y => 1,
            Axis::Z => 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TextureRule {
    Constant { color: [f64; 3] },
    /// Linear ramp from `low` at coordinate -1 to `high` at +1 along `axis`.
    Gradient { axis: Axis, low: [f64; 3], high: [f64; 3] },
    /// Color of the primitive with the smallest signed distance.
    PerPrimitive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    #[serde(default)]
    pub name: String,
    /// Transition band width of the occupancy sigmoid, NDC units.
    #[serde(default = "default_sharpness")]
    pub sharpness: f64,
    #[serde(default)]
    pub primitives: Vec<PrimitiveSpec>,
    /// Defaults to the union of all primitives.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub csg: Option<CsgNode>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub texture: Option<TextureRule>,
}

fn default_sharpness() -> f64 {
    super::DEFAULT_SHARPNESS
}

impl SceneSpec {
    pub fn from_json_str(s: &str) -> Result<Self> {
        let spec: SceneSpec = serde_json::from_str(s)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json_str(&text)
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("scene serializes")
    }

    /// A single sphere, the workhorse scene of the test-suite.
    pub fn sphere(radius: f64) -> Self {
        SceneSpec {
            name: "sphere".into(),
            sharpness: default_sharpness(),
            primitives: vec![PrimitiveSpec {
                id: "ball".into(),
                shape: Shape::Sphere { radius },
                pose: Pose::default(),
                color: None,
            }],
            csg: None,
            texture: None,
        }
    }

    pub fn empty() -> Self {
        SceneSpec {
            name: "empty".into(),
            sharpness: default_sharpness(),
            primitives: Vec::new(),
            csg: None,
            texture: None,
        }
    }

    pub fn with_sharpness(mut self, sharpness: f64) -> Self {
        self.sharpness = sharpness;
        self
    }

    pub fn with_texture(mut self, texture: TextureRule) -> Self {
        self.texture = Some(texture);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sharpness > 0.0 && self.sharpness.is_finite()) {
            return Err(Error::InvalidScene(format!(
                "sharpness must be positive, got {}",
                self.sharpness
            )));
        }
        let mut ids = HashMap::new();
        for (i, prim) in self.primitives.iter().enumerate() {
            if ids.insert(prim.id.as_str(), i).is_some() {
                return Err(Error::InvalidScene(format!("duplicate primitive id `{}`", prim.id)));
            }
            validate_shape(prim)?;
            let (lo, hi) = world_bounds(prim);
            if lo.x < -1.0 - BOUNDS_EPS
                || lo.y < -1.0 - BOUNDS_EPS
                || lo.z < -1.0 - BOUNDS_EPS
                || hi.x > 1.0 + BOUNDS_EPS
                || hi.y > 1.0 + BOUNDS_EPS
                || hi.z > 1.0 + BOUNDS_EPS
            {
                return Err(Error::InvalidScene(format!(
                    "primitive `{}` does not fit inside [-1,1]^3",
                    prim.id
                )));
            }
            if let Some(c) = prim.color {
                validate_color(&c, &prim.id)?;
            }
        }
        if let Some(csg) = &self.csg {
            validate_csg(csg, &ids)?;
        }
        match &self.texture {
            Some(TextureRule::Constant { color }) => validate_color(color, "constant texture")?,
            Some(TextureRule::Gradient { low, high, .. }) => {
                validate_color(low, "gradient low")?;
                validate_color(high, "gradient high")?;
            }
            Some(TextureRule::PerPrimitive) => {
                if let Some(p) = self.primitives.iter().find(|p| p.color.is_none()) {
                    return Err(Error::InvalidScene(format!(
                        "per-primitive texture but `{}` has no color",
                        p.id
                    )));
                }
            }
            None => {}
        }
        Ok(())
    }

    pub(crate) fn compile(&self) -> Result<CompiledScene> {
        self.validate()?;
        let ids: HashMap<&str, usize> = self
            .primitives
            .iter()
            .enumerate()
            .map(|(i, p)| (p.id.as_str(), i))
            .collect();
        let prims = self.primitives.iter().map(CompiledPrimitive::new).collect();
        let tree = match &self.csg {
            Some(node) => Some(compile_csg(node, &ids)?),
            None if self.primitives.is_empty() => None,
            None => Some(Tree::Op(
                CsgOp::Union,
                (0..self.primitives.len()).map(Tree::Leaf).collect(),
            )),
        };
        Ok(CompiledScene {
            prims,
            tree,
            texture: self.texture.clone(),
        })
    }
}

fn validate_color(c: &[f64; 3], what: &str) -> Result<()> {
    if c.iter().all(|v| (0.0..=1.0).contains(v)) {
        Ok(())
    } else {
        Err(Error::InvalidScene(format!("{what}: color components must lie in [0,1]")))
    }
}

fn validate_shape(prim: &PrimitiveSpec) -> Result<()> {
    let ok = |v: f64| v.is_finite() && v > 0.0;
    let valid = match &prim.shape {
        Shape::Sphere { radius } => ok(*radius),
        Shape::Box { half_extents } => half_extents.iter().all(|v| ok(*v)),
        Shape::Capsule { a, b, radius } => {
            ok(*radius) && a.iter().chain(b.iter()).all(|v| v.is_finite())
        }
        Shape::Torus { major, minor } => ok(*major) && ok(*minor),
    };
    let pose_ok = prim
        .pose
        .translation
        .iter()
        .chain(prim.pose.rotation_deg.iter())
        .all(|v| v.is_finite());
    if valid && pose_ok {
        Ok(())
    } else {
        Err(Error::InvalidScene(format!("primitive `{}` has invalid parameters", prim.id)))
    }
}

fn local_bounds(shape: &Shape) -> (Point3, Point3) {
    match shape {
        Shape::Sphere { radius } => {
            let r = *radius;
            (Point3::new(-r, -r, -r), Point3::new(r, r, r))
        }
        Shape::Box { half_extents } => {
            let h = Point3::from_array(*half_extents);
            (-h, h)
        }
        Shape::Capsule { a, b, radius } => {
            let (a, b) = (Point3::from_array(*a), Point3::from_array(*b));
            let r = Point3::new(*radius, *radius, *radius);
            (a.component_min(b) - r, a.component_max(b) + r)
        }
        Shape::Torus { major, minor } => {
            let e = major + minor;
            (Point3::new(-e, -minor, -e), Point3::new(e, *minor, e))
        }
    }
}

/// Conservative world-space bounds (transformed local box corners).
fn world_bounds(prim: &PrimitiveSpec) -> (Point3, Point3) {
    let (lo, hi) = local_bounds(&prim.shape);
    let rot = Mat3::from_euler_deg(prim.pose.rotation_deg);
    let t = Point3::from_array(prim.pose.translation);
    let mut wlo = Point3::new(f64::INFINITY, f64::INFINITY, f64::INFINITY);
    let mut whi = -wlo;
    for corner in 0..8 {
        let c = Point3::new(
            if corner & 1 == 0 { lo.x } else { hi.x },
            if corner & 2 == 0 { lo.y } else { hi.y },
            if corner & 4 == 0 { lo.z } else { hi.z },
        );
        let w = rot.apply(c) + t;
        wlo = wlo.component_min(w);
        whi = whi.component_max(w);
    }
    (wlo, whi)
}

fn validate_csg(node: &CsgNode, ids: &HashMap<&str, usize>) -> Result<()> {
    match node {
        CsgNode::Ref { reference } => {
            if ids.contains_key(reference.as_str()) {
                Ok(())
            } else {
                Err(Error::InvalidScene(format!("CSG references unknown primitive `{reference}`")))
            }
        }
        CsgNode::Op { op, children } => {
            match op {
                CsgOp::Difference if children.len() != 2 => {
                    return Err(Error::InvalidScene(
                        "difference takes exactly two children".into(),
                    ))
                }
                _ if children.is_empty() => {
                    return Err(Error::InvalidScene(format!("{op:?} with no children")))
                }
                _ => {}
            }
            children.iter().try_for_each(|c| validate_csg(c, ids))
        }
    }
}

fn compile_csg(node: &CsgNode, ids: &HashMap<&str, usize>) -> Result<Tree> {
    Ok(match node {
        CsgNode::Ref { reference } => Tree::Leaf(*ids.get(reference.as_str()).ok_or_else(|| {
            Error::InvalidScene(format!("CSG references unknown primitive `{reference}`"))
        })?),
        CsgNode::Op { op, children } => Tree::Op(
            *op,
            children
                .iter()
                .map(|c| compile_csg(c, ids))
                .collect::<Result<_>>()?,
        ),
    })
}

#[derive(Debug, Clone)]
enum Tree {
    Leaf(usize),
    Op(CsgOp, Vec<Tree>),
}

#[derive(Debug, Clone)]
struct CompiledPrimitive {
    shape: Shape,
    rotation: Mat3,
    translation: Point3,
    color: Option<[f64; 3]>,
}

impl CompiledPrimitive {
    fn new(spec: &PrimitiveSpec) -> Self {
        Self {
            shape: spec.shape.clone(),
            rotation: Mat3::from_euler_deg(spec.pose.rotation_deg),
            translation: Point3::from_array(spec.pose.translation),
            color: spec.color,
        }
    }

    fn distance(&self, p: Point3) -> f64 {
        let local = self.rotation.apply_transpose(p - self.translation);
        match &self.shape {
            Shape::Sphere { radius } => sdf::sphere(local, *radius),
            Shape::Box { half_extents } => sdf::cuboid(local, Point3::from_array(*half_extents)),
            Shape::Capsule { a, b, radius } => {
                sdf::capsule(local, Point3::from_array(*a), Point3::from_array(*b), *radius)
            }
            Shape::Torus { major, minor } => sdf::torus(local, *major, *minor),
        }
    }
}

#[derive(Debug, Clone)]
pub(crate) struct CompiledScene {
    prims: Vec<CompiledPrimitive>,
    tree: Option<Tree>,
    texture: Option<TextureRule>,
}

impl CompiledScene {
    pub(crate) fn signed_distance(&self, p: Point3) -> f64 {
        match &self.tree {
            Some(tree) => self.eval_tree(tree, p),
            None => f64::INFINITY,
        }
    }

    fn eval_tree(&self, tree: &Tree, p: Point3) -> f64 {
        match tree {
            Tree::Leaf(i) => self.prims[*i].distance(p),
            Tree::Op(op, children) => {
                let mut it = children.iter().map(|c| self.eval_tree(c, p));
                let first = it.next().unwrap_or(f64::INFINITY);
                match op {
                    CsgOp::Union => it.fold(first, sdf::union),
                    CsgOp::Intersection => it.fold(first, sdf::intersection),
                    CsgOp::Difference => it.fold(first, sdf::difference),
                }
            }
        }
    }

    pub(crate) fn has_texture(&self) -> bool {
        self.texture.is_some()
    }

    pub(crate) fn color(&self, p: Point3) -> Option<[f64; 3]> {
        let rule = self.texture.as_ref()?;
        Some(match rule {
            TextureRule::Constant { color } => *color,
            TextureRule::Gradient { axis, low, high } => {
                let t = (0.5 * (p.axis(axis.index()) + 1.0)).clamp(0.0, 1.0);
                let mut c = [0.0; 3];
                for (k, v) in c.iter_mut().enumerate() {
                    *v = (1.0 - t) * low[k] + t * high[k];
                }
                c
            }
            TextureRule::PerPrimitive => {
                let mut best = (f64::INFINITY, [0.0; 3]);
                for prim in &self.prims {
                    let d = prim.distance(p);
                    if d < best.0 {
                        best = (d, prim.color.unwrap_or([0.0; 3]));
                    }
                }
                best.1
            }
        })
    }
}
