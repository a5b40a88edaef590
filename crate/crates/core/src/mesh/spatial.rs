//! Exact nearest-neighbour indexes: a kd-tree over points and a bounding
//! volume hierarchy over triangles. Both return the same answer as a linear
//! scan, including the smallest-index tie-break.

use super::metrics::closest_point_on_triangle;
use super::TriangleMesh;
use crate::point::Point3;

const LEAF: usize = 8;

#[derive(Debug, Clone)]
pub struct KdTree {
    points: Vec<Point3>,
    /// Permutation of point indices; each subtree owns a contiguous range.
    order: Vec<u32>,
    nodes: Vec<KdNode>,
}

#[derive(Debug, Clone)]
enum KdNode {
    Leaf { start: usize, end: usize },
    Split { axis: usize, value: f64, left: usize, right: usize },
}

impl KdTree {
    pub fn new(points: &[Point3]) -> Self {
        let mut tree = Self {
            points: points.to_vec(),
            order: (0..points.len() as u32).collect(),
            nodes: Vec::new(),
        };
        if !points.is_empty() {
            tree.build(0, points.len());
        }
        tree
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    fn build(&mut self, start: usize, end: usize) -> usize {
        let id = self.nodes.len();
        if end - start <= LEAF {
            self.nodes.push(KdNode::Leaf { start, end });
            return id;
        }
        let (mut lo, mut hi) = (Point3::new(f64::MAX, f64::MAX, f64::MAX), Point3::new(f64::MIN, f64::MIN, f64::MIN));
        for &i in &self.order[start..end] {
            lo = lo.component_min(self.points[i as usize]);
            hi = hi.component_max(self.points[i as usize]);
        }
        let ext = hi - lo;
        let axis = (0..3)
            .max_by(|a, b| ext.axis(*a).total_cmp(&ext.axis(*b)))
            .expect("three axes");
        let mid = (start + end) / 2;
        let pts = &self.points;
        self.order[start..end].select_nth_unstable_by(mid - start, |a, b| {
            pts[*a as usize].axis(axis).total_cmp(&pts[*b as usize].axis(axis))
        });
        let value = self.points[self.order[mid] as usize].axis(axis);
        self.nodes.push(KdNode::Leaf { start, end });
        let left = self.build(start, mid);
        let right = self.build(mid, end);
        self.nodes[id] = KdNode::Split { axis, value, left, right };
        id
    }

    /// Index and squared distance of the nearest point, `None` when empty.
    pub fn nearest(&self, q: Point3) -> Option<(usize, f64)> {
        if self.points.is_empty() {
            return None;
        }
        let mut best = (usize::MAX, f64::INFINITY);
        self.search(0, q, &mut best);
        Some(best)
    }

    fn search(&self, node: usize, q: Point3, best: &mut (usize, f64)) {
        match self.nodes[node] {
            KdNode::Leaf { start, end } => {
                for &i in &self.order[start..end] {
                    let d = (self.points[i as usize] - q).norm_squared();
                    let i = i as usize;
                    if d < best.1 || (d == best.1 && i < best.0) {
                        *best = (i, d);
                    }
                }
            }
            KdNode::Split { axis, value, left, right } => {
                let diff = q.axis(axis) - value;
                // left holds values <= split, right values >= split
                let (near, far) = if diff < 0.0 { (left, right) } else { (right, left) };
                self.search(near, q, best);
                if diff * diff <= best.1 {
                    self.search(far, q, best);
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Aabb {
    lo: Point3,
    hi: Point3,
}

impl Aabb {
    fn empty() -> Self {
        Self {
            lo: Point3::new(f64::MAX, f64::MAX, f64::MAX),
            hi: Point3::new(f64::MIN, f64::MIN, f64::MIN),
        }
    }

    fn grow(&mut self, p: Point3) {
        self.lo = self.lo.component_min(p);
        self.hi = self.hi.component_max(p);
    }

    fn distance_squared(&self, p: Point3) -> f64 {
        let d = (self.lo - p).component_max(p - self.hi).component_max(Point3::ORIGIN);
        d.norm_squared()
    }
}

#[derive(Debug, Clone)]
struct BvhNode {
    bounds: Aabb,
    /// Leaf: triangle range in `order`. Inner: child node ids.
    start: usize,
    end: usize,
    children: Option<(usize, usize)>,
}

#[derive(Debug, Clone)]
pub struct TriangleBvh {
    tris: Vec<[Point3; 3]>,
    order: Vec<u32>,
    nodes: Vec<BvhNode>,
}

impl TriangleBvh {
    pub fn new(mesh: &TriangleMesh) -> Self {
        let tris: Vec<[Point3; 3]> = (0..mesh.triangles.len()).map(|t| mesh.triangle(t)).collect();
        let mut bvh = Self {
            order: (0..tris.len() as u32).collect(),
            tris,
            nodes: Vec::new(),
        };
        if !bvh.tris.is_empty() {
            bvh.build(0, bvh.tris.len());
        }
        bvh
    }

    pub fn is_empty(&self) -> bool {
        self.tris.is_empty()
    }

    fn centroid(&self, t: u32) -> Point3 {
        let [a, b, c] = self.tris[t as usize];
        (a + b + c) * (1.0 / 3.0)
    }

    fn build(&mut self, start: usize, end: usize) -> usize {
        let mut bounds = Aabb::empty();
        let mut cb = Aabb::empty();
        for &t in &self.order[start..end] {
            for v in self.tris[t as usize] {
                bounds.grow(v);
            }
            cb.grow(self.centroid(t));
        }
        let id = self.nodes.len();
        self.nodes.push(BvhNode {
            bounds,
            start,
            end,
            children: None,
        });
        if end - start <= 4 {
            return id;
        }
        let ext = cb.hi - cb.lo;
        let axis = (0..3)
            .max_by(|a, b| ext.axis(*a).total_cmp(&ext.axis(*b)))
            .expect("three axes");
        let mid = (start + end) / 2;
        let mut slice: Vec<(f64, u32)> = self.order[start..end]
            .iter()
            .map(|t| (self.centroid(*t).axis(axis), *t))
            .collect();
        slice.select_nth_unstable_by(mid - start, |a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        for (slot, (_, t)) in self.order[start..end].iter_mut().zip(slice) {
            *slot = t;
        }
        let l = self.build(start, mid);
        let r = self.build(mid, end);
        self.nodes[id].children = Some((l, r));
        id
    }

    /// Nearest triangle index and squared distance, `None` when empty.
    pub fn nearest(&self, q: Point3) -> Option<(usize, f64)> {
        if self.tris.is_empty() {
            return None;
        }
        let mut best = (usize::MAX, f64::INFINITY);
        let mut stack = vec![0usize];
        while let Some(n) = stack.pop() {
            let node = &self.nodes[n];
            // slack keeps rounding in the box bound from pruning a tie
            if node.bounds.distance_squared(q) * (1.0 - 1e-9) > best.1 {
                continue;
            }
            match node.children {
                None => {
                    for &t in &self.order[node.start..node.end] {
                        let [a, b, c] = self.tris[t as usize];
                        let d = (closest_point_on_triangle(q, a, b, c) - q).norm_squared();
                        let t = t as usize;
                        if d < best.1 || (d == best.1 && t < best.0) {
                            best = (t, d);
                        }
                    }
                }
                Some((l, r)) => {
                    let (dl, dr) = (
                        self.nodes[l].bounds.distance_squared(q),
                        self.nodes[r].bounds.distance_squared(q),
                    );
                    if dl <= dr {
                        stack.push(r);
                        stack.push(l);
                    } else {
                        stack.push(l);
                        stack.push(r);
                    }
                }
            }
        }
        Some(best)
    }
}
