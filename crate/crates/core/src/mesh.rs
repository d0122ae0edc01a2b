//! Deterministic triangulation of convex polygons: a fan from the vertex
//! centroid followed by uniform 4-way refinement until the longest edge
//! drops under the target size. Boundary edges remember which polygon side
//! they came from so boundary integrals can be resolved per side.

use crate::error::{Error, Result};
use crate::geometry::{Polygon, SideTag, Vec2};
use std::collections::HashMap;

/// Boundary mesh edge with the originating polygon side tag.
#[derive(Clone, Debug)]
pub struct BoundaryEdge {
    /// Vertex indices, ordered along the counterclockwise boundary.
    pub v: [usize; 2],
    /// Index into [`Mesh::side_tags`].
    pub side: usize,
}

/// Conforming triangle mesh of a convex polygon.
#[derive(Clone, Debug)]
pub struct Mesh {
    pub vertices: Vec<Vec2>,
    /// Positively oriented vertex index triples.
    pub triangles: Vec<[usize; 3]>,
    pub boundary: Vec<BoundaryEdge>,
    /// Distinct side tags, indexed by `BoundaryEdge::side`.
    pub side_tags: Vec<SideTag>,
    /// Longest triangle edge.
    pub h: f64,
    /// Smallest interior angle in radians (reported, not enforced).
    pub min_angle: f64,
    /// Number of uniform refinements applied after the fan.
    pub levels: usize,
}

impl Mesh {
    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn tag_index(&self, tag: &SideTag) -> Result<usize> {
        self.side_tags
            .iter()
            .position(|t| t == tag)
            .ok_or_else(|| Error::UnknownTag(tag.as_str().to_owned()))
    }

    /// Sum of triangle areas.
    pub fn total_area(&self) -> f64 {
        self.triangles
            .iter()
            .map(|t| triangle_area(self.vertices[t[0]], self.vertices[t[1]], self.vertices[t[2]]))
            .sum()
    }

    fn recompute_metrics(&mut self) {
        let mut h: f64 = 0.0;
        let mut min_angle = f64::INFINITY;
        for t in &self.triangles {
            let p = [self.vertices[t[0]], self.vertices[t[1]], self.vertices[t[2]]];
            for k in 0..3 {
                let e = (p[(k + 1) % 3] - p[k]).norm();
                h = h.max(e);
                let u = p[(k + 1) % 3] - p[k];
                let v = p[(k + 2) % 3] - p[k];
                let ang = (u.x * v.y - u.y * v.x).atan2(u.dot(&v));
                min_angle = min_angle.min(ang.abs());
            }
        }
        self.h = h;
        self.min_angle = min_angle;
    }
}

fn triangle_area(a: Vec2, b: Vec2, c: Vec2) -> f64 {
    0.5 * ((b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x))
}

/// Fan triangulation from the vertex centroid, refined uniformly until the
/// longest edge is at most `target_h`. Deterministic for fixed input.
pub fn triangulate(p: &Polygon, target_h: f64) -> Result<Mesh> {
    if !(target_h > 0.0) {
        return Err(Error::NonConvexInput(format!(
            "target_h must be positive, got {target_h}"
        )));
    }
    if !p.is_convex() {
        return Err(Error::NonConvexInput(
            "fan mesher requires a convex polygon".into(),
        ));
    }
    let mut mesh = fan(p);
    while mesh.h > target_h {
        mesh = refine(&mesh);
    }
    Ok(mesh)
}

/// Same as [`triangulate`] but with a fixed number of refinement levels.
/// Finite-difference derivative oracles use this to keep the discretization
/// identical across nearby flow times.
pub fn triangulate_levels(p: &Polygon, levels: usize) -> Result<Mesh> {
    if !p.is_convex() {
        return Err(Error::NonConvexInput(
            "fan mesher requires a convex polygon".into(),
        ));
    }
    let mut mesh = fan(p);
    for _ in 0..levels {
        mesh = refine(&mesh);
    }
    Ok(mesh)
}

fn fan(p: &Polygon) -> Mesh {
    let n = p.len();
    let c = p.vertex_centroid();
    let mut vertices = Vec::with_capacity(n + 1);
    vertices.push(c);
    vertices.extend_from_slice(p.vertices());
    let mut triangles = Vec::with_capacity(n);
    let mut boundary = Vec::with_capacity(n);
    for i in 0..n {
        let a = 1 + i;
        let b = 1 + (i + 1) % n;
        triangles.push([0, a, b]);
        boundary.push(BoundaryEdge { v: [a, b], side: i });
    }
    let mut mesh = Mesh {
        vertices,
        triangles,
        boundary,
        side_tags: p.tags().to_vec(),
        h: 0.0,
        min_angle: 0.0,
        levels: 0,
    };
    mesh.recompute_metrics();
    mesh
}

/// Split every triangle into four via edge midpoints; boundary tags are
/// inherited and `h` halves.
pub fn refine(m: &Mesh) -> Mesh {
    let mut vertices = m.vertices.clone();
    let mut midpoint: HashMap<(usize, usize), usize> = HashMap::new();
    let mut mid = |a: usize, b: usize, vertices: &mut Vec<Vec2>| -> usize {
        let key = (a.min(b), a.max(b));
        match midpoint.get(&key) {
            Some(&i) => i,
            None => {
                let i = vertices.len();
                vertices.push(0.5 * (vertices[a] + vertices[b]));
                midpoint.insert(key, i);
                i
            }
        }
    };
    let mut triangles = Vec::with_capacity(4 * m.triangles.len());
    for t in &m.triangles {
        let [a, b, c] = *t;
        let ab = mid(a, b, &mut vertices);
        let bc = mid(b, c, &mut vertices);
        let ca = mid(c, a, &mut vertices);
        triangles.push([a, ab, ca]);
        triangles.push([ab, b, bc]);
        triangles.push([ca, bc, c]);
        triangles.push([ab, bc, ca]);
    }
    let mut boundary = Vec::with_capacity(2 * m.boundary.len());
    for e in &m.boundary {
        let [a, b] = e.v;
        let key = (a.min(b), a.max(b));
        let mab = *midpoint
            .get(&key)
            .expect("boundary edge must have been split");
        boundary.push(BoundaryEdge {
            v: [a, mab],
            side: e.side,
        });
        boundary.push(BoundaryEdge {
            v: [mab, b],
            side: e.side,
        });
    }
    let mut out = Mesh {
        vertices,
        triangles,
        boundary,
        side_tags: m.side_tags.clone(),
        h: 0.0,
        min_angle: 0.0,
        levels: m.levels + 1,
    };
    out.recompute_metrics();
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::shapes;
    use approx::assert_relative_eq;
    use std::collections::HashMap;

    #[test]
    fn square_fan_counts() {
        let sq = shapes::unit_square();
        let m = triangulate(&sq, 1.0).unwrap();
        assert_eq!(m.num_triangles(), 4);
        assert_eq!(m.levels, 0);
        let m = triangulate(&sq, 0.5).unwrap();
        assert_eq!(m.num_triangles(), 16);
        assert_eq!(m.levels, 1);
    }

    #[test]
    fn equilateral_two_levels() {
        let tri = shapes::equilateral(1.0);
        let m = triangulate(&tri, 0.26).unwrap();
        assert_eq!(m.num_triangles(), 48);
        assert!(m.h <= 0.26);
    }

    #[test]
    fn refine_counts_and_h() {
        let sq = shapes::unit_square();
        let m0 = triangulate(&sq, 1.0).unwrap();
        let m1 = refine(&m0);
        assert_eq!(m1.num_triangles(), 16);
        assert_eq!(m1.boundary.len(), 2 * m0.boundary.len());
        let m2 = refine(&m1);
        assert_relative_eq!(m2.h, m0.h / 4.0, max_relative = 1e-14);
    }

    #[test]
    fn areas_sides_euler() {
        let p = shapes::rhombus(1.0, 0.4).unwrap();
        let m = triangulate(&p, 0.2).unwrap();
        assert_relative_eq!(m.total_area(), p.area(), max_relative = 1e-12);

        // Per-tag boundary length equals the polygon side length.
        let mut by_side: HashMap<usize, f64> = HashMap::new();
        for e in &m.boundary {
            let len = (m.vertices[e.v[1]] - m.vertices[e.v[0]]).norm();
            *by_side.entry(e.side).or_insert(0.0) += len;
        }
        for (side, len) in by_side {
            let tag = &m.side_tags[side];
            assert_relative_eq!(len, p.side_length(tag).unwrap(), max_relative = 1e-12);
        }

        // Euler relation for a triangulated disk: V - E + F = 1.
        let mut edges = std::collections::HashSet::new();
        for t in &m.triangles {
            for k in 0..3 {
                let a = t[k];
                let b = t[(k + 1) % 3];
                edges.insert((a.min(b), a.max(b)));
            }
        }
        let v = m.num_vertices() as i64;
        let e = edges.len() as i64;
        let f = m.num_triangles() as i64;
        assert_eq!(v - e + f, 1);
    }

    #[test]
    fn positive_orientation_and_conformity() {
        let p = shapes::regular_ngon(7, 1.0).unwrap();
        let m = triangulate(&p, 0.3).unwrap();
        for t in &m.triangles {
            assert!(
                triangle_area(m.vertices[t[0]], m.vertices[t[1]], m.vertices[t[2]]) > 0.0,
                "negatively oriented triangle"
            );
        }
        // Shared edges appear exactly twice, boundary edges once.
        let mut count: HashMap<(usize, usize), usize> = HashMap::new();
        for t in &m.triangles {
            for k in 0..3 {
                let a = t[k];
                let b = t[(k + 1) % 3];
                *count.entry((a.min(b), a.max(b))).or_insert(0) += 1;
            }
        }
        let boundary_count = count.values().filter(|&&c| c == 1).count();
        assert_eq!(boundary_count, m.boundary.len());
        assert!(count.values().all(|&c| c == 1 || c == 2));
    }

    #[test]
    fn nonconvex_rejected() {
        let p = Polygon::new(vec![
            Vec2::new(0.0, 0.0),
            Vec2::new(2.0, 0.0),
            Vec2::new(2.0, 2.0),
            Vec2::new(1.0, 0.5),
            Vec2::new(0.0, 2.0),
        ])
        .unwrap();
        assert!(matches!(
            triangulate(&p, 0.5),
            Err(Error::NonConvexInput(_))
        ));
    }
}
