use std::collections::HashMap;

use crate::{angle_between, Vec3};

/// Points of a subdivided icosahedron projected on the unit sphere.
#[derive(Debug, Clone, PartialEq)]
pub struct ScanGrid {
    pub points: Vec<Vec3>,
    pub level: u32,
    pub half_sphere: bool,
}

impl ScanGrid {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Index of the grid point closest to `dir` (lowest index on ties).
    pub fn nearest(&self, dir: &Vec3) -> usize {
        let mut best = (0, f64::NEG_INFINITY);
        for (i, p) in self.points.iter().enumerate() {
            let d = p.dot(dir);
            if d > best.1 {
                best = (i, d);
            }
        }
        best.0
    }
}

/// Points with a component along `up` below this are dropped from half
/// spheres; the equator is kept.
const HALF_SPHERE_EPS: f64 = 1e-6;

fn icosahedron() -> (Vec<Vec3>, Vec<[usize; 3]>) {
    let phi = (1.0 + 5f64.sqrt()) / 2.0;
    let v = [
        (-1.0, phi, 0.0),
        (1.0, phi, 0.0),
        (-1.0, -phi, 0.0),
        (1.0, -phi, 0.0),
        (0.0, -1.0, phi),
        (0.0, 1.0, phi),
        (0.0, -1.0, -phi),
        (0.0, 1.0, -phi),
        (phi, 0.0, -1.0),
        (phi, 0.0, 1.0),
        (-phi, 0.0, -1.0),
        (-phi, 0.0, 1.0),
    ];
    let verts = v.iter().map(|&(x, y, z)| Vec3::new(x, y, z).normalize()).collect();
    let faces = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    (verts, faces)
}

fn subdivide(verts: &mut Vec<Vec3>, faces: &[[usize; 3]]) -> Vec<[usize; 3]> {
    let mut midpoints: HashMap<(usize, usize), usize> = HashMap::new();
    let mut mid = |a: usize, b: usize, verts: &mut Vec<Vec3>| {
        let key = (a.min(b), a.max(b));
        *midpoints.entry(key).or_insert_with(|| {
            verts.push(((verts[a] + verts[b]) / 2.0).normalize());
            verts.len() - 1
        })
    };
    let mut out = Vec::with_capacity(faces.len() * 4);
    for &[a, b, c] in faces {
        let ab = mid(a, b, verts);
        let bc = mid(b, c, verts);
        let ca = mid(c, a, verts);
        out.extend([[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
    }
    out
}

fn sphere_points(level: u32) -> Vec<Vec3> {
    let (mut verts, mut faces) = icosahedron();
    for _ in 0..level {
        faces = subdivide(&mut verts, &faces);
    }
    verts.sort_by(|a, b| {
        a.x.total_cmp(&b.x)
            .then(a.y.total_cmp(&b.y))
            .then(a.z.total_cmp(&b.z))
    });
    verts
}

/// Geodesic grid with `10·4^level + 2` points on the full sphere. With
/// `half_sphere`, points below the xy-plane are removed.
pub fn build_icosphere(level: u32, half_sphere: bool) -> ScanGrid {
    build_icosphere_about(level, half_sphere.then(Vec3::z))
}

/// Like [`build_icosphere`], keeping the half sphere on the side of `up`.
pub fn build_icosphere_about(level: u32, up: Option<Vec3>) -> ScanGrid {
    assert!(level <= 6, "icosphere level must be in 0..=6");
    let mut points = sphere_points(level);
    if let Some(up) = up {
        let up = up.normalize();
        points.retain(|p| p.dot(&up) >= -HALF_SPHERE_EPS);
    }
    ScanGrid {
        points,
        level,
        half_sphere: up.is_some(),
    }
}

/// Largest nearest-neighbor angle (radians) over the grid points.
pub fn max_neighbor_spacing(grid: &ScanGrid) -> f64 {
    grid.points
        .iter()
        .enumerate()
        .map(|(i, p)| {
            grid.points
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != i)
                .map(|(_, q)| angle_between(p, q))
                .fold(f64::INFINITY, f64::min)
        })
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn point_counts() {
        for (level, n) in [(0, 12), (1, 42), (2, 162), (3, 642), (4, 2562)] {
            let g = build_icosphere(level, false);
            assert_eq!(g.len(), n);
            assert_eq!(g.len(), 10 * 4usize.pow(level) + 2);
        }
    }

    #[test]
    fn unit_norm_and_distinct() {
        let g = build_icosphere(3, false);
        for p in &g.points {
            assert!((p.norm() - 1.0).abs() < 1e-9);
        }
        for (i, p) in g.points.iter().enumerate() {
            for q in &g.points[i + 1..] {
                assert!((p - q).norm() > 1e-3);
            }
        }
    }

    #[test]
    fn deterministic_sorted_order() {
        let a = build_icosphere(2, false);
        assert_eq!(a, build_icosphere(2, false));
        for w in a.points.windows(2) {
            assert!(w[0].x <= w[1].x);
        }
    }

    #[test]
    fn half_sphere_keeps_equator() {
        let full = build_icosphere(4, false);
        let half = build_icosphere(4, true);
        assert!(half.points.iter().all(|p| p.z >= -1e-6));
        let upper = full.points.iter().filter(|p| p.z > 1e-6).count();
        let equator = full.points.iter().filter(|p| p.z.abs() <= 1e-6).count();
        assert_eq!(half.len(), upper + equator);
        assert!(equator > 0);
    }

    #[test]
    fn coarse_points_are_fine_points() {
        let coarse = build_icosphere(2, false);
        let fine = build_icosphere(4, false);
        for p in &coarse.points {
            let q = fine.points[fine.nearest(p)];
            assert!((p - q).norm() < 1e-12);
        }
    }

    #[test]
    fn spacing_shrinks_with_level() {
        let s2 = max_neighbor_spacing(&build_icosphere(2, false)).to_degrees();
        let s4 = max_neighbor_spacing(&build_icosphere(4, false)).to_degrees();
        assert!(s2 > 12.0 && s2 < 20.0, "{s2}");
        assert!(s4 > 3.0 && s4 < 5.0, "{s4}");
    }
}
