use crate::config::MicSpec;

/// Eight omnidirectional microphones on the vertices of a cube with the
/// given edge length, centered on the origin.
pub fn open_cube(edge_m: f64) -> Vec<MicSpec> {
    cube_vertices(edge_m).into_iter().map(MicSpec::omni).collect()
}

/// Cube vertices with microphones facing outward horizontally (along the
/// vertex's x/y diagonal) and a 180° field of view, as when the array is
/// mounted on the faces of a closed box.
pub fn closed_cube(edge_m: f64) -> Vec<MicSpec> {
    cube_vertices(edge_m)
        .into_iter()
        .map(|p| MicSpec::directional(p, [p[0], p[1], 0.0], 180.0))
        .collect()
}

fn cube_vertices(edge_m: f64) -> Vec<[f64; 3]> {
    let h = edge_m / 2.0;
    let mut v = Vec::with_capacity(8);
    for x in [-h, h] {
        for y in [-h, h] {
            for z in [-h, h] {
                v.push([x, y, z]);
            }
        }
    }
    v
}

/// `n` omnidirectional microphones evenly spaced on a horizontal circle.
pub fn circular(n: usize, radius_m: f64) -> Vec<MicSpec> {
    (0..n)
        .map(|i| {
            let a = 2.0 * std::f64::consts::PI * i as f64 / n as f64;
            MicSpec::omni([radius_m * a.cos(), radius_m * a.sin(), 0.0])
        })
        .collect()
}

/// Arrays selectable by name in scene files.
pub fn named_array(name: &str) -> Option<Vec<MicSpec>> {
    match name {
        "open_cube" => Some(open_cube(0.1)),
        "closed_cube" => Some(closed_cube(0.1)),
        "circular8" => Some(circular(8, 0.05)),
        "circular16" => Some(circular(16, 0.1)),
        _ => None,
    }
}

pub const ARRAY_NAMES: [&str; 4] = ["open_cube", "closed_cube", "circular8", "circular16"];
