use crate::error::{IfrError, Result};

pub type Point = [f64; 3];

/// Result of [`normalize_pointcloud`]: `raw = points · scale + center`.
#[derive(Clone, Debug, PartialEq)]
pub struct Normalized {
    pub points: Vec<Point>,
    pub center: Point,
    pub scale: f64,
}

/// Splits a raw cloud into a zero-centroid, unit-max-norm shape plus the
/// translation and isotropic scale that map it back.
pub fn normalize_pointcloud(raw: &[Point]) -> Result<Normalized> {
    if raw.len() < 4 {
        return Err(IfrError::DegeneratePointCloud(format!(
            "need at least 4 points, got {}",
            raw.len()
        )));
    }
    if raw.iter().flatten().any(|v| !v.is_finite()) {
        return Err(IfrError::DegeneratePointCloud("non-finite coordinate".into()));
    }
    let n = raw.len() as f64;
    let mut center = [0.0; 3];
    for p in raw {
        for k in 0..3 {
            center[k] += p[k];
        }
    }
    center.iter_mut().for_each(|c| *c /= n);
    let centered: Vec<Point> = raw
        .iter()
        .map(|p| [p[0] - center[0], p[1] - center[1], p[2] - center[2]])
        .collect();
    let scale = centered.iter().map(norm).fold(0.0, f64::max);
    if scale <= 1e-12 {
        return Err(IfrError::DegeneratePointCloud("all points coincide".into()));
    }
    let points = centered
        .iter()
        .map(|p| [p[0] / scale, p[1] / scale, p[2] / scale])
        .collect();
    Ok(Normalized { points, center, scale })
}

pub fn norm(p: &Point) -> f64 {
    (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt()
}

pub fn distance(a: &Point, b: &Point) -> f64 {
    norm(&[a[0] - b[0], a[1] - b[1], a[2] - b[2]])
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cube_corners(offset: Point) -> Vec<Point> {
        let mut v = Vec::new();
        for x in [-0.5, 0.5] {
            for y in [-0.5, 0.5] {
                for z in [-0.5, 0.5] {
                    v.push([x + offset[0], y + offset[1], z + offset[2]]);
                }
            }
        }
        v
    }

    #[test]
    fn translated_cube() {
        let n = normalize_pointcloud(&cube_corners([5.0, 0.0, 0.0])).unwrap();
        assert!(distance(&n.center, &[5.0, 0.0, 0.0]) < 1e-12);
        let mut c = [0.0; 3];
        for p in &n.points {
            for k in 0..3 {
                c[k] += p[k];
            }
        }
        assert!(norm(&c) < 1e-12);
        assert!((n.scale - 0.75f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn normalized_input_is_fixed_point() {
        let first = normalize_pointcloud(&cube_corners([0.0; 3])).unwrap();
        let again = normalize_pointcloud(&first.points).unwrap();
        assert!((again.scale - 1.0).abs() < 1e-12);
        assert!(norm(&again.center) < 1e-12);
        for (a, b) in again.points.iter().zip(&first.points) {
            assert!(distance(a, b) < 1e-12);
        }
    }

    #[test]
    fn random_cloud_reconstructs() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let raw: Vec<Point> = (0..64)
                .map(|_| {
                    [
                        rng.random_range(-3.0..7.0),
                        rng.random_range(0.0..0.2),
                        rng.random_range(-1.0..1.0),
                    ]
                })
                .collect();
            let n = normalize_pointcloud(&raw).unwrap();
            let max_norm = n.points.iter().map(norm).fold(0.0, f64::max);
            assert!((max_norm - 1.0).abs() < 1e-12);
            for (p, r) in n.points.iter().zip(&raw) {
                let back = [
                    p[0] * n.scale + n.center[0],
                    p[1] * n.scale + n.center[1],
                    p[2] * n.scale + n.center[2],
                ];
                assert!(distance(&back, r) < 1e-9);
            }
        }
    }

    #[test]
    fn degenerate_clouds_rejected() {
        assert!(normalize_pointcloud(&[[1.0, 1.0, 1.0]; 10]).is_err());
        assert!(normalize_pointcloud(&[[0.0, 0.0, 0.0], [1.0, 0.0, 0.0]]).is_err());
    }
}
