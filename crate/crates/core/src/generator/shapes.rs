//! Parametric category shapes built from surface-sampled primitives.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::scene::catalog::{cat, CATEGORIES};
use crate::scene::{norm, Point};

/// Surface primitive in the object's local frame (meters, z up).
#[derive(Clone, Copy, Debug)]
pub enum Primitive {
    Box { size: [f64; 3] },
    /// `axis` is 0, 1 or 2.
    Cylinder { radius: f64, height: f64, axis: usize },
    Sphere { radius: f64 },
    /// Open hemisphere; `up` selects which half.
    Dome { radius: f64, up: bool },
}

#[derive(Clone, Copy, Debug)]
pub struct Part {
    pub primitive: Primitive,
    pub offset: Point,
}

impl Primitive {
    fn area(&self) -> f64 {
        use std::f64::consts::PI;
        match *self {
            Primitive::Box { size: [x, y, z] } => 2.0 * (x * y + y * z + x * z),
            Primitive::Cylinder { radius, height, .. } => 2.0 * PI * radius * height + 2.0 * PI * radius * radius,
            Primitive::Sphere { radius } => 4.0 * PI * radius * radius,
            Primitive::Dome { radius, .. } => 2.0 * PI * radius * radius,
        }
    }

    fn stretched(&self, s: [f64; 3]) -> Primitive {
        match *self {
            Primitive::Box { size } => Primitive::Box {
                size: [size[0] * s[0], size[1] * s[1], size[2] * s[2]],
            },
            // Round primitives keep their roundness; the mean stretch of the
            // cross-section axes scales the radius.
            Primitive::Cylinder { radius, height, axis } => {
                let (a, b) = match axis {
                    0 => (1, 2),
                    1 => (0, 2),
                    _ => (0, 1),
                };
                Primitive::Cylinder {
                    radius: radius * 0.5 * (s[a] + s[b]),
                    height: height * s[axis],
                    axis,
                }
            }
            Primitive::Sphere { radius } => Primitive::Sphere {
                radius: radius * (s[0] + s[1] + s[2]) / 3.0,
            },
            Primitive::Dome { radius, up } => Primitive::Dome {
                radius: radius * (s[0] + s[1] + s[2]) / 3.0,
                up,
            },
        }
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Point {
        use std::f64::consts::PI;
        match *self {
            Primitive::Box { size: [x, y, z] } => {
                let faces = [y * z, y * z, x * z, x * z, x * y, x * y];
                let total: f64 = faces.iter().sum();
                let mut u = rng.random::<f64>() * total;
                let mut face = 5;
                for (k, a) in faces.iter().enumerate() {
                    if u < *a {
                        face = k;
                        break;
                    }
                    u -= a;
                }
                let mut p = [
                    (rng.random::<f64>() - 0.5) * x,
                    (rng.random::<f64>() - 0.5) * y,
                    (rng.random::<f64>() - 0.5) * z,
                ];
                let axis = face / 2;
                let sign = if face % 2 == 0 { -0.5 } else { 0.5 };
                p[axis] = sign * [x, y, z][axis];
                p
            }
            Primitive::Cylinder { radius, height, axis } => {
                let side = 2.0 * PI * radius * height;
                let cap = PI * radius * radius;
                let u = rng.random::<f64>() * (side + 2.0 * cap);
                let theta = rng.random::<f64>() * 2.0 * PI;
                let (r, h) = if u < side {
                    (radius, (rng.random::<f64>() - 0.5) * height)
                } else {
                    let top = if u < side + cap { 0.5 } else { -0.5 };
                    (radius * rng.random::<f64>().sqrt(), top * height)
                };
                let (a, b) = (r * theta.cos(), r * theta.sin());
                match axis {
                    0 => [h, a, b],
                    1 => [a, h, b],
                    _ => [a, b, h],
                }
            }
            Primitive::Sphere { radius } => {
                let d = unit_direction(rng);
                [d[0] * radius, d[1] * radius, d[2] * radius]
            }
            Primitive::Dome { radius, up } => {
                let d = unit_direction(rng);
                let z = if up { d[2].abs() } else { -d[2].abs() };
                [d[0] * radius, d[1] * radius, z * radius]
            }
        }
    }
}

fn unit_direction<R: Rng + ?Sized>(rng: &mut R) -> Point {
    let n = Normal::new(0.0, 1.0).expect("unit normal");
    loop {
        let v = [n.sample(rng), n.sample(rng), n.sample(rng)];
        let l = norm(&v);
        if l > 1e-9 {
            return [v[0] / l, v[1] / l, v[2] / l];
        }
    }
}

fn part(primitive: Primitive, offset: Point) -> Part {
    Part { primitive, offset }
}

fn bx(x: f64, y: f64, z: f64) -> Primitive {
    Primitive::Box { size: [x, y, z] }
}

fn cyl(radius: f64, height: f64, axis: usize) -> Primitive {
    Primitive::Cylinder { radius, height, axis }
}

/// Canonical part list for a category.
pub fn recipe(category_id: u32) -> Vec<Part> {
    let o = [0.0; 3];
    match category_id {
        cat::SWITCH => vec![part(bx(0.08, 0.015, 0.12), o), part(bx(0.02, 0.02, 0.04), [0.0, -0.015, 0.0])],
        cat::CEILING_LAMP => vec![
            part(Primitive::Dome { radius: 0.2, up: false }, o),
            part(cyl(0.01, 0.15, 2), [0.0, 0.0, 0.075]),
        ],
        cat::DESK_LAMP => vec![
            part(cyl(0.08, 0.02, 2), [0.0, 0.0, -0.2]),
            part(cyl(0.01, 0.35, 2), [0.0, 0.0, -0.02]),
            part(Primitive::Dome { radius: 0.09, up: false }, [0.0, 0.0, 0.2]),
        ],
        cat::KNOB => vec![part(cyl(0.025, 0.03, 1), o), part(bx(0.01, 0.02, 0.04), [0.0, -0.02, 0.0])],
        cat::BURNER => vec![part(cyl(0.1, 0.015, 2), o), part(cyl(0.05, 0.02, 2), [0.0, 0.0, 0.015])],
        cat::REMOTE => vec![part(bx(0.05, 0.18, 0.02), o)],
        cat::TV => vec![
            part(bx(1.0, 0.05, 0.6), o),
            part(bx(0.05, 0.05, 0.08), [0.0, 0.0, -0.34]),
            part(bx(0.3, 0.2, 0.03), [0.0, 0.0, -0.39]),
        ],
        cat::SPEAKER => vec![part(bx(0.2, 0.2, 0.35), o), part(cyl(0.07, 0.02, 1), [0.0, -0.105, 0.05])],
        cat::MICROWAVE => vec![part(bx(0.5, 0.35, 0.3), o), part(bx(0.02, 0.03, 0.2), [0.2, -0.19, 0.0])],
        cat::KNIFE => vec![part(bx(0.2, 0.03, 0.004), o), part(bx(0.1, 0.025, 0.02), [-0.15, 0.0, 0.0])],
        cat::FRUIT => vec![part(Primitive::Sphere { radius: 0.04 }, o)],
        cat::HOLDER => vec![
            part(cyl(0.01, 0.45, 0), o),
            part(bx(0.03, 0.06, 0.06), [-0.22, 0.03, 0.0]),
            part(bx(0.03, 0.06, 0.06), [0.22, 0.03, 0.0]),
        ],
        cat::TOWEL => vec![part(bx(0.35, 0.01, 0.5), o)],
        cat::FAUCET => vec![
            part(cyl(0.02, 0.25, 2), o),
            part(cyl(0.015, 0.15, 1), [0.0, -0.075, 0.12]),
            part(bx(0.08, 0.02, 0.02), [0.0, 0.02, 0.05]),
        ],
        cat::BOX => vec![part(bx(0.3, 0.3, 0.3), o)],
        cat::BOOK => vec![part(bx(0.15, 0.22, 0.03), o)],
        cat::PLANT => vec![part(cyl(0.08, 0.15, 2), o), part(Primitive::Sphere { radius: 0.15 }, [0.0, 0.0, 0.22])],
        other => panic!("category {other} has no recipe"),
    }
}

/// Per-instance variation applied to a recipe.
#[derive(Clone, Copy, Debug)]
pub struct Jitter {
    pub stretch: (f64, f64),
    /// Point noise as a fraction of the object's largest extent.
    pub noise: f64,
}

/// Samples `count` points on a jittered instance of `category_id`, in the
/// local frame around the origin.
pub fn sample_shape<R: Rng + ?Sized>(category_id: u32, count: usize, jitter: Jitter, rng: &mut R) -> Vec<Point> {
    let s = [
        rng.random_range(jitter.stretch.0..=jitter.stretch.1),
        rng.random_range(jitter.stretch.0..=jitter.stretch.1),
        rng.random_range(jitter.stretch.0..=jitter.stretch.1),
    ];
    let parts: Vec<Part> = recipe(category_id)
        .into_iter()
        .map(|p| Part {
            primitive: p.primitive.stretched(s),
            offset: [p.offset[0] * s[0], p.offset[1] * s[1], p.offset[2] * s[2]],
        })
        .collect();
    let areas: Vec<f64> = parts.iter().map(|p| p.primitive.area()).collect();
    let total: f64 = areas.iter().sum();
    let mut pts = Vec::with_capacity(count);
    for _ in 0..count {
        let mut u = rng.random::<f64>() * total;
        let mut chosen = parts.len() - 1;
        for (k, a) in areas.iter().enumerate() {
            if u < *a {
                chosen = k;
                break;
            }
            u -= a;
        }
        let p = parts[chosen].primitive.sample(rng);
        let o = parts[chosen].offset;
        pts.push([p[0] + o[0], p[1] + o[1], p[2] + o[2]]);
    }
    let extent = (0..3)
        .map(|k| {
            let lo = pts.iter().map(|p| p[k]).fold(f64::INFINITY, f64::min);
            let hi = pts.iter().map(|p| p[k]).fold(f64::NEG_INFINITY, f64::max);
            hi - lo
        })
        .fold(0.0, f64::max);
    if jitter.noise > 0.0 {
        let n = Normal::new(0.0, jitter.noise * extent).expect("positive sigma");
        for p in &mut pts {
            for v in p.iter_mut() {
                *v += n.sample(rng);
            }
        }
    }
    pts
}

pub const DESCRIPTOR_BINS: usize = 8;

/// Fixed shape descriptor of a normalized cloud: per-axis standard
/// deviations, per-axis extents and a radial histogram.
pub fn shape_descriptor(points: &[Point]) -> Vec<f64> {
    let n = points.len() as f64;
    let mut d = Vec::with_capacity(6 + DESCRIPTOR_BINS);
    for k in 0..3 {
        let mean = points.iter().map(|p| p[k]).sum::<f64>() / n;
        let var = points.iter().map(|p| (p[k] - mean).powi(2)).sum::<f64>() / n;
        d.push(var.sqrt());
    }
    for k in 0..3 {
        d.push(points.iter().map(|p| p[k].abs()).fold(0.0, f64::max));
    }
    let mut hist = [0.0; DESCRIPTOR_BINS];
    for p in points {
        let b = ((norm(p) * DESCRIPTOR_BINS as f64) as usize).min(DESCRIPTOR_BINS - 1);
        hist[b] += 1.0 / n;
    }
    d.extend_from_slice(&hist);
    d
}

/// Fraction of (anchor, same-category, other-category) triplets in which the
/// anchor's descriptor is closer to the same-category sample.
pub fn separability<R: Rng + ?Sized>(samples_per_category: usize, points: usize, jitter: Jitter, rng: &mut R) -> f64 {
    let mut descs: Vec<(u32, Vec<f64>)> = Vec::new();
    for c in CATEGORIES.iter() {
        for _ in 0..samples_per_category {
            let raw = sample_shape(c.id, points, jitter, rng);
            let normalized = crate::scene::normalize_pointcloud(&raw).expect("sampled shapes are non-degenerate");
            descs.push((c.id, shape_descriptor(&normalized.points)));
        }
    }
    let dist = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let (mut good, mut total) = (0u64, 0u64);
    for (ai, (ac, ad)) in descs.iter().enumerate() {
        for (pi, (pc, pd)) in descs.iter().enumerate() {
            if pi == ai || pc != ac {
                continue;
            }
            let dp = dist(ad, pd);
            for (nc, nd) in descs.iter() {
                if nc == ac {
                    continue;
                }
                total += 1;
                if dp < dist(ad, nd) {
                    good += 1;
                }
            }
        }
    }
    good as f64 / total as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn every_recipe_normalizes() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let j = Jitter { stretch: (0.85, 1.15), noise: 0.01 };
        for c in CATEGORIES.iter() {
            let raw = sample_shape(c.id, 64, j, &mut rng);
            assert_eq!(raw.len(), 64);
            crate::scene::normalize_pointcloud(&raw).unwrap();
        }
    }

    #[test]
    fn box_samples_lie_on_surface() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let b = bx(1.0, 2.0, 3.0);
        for _ in 0..200 {
            let p = b.sample(&mut rng);
            let on_face = (0..3).any(|k| (p[k].abs() - [0.5, 1.0, 1.5][k]).abs() < 1e-12);
            assert!(on_face, "{p:?}");
        }
    }
}
