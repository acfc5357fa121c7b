//! Minimal 3D primitives for the twins: points, segments, capsules, boxes.

use std::ops::{Add, Mul, Sub};

use serde::{Deserialize, Serialize};

const EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Vec3 { x, y, z }
    }

    pub fn dot(self, other: Vec3) -> f64 {
        self.x * other.x + self.y * other.y + self.z * other.z
    }

    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn lerp(self, other: Vec3, t: f64) -> Vec3 {
        self + (other - self) * t
    }

    fn axis(self, i: usize) -> f64 {
        match i {
            0 => self.x,
            1 => self.y,
            _ => self.z,
        }
    }
}

impl Add for Vec3 {
    type Output = Vec3;
    fn add(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl Sub for Vec3 {
    type Output = Vec3;
    fn sub(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Mul<f64> for Vec3 {
    type Output = Vec3;
    fn mul(self, s: f64) -> Vec3 {
        Vec3::new(self.x * s, self.y * s, self.z * s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub a: Vec3,
    pub b: Vec3,
}

impl Segment {
    pub fn new(a: Vec3, b: Vec3) -> Self {
        Segment { a, b }
    }

    pub fn point_at(&self, t: f64) -> Vec3 {
        self.a.lerp(self.b, t)
    }

    pub fn midpoint(&self) -> Vec3 {
        self.point_at(0.5)
    }
}

/// A swept sphere: all points within `radius` of the axis segment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Capsule {
    pub p0: Vec3,
    pub p1: Vec3,
    pub radius: f64,
}

impl Capsule {
    pub fn axis(&self) -> Segment {
        Segment::new(self.p0, self.p1)
    }

    pub fn centroid(&self) -> Vec3 {
        self.p0.lerp(self.p1, 0.5)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aabb {
    pub min: Vec3,
    pub max: Vec3,
}

impl Aabb {
    pub fn centered(center: Vec3, size: [f64; 3]) -> Self {
        let half = Vec3::new(size[0] / 2.0, size[1] / 2.0, size[2] / 2.0);
        Aabb { min: center - half, max: center + half }
    }

    /// Slab test for the closed segment against the closed box.
    pub fn intersects_segment(&self, seg: &Segment) -> bool {
        let dir = seg.b - seg.a;
        let (mut t_lo, mut t_hi) = (0.0_f64, 1.0_f64);
        for i in 0..3 {
            let origin = seg.a.axis(i);
            let d = dir.axis(i);
            let (lo, hi) = (self.min.axis(i), self.max.axis(i));
            if d.abs() < EPS {
                if origin < lo || origin > hi {
                    return false;
                }
            } else {
                let (mut t1, mut t2) = ((lo - origin) / d, (hi - origin) / d);
                if t1 > t2 {
                    std::mem::swap(&mut t1, &mut t2);
                }
                t_lo = t_lo.max(t1);
                t_hi = t_hi.min(t2);
                if t_lo > t_hi {
                    return false;
                }
            }
        }
        true
    }
}

/// Minimum distance between two closed segments, with the parameters of the
/// closest pair.
pub fn closest_points(s1: &Segment, s2: &Segment) -> (f64, f64, f64) {
    let d1 = s1.b - s1.a;
    let d2 = s2.b - s2.a;
    let r = s1.a - s2.a;
    let a = d1.dot(d1);
    let e = d2.dot(d2);
    let f = d2.dot(r);

    let (s, t) = if a <= EPS && e <= EPS {
        (0.0, 0.0)
    } else if a <= EPS {
        (0.0, (f / e).clamp(0.0, 1.0))
    } else {
        let c = d1.dot(r);
        if e <= EPS {
            ((-c / a).clamp(0.0, 1.0), 0.0)
        } else {
            let b = d1.dot(d2);
            let denom = a * e - b * b;
            let mut s = if denom > EPS * a * e {
                ((b * f - c * e) / denom).clamp(0.0, 1.0)
            } else {
                0.0
            };
            let mut t = (b * s + f) / e;
            if t < 0.0 {
                t = 0.0;
                s = (-c / a).clamp(0.0, 1.0);
            } else if t > 1.0 {
                t = 1.0;
                s = ((b - c) / a).clamp(0.0, 1.0);
            }
            (s, t)
        }
    };
    let dist = (s1.point_at(s) - s2.point_at(t)).norm();
    (dist, s, t)
}

pub fn segment_distance(s1: &Segment, s2: &Segment) -> f64 {
    closest_points(s1, s2).0
}

/// Distance from a segment to a capsule surface; negative when penetrating.
pub fn segment_capsule_separation(seg: &Segment, capsule: &Capsule) -> f64 {
    segment_distance(seg, &capsule.axis()) - capsule.radius
}
