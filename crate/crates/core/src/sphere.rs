//! Point samplers for S^{d-1} and for the closed upper hemisphere of S^n
//! (the conformal disk), at a common mesh spacing h = pi / resolution.

use std::f64::consts::PI;

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Cap on random samples for dimensions where no structured sampler exists.
const MAX_RANDOM_SAMPLES: usize = 40_000;

pub fn mesh_spacing(resolution: usize) -> f64 {
    PI / resolution as f64
}

pub fn random_unit(dim: usize, rng: &mut impl Rng) -> DVector<f64> {
    loop {
        let v = DVector::from_fn(dim, |_, _| rng.sample::<f64, _>(StandardNormal));
        let n = v.norm();
        if n > 1e-8 {
            return v / n;
        }
    }
}

/// Fibonacci lattice with `count` points on S^2.
pub fn fibonacci_sphere(count: usize) -> Vec<DVector<f64>> {
    let golden = PI * (3.0 - 5f64.sqrt());
    (0..count)
        .map(|i| {
            let z = 1.0 - (2.0 * i as f64 + 1.0) / count as f64;
            let r = (1.0 - z * z).max(0.0).sqrt();
            let phi = golden * i as f64;
            DVector::from_vec(vec![r * phi.cos(), r * phi.sin(), z])
        })
        .collect()
}

fn with_antipodes(pts: Vec<DVector<f64>>) -> Vec<DVector<f64>> {
    let mut out = Vec::with_capacity(2 * pts.len());
    for p in &pts {
        out.push(p.clone());
    }
    for p in pts {
        out.push(-p);
    }
    out
}

/// Samples of the unit sphere in R^dim, closed under the antipodal map.
///
/// dim = 2 gives 2R equally spaced points, dim = 3 a Fibonacci lattice with
/// its antipodes, larger dim seeded Gaussian samples with antipodes.
pub fn sphere_samples(dim: usize, resolution: usize, seed: u64) -> Vec<DVector<f64>> {
    let r = resolution.max(1);
    match dim {
        0 | 1 => panic!("sphere_samples needs dim >= 2"),
        2 => (0..2 * r)
            .map(|k| {
                let t = k as f64 * PI / r as f64;
                DVector::from_vec(vec![t.cos(), t.sin()])
            })
            .collect(),
        3 => with_antipodes(fibonacci_sphere(((0.98 * (r * r) as f64).ceil() as usize).max(4))),
        _ => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let count = r.pow(dim as u32 - 1).clamp(8, MAX_RANDOM_SAMPLES) / 2;
            with_antipodes((0..count).map(|_| random_unit(dim, &mut rng)).collect())
        }
    }
}

/// A sampling of the closed upper hemisphere of S^n in R^{n+1}.
#[derive(Clone, Debug)]
pub struct DiskMesh {
    pub points: Vec<DVector<f64>>,
    /// true for points on the equator (the boundary sphere of the disk)
    pub boundary: Vec<bool>,
    pub spacing: f64,
}

impl DiskMesh {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn interior(&self) -> impl Iterator<Item = &DVector<f64>> {
        self.points
            .iter()
            .zip(&self.boundary)
            .filter(|(_, b)| !**b)
            .map(|(p, _)| p)
    }

    pub fn boundary_points(&self) -> impl Iterator<Item = &DVector<f64>> {
        self.points
            .iter()
            .zip(&self.boundary)
            .filter(|(_, b)| **b)
            .map(|(p, _)| p)
    }
}

fn lift_ring(sphere_pt: &DVector<f64>, rho: f64) -> DVector<f64> {
    let n = sphere_pt.len();
    let mut p = DVector::zeros(n + 1);
    p.rows_mut(0, n).copy_from(&(sphere_pt * rho.sin()));
    p[n] = rho.cos();
    p
}

/// Disk mesh for D^n: latitude rings around the north pole, the last ring
/// being the boundary sphere at the full `sphere_samples` density.
pub fn disk_mesh(n: usize, resolution: usize, seed: u64) -> DiskMesh {
    assert!(n >= 2, "disk_mesh needs n >= 2");
    let r = resolution.max(2);
    let h = mesh_spacing(r);
    let mut points = Vec::new();
    let mut boundary = Vec::new();
    let mut north = DVector::zeros(n + 1);
    north[n] = 1.0;
    points.push(north);
    boundary.push(false);
    if n <= 3 {
        let rings = r.div_ceil(2);
        for k in 1..rings {
            let rho = k as f64 * PI / 2.0 / rings as f64;
            let ring: Vec<DVector<f64>> = if n == 2 {
                let m = ((2.0 * PI * rho.sin() / h).ceil() as usize).max(3);
                (0..m)
                    .map(|j| {
                        let t = 2.0 * PI * j as f64 / m as f64;
                        DVector::from_vec(vec![t.cos(), t.sin()])
                    })
                    .collect()
            } else {
                let m = ((4.0 * PI * rho.sin().powi(2) / (h * h)).ceil() as usize).max(4);
                fibonacci_sphere(m)
            };
            for s in ring {
                points.push(lift_ring(&s, rho));
                boundary.push(false);
            }
        }
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
        let count = r.pow(n as u32).clamp(16, MAX_RANDOM_SAMPLES);
        for _ in 0..count {
            let mut p = random_unit(n + 1, &mut rng);
            p[n] = p[n].abs();
            if p[n] > 1e-9 {
                points.push(p);
                boundary.push(false);
            }
        }
    }
    for s in sphere_samples(n, r, seed) {
        points.push(lift_ring(&s, PI / 2.0));
        boundary.push(true);
    }
    DiskMesh {
        points,
        boundary,
        spacing: h,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ambient::spherical_distance;

    fn covering_radius(samples: &[DVector<f64>], probes: &[DVector<f64>]) -> f64 {
        probes
            .iter()
            .map(|p| {
                samples
                    .iter()
                    .map(|s| spherical_distance(p.as_slice(), s.as_slice()))
                    .fold(f64::INFINITY, f64::min)
            })
            .fold(0.0, f64::max)
    }

    #[test]
    fn circle_and_sphere_coverage() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for dim in [2, 3] {
            let s = sphere_samples(dim, 32, 0);
            let probes: Vec<_> = (0..500).map(|_| random_unit(dim, &mut rng)).collect();
            assert!(covering_radius(&s, &probes) <= 1.2 * mesh_spacing(32));
            for p in &s {
                assert!(s.iter().any(|q| (p + q).norm() < 1e-12));
            }
        }
    }

    #[test]
    fn disk_mesh_shape() {
        for n in [2, 3] {
            let m = disk_mesh(n, 16, 0);
            assert!(m.points.iter().all(|p| (p.norm() - 1.0).abs() < 1e-12 && p[n] >= -1e-15));
            assert!(m.boundary_points().all(|p| p[n].abs() < 1e-15));
            let mut rng = ChaCha8Rng::seed_from_u64(9);
            let probes: Vec<_> = (0..300)
                .map(|_| {
                    let mut p = random_unit(n + 1, &mut rng);
                    p[n] = p[n].abs();
                    p
                })
                .collect();
            assert!(covering_radius(&m.points, &probes) <= 1.5 * mesh_spacing(16));
        }
    }
}
