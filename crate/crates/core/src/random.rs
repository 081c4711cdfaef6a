//! Seeded random models for property tests, sweeps and benchmarks.

use rand::Rng;

use crate::linalg::{numerical_rank, Mat, Vector, RANK_TOLERANCE};
use crate::tsmodel::{
    AffineFamily, Dimensions, ParamAffineModel, ParamTransmission, Premise, PremiseSpec,
};

/// Entry scales of the generated matrices.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RandomScales {
    /// `A0 = G - shift I` with `G` uniform in `[-1, 1]`.
    pub a_shift: f64,
    pub a_slope: f64,
    pub b: f64,
    pub f: f64,
    pub transmission: f64,
}

impl Default for RandomScales {
    fn default() -> Self {
        RandomScales { a_shift: 1.5, a_slope: 0.3, b: 1.0, f: 0.5, transmission: 0.3 }
    }
}

fn uniform<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize, scale: f64) -> Mat {
    Mat::from_fn(rows, cols, |_, _| rng.random_range(-1.0..=1.0) * scale)
}

fn family<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize, np: usize, base: f64, slope: f64) -> AffineFamily {
    AffineFamily {
        base: uniform(rng, rows, cols, base),
        slopes: (0..np).map(|_| uniform(rng, rows, cols, slope)).collect(),
    }
}

/// Random full-row-rank `n_y x n` matrix.
pub fn random_output_matrix<R: Rng + ?Sized>(rng: &mut R, n_y: usize, n: usize) -> Mat {
    loop {
        let c = uniform(rng, n_y, n, 1.0);
        if numerical_rank(&c, 1e-3) == n_y && numerical_rank(&c, RANK_TOLERANCE) == n_y {
            return c;
        }
    }
}

pub fn random_param_affine_model<R: Rng + ?Sized>(
    rng: &mut R,
    dims: Dimensions,
    scales: RandomScales,
) -> ParamAffineModel {
    let (n, nu, ny, np) = (dims.n, dims.n_u, dims.n_y, dims.n_p);
    let mut a = family(rng, n, n, np, 1.0, scales.a_slope);
    a.base -= Mat::identity(n, n) * scales.a_shift;
    let b = family(rng, n, nu, np, scales.b, 0.5 * scales.b);
    let f = family(rng, n, 1, np, scales.f, 0.5 * scales.f);
    let s = scales.transmission;
    let transmission = (0..dims.n_theta)
        .map(|_| ParamTransmission {
            a: family(rng, n, n, np, s, 0.5 * s),
            b: family(rng, n, nu, np, s, 0.5 * s),
            f: family(rng, n, 1, np, s, 0.5 * s),
        })
        .collect();
    let c = random_output_matrix(rng, ny, n);
    let premises = (0..np)
        .map(|_| {
            let min = rng.random_range(-1.0..=0.0);
            Premise {
                min,
                max: min + rng.random_range(0.5..=2.0),
                selector: Vector::from_fn(ny + nu, |_, _| rng.random_range(-1.0..=1.0)),
            }
        })
        .collect();
    let premises = PremiseSpec::new(premises, ny + nu).expect("generated premises are valid");
    ParamAffineModel::new(dims, a, b, f, transmission, c, premises).expect("generated model is valid")
}

/// Random dimensions with `n` in `2..=max_n`, `n_p` in `1..=max_np` and
/// `n_theta` in `1..=max_theta`.
pub fn random_dimensions<R: Rng + ?Sized>(rng: &mut R, max_n: usize, max_np: usize, max_theta: usize) -> Dimensions {
    let n = rng.random_range(2..=max_n.max(2));
    let n_y = rng.random_range(1..=n);
    let n_u = rng.random_range(1..=2);
    let n_p = rng.random_range(1..=max_np.max(1));
    let n_theta = rng.random_range(1..=max_theta.max(1));
    Dimensions::new(n, n_u, n_y, n_p, n_theta).expect("generated dimensions are valid")
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn generated_models_are_valid_and_seeded() {
        let mut r1 = ChaCha8Rng::seed_from_u64(3);
        let mut r2 = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..10 {
            let d1 = random_dimensions(&mut r1, 4, 2, 2);
            let d2 = random_dimensions(&mut r2, 4, 2, 2);
            assert_eq!(d1, d2);
            let m1 = random_param_affine_model(&mut r1, d1, RandomScales::default());
            let m2 = random_param_affine_model(&mut r2, d2, RandomScales::default());
            assert_eq!(m1, m2);
        }
    }
}
