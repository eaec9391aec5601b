//! Seeded random samples on `S3`, `ST*S2` and their tangent spaces.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::forms::{S3Tangent, STPoint, STTangent};
use crate::quat::{PureImaginary, Quaternion, UnitQuaternion};

/// Name recorded in reports next to the seed.
pub const RNG_NAME: &str = "chacha8";

pub type SampleRng = ChaCha8Rng;

pub fn rng_from_seed(seed: u64) -> SampleRng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn gaussian<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.sample(StandardNormal)
}

pub fn random_quaternion<R: Rng + ?Sized>(rng: &mut R) -> Quaternion {
    Quaternion::new(gaussian(rng), gaussian(rng), gaussian(rng), gaussian(rng))
}

/// Uniform on `S3`.
pub fn random_unit_quaternion<R: Rng + ?Sized>(rng: &mut R) -> UnitQuaternion {
    loop {
        let q = random_quaternion(rng);
        if q.norm() > 1e-6 {
            return UnitQuaternion::new_normalize(q).expect("nonzero");
        }
    }
}

pub fn random_vector<R: Rng + ?Sized>(rng: &mut R) -> PureImaginary {
    PureImaginary::new(gaussian(rng), gaussian(rng), gaussian(rng))
}

/// Uniform on `S2`.
pub fn random_unit_vector<R: Rng + ?Sized>(rng: &mut R) -> PureImaginary {
    loop {
        let v = random_vector(rng);
        if v.norm() > 1e-6 {
            return v.normalized().expect("nonzero");
        }
    }
}

/// Gaussian tangent vector at `u`, i.e. `c u` with `c` a random pure imaginary.
pub fn random_s3_tangent<R: Rng + ?Sized>(rng: &mut R, u: UnitQuaternion) -> S3Tangent {
    let c = random_vector(rng);
    S3Tangent::new(u, c.to_quaternion() * u.quaternion()).expect("c u is tangent at u")
}

pub fn random_st_point<R: Rng + ?Sized>(rng: &mut R) -> STPoint {
    let x = random_unit_vector(rng);
    let y = x.cross(random_unit_vector(rng));
    let y = match y.normalized() {
        Ok(y) => y,
        Err(_) => x.any_orthogonal(),
    };
    STPoint::new(x, y).expect("orthonormal by construction")
}

/// Tangent vector `(w x x, w x y)` for a Gaussian `w`; these span `T ST*S2`.
pub fn random_st_tangent<R: Rng + ?Sized>(rng: &mut R, base: STPoint) -> STTangent {
    let w = random_vector(rng);
    STTangent::new(base, w.cross(base.x()), w.cross(base.y())).expect("rotation generators are tangent")
}
