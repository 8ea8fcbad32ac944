//! 6-DOF probe poses, pose-dependent image quality and the guidance / learner
//! movement model.
//!
//! Offsets are expressed in the world frame: applying offset `(t, ω)` to a
//! pose moves its position by `t` and left-multiplies its orientation by
//! `exp(ω)`.

use nalgebra::{Quaternion, UnitQuaternion, Vector3};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbePose {
    /// Millimetres.
    pub position: Vector3<f64>,
    pub orientation: UnitQuaternion<f64>,
}

impl ProbePose {
    pub fn new(position: Vector3<f64>, orientation: UnitQuaternion<f64>) -> Self {
        Self {
            position,
            orientation,
        }
    }

    pub fn identity() -> Self {
        Self::new(Vector3::zeros(), UnitQuaternion::identity())
    }

    /// Deviation of the stored quaternion's norm from one.
    pub fn orientation_norm_error(&self) -> f64 {
        (self.orientation.as_ref().norm() - 1.0).abs()
    }
}

/// Six numbers: translation (mm) and rotation vector (axis × angle, rad).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoseOffset {
    pub translation: Vector3<f64>,
    pub rotation: Vector3<f64>,
}

impl PoseOffset {
    pub fn zero() -> Self {
        Self {
            translation: Vector3::zeros(),
            rotation: Vector3::zeros(),
        }
    }

    pub fn as_array(&self) -> [f64; 6] {
        [
            self.translation.x,
            self.translation.y,
            self.translation.z,
            self.rotation.x,
            self.rotation.y,
            self.rotation.z,
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoseError {
    pub translation: f64,
    pub rotation: f64,
}

/// Smallest rotation angle in `[0, π]` carrying `a` onto `b`.
pub fn geodesic_angle(a: &UnitQuaternion<f64>, b: &UnitQuaternion<f64>) -> f64 {
    let d = a.inverse() * b;
    2.0 * d.imag().norm().atan2(d.scalar().abs())
}

/// Rotation vector of `q` with angle in `[0, π]`.
pub fn rotation_vector(q: &UnitQuaternion<f64>) -> Vector3<f64> {
    let (w, v) = if q.scalar() < 0.0 {
        (-q.scalar(), -q.imag())
    } else {
        (q.scalar(), q.imag())
    };
    let s = v.norm();
    if s == 0.0 {
        return Vector3::zeros();
    }
    v * (2.0 * s.atan2(w) / s)
}

pub fn pose_error(current: &ProbePose, target: &ProbePose) -> PoseError {
    PoseError {
        translation: (target.position - current.position).norm(),
        rotation: geodesic_angle(&current.orientation, &target.orientation),
    }
}

/// Latent per-subject optimum and the quality falloff around it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SubjectAnatomy {
    pub target: ProbePose,
    translation_scale: f64,
    rotation_scale: f64,
    failure_cutoff: f64,
}

impl SubjectAnatomy {
    pub fn new(
        target: ProbePose,
        translation_scale: f64,
        rotation_scale: f64,
        failure_cutoff: f64,
    ) -> Result<Self> {
        if !(translation_scale > 0.0 && translation_scale.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "translation_scale",
                value: translation_scale,
                constraint: "finite and > 0",
            });
        }
        if !(rotation_scale > 0.0 && rotation_scale.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "rotation_scale",
                value: rotation_scale,
                constraint: "finite and > 0",
            });
        }
        if !(failure_cutoff > 0.0 && failure_cutoff < 1.0) {
            return Err(Error::InvalidParameter {
                name: "failure_cutoff",
                value: failure_cutoff,
                constraint: "0 < failure_cutoff < 1",
            });
        }
        Ok(Self {
            target,
            translation_scale,
            rotation_scale,
            failure_cutoff,
        })
    }

    pub fn translation_scale(&self) -> f64 {
        self.translation_scale
    }

    pub fn rotation_scale(&self) -> f64 {
        self.rotation_scale
    }

    pub fn failure_cutoff(&self) -> f64 {
        self.failure_cutoff
    }

    pub fn fails(&self, quality: f64) -> bool {
        quality < self.failure_cutoff
    }
}

/// `exp(−(d_t/σ_t)² − (d_r/σ_r)²)`.
pub fn image_quality(current: &ProbePose, subject: &SubjectAnatomy) -> f64 {
    let e = pose_error(current, &subject.target);
    let t = e.translation / subject.translation_scale;
    let r = e.rotation / subject.rotation_scale;
    (-(t * t) - r * r).exp()
}

fn check_scale(name: &'static str, v: f64) -> Result<()> {
    if v >= 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name,
            value: v,
            constraint: "finite and >= 0",
        })
    }
}

/// How faithfully the learner executes guidance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LearnerPolicy {
    gain: f64,
    motor_noise_t: f64,
    motor_noise_r: f64,
}

impl LearnerPolicy {
    pub fn new(gain: f64, motor_noise_t: f64, motor_noise_r: f64) -> Result<Self> {
        if !(gain > 0.0 && gain <= 1.0) {
            return Err(Error::InvalidParameter {
                name: "gain",
                value: gain,
                constraint: "0 < gain <= 1",
            });
        }
        check_scale("motor_noise_t", motor_noise_t)?;
        check_scale("motor_noise_r", motor_noise_r)?;
        Ok(Self {
            gain,
            motor_noise_t,
            motor_noise_r,
        })
    }

    pub fn gain(&self) -> f64 {
        self.gain
    }
}

/// Error of the predicted 6D offset.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GuidanceNoise {
    translation_sd: f64,
    rotation_sd: f64,
}

impl GuidanceNoise {
    pub fn new(translation_sd: f64, rotation_sd: f64) -> Result<Self> {
        check_scale("guidance_noise_t", translation_sd)?;
        check_scale("guidance_noise_r", rotation_sd)?;
        Ok(Self {
            translation_sd,
            rotation_sd,
        })
    }

    pub fn none() -> Self {
        Self {
            translation_sd: 0.0,
            rotation_sd: 0.0,
        }
    }
}

fn gaussian_vector<R: Rng + ?Sized>(rng: &mut R, sd: f64) -> Vector3<f64> {
    let mut draw = || -> f64 { StandardNormal.sample(rng) };
    Vector3::new(draw(), draw(), draw()) * sd
}

/// Rotation about a uniformly random axis by a `N(0, sd²)` angle. Always
/// consumes four normal draws.
pub fn random_rotation<R: Rng + ?Sized>(rng: &mut R, sd: f64) -> UnitQuaternion<f64> {
    let axis = gaussian_vector(rng, 1.0);
    let angle: f64 = StandardNormal.sample(rng);
    let n = axis.norm();
    if sd == 0.0 || n == 0.0 {
        return UnitQuaternion::identity();
    }
    UnitQuaternion::from_scaled_axis(axis * (sd * angle / n))
}

/// Uniformly distributed orientation.
pub fn uniform_orientation<R: Rng + ?Sized>(rng: &mut R) -> UnitQuaternion<f64> {
    loop {
        let mut draw = || -> f64 { StandardNormal.sample(rng) };
        let q = Quaternion::new(draw(), draw(), draw(), draw());
        if q.norm() > 1e-12 {
            return UnitQuaternion::new_normalize(q);
        }
    }
}

/// Predicted offset from `current` towards the subject's target, corrupted
/// by the guidance noise.
pub fn guidance_offset<R: Rng + ?Sized>(
    current: &ProbePose,
    subject: &SubjectAnatomy,
    noise: &GuidanceNoise,
    rng: &mut R,
) -> PoseOffset {
    let translation =
        subject.target.position - current.position + gaussian_vector(rng, noise.translation_sd);
    let exact = subject.target.orientation * current.orientation.inverse();
    let noisy = random_rotation(rng, noise.rotation_sd) * exact;
    PoseOffset {
        translation,
        rotation: rotation_vector(&noisy),
    }
}

/// Learner executes `gain × offset` with motor noise on top.
pub fn apply_move<R: Rng + ?Sized>(
    current: &ProbePose,
    offset: &PoseOffset,
    policy: &LearnerPolicy,
    rng: &mut R,
) -> ProbePose {
    let position = current.position
        + offset.translation * policy.gain
        + gaussian_vector(rng, policy.motor_noise_t);
    let step = UnitQuaternion::from_scaled_axis(offset.rotation * policy.gain);
    let motor = random_rotation(rng, policy.motor_noise_r);
    let orientation =
        UnitQuaternion::new_normalize((motor * step * current.orientation).into_inner());
    ProbePose::new(position, orientation)
}
