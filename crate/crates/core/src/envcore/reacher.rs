use std::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{tolerance, wrap_angle};
use crate::rng::Stream;

/// Planar two-link arm seen from above (no gravity).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReacherParams {
    pub link_lengths: [f64; 2],
    pub link_masses: [f64; 2],
    /// Torque (N·m) produced by a unit action on each joint.
    pub torque_scale: f64,
    /// Viscous joint damping (N·m·s).
    pub joint_damping: f64,
    /// Distance at which the reward saturates to 1 (target + fingertip radii).
    pub reach_radius: f64,
    pub reward_margin: f64,
    /// Targets are placed at radii in this interval.
    pub target_annulus: (f64, f64),
}

impl Default for ReacherParams {
    fn default() -> Self {
        ReacherParams {
            link_lengths: [0.12, 0.12],
            link_masses: [0.1, 0.1],
            torque_scale: 0.05,
            joint_damping: 0.01,
            reach_radius: 0.06,
            reward_margin: 0.1,
            target_annulus: (0.05, 0.20),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReacherState {
    pub theta1: f64,
    pub theta2: f64,
    pub omega1: f64,
    pub omega2: f64,
    pub target: [f64; 2],
}

impl ReacherState {
    pub(crate) fn sample(s: &mut Stream) -> Self {
        let (lo, hi) = ReacherParams::default().target_annulus;
        let angle: f64 = s.random_range(-PI..PI);
        let radius: f64 = s.random_range(lo..=hi);
        ReacherState {
            theta1: wrap_angle(s.random_range(-PI..PI)),
            theta2: wrap_angle(s.random_range(-PI..PI)),
            omega1: 0.0,
            omega2: 0.0,
            target: [radius * angle.cos(), radius * angle.sin()],
        }
    }

    /// Elbow and fingertip positions.
    pub fn joints(&self, p: &ReacherParams) -> ([f64; 2], [f64; 2]) {
        let [l1, l2] = p.link_lengths;
        let elbow = [l1 * self.theta1.cos(), l1 * self.theta1.sin()];
        let a = self.theta1 + self.theta2;
        (elbow, [elbow[0] + l2 * a.cos(), elbow[1] + l2 * a.sin()])
    }

    pub fn fingertip_distance(&self, p: &ReacherParams) -> f64 {
        let (_, tip) = self.joints(p);
        (tip[0] - self.target[0]).hypot(tip[1] - self.target[1])
    }

    /// Joint accelerations from the rigid-body equations `M(q) q̈ = τ - C - D q̇`.
    pub fn accelerations(&self, p: &ReacherParams, action: [f64; 2]) -> (f64, f64) {
        let [l1, l2] = p.link_lengths;
        let [m1, m2] = p.link_masses;
        let (r1, r2) = (l1 / 2.0, l2 / 2.0);
        let (i1, i2) = (m1 * l1 * l1 / 12.0, m2 * l2 * l2 / 12.0);
        let a = i1 + i2 + m1 * r1 * r1 + m2 * (l1 * l1 + r2 * r2);
        let b = m2 * l1 * r2;
        let c = i2 + m2 * r2 * r2;
        let (s2, c2) = self.theta2.sin_cos();
        let m11 = a + 2.0 * b * c2;
        let m12 = c + b * c2;
        let m22 = c;
        let h1 = -b * s2 * (2.0 * self.omega1 * self.omega2 + self.omega2 * self.omega2);
        let h2 = b * s2 * self.omega1 * self.omega1;
        let t1 = action[0] * p.torque_scale - h1 - p.joint_damping * self.omega1;
        let t2 = action[1] * p.torque_scale - h2 - p.joint_damping * self.omega2;
        let det = m11 * m22 - m12 * m12;
        ((m22 * t1 - m12 * t2) / det, (m11 * t2 - m12 * t1) / det)
    }

    pub fn substep(&self, p: &ReacherParams, action: [f64; 2], dt: f64) -> Self {
        let (a1, a2) = self.accelerations(p, action);
        let omega1 = self.omega1 + dt * a1;
        let omega2 = self.omega2 + dt * a2;
        ReacherState {
            theta1: wrap_angle(self.theta1 + dt * omega1),
            theta2: wrap_angle(self.theta2 + dt * omega2),
            omega1,
            omega2,
            target: self.target,
        }
    }

    pub fn reward(&self, p: &ReacherParams) -> f64 {
        tolerance(self.fingertip_distance(p), 0.0, p.reach_radius, p.reward_margin, 0.1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    #[test]
    fn targets_lie_in_annulus() {
        let p = ReacherParams::default();
        for i in 0..500 {
            let s = ReacherState::sample(&mut rng::stream(&[i]));
            let r = s.target[0].hypot(s.target[1]);
            assert!(r >= p.target_annulus.0 - 1e-12 && r <= p.target_annulus.1 + 1e-12);
            assert!(s.theta1 > -PI && s.theta1 <= PI);
        }
    }

    #[test]
    fn reward_is_one_on_target() {
        let p = ReacherParams::default();
        let mut s = ReacherState { theta1: 0.4, theta2: -0.9, omega1: 0.0, omega2: 0.0, target: [0.0, 0.0] };
        s.target = s.joints(&p).1;
        assert_eq!(s.reward(&p), 1.0);
        s.target = [-s.target[0], -s.target[1]];
        assert!(s.reward(&p) < 1.0);
    }

    #[test]
    fn damping_dissipates_energy() {
        let p = ReacherParams::default();
        let mut s = ReacherState { theta1: 0.0, theta2: 0.5, omega1: 3.0, omega2: -2.0, target: [0.1, 0.0] };
        for _ in 0..3000 {
            s = s.substep(&p, [0.0, 0.0], 0.01);
        }
        assert!(s.omega1.abs() < 1e-2 && s.omega2.abs() < 1e-2);
    }
}
