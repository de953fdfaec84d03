use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{tolerance, wrap_angle};
use crate::rng::Stream;

/// Physical constants of the cart-pole.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CartpoleParams {
    pub gravity: f64,
    pub cart_mass: f64,
    pub pole_mass: f64,
    /// Distance from the pivot to the pole's center of mass (m).
    pub half_length: f64,
    /// Force (N) produced by a unit action.
    pub force_scale: f64,
    /// Viscous damping on the hinge (1/s).
    pub pole_damping: f64,
    /// Viscous damping on the cart (1/s).
    pub cart_damping: f64,
    /// The cart stops dead at `±rail_limit` (m).
    pub rail_limit: f64,
}

impl Default for CartpoleParams {
    fn default() -> Self {
        CartpoleParams {
            gravity: 9.81,
            cart_mass: 1.0,
            pole_mass: 0.1,
            half_length: 0.5,
            force_scale: 10.0,
            pole_damping: 1.0,
            cart_damping: 0.2,
            rail_limit: 1.5,
        }
    }
}

/// Cart position/velocity and pole angle (0 = upright)/angular velocity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CartpoleState {
    pub x: f64,
    pub x_dot: f64,
    pub theta: f64,
    pub theta_dot: f64,
}

impl CartpoleState {
    pub const UPRIGHT: CartpoleState = CartpoleState { x: 0.0, x_dot: 0.0, theta: 0.0, theta_dot: 0.0 };

    pub(crate) fn sample(s: &mut Stream) -> Self {
        CartpoleState {
            x: s.random_range(-0.1..=0.1),
            x_dot: s.random_range(-0.01..=0.01),
            theta: s.random_range(-0.05..=0.05),
            theta_dot: s.random_range(-0.01..=0.01),
        }
    }

    /// Cart and pole accelerations under a unit-scaled `action`.
    pub fn accelerations(&self, p: &CartpoleParams, action: f64) -> (f64, f64) {
        let total = p.cart_mass + p.pole_mass;
        let (sin, cos) = self.theta.sin_cos();
        let force = action * p.force_scale;
        let temp = (force + p.pole_mass * p.half_length * self.theta_dot * self.theta_dot * sin) / total;
        let theta_acc = (p.gravity * sin - cos * temp)
            / (p.half_length * (4.0 / 3.0 - p.pole_mass * cos * cos / total))
            - p.pole_damping * self.theta_dot;
        let x_acc = temp - p.pole_mass * p.half_length * theta_acc * cos / total - p.cart_damping * self.x_dot;
        (x_acc, theta_acc)
    }

    pub fn substep(&self, p: &CartpoleParams, action: f64, dt: f64) -> Self {
        let (x_acc, theta_acc) = self.accelerations(p, action);
        let mut x_dot = self.x_dot + dt * x_acc;
        let theta_dot = self.theta_dot + dt * theta_acc;
        let mut x = self.x + dt * x_dot;
        if x.abs() > p.rail_limit {
            x = p.rail_limit.copysign(x);
            x_dot = 0.0;
        }
        CartpoleState { x, x_dot, theta: wrap_angle(self.theta + dt * theta_dot), theta_dot }
    }

    /// Uprightness `max(cos θ, 0)` times a centering term in `[0.5, 1]`.
    pub fn reward(&self, _p: &CartpoleParams) -> f64 {
        let upright = self.theta.cos().max(0.0);
        let centered = (1.0 + tolerance(self.x, -0.25, 0.25, 2.0, 0.1)) / 2.0;
        upright * centered
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn upright_equilibrium_is_fixed_point() {
        let p = CartpoleParams::default();
        let mut s = CartpoleState::UPRIGHT;
        for _ in 0..1000 {
            s = s.substep(&p, 0.0, 0.01);
        }
        assert_eq!(s, CartpoleState::UPRIGHT);
    }

    #[test]
    fn reward_extremes() {
        let p = CartpoleParams::default();
        assert_eq!(CartpoleState::UPRIGHT.reward(&p), 1.0);
        let flat = CartpoleState { theta: FRAC_PI_2, ..CartpoleState::UPRIGHT };
        assert!(flat.reward(&p).abs() < 1e-12);
        let down = CartpoleState { theta: 3.0, ..CartpoleState::UPRIGHT };
        assert_eq!(down.reward(&p), 0.0);
    }

    #[test]
    fn rail_stops_the_cart() {
        let p = CartpoleParams::default();
        let mut s = CartpoleState::UPRIGHT;
        for _ in 0..2000 {
            s = s.substep(&p, 1.0, 0.01);
            assert!(s.x.abs() <= p.rail_limit);
        }
    }
}
