#pragma once

// Symmetry machinery for the filter: the product group
//
//   G = (SE2(3) |x se2(3)) x SE(3),  X = (A, a, B)
//
// acting on the state manifold M = SE2(3) x R^9 x SE(3), xi = (T, b, K):
// navigation state, IMU bias triplet [gyro, accel, velocity], and the
// LiDAR-IMU extrinsic. Inputs gamma = (w, g, tau, tau_k) collect the IMU
// reading (with a zero third "virtual velocity" slot), the gravity vector,
// and the bias / extrinsic drift inputs (zero in normal operation).

#include <Eigen/Dense>

#include "lio/lie.hpp"

namespace lio {

using Vec24 = Eigen::Matrix<double, 24, 1>;

struct GroupElement {
  ExtendedPose A;
  Vec9 a = Vec9::Zero();
  Pose B;

  static GroupElement identity() { return GroupElement{}; }
};

struct SystemState {
  ExtendedPose T;        // navigation state (C, v, r)
  Vec9 b = Vec9::Zero(); // biases [b_g, b_a, b_mu]
  Pose K;                // LiDAR-to-IMU extrinsic

  static SystemState origin() { return SystemState{}; }
};

struct SystemInput {
  Vec9 w = Vec9::Zero();      // IMU reading [omega, accel, mu=0]
  Vec3 g = Vec3::Zero();      // gravity in the world frame
  Vec9 tau = Vec9::Zero();    // bias drift input
  Vec6 tau_k = Vec6::Zero();  // extrinsic drift input
};

// Left-trivialised tangent vector on M: [T-slot (9) | b-slot (9) | K-slot (6)].
using StateTangent = Vec24;

GroupElement g_compose(const GroupElement& x, const GroupElement& y);
GroupElement g_inverse(const GroupElement& x);

// Group exponential. The semi-direct factor integrates the algebra pair
// (u, w) to (exp(u), J(u) w) with J the left Jacobian of SE2(3).
GroupElement g_exp(const Vec9& u1, const Vec9& u2, const Vec6& u3);

// Right action of G on M.
SystemState action_phi(const GroupElement& x, const SystemState& xi);

// Right action of G on the input space.
SystemInput action_psi(const GroupElement& x, const SystemInput& gamma);

// Unique group element carrying xi1 to xi2 (the action is free + transitive):
// action_phi(transport(xi1, xi2), xi1) == xi2.
GroupElement transport(const SystemState& xi1, const SystemState& xi2);

// Equivariant lift: Lambda(xi, gamma) in the Lie algebra of G, satisfying
// d/dt phi(exp(t Lambda), xi)|_0 = system dynamics at (xi, gamma).
void lift_lambda(const SystemState& xi, const SystemInput& gamma,
                 Vec9* lambda1, Vec9* lambda2, Vec6* lambda3);

// System dynamics (drift term + input field) in left-trivialised coordinates.
StateTangent system_dynamics(const SystemState& xi, const SystemInput& gamma);

// Finite-difference residual of the equivariance identity
//   f(psi_X(gamma)) at phi_X(xi)  ==  dphi_X [ f(gamma) at xi ],
// with dphi_X evaluated by central differences along curve directions.
double check_equivariance(const GroupElement& x, const SystemState& xi,
                          const SystemInput& gamma, double step = 1e-6);

// Finite-difference residual of the lift condition: the t-derivative of
// phi(exp(t Lambda), xi) at t = 0 against system_dynamics(xi, gamma).
double check_lift(const SystemState& xi, const SystemInput& gamma, double step = 1e-6);

}  // namespace lio
