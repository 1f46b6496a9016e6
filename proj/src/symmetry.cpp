#include "lio/symmetry.hpp"

namespace lio {

namespace {

// Embeds a rotation-only algebra vector into se(3): (w, 0).
Vec6 rot_only_se3(const Vec3& w) {
  Vec6 v = Vec6::Zero();
  v.head<3>() = w;
  return v;
}

// Gravity input as an se2(3) vector: (0, g, 0).
Vec9 gravity_alg(const Vec3& g) {
  Vec9 v = Vec9::Zero();
  v.segment<3>(3) = g;
  return v;
}

// Rotation part of a SE2(3) element as an SE(3) element with zero translation.
Pose gamma_pose(const ExtendedPose& a) {
  return Pose(a.rotation(), Vec3::Zero());
}

}  // namespace

GroupElement g_compose(const GroupElement& x, const GroupElement& y) {
  GroupElement out;
  out.A = x.A * y.A;
  out.a = x.a + x.A.adjoint_matrix() * y.a;
  out.B = x.B * y.B;
  return out;
}

GroupElement g_inverse(const GroupElement& x) {
  GroupElement out;
  out.A = x.A.inverse();
  out.a = -(out.A.adjoint_matrix() * x.a);
  out.B = x.B.inverse();
  return out;
}

GroupElement g_exp(const Vec9& u1, const Vec9& u2, const Vec6& u3) {
  GroupElement out;
  out.A = ExtendedPose::exp(u1);
  out.a = se23_left_jacobian(u1) * u2;
  out.B = Pose::exp(u3);
  return out;
}

SystemState action_phi(const GroupElement& x, const SystemState& xi) {
  SystemState out;
  out.T = xi.T * x.A;
  out.b = x.A.inverse().adjoint_matrix() * (xi.b - x.a);
  out.K = gamma_pose(x.A).inverse() * xi.K * x.B;
  return out;
}

SystemInput action_psi(const GroupElement& x, const SystemInput& gamma) {
  SystemInput out;
  const Mat9 adj_a_inv = x.A.inverse().adjoint_matrix();
  // First slot: Ad_{A^-1}(gamma_1 - a) plus the drift term evaluated at A^-1,
  // whose only nonzero slot is the position one: -Gamma(A)^-1 v_A.
  out.w = adj_a_inv * (gamma.w - x.a);
  out.w.tail<3>() += -(x.A.rotation().inverse() * x.A.velocity());
  out.g = gamma.g;
  out.tau = adj_a_inv * gamma.tau;
  out.tau_k = x.B.inverse().adjoint_matrix() * gamma.tau_k;
  return out;
}

GroupElement transport(const SystemState& xi1, const SystemState& xi2) {
  GroupElement out;
  out.A = xi1.T.inverse() * xi2.T;
  out.a = xi1.b - out.A.adjoint_matrix() * xi2.b;
  out.B = xi1.K.inverse() * (gamma_pose(out.A) * xi2.K);
  return out;
}

void lift_lambda(const SystemState& xi, const SystemInput& gamma,
                 Vec9* lambda1, Vec9* lambda2, Vec6* lambda3) {
  const Mat9 adj_t_inv = xi.T.inverse().adjoint_matrix();
  Vec9 l1 = gamma.w - xi.b + adj_t_inv * gravity_alg(gamma.g);
  // Drift term pulled back to the algebra: (0, 0, C^T v).
  l1.tail<3>() += xi.T.rotation().inverse() * xi.T.velocity();

  *lambda1 = l1;
  *lambda2 = se23_ad(xi.b) * l1 - gamma.tau;
  *lambda3 = xi.K.inverse().adjoint_matrix() * rot_only_se3(l1.head<3>()) + gamma.tau_k;
}

StateTangent system_dynamics(const SystemState& xi, const SystemInput& gamma) {
  StateTangent v;
  // T-slot: T^-1 Tdot = (w - b) + Ad_{T^-1} g_alg + (0, 0, C^T v).
  Vec9 vt = gamma.w - xi.b + xi.T.inverse().adjoint_matrix() * gravity_alg(gamma.g);
  vt.tail<3>() += xi.T.rotation().inverse() * xi.T.velocity();
  v.segment<9>(0) = vt;
  v.segment<9>(9) = gamma.tau;
  v.segment<6>(18) = gamma.tau_k;
  return v;
}

namespace {

// Moves xi along a left-trivialised tangent vector for time t.
SystemState advance(const SystemState& xi, const StateTangent& v, double t) {
  SystemState out;
  out.T = xi.T * ExtendedPose::exp(t * v.segment<9>(0));
  out.b = xi.b + t * v.segment<9>(9);
  out.K = xi.K * Pose::exp(t * v.segment<6>(18));
  return out;
}

// Left-trivialised displacement of xi_to relative to xi_from.
StateTangent displacement(const SystemState& from, const SystemState& to) {
  StateTangent d;
  d.segment<9>(0) = (from.T.inverse() * to.T).log();
  d.segment<9>(9) = to.b - from.b;
  d.segment<6>(18) = (from.K.inverse() * to.K).log();
  return d;
}

}  // namespace

double check_equivariance(const GroupElement& x, const SystemState& xi,
                          const SystemInput& gamma, double step) {
  // Left-hand side: dynamics at xi under the transformed input.
  const SystemState xi_moved = action_phi(x, xi);
  const StateTangent lhs = system_dynamics(xi_moved, action_psi(x, gamma));

  // Right-hand side: push the vector field at xi through dphi_X by central
  // differences along the curve t -> phi_X(advance(xi, f, t)).
  const StateTangent f = system_dynamics(xi, gamma);
  const SystemState fwd = action_phi(x, advance(xi, f, step));
  const SystemState bwd = action_phi(x, advance(xi, f, -step));
  const StateTangent rhs = (displacement(xi_moved, fwd) - displacement(xi_moved, bwd)) / (2.0 * step);

  return (lhs - rhs).cwiseAbs().maxCoeff();
}

double check_lift(const SystemState& xi, const SystemInput& gamma, double step) {
  Vec9 l1, l2;
  Vec6 l3;
  lift_lambda(xi, gamma, &l1, &l2, &l3);

  const SystemState fwd = action_phi(g_exp(step * l1, step * l2, step * l3), xi);
  const SystemState bwd = action_phi(g_exp(-step * l1, -step * l2, -step * l3), xi);
  const StateTangent fd = (displacement(xi, fwd) - displacement(xi, bwd)) / (2.0 * step);

  return (fd - system_dynamics(xi, gamma)).cwiseAbs().maxCoeff();
}

}  // namespace lio
