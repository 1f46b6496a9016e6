#include "lio/eqf.hpp"

#include <unsupported/Eigen/MatrixFunctions>

#include <cmath>

namespace lio {

// --------------------------------------------------------------------------
// S^2 utilities

Mat32 build_bg(const Vec3& g) {
  throw_if_not_finite(g, "build_bg");
  const double x = g(0), y = g(1), z = g(2);
  if (z <= -1.0 + 1e-9) {
    throw LioError(ErrorCode::AntipodeSingularity, "tangent basis undefined near -e3");
  }
  Mat32 b;
  b << 1.0 - x * x / (1.0 + z), -x * y / (1.0 + z),
       -x * y / (1.0 + z),      1.0 - y * y / (1.0 + z),
       -x,                      -y;
  return b;
}

Vec3 s2_boxplus(const Vec3& g, const Vec2& x) {
  return Rot3::exp(build_bg(g) * x) * g;
}

Vec2 s2_boxminus(const Vec3& g1, const Vec3& g2) {
  const double dot = std::min(1.0, std::max(-1.0, g1.dot(g2)));
  if (dot <= -1.0 + 1e-9) {
    throw LioError(ErrorCode::AntipodalPair, "s2_boxminus undefined for antipodal inputs");
  }
  const double angle = std::acos(dot);
  Vec3 cross = g1.cross(g2);
  const double cn = cross.norm();
  if (cn < 1e-15) {
    return Vec2::Zero();
  }
  // The cross product is normalised so the retraction pair actually inverts:
  // boxplus rotates by |x| about a unit axis, so the angle must multiply a
  // unit tangent direction.
  cross /= cn;
  return angle * (build_bg(g1).transpose() * cross);
}

// --------------------------------------------------------------------------
// Chart at the origin

Vec24 chart_coords(const SystemState& e) {
  Vec24 eps;
  eps.segment<9>(0) = e.T.log();
  eps.segment<9>(9) = e.b;
  eps.segment<6>(18) = e.K.log();
  return eps;
}

SystemState chart_point(const Vec24& eps) {
  SystemState e;
  e.T = ExtendedPose::exp(eps.segment<9>(0));
  e.b = eps.segment<9>(9);
  e.K = Pose::exp(eps.segment<6>(18));
  return e;
}

Vec24 error_coords(const GroupElement& x_hat, const SystemState& xi) {
  return chart_coords(action_phi(g_inverse(x_hat), xi));
}

GroupElement correction_exp(const Vec24& eps) {
  const Vec9 d1 = eps.segment<9>(0);
  const Vec9 d2 = -eps.segment<9>(9);
  Vec6 d3 = eps.segment<6>(18);
  d3.head<3>() += eps.head<3>();  // rotation part of the origin-action differential
  return g_exp(d1, d2, d3);
}

FilterState make_filter_state(const SystemState& xi0_hat, const Eigen::MatrixXd& sigma,
                              bool estimate_gravity, const GravityDir& gravity) {
  FilterState s;
  s.X = transport(SystemState::origin(), xi0_hat);
  s.sigma = sigma;
  s.estimate_gravity = estimate_gravity;
  s.gravity = gravity;
  if (sigma.rows() != s.dim() || sigma.cols() != s.dim()) {
    throw LioError(ErrorCode::BadConfig, "initial covariance has wrong dimension");
  }
  return s;
}

// --------------------------------------------------------------------------
// Linearisation

Eigen::MatrixXd build_f(const FilterState& s, const Vec3& gyro, const Vec3& accel,
                        const FOptions& opts) {
  const int n = s.dim();
  Eigen::MatrixXd f = Eigen::MatrixXd::Zero(n, n);

  const SystemState xi = s.estimate();
  const Mat3 c = xi.T.rotation().matrix();
  const Vec3 v = xi.T.velocity();
  const Vec3 r = xi.T.position();
  const Vec3 bg = xi.b.head<3>();
  const Vec3 ba = xi.b.segment<3>(3);
  const Vec3 bmu = xi.b.tail<3>();
  const Vec3 g = s.gravity.vector();

  const Vec3 cw = c * (gyro - bg);
  const Mat3 w_blk = skew(cw);
  const Mat3 y_blk = skew(c * (accel - ba) + v.cross(cw) + g);
  const Mat3 z_blk = skew(c * (-bmu) + r.cross(cw) + v);  // virtual velocity input is zero

  // Navigation rows [0,9): theta / nu / rho errors.
  f.block<3, 3>(3, 0) = (opts.negate_gravity_block ? -1.0 : 1.0) * skew(g);
  f.block<3, 3>(6, 3) = Mat3::Identity();
  // Bias coupling into the navigation block.
  f.block<9, 9>(0, 9) = -Mat9::Identity();

  // Bias rows [9,18): little adjoint of (W, Y, Z).
  f.block<3, 3>(9, 9) = w_blk;
  f.block<3, 3>(12, 12) = w_blk;
  f.block<3, 3>(15, 15) = w_blk;
  f.block<3, 3>(12, 9) = y_blk;
  f.block<3, 3>(15, 9) = z_blk;

  // Extrinsic rows [18,24).
  f.block<3, 3>(18, 18) = w_blk;
  f.block<3, 3>(21, 21) = w_blk;
  if (opts.fk == FkCoupling::PrintedTranslation) {
    f.block<3, 3>(21, 18) = z_blk;
  }

  if (s.estimate_gravity) {
    // Gravity columns by central differences of the S^2 retraction: the
    // velocity error row picks up (g_true - g_hat) to first order.
    const double h = 1e-6;
    for (int k = 0; k < 2; ++k) {
      Vec2 dx = Vec2::Zero();
      dx(k) = h;
      const Vec3 dplus = s2_boxplus(s.gravity.dir, dx);
      const Vec3 dminus = s2_boxplus(s.gravity.dir, -dx);
      f.block<3, 1>(3, 24 + k) = s.gravity.magnitude * (dplus - dminus) / (2.0 * h);
    }
  }

  return f;
}

// --------------------------------------------------------------------------
// Propagation

void propagate(FilterState& s, const Vec3& gyro, const Vec3& accel, double dt,
               const NoiseConfig& noise, const PropagateOptions& opts) {
  throw_if_not_finite(gyro, "propagate/gyro");
  throw_if_not_finite(accel, "propagate/accel");

  const SystemState xi = s.estimate();
  SystemInput u;
  u.w.head<3>() = gyro;
  u.w.segment<3>(3) = accel;
  u.g = s.gravity.vector();

  const Eigen::MatrixXd f = build_f(s, gyro, accel, opts.f_opts);

  // Mean: X <- X exp(dt Lambda).
  Vec9 l1, l2;
  Vec6 l3;
  lift_lambda(xi, u, &l1, &l2, &l3);
  s.X = g_compose(s.X, g_exp(dt * l1, dt * l2, dt * l3));
  if (s.X.A.rotation().orthogonality_error() > 1e-9) s.X.A.reorthonormalize();
  if (s.X.B.rotation().orthogonality_error() > 1e-9) s.X.B.reorthonormalize();

  // Covariance: Phi Sigma Phi^T + G Q G^T dt.
  const int n = s.dim();
  Eigen::MatrixXd phi;
  if (opts.exact_expm) {
    phi = (f * dt).exp();
  } else {
    const Eigen::MatrixXd fdt = f * dt;
    phi = Eigen::MatrixXd::Identity(n, n) + fdt + 0.5 * fdt * fdt;
  }

  // Noise input: IMU white noise [gyro, accel] maps into the navigation
  // block through the current estimate's adjoint; the random walks drive
  // their own blocks directly.
  Eigen::MatrixXd gn = Eigen::MatrixXd::Zero(n, 21);
  gn.block<9, 6>(0, 0) = xi.T.adjoint_matrix().leftCols<6>();
  gn.block<9, 9>(9, 6) = Mat9::Identity();
  gn.block<6, 6>(18, 15) = Mat6::Identity();

  Eigen::Matrix<double, 21, 1> q_diag;
  q_diag << Vec3::Constant(noise.gyro_noise_density * noise.gyro_noise_density),
      Vec3::Constant(noise.accel_noise_density * noise.accel_noise_density),
      Vec3::Constant(noise.gyro_bias_walk * noise.gyro_bias_walk),
      Vec3::Constant(noise.accel_bias_walk * noise.accel_bias_walk),
      Vec3::Constant(noise.velocity_bias_walk * noise.velocity_bias_walk),
      Vec6::Constant(noise.extrinsic_drift * noise.extrinsic_drift);

  s.sigma = phi * s.sigma * phi.transpose() + gn * q_diag.asDiagonal() * gn.transpose() * dt;
  s.sigma = 0.5 * (s.sigma + s.sigma.transpose()).eval();
  s.t += dt;
}

// --------------------------------------------------------------------------
// Update

namespace {

constexpr double kinnovation_cond_max = 1e12;
constexpr double kcovariance_floor = 1e-12;

void floor_eigenvalues(Eigen::MatrixXd& m, double floor) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
  if (es.eigenvalues().minCoeff() >= floor) return;
  Eigen::VectorXd d = es.eigenvalues().cwiseMax(floor);
  m = es.eigenvectors() * d.asDiagonal() * es.eigenvectors().transpose();
}

struct KfStep {
  Eigen::VectorXd eps;
  Eigen::MatrixXd k;
  Eigen::MatrixXd h;
};

// One Kalman step from the prior covariance and freshly linearised rows.
// hdim tells how many leading coefficients of MeasurementRow::h are live
// (24 for the equivariant filter, 21 for the baseline).
KfStep kf_gain(const Eigen::MatrixXd& sigma, const std::vector<MeasurementRow>& rows, int hdim) {
  const int n = static_cast<int>(sigma.rows());
  const int m = static_cast<int>(rows.size());
  KfStep out;
  out.h = Eigen::MatrixXd::Zero(m, n);
  Eigen::VectorXd z(m), rvar(m);
  for (int i = 0; i < m; ++i) {
    out.h.row(i).head(hdim) = rows[i].h.head(hdim).transpose();
    z(i) = rows[i].z;
    rvar(i) = rows[i].var;
  }

  const Eigen::MatrixXd hs = out.h * sigma;  // m x n
  Eigen::MatrixXd innov_cov = hs * out.h.transpose();
  innov_cov.diagonal() += rvar;

  Eigen::LDLT<Eigen::MatrixXd> ldlt(innov_cov);
  const Eigen::VectorXd d = ldlt.vectorD();
  const double dmin = d.minCoeff();
  const double dmax = d.maxCoeff();
  if (ldlt.info() != Eigen::Success || dmin <= 0.0 || dmax / dmin > kinnovation_cond_max) {
    throw LioError(ErrorCode::SingularInnovation, "innovation covariance is ill-conditioned");
  }

  out.k = ldlt.solve(hs).transpose();  // n x m
  out.eps = out.k * z;
  return out;
}

void finish_sigma(Eigen::MatrixXd& sigma, const KfStep& step) {
  const int n = static_cast<int>(sigma.rows());
  sigma = (Eigen::MatrixXd::Identity(n, n) - step.k * step.h) * sigma;
  sigma = 0.5 * (sigma + sigma.transpose()).eval();
  floor_eigenvalues(sigma, kcovariance_floor);
}

}  // namespace

UpdateResult update(FilterState& s, const RowProvider& provider, int max_iter, double eps_tol) {
  UpdateResult res;
  KfStep last;
  for (int it = 0; it < max_iter; ++it) {
    const std::vector<MeasurementRow> rows = provider(s);
    if (rows.empty()) {
      if (it == 0) return res;
      break;  // re-linearisation gated everything out; keep the last step
    }

    last = kf_gain(s.sigma, rows, 24);
    res.rows_used = static_cast<int>(rows.size());
    res.iterations = it + 1;

    Vec24 core = last.eps.head<24>();
    s.X = g_compose(correction_exp(core), s.X);
    if (s.estimate_gravity) {
      s.gravity.dir = s2_boxplus(s.gravity.dir, last.eps.tail<2>());
    }
    res.correction_norm = last.eps.norm();
    if (res.correction_norm < eps_tol) break;
  }
  if (res.iterations > 0) finish_sigma(s.sigma, last);
  return res;
}

UpdateResult update(FilterState& s, const std::vector<MeasurementRow>& rows) {
  return update(s, [&rows](const FilterState&) { return rows; }, 1);
}

double nees(const FilterState& s, const SystemState& xi_true) {
  const Vec24 eps = error_coords(s.X, xi_true);
  const Eigen::MatrixXd core = s.sigma.topLeftCorner(24, 24);
  return eps.dot(core.ldlt().solve(eps));
}

void chi2_band_95(int dof, double* lo, double* hi) {
  // 2.5% / 97.5% chi-square quantiles for the filter dimensions in use.
  switch (dof) {
    case 21: *lo = 10.28290; *hi = 35.47888; return;
    case 24: *lo = 12.40115; *hi = 39.36408; return;
    case 26: *lo = 13.84390; *hi = 41.92317; return;
    default:
      throw LioError(ErrorCode::BadConfig, "chi-square band not tabulated for this dimension");
  }
}

// --------------------------------------------------------------------------
// EKF baseline

EkfBaseline::EkfBaseline(const SystemState& init, const Eigen::MatrixXd& sigma,
                         const GravityDir& gravity)
    : c_(init.T.rotation()),
      v_(init.T.velocity()),
      r_(init.T.position()),
      bg_(init.b.head<3>()),
      ba_(init.b.segment<3>(3)),
      k_(init.K),
      gravity_(gravity),
      sigma_(sigma) {
  if (sigma.rows() != 21 || sigma.cols() != 21) {
    throw LioError(ErrorCode::BadConfig, "baseline covariance must be 21x21");
  }
}

SystemState EkfBaseline::estimate() const {
  SystemState xi;
  xi.T = ExtendedPose(c_, v_, r_);
  xi.b.head<3>() = bg_;
  xi.b.segment<3>(3) = ba_;
  xi.K = k_;
  return xi;
}

void EkfBaseline::propagate(const Vec3& gyro, const Vec3& accel, double dt,
                            const NoiseConfig& noise) {
  const Vec3 w = gyro - bg_;
  const Vec3 a = accel - ba_;
  const Mat3 c = c_.matrix();
  const Vec3 g = gravity_.vector();

  Eigen::MatrixXd f = Eigen::MatrixXd::Zero(21, 21);
  f.block<3, 3>(0, 0) = -skew(w);
  f.block<3, 3>(0, 9) = -Mat3::Identity();
  f.block<3, 3>(3, 0) = -c * skew(a);
  f.block<3, 3>(3, 12) = -c;
  f.block<3, 3>(6, 3) = Mat3::Identity();

  // Mean (conventional Euler step with the pre-step attitude for velocity).
  v_ += (c * a + g) * dt;
  r_ += v_ * dt - 0.5 * (c * a + g) * dt * dt;
  c_ = c_ * Rot3::exp(w * dt);
  if (c_.orthogonality_error() > 1e-9) c_.reorthonormalize();

  const Eigen::MatrixXd fdt = f * dt;
  const Eigen::MatrixXd phi =
      Eigen::MatrixXd::Identity(21, 21) + fdt + 0.5 * fdt * fdt;

  Eigen::MatrixXd gn = Eigen::MatrixXd::Zero(21, 18);
  gn.block<3, 3>(0, 0) = -Mat3::Identity();
  gn.block<3, 3>(3, 3) = -c;
  gn.block<3, 3>(9, 6) = Mat3::Identity();
  gn.block<3, 3>(12, 9) = Mat3::Identity();
  gn.block<6, 6>(15, 12) = Mat6::Identity();

  Eigen::Matrix<double, 18, 1> q_diag;
  q_diag << Vec3::Constant(noise.gyro_noise_density * noise.gyro_noise_density),
      Vec3::Constant(noise.accel_noise_density * noise.accel_noise_density),
      Vec3::Constant(noise.gyro_bias_walk * noise.gyro_bias_walk),
      Vec3::Constant(noise.accel_bias_walk * noise.accel_bias_walk),
      Vec6::Constant(noise.extrinsic_drift * noise.extrinsic_drift);

  sigma_ = phi * sigma_ * phi.transpose() + gn * q_diag.asDiagonal() * gn.transpose() * dt;
  sigma_ = 0.5 * (sigma_ + sigma_.transpose()).eval();
  t += dt;
}

MeasurementRow EkfBaseline::build_row(const Vec3& p_lidar, const Vec3& n, const Vec3& q,
                                      double var) const {
  const Mat3 c = c_.matrix();
  const Mat3 cb = k_.rotation().matrix();
  const Vec3 p_body = cb * p_lidar + k_.translation();
  const Vec3 p_world = c * p_body + r_;

  MeasurementRow row;
  row.z = -n.dot(p_world - q);
  row.var = var;
  row.h.segment<3>(0) = -(n.transpose() * c * skew(p_body)).transpose();
  row.h.segment<3>(6) = n;
  row.h.segment<3>(15) = -(n.transpose() * c * cb * skew(p_lidar)).transpose();
  row.h.segment<3>(18) = (n.transpose() * c * cb).transpose();
  return row;
}

UpdateResult EkfBaseline::update(const Provider& provider, int max_iter, double eps_tol) {
  UpdateResult res;
  KfStep last;
  for (int it = 0; it < max_iter; ++it) {
    const std::vector<MeasurementRow> rows = provider(*this);
    if (rows.empty()) {
      if (it == 0) return res;
      break;
    }

    last = kf_gain(sigma_, rows, 21);
    res.rows_used = static_cast<int>(rows.size());
    res.iterations = it + 1;

    const Eigen::VectorXd& e = last.eps;
    c_ = c_ * Rot3::exp(e.segment<3>(0));
    v_ += e.segment<3>(3);
    r_ += e.segment<3>(6);
    bg_ += e.segment<3>(9);
    ba_ += e.segment<3>(12);
    k_ = k_ * Pose::exp(e.segment<6>(15));

    res.correction_norm = e.norm();
    if (res.correction_norm < eps_tol) break;
  }
  if (res.iterations > 0) finish_sigma(sigma_, last);
  return res;
}

Eigen::VectorXd EkfBaseline::error_vector(const SystemState& xi_true) const {
  Eigen::Matrix<double, 21, 1> e;
  e.segment<3>(0) = (c_.inverse() * xi_true.T.rotation()).log();
  e.segment<3>(3) = xi_true.T.velocity() - v_;
  e.segment<3>(6) = xi_true.T.position() - r_;
  e.segment<3>(9) = xi_true.b.head<3>() - bg_;
  e.segment<3>(12) = xi_true.b.segment<3>(3) - ba_;
  e.segment<6>(15) = (k_.inverse() * xi_true.K).log();
  return e;
}

double EkfBaseline::nees(const SystemState& xi_true) const {
  const Eigen::VectorXd e = error_vector(xi_true);
  return e.dot(sigma_.ldlt().solve(e));
}

}  // namespace lio
