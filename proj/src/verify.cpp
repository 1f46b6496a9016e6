#include "lio/verify.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <random>
#include <sstream>
#include <vector>

#include "lio/errors.hpp"
#include "lio/measurement.hpp"

namespace lio {
namespace {

// ---------------------------------------------------------------------------
// Random samplers. Every check owns its generator with a fixed seed so the
// suite is reproducible and checks stay independent of each other.

Vec3 rand_vec(std::mt19937_64& rng, double scale) {
  std::normal_distribution<double> g;
  return Vec3(g(rng), g(rng), g(rng)) * scale;
}

Vec3 rand_unit(std::mt19937_64& rng) {
  Vec3 v = rand_vec(rng, 1.0);
  while (v.norm() < 1e-6) v = rand_vec(rng, 1.0);
  return v.normalized();
}

Rot3 rand_rot(std::mt19937_64& rng, double max_angle) {
  std::uniform_real_distribution<double> u(0.0, max_angle);
  return Rot3::exp(u(rng) * rand_unit(rng));
}

Vec9 rand_vec9(std::mt19937_64& rng, double scale) {
  Vec9 v;
  for (int i = 0; i < 9; ++i) {
    std::normal_distribution<double> g;
    v(i) = g(rng) * scale;
  }
  return v;
}

Vec6 rand_vec6(std::mt19937_64& rng, double scale) {
  Vec6 v;
  for (int i = 0; i < 6; ++i) {
    std::normal_distribution<double> g;
    v(i) = g(rng) * scale;
  }
  return v;
}

SystemState rand_state(std::mt19937_64& rng) {
  SystemState xi;
  xi.T = ExtendedPose(rand_rot(rng, 2.5), rand_vec(rng, 2.0), rand_vec(rng, 5.0));
  xi.b = rand_vec9(rng, 0.2);
  xi.K = Pose(rand_rot(rng, 1.5), rand_vec(rng, 0.5));
  return xi;
}

SystemInput rand_input(std::mt19937_64& rng) {
  SystemInput u;
  u.w.segment<3>(0) = rand_vec(rng, 1.0);
  u.w.segment<3>(3) = rand_vec(rng, 3.0);
  u.w.segment<3>(6) = rand_vec(rng, 0.5);
  u.g = Vec3(0, 0, -9.81) + rand_vec(rng, 0.3);
  u.tau = rand_vec9(rng, 0.1);
  u.tau_k = rand_vec6(rng, 0.1);
  return u;
}

GroupElement rand_group(std::mt19937_64& rng) {
  GroupElement x;
  x.A = ExtendedPose(rand_rot(rng, 2.0), rand_vec(rng, 1.5), rand_vec(rng, 3.0));
  x.a = rand_vec9(rng, 0.5);
  x.B = Pose(rand_rot(rng, 1.5), rand_vec(rng, 0.8));
  return x;
}

double state_distance(const SystemState& x, const SystemState& y) {
  double d = (x.T.rotation().matrix() - y.T.rotation().matrix()).norm();
  d = std::max(d, (x.T.velocity() - y.T.velocity()).norm());
  d = std::max(d, (x.T.position() - y.T.position()).norm());
  d = std::max(d, (x.b - y.b).norm());
  d = std::max(d, (x.K.rotation().matrix() - y.K.rotation().matrix()).norm());
  d = std::max(d, (x.K.translation() - y.K.translation()).norm());
  return d;
}

double input_distance(const SystemInput& x, const SystemInput& y) {
  double d = (x.w - y.w).norm();
  d = std::max(d, (x.g - y.g).norm());
  d = std::max(d, (x.tau - y.tau).norm());
  d = std::max(d, (x.tau_k - y.tau_k).norm());
  return d;
}

CheckResult make_result(const std::string& name, double residual, double tol,
                        const std::string& detail = "") {
  CheckResult r;
  r.name = name;
  r.residual = residual;
  r.tolerance = tol;
  r.pass = std::isfinite(residual) && residual < tol;
  r.detail = detail;
  return r;
}

// ---------------------------------------------------------------------------
// Lie-group checks.

CheckResult check_exp_log() {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.0, 2.0);
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const Vec3 w = u(rng) * rand_unit(rng);
    worst = std::max(worst, (Rot3::exp(w).log() - w).norm());
    Vec6 v6 = rand_vec6(rng, 1.0);
    if (v6.norm() > 2.0) v6 *= 2.0 / v6.norm();
    worst = std::max(worst, (Pose::exp(v6).log() - v6).norm());
    Vec9 v9 = rand_vec9(rng, 1.0);
    if (v9.norm() > 2.0) v9 *= 2.0 / v9.norm();
    worst = std::max(worst, (ExtendedPose::exp(v9).log() - v9).norm());
  }
  return make_result("exp/log round trip", worst, 1e-9);
}

CheckResult check_adjoint_homomorphism() {
  std::mt19937_64 rng(2);
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const Pose x(rand_rot(rng, 2.0), rand_vec(rng, 2.0));
    const Pose y(rand_rot(rng, 2.0), rand_vec(rng, 2.0));
    worst = std::max(worst, ((x * y).adjoint_matrix() - x.adjoint_matrix() * y.adjoint_matrix())
                                .cwiseAbs()
                                .maxCoeff());
    const ExtendedPose a(rand_rot(rng, 2.0), rand_vec(rng, 2.0), rand_vec(rng, 2.0));
    const ExtendedPose b(rand_rot(rng, 2.0), rand_vec(rng, 2.0), rand_vec(rng, 2.0));
    worst = std::max(worst, ((a * b).adjoint_matrix() - a.adjoint_matrix() * b.adjoint_matrix())
                                .cwiseAbs()
                                .maxCoeff());
  }
  return make_result("adjoint homomorphism", worst, 1e-10);
}

CheckResult check_adjoint_derivative() {
  std::mt19937_64 rng(3);
  const double h = 1e-5;
  double worst = 0.0;
  for (int i = 0; i < 200; ++i) {
    const Vec6 u6 = rand_vec6(rng, 1.0);
    const Mat6 fd6 =
        (Pose::exp(h * u6).adjoint_matrix() - Pose::exp(-h * u6).adjoint_matrix()) / (2 * h);
    worst = std::max(worst, (fd6 - se3_ad(u6)).cwiseAbs().maxCoeff());
    const Vec9 u9 = rand_vec9(rng, 1.0);
    const Mat9 fd9 = (ExtendedPose::exp(h * u9).adjoint_matrix() -
                      ExtendedPose::exp(-h * u9).adjoint_matrix()) /
                     (2 * h);
    worst = std::max(worst, (fd9 - se23_ad(u9)).cwiseAbs().maxCoeff());
  }
  return make_result("adjoint derivative vs little adjoint", worst, 1e-6);
}

CheckResult check_group_closure() {
  std::mt19937_64 rng(4);
  ExtendedPose p;
  for (int i = 1; i <= 10000; ++i) {
    p = p * ExtendedPose(rand_rot(rng, 0.5), rand_vec(rng, 0.3), rand_vec(rng, 0.3));
    if (i % 100 == 0) p.reorthonormalize();
  }
  return make_result("composition closure", p.rotation().orthogonality_error(), 1e-9);
}

// ---------------------------------------------------------------------------
// Action and symmetry checks.

CheckResult check_phi_action() {
  std::mt19937_64 rng(5);
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const SystemState xi = rand_state(rng);
    const GroupElement x = rand_group(rng);
    const GroupElement y = rand_group(rng);
    worst = std::max(worst, state_distance(action_phi(GroupElement::identity(), xi), xi));
    worst = std::max(worst, state_distance(action_phi(g_compose(x, y), xi),
                                           action_phi(y, action_phi(x, xi))));
    worst = std::max(
        worst, state_distance(action_phi(g_compose(x, g_inverse(x)), xi), xi));
  }
  return make_result("state action axioms", worst, 1e-10);
}

CheckResult check_psi_action() {
  std::mt19937_64 rng(6);
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const SystemInput u = rand_input(rng);
    const GroupElement x = rand_group(rng);
    const GroupElement y = rand_group(rng);
    worst = std::max(worst, input_distance(action_psi(GroupElement::identity(), u), u));
    worst = std::max(worst, input_distance(action_psi(g_compose(x, y), u),
                                           action_psi(y, action_psi(x, u))));
  }
  return make_result("input action axioms", worst, 1e-10);
}

CheckResult check_transport() {
  std::mt19937_64 rng(7);
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const SystemState xi1 = rand_state(rng);
    const SystemState xi2 = rand_state(rng);
    const GroupElement x = transport(xi1, xi2);
    worst = std::max(worst, state_distance(action_phi(x, xi1), xi2));
  }
  return make_result("transport round trip", worst, 1e-10);
}

CheckResult check_equivariance_suite() {
  std::mt19937_64 rng(8);
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const GroupElement x = rand_group(rng);
    const SystemState xi = rand_state(rng);
    const SystemInput u = rand_input(rng);
    worst = std::max(worst, check_equivariance(x, xi, u));
  }
  return make_result("equivariance residual", worst, 1e-5);
}

CheckResult check_lift_suite() {
  std::mt19937_64 rng(9);
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const SystemState xi = rand_state(rng);
    const SystemInput u = rand_input(rng);
    worst = std::max(worst, check_lift(xi, u));
  }
  return make_result("lift condition residual", worst, 1e-5);
}

CheckResult check_chart() {
  std::mt19937_64 rng(10);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    Vec24 eps;
    for (int k = 0; k < 24; ++k) {
      std::normal_distribution<double> g;
      eps(k) = g(rng) * 0.1;
    }
    if (eps.norm() > 0.5) eps *= 0.5 / eps.norm();
    const GroupElement x = transport(SystemState::origin(), rand_state(rng));
    const SystemState xi = action_phi(x, chart_point(eps));
    worst = std::max(worst, (error_coords(x, xi) - eps).norm());
  }
  return make_result("chart round trip", worst, 1e-8);
}

// ---------------------------------------------------------------------------
// Linearisation oracles.

// Error-coordinate velocity at eps0: both the estimate and the true state
// flow along exponential curves generated by their own lifts, which share
// the true tangent at t = 0 by the lift condition.
Vec24 error_rate(const GroupElement& x_hat, const SystemState& xi_hat, const SystemInput& u,
                 const Vec24& eps0, double ht) {
  Vec9 l1, l2;
  Vec6 l3;
  lift_lambda(xi_hat, u, &l1, &l2, &l3);
  const SystemState xi = action_phi(x_hat, chart_point(eps0));
  Vec9 m1, m2;
  Vec6 m3;
  lift_lambda(xi, u, &m1, &m2, &m3);
  const auto eps_at = [&](double t) {
    const GroupElement xh = g_compose(x_hat, g_exp(t * l1, t * l2, t * l3));
    const SystemState xt = action_phi(g_exp(t * m1, t * m2, t * m3), xi);
    return error_coords(xh, xt);
  };
  return (eps_at(ht) - eps_at(-ht)) / (2.0 * ht);
}

}  // namespace

CheckResult check_f_oracle(int states, const FOptions& opts, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const double ht = 1e-4;
  const double he = 1e-4;
  double worst = 0.0;
  std::ostringstream detail;
  for (int s = 0; s < states; ++s) {
    const SystemState xi_hat = rand_state(rng);
    const Vec3 gyro = rand_vec(rng, 1.0);
    const Vec3 accel = rand_vec(rng, 3.0);

    FilterState fs;
    fs.X = transport(SystemState::origin(), xi_hat);
    fs.sigma = Eigen::MatrixXd::Identity(24, 24);
    fs.gravity.dir = Vec3(0, 0, -1);
    fs.gravity.magnitude = 9.81;
    const Eigen::MatrixXd f = build_f(fs, gyro, accel, opts);

    SystemInput u;
    u.w.segment<3>(0) = gyro;
    u.w.segment<3>(3) = accel;
    u.g = fs.gravity.vector();

    Eigen::Matrix<double, 24, 24> fd;
    for (int j = 0; j < 24; ++j) {
      Vec24 e = Vec24::Zero();
      e(j) = he;
      const Vec24 rp = error_rate(fs.X, xi_hat, u, e, ht);
      e(j) = -he;
      const Vec24 rm = error_rate(fs.X, xi_hat, u, e, ht);
      fd.col(j) = (rp - rm) / (2.0 * he);
    }

    // Compare 3x3 blocks on the 8x8 grid, relative to max(block norm, 1).
    for (int bi = 0; bi < 8; ++bi) {
      for (int bj = 0; bj < 8; ++bj) {
        const Mat3 fb = f.block<3, 3>(3 * bi, 3 * bj);
        const Mat3 ob = fd.block<3, 3>(3 * bi, 3 * bj);
        const double rel = (fb - ob).norm() / std::max(ob.norm(), 1.0);
        if (rel > 1e-4 && detail.tellp() < 200) {
          detail << " block(" << bi << "," << bj << ") rel " << rel << ";";
        }
        worst = std::max(worst, rel);
      }
    }
  }
  return make_result("state matrix vs finite differences", worst, 1e-4, detail.str());
}

namespace {

CheckResult check_h_oracle() {
  std::mt19937_64 rng(12);
  const double h = 1e-6;
  const MeasurementConfig mcfg;
  double worst = 0.0;
  for (int s = 0; s < 100; ++s) {
    const SystemState xi_hat = rand_state(rng);
    const GroupElement x_hat = transport(SystemState::origin(), xi_hat);
    const Vec3 p_lidar = rand_vec(rng, 4.0);
    PlaneFit fit;
    fit.n = rand_unit(rng);
    fit.rms = 0.01;
    fit.valid = true;
    const Vec3 p_world =
        xi_hat.T.rotation() * (xi_hat.K * p_lidar) + xi_hat.T.position();
    std::uniform_real_distribution<double> u(-0.15, 0.15);
    fit.q = p_world - u(rng) * fit.n + 0.3 * (Mat3::Identity() - fit.n * fit.n.transpose()) *
                                           rand_vec(rng, 1.0);
    const MeasurementRow row = build_row(xi_hat, p_lidar, fit, 1e-4, mcfg);

    const auto dist = [&](const Vec24& eps) {
      const SystemState xi = action_phi(x_hat, chart_point(eps));
      const Vec3 pw = xi.T.rotation() * (xi.K * p_lidar) + xi.T.position();
      return fit.n.dot(pw - fit.q);
    };
    Vec24 fd;
    for (int j = 0; j < 24; ++j) {
      Vec24 e = Vec24::Zero();
      e(j) = h;
      const double dp = dist(e);
      e(j) = -h;
      const double dm = dist(e);
      fd(j) = (dp - dm) / (2.0 * h);
    }
    worst = std::max(worst, (row.h - fd).cwiseAbs().maxCoeff());
  }
  return make_result("measurement rows vs finite differences", worst, 1e-5);
}

CheckResult check_gravity_basis() {
  std::mt19937_64 rng(13);
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const Vec3 g = rand_unit(rng);
    const Mat32 b = build_bg(g);
    worst = std::max(worst, (b.transpose() * b - Mat2::Identity()).cwiseAbs().maxCoeff());
    worst = std::max(worst, (b.transpose() * g).cwiseAbs().maxCoeff());
  }
  return make_result("gravity tangent basis identities", worst, 1e-12);
}

CheckResult check_gravity_roundtrip() {
  std::mt19937_64 rng(14);
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const Vec3 g = rand_unit(rng);
    Vec2 x = Vec2(rand_vec(rng, 0.5).x(), rand_vec(rng, 0.5).y());
    if (x.norm() > 1.5) x *= 1.5 / x.norm();
    const Vec3 g2 = s2_boxplus(g, x);
    worst = std::max(worst, (s2_boxminus(g, g2) - x).norm());
  }
  return make_result("gravity retraction round trip", worst, 1e-9);
}

CheckResult check_information_update() {
  std::mt19937_64 rng(15);
  double worst = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    const SystemState xi_hat = rand_state(rng);
    Eigen::MatrixXd a = Eigen::MatrixXd::NullaryExpr(24, 24, [&]() {
      std::normal_distribution<double> g;
      return g(rng) * 0.05;
    });
    const Eigen::MatrixXd sigma = a * a.transpose() + 0.01 * Eigen::MatrixXd::Identity(24, 24);
    FilterState s = make_filter_state(xi_hat, sigma);

    std::vector<MeasurementRow> rows(6);
    Eigen::MatrixXd hmat(6, 24);
    Eigen::VectorXd z(6), rvar(6);
    for (int m = 0; m < 6; ++m) {
      for (int j = 0; j < 24; ++j) {
        std::normal_distribution<double> g;
        rows[m].h(j) = g(rng);
      }
      std::normal_distribution<double> g;
      rows[m].z = 0.05 * g(rng);
      rows[m].var = 0.01 + 0.1 * std::abs(g(rng));
      hmat.row(m) = rows[m].h.transpose();
      z(m) = rows[m].z;
      rvar(m) = rows[m].var;
    }
    update(s, rows);

    // Information-form posterior on the same prior.
    const Eigen::MatrixXd info =
        sigma.inverse() + hmat.transpose() * rvar.cwiseInverse().asDiagonal() * hmat;
    const Eigen::MatrixXd sigma_post = info.inverse();
    const Eigen::VectorXd eps =
        sigma_post * hmat.transpose() * rvar.cwiseInverse().asDiagonal() * z;
    const GroupElement x_post =
        g_compose(correction_exp(Vec24(eps)), transport(SystemState::origin(), xi_hat));

    worst = std::max(worst, (s.sigma - sigma_post).cwiseAbs().maxCoeff());
    worst = std::max(worst,
                     state_distance(s.estimate(), action_phi(x_post, SystemState::origin())));
  }
  return make_result("gain vs information-form update", worst, 1e-8);
}

CheckResult check_covariance_psd() {
  std::mt19937_64 rng(16);
  SystemState xi0;
  xi0.T = ExtendedPose(rand_rot(rng, 1.0), rand_vec(rng, 1.0), rand_vec(rng, 1.0));
  FilterState s = make_filter_state(xi0, 0.1 * Eigen::MatrixXd::Identity(24, 24));
  NoiseConfig noise;
  double worst = 0.0;
  for (int i = 0; i < 3000; ++i) {
    propagate(s, rand_vec(rng, 0.5), Vec3(0, 0, 9.81) + rand_vec(rng, 0.5), 0.01, noise);
    if (i % 10 == 0) {
      std::vector<MeasurementRow> rows(3);
      for (MeasurementRow& r : rows) {
        for (int j = 0; j < 24; ++j) {
          std::normal_distribution<double> g;
          r.h(j) = g(rng);
        }
        std::normal_distribution<double> g;
        r.z = 0.02 * g(rng);
        r.var = 0.01;
      }
      update(s, rows);
    }
    const Eigen::MatrixXd sym = 0.5 * (s.sigma + s.sigma.transpose());
    const double asym = (s.sigma - s.sigma.transpose()).cwiseAbs().maxCoeff();
    const double min_eig = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(sym)
                               .eigenvalues()
                               .minCoeff();
    worst = std::max(worst, asym);
    worst = std::max(worst, -std::min(min_eig, 0.0));
    if (!s.sigma.allFinite()) worst = std::numeric_limits<double>::infinity();
  }
  return make_result("covariance symmetric positive", worst, 1e-10);
}

CheckResult check_filter_determinism() {
  const auto run_once = [](Eigen::VectorXd* sig_out) {
    std::mt19937_64 rng(17);
    SystemState xi0;
    xi0.T = ExtendedPose(rand_rot(rng, 1.0), rand_vec(rng, 1.0), rand_vec(rng, 1.0));
    FilterState s = make_filter_state(xi0, 0.05 * Eigen::MatrixXd::Identity(24, 24));
    NoiseConfig noise;
    for (int i = 0; i < 200; ++i) {
      propagate(s, rand_vec(rng, 0.4), Vec3(0, 0, 9.81) + rand_vec(rng, 0.4), 0.01, noise);
      if (i % 5 == 0) {
        std::vector<MeasurementRow> rows(2);
        for (MeasurementRow& r : rows) {
          for (int j = 0; j < 24; ++j) {
            std::normal_distribution<double> g;
            r.h(j) = g(rng);
          }
          std::normal_distribution<double> g;
          r.z = 0.01 * g(rng);
          r.var = 0.02;
        }
        update(s, rows);
      }
    }
    *sig_out = Eigen::Map<const Eigen::VectorXd>(s.sigma.data(), s.sigma.size());
    return s.estimate();
  };
  Eigen::VectorXd sig1, sig2;
  const SystemState e1 = run_once(&sig1);
  const SystemState e2 = run_once(&sig2);
  double worst = state_distance(e1, e2);
  worst = std::max(worst, (sig1 - sig2).cwiseAbs().maxCoeff());
  return make_result("filter determinism", worst, 1e-300);
}

CheckResult check_knn_exact() {
  std::mt19937_64 rng(18);
  MeasurementConfig mcfg;
  mcfg.voxel = 1e-4;  // keep every random point
  MapIndex map(mcfg);
  std::vector<Vec3> all;
  double worst = 0.0;
  for (int round = 0; round < 20; ++round) {
    std::vector<Vec3> batch;
    for (int i = 0; i < 150; ++i) batch.push_back(rand_vec(rng, 5.0));
    map.insert(batch);
    all.insert(all.end(), batch.begin(), batch.end());
    for (int q = 0; q < 50; ++q) {
      const Vec3 query = rand_vec(rng, 6.0);
      const std::vector<Neighbor> got = map.knn(query, 5);
      std::vector<Neighbor> want;
      for (int idx = 0; idx < static_cast<int>(all.size()); ++idx) {
        want.push_back({idx, (all[idx] - query).squaredNorm()});
      }
      std::sort(want.begin(), want.end(), [](const Neighbor& a, const Neighbor& b) {
        return a.dist2 != b.dist2 ? a.dist2 < b.dist2 : a.index < b.index;
      });
      want.resize(5);
      for (int m = 0; m < 5; ++m) {
        if (got[m].index != want[m].index) worst += 1.0;
      }
    }
  }
  return make_result("knn exactness vs linear scan", worst, 0.5);
}

CheckResult check_deskew_stationary() {
  std::mt19937_64 rng(19);
  const Pose pose(rand_rot(rng, 1.0), rand_vec(rng, 2.0));
  std::vector<PoseSample> poses;
  for (int i = 0; i <= 10; ++i) poses.push_back({0.01 * i, pose});
  std::vector<ScanPoint> scan;
  for (int i = 0; i < 200; ++i) {
    std::uniform_real_distribution<double> u(0.0, 0.1);
    scan.push_back({u(rng), rand_vec(rng, 5.0)});
  }
  const std::vector<ScanPoint> out = deskew(scan, 0.0, poses, 0.1);
  double worst = 0.0;
  for (std::size_t i = 0; i < scan.size(); ++i) {
    worst = std::max(worst, (out[i].p - scan[i].p).norm());
  }
  return make_result("stationary de-skew identity", worst, 1e-12);
}

}  // namespace

std::vector<CheckResult> run_verification(const std::string& filter) {
  std::vector<CheckResult> all;
  all.push_back(check_exp_log());
  all.push_back(check_adjoint_homomorphism());
  all.push_back(check_adjoint_derivative());
  all.push_back(check_group_closure());
  all.push_back(check_phi_action());
  all.push_back(check_psi_action());
  all.push_back(check_transport());
  all.push_back(check_equivariance_suite());
  all.push_back(check_lift_suite());
  all.push_back(check_chart());
  all.push_back(check_f_oracle(100));
  all.push_back(check_h_oracle());
  all.push_back(check_gravity_basis());
  all.push_back(check_gravity_roundtrip());
  all.push_back(check_information_update());
  all.push_back(check_covariance_psd());
  all.push_back(check_filter_determinism());
  all.push_back(check_knn_exact());
  all.push_back(check_deskew_stationary());
  if (filter.empty()) return all;
  std::vector<CheckResult> selected;
  for (CheckResult& c : all) {
    if (c.name.find(filter) != std::string::npos) selected.push_back(std::move(c));
  }
  return selected;
}

int cmd_verify(const std::string& filter) {
  const std::vector<CheckResult> results = run_verification(filter);
  if (results.empty()) {
    std::fprintf(stderr, "error: no check matches '%s'\n", filter.c_str());
    return 2;
  }
  int failed = 0;
  double max_equivariance = -1.0;
  for (const CheckResult& c : results) {
    std::printf("%s  %-42s residual %9.3e  tol %8.1e%s\n", c.pass ? "PASS" : "FAIL",
                c.name.c_str(), c.residual, c.tolerance, c.detail.empty() ? "" : "  [");
    if (!c.detail.empty()) std::printf("      %s ]\n", c.detail.c_str());
    if (!c.pass) ++failed;
    if (c.name == "equivariance residual") max_equivariance = c.residual;
  }
  if (max_equivariance >= 0.0) {
    std::printf("max equivariance residual %.3e\n", max_equivariance);
  }
  std::printf("%zu checks, %d failed\n", results.size(), failed);
  return failed == 0 ? 0 : 1;
}

}  // namespace lio
