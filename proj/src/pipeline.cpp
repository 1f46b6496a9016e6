#include "lio/pipeline.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "json_util.hpp"
#include "lio/errors.hpp"
#include "lio/measurement.hpp"

namespace lio {
namespace {

namespace fs = std::filesystem;
using jsonu::get_bool;
using jsonu::get_num;
using jsonu::json;
using jsonu::noise_from_json;
using jsonu::parse_text;
using jsonu::reject_unknown_keys;
using jsonu::vec_from_json;
using jsonu::vec_to_json;

constexpr double kDegToRad = M_PI / 180.0;

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LioError(ErrorCode::IoError, "cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw LioError(ErrorCode::IoError, "cannot read " + path);
  return ss.str();
}

Pose lidar_pose(const SystemState& xi) { return xi.T.pose() * xi.K; }

// Prior standard deviations stacked in the natural perturbation order
// [attitude, velocity, position, b_g, b_a, b_mu, extrinsic rot, extrinsic trans].
Vec24 prior_sigma_vec(const PriorSigmas& p) {
  Vec24 s;
  s.segment<3>(0).setConstant(p.attitude);
  s.segment<3>(3).setConstant(p.velocity);
  s.segment<3>(6).setConstant(p.position);
  s.segment<3>(9).setConstant(p.gyro_bias);
  s.segment<3>(12).setConstant(p.accel_bias);
  s.segment<3>(15).setConstant(p.velocity_bias);
  s.segment<3>(18).setConstant(p.extrinsic_rot);
  s.segment<3>(21).setConstant(p.extrinsic_trans);
  return s;
}

// Right-multiplied rotation offsets, additive vector offsets; the order
// matches prior_sigma_vec.
SystemState apply_perturbation(const SystemState& xi, const Vec24& d) {
  SystemState out;
  out.T = ExtendedPose(xi.T.rotation() * Rot3::exp(d.segment<3>(0)),
                       xi.T.velocity() + d.segment<3>(3), xi.T.position() + d.segment<3>(6));
  out.b = xi.b + d.segment<9>(9);
  out.K = Pose(xi.K.rotation() * Rot3::exp(d.segment<3>(18)),
               xi.K.translation() + d.segment<3>(21));
  return out;
}

// Sigma0 in the filter's error chart: J diag(sigma^2) J^T with J the Jacobian
// of the chart error with respect to the natural perturbation, taken by
// central differences at the initial estimate.
Eigen::MatrixXd eqf_prior_sigma(const SystemState& xi0_hat, const PriorSigmas& prior,
                                bool estimate_gravity) {
  const GroupElement x0 = transport(SystemState::origin(), xi0_hat);
  const double h = 1e-6;
  Eigen::Matrix<double, 24, 24> jac;
  for (int i = 0; i < 24; ++i) {
    Vec24 d = Vec24::Zero();
    d(i) = h;
    const Vec24 ep = error_coords(x0, apply_perturbation(xi0_hat, d));
    d(i) = -h;
    const Vec24 em = error_coords(x0, apply_perturbation(xi0_hat, d));
    jac.col(i) = (ep - em) / (2.0 * h);
  }
  const Vec24 sig = prior_sigma_vec(prior);
  const int n = estimate_gravity ? 26 : 24;
  Eigen::MatrixXd sigma0 = Eigen::MatrixXd::Zero(n, n);
  sigma0.topLeftCorner<24, 24>() =
      jac * sig.array().square().matrix().asDiagonal() * jac.transpose();
  if (estimate_gravity) {
    sigma0.bottomRightCorner<2, 2>() = prior.gravity * prior.gravity * Eigen::Matrix2d::Identity();
  }
  sigma0 = (0.5 * (sigma0 + sigma0.transpose())).eval();
  return sigma0;
}

// The baseline's error coordinates coincide with the natural perturbation
// minus the velocity-bias block.
Eigen::MatrixXd ekf_prior_sigma(const PriorSigmas& prior) {
  const Vec24 s = prior_sigma_vec(prior);
  Eigen::VectorXd d(21);
  d.head<15>() = s.head<15>();
  d.tail<6>() = s.tail<6>();
  return d.array().square().matrix().asDiagonal();
}

SystemState truth_state(const Dataset& data, std::size_t row) {
  const StateRow& s = data.truth[row];
  SystemState xi;
  xi.T = ExtendedPose(s.C, s.v, s.r);
  xi.b.head<3>() = s.bg;
  xi.b.segment<3>(3) = s.ba;
  // The velocity-bias slot stays zero: the virtual velocity input is fed as
  // zero, so the true bias on it is zero by construction.
  xi.K = data.meta.k_true;
  return xi;
}

StateRow to_state_row(double t, const SystemState& xi) {
  StateRow s;
  s.t = t;
  s.C = xi.T.rotation();
  s.r = xi.T.position();
  s.v = xi.T.velocity();
  s.bg = xi.b.head<3>();
  s.ba = xi.b.segment<3>(3);
  return s;
}

// Seeds the map with a regular grid over each world rectangle so the first
// scans already have plane support.
void prime_map(MapIndex& map, const PlanarWorld& world, double spacing) {
  std::vector<Vec3> pts;
  for (const WorldRect& rect : world.rects) {
    const double lu = rect.eu.norm();
    const double lv = rect.ev.norm();
    const int nu = std::max(2, static_cast<int>(std::lround(lu / spacing)) + 1);
    const int nv = std::max(2, static_cast<int>(std::lround(lv / spacing)) + 1);
    for (int i = 0; i < nu; ++i) {
      for (int j = 0; j < nv; ++j) {
        pts.push_back(rect.corner + rect.eu * (static_cast<double>(i) / (nu - 1)) +
                      rect.ev * (static_cast<double>(j) / (nv - 1)));
      }
    }
  }
  map.insert(pts);
}

struct Association {
  Vec3 p_lidar;
  PlaneFit fit;
  double var;
};

// Keeps the innovation covariance well-conditioned on noise-free synthetic
// data, where sigma_lidar and the plane rms can both be exactly zero.
constexpr double kMinRowVar = 1e-8;

// Scan-to-map correspondence at the given state: k nearest map points per
// scan point, plane fit, thickness screening. Gating happens row-side.
std::vector<Association> associate(const std::vector<ScanPoint>& pts, const SystemState& xi,
                                   const MapIndex& map, const MeasurementConfig& mcfg,
                                   double lidar_sigma) {
  std::vector<Association> out;
  if (map.size() < mcfg.knn) return out;
  const Pose t_wl = lidar_pose(xi);
  const Vec3 view = t_wl.translation();
  out.reserve(pts.size());
  std::vector<Vec3> support;
  for (const ScanPoint& sp : pts) {
    const Vec3 p_w = t_wl * sp.p;
    const std::vector<Neighbor> nbrs = map.knn(p_w, mcfg.knn);
    support.clear();
    for (const Neighbor& nb : nbrs) support.push_back(map.point(nb.index));
    PlaneFit fit;
    try {
      fit = fit_plane(support, view, mcfg);
    } catch (const LioError& e) {
      if (e.code() == ErrorCode::DegenerateCloud) continue;
      throw;
    }
    if (!fit.valid) continue;
    out.push_back(
        {sp.p, fit, std::max(lidar_sigma * lidar_sigma + fit.rms * fit.rms, kMinRowVar)});
  }
  return out;
}

int classify_exit(const LioError& e) {
  std::fprintf(stderr, "error: %s\n", e.what());
  switch (e.code()) {
    case ErrorCode::BadConfig:
    case ErrorCode::IoError:
    case ErrorCode::DatasetCorrupt:
    case ErrorCode::MismatchedDataset:
      return 2;
    default:
      return 1;
  }
}

FilterKind filter_from_name(const std::string& name) {
  if (name == "eqf") return FilterKind::Eqf;
  if (name == "ekf") return FilterKind::Ekf;
  throw LioError(ErrorCode::BadConfig, "run config: filter must be \"eqf\" or \"ekf\"");
}

const char* filter_name(FilterKind k) { return k == FilterKind::Eqf ? "eqf" : "ekf"; }

PriorSigmas prior_from_json(const json& j) {
  reject_unknown_keys(j,
                      {"attitude", "velocity", "position", "gyro_bias", "accel_bias",
                       "velocity_bias", "extrinsic_rot", "extrinsic_trans", "gravity"},
                      "run config.prior");
  PriorSigmas p;
  p.attitude = get_num(j, "attitude", p.attitude, "run config.prior");
  p.velocity = get_num(j, "velocity", p.velocity, "run config.prior");
  p.position = get_num(j, "position", p.position, "run config.prior");
  p.gyro_bias = get_num(j, "gyro_bias", p.gyro_bias, "run config.prior");
  p.accel_bias = get_num(j, "accel_bias", p.accel_bias, "run config.prior");
  p.velocity_bias = get_num(j, "velocity_bias", p.velocity_bias, "run config.prior");
  p.extrinsic_rot = get_num(j, "extrinsic_rot", p.extrinsic_rot, "run config.prior");
  p.extrinsic_trans = get_num(j, "extrinsic_trans", p.extrinsic_trans, "run config.prior");
  p.gravity = get_num(j, "gravity", p.gravity, "run config.prior");
  const double all[] = {p.attitude,       p.velocity,      p.position,
                        p.gyro_bias,      p.accel_bias,    p.velocity_bias,
                        p.extrinsic_rot,  p.extrinsic_trans, p.gravity};
  for (double v : all) {
    if (!(v > 0.0)) throw LioError(ErrorCode::BadConfig, "run config.prior: sigmas must be > 0");
  }
  return p;
}

MeasurementConfig measurement_from_json(const json& j) {
  reject_unknown_keys(
      j, {"knn", "plane_dist_max", "plane_rms_max", "gate", "voxel", "rebuild_fraction"},
      "run config.measurement");
  MeasurementConfig m;
  const double knn = get_num(j, "knn", m.knn, "run config.measurement");
  if (knn < 3.0 || knn != std::floor(knn)) {
    throw LioError(ErrorCode::BadConfig, "run config.measurement: knn must be an integer >= 3");
  }
  m.knn = static_cast<int>(knn);
  m.plane_dist_max = get_num(j, "plane_dist_max", m.plane_dist_max, "run config.measurement");
  m.plane_rms_max = get_num(j, "plane_rms_max", m.plane_rms_max, "run config.measurement");
  m.gate = get_num(j, "gate", m.gate, "run config.measurement");
  m.voxel = get_num(j, "voxel", m.voxel, "run config.measurement");
  m.rebuild_fraction = get_num(j, "rebuild_fraction", m.rebuild_fraction, "run config.measurement");
  if (!(m.plane_dist_max > 0) || !(m.plane_rms_max > 0) || !(m.gate > 0) || !(m.voxel > 0) ||
      !(m.rebuild_fraction > 0)) {
    throw LioError(ErrorCode::BadConfig, "run config.measurement: thresholds must be > 0");
  }
  return m;
}

}  // namespace

RunConfig parse_run_config(const std::string& text) {
  const json j = parse_text(text, "run config");
  if (!j.is_object()) throw LioError(ErrorCode::BadConfig, "run config must be a JSON object");
  reject_unknown_keys(j,
                      {"dataset", "filter", "noise", "init_attitude_deg", "init_position_m",
                       "init_velocity_mps", "init_gyro_bias", "init_accel_bias", "init_mu_bias",
                       "init_extrinsic_rot_deg", "init_extrinsic_trans_m",
                       "sample_init_from_prior", "gravity_estimation", "max_iter",
                       "seed_map_from_world", "map_seed_spacing", "map_insert", "seed", "prior",
                       "measurement", "exact_expm"},
                      "run config");
  RunConfig cfg;
  if (!j.contains("dataset") || !j.at("dataset").is_string()) {
    throw LioError(ErrorCode::BadConfig, "run config: dataset path (string) is required");
  }
  cfg.dataset = j.at("dataset").get<std::string>();
  if (j.contains("filter")) {
    if (!j.at("filter").is_string()) {
      throw LioError(ErrorCode::BadConfig, "run config: filter must be a string");
    }
    cfg.filter = filter_from_name(j.at("filter").get<std::string>());
  }
  if (j.contains("noise")) cfg.noise = noise_from_json(j.at("noise"), "run config.noise");
  const auto read_vec = [&](const char* key, Vec3& out) {
    if (j.contains(key)) out = vec_from_json(j.at(key), std::string("run config.") + key);
  };
  read_vec("init_attitude_deg", cfg.init_attitude_deg);
  read_vec("init_position_m", cfg.init_position_m);
  read_vec("init_velocity_mps", cfg.init_velocity_mps);
  read_vec("init_gyro_bias", cfg.init_gyro_bias);
  read_vec("init_accel_bias", cfg.init_accel_bias);
  read_vec("init_mu_bias", cfg.init_mu_bias);
  read_vec("init_extrinsic_rot_deg", cfg.init_extrinsic_rot_deg);
  read_vec("init_extrinsic_trans_m", cfg.init_extrinsic_trans_m);
  cfg.sample_init_from_prior =
      get_bool(j, "sample_init_from_prior", cfg.sample_init_from_prior, "run config");
  cfg.gravity_estimation = get_bool(j, "gravity_estimation", cfg.gravity_estimation, "run config");
  const double max_iter = get_num(j, "max_iter", cfg.max_iter, "run config");
  if (max_iter < 1.0 || max_iter != std::floor(max_iter)) {
    throw LioError(ErrorCode::BadConfig, "run config: max_iter must be an integer >= 1");
  }
  cfg.max_iter = static_cast<int>(max_iter);
  cfg.seed_map_from_world = get_bool(j, "seed_map_from_world", cfg.seed_map_from_world, "run config");
  cfg.map_insert = get_bool(j, "map_insert", cfg.map_insert, "run config");
  cfg.map_seed_spacing = get_num(j, "map_seed_spacing", cfg.map_seed_spacing, "run config");
  if (!(cfg.map_seed_spacing > 0)) {
    throw LioError(ErrorCode::BadConfig, "run config: map_seed_spacing must be > 0");
  }
  if (j.contains("seed")) {
    if (!j.at("seed").is_number_unsigned()) {
      throw LioError(ErrorCode::BadConfig, "run config: seed must be a non-negative integer");
    }
    cfg.seed = j.at("seed").get<std::uint64_t>();
  }
  if (j.contains("prior")) cfg.prior = prior_from_json(j.at("prior"));
  if (j.contains("measurement")) cfg.measurement = measurement_from_json(j.at("measurement"));
  cfg.exact_expm = get_bool(j, "exact_expm", cfg.exact_expm, "run config");
  return cfg;
}

RunConfig load_run_config(const std::string& path) { return parse_run_config(read_file(path)); }

std::string report_to_json(const MetricsReport& r) {
  const json j{{"filter", r.filter},
               {"dataset", r.dataset},
               {"seed", r.seed},
               {"scans", r.scans},
               {"ate_rmse", r.ate_rmse},
               {"end_to_end", r.end_to_end},
               {"bias_gyro_err", vec_to_json(r.bias_gyro_err)},
               {"bias_accel_err", vec_to_json(r.bias_accel_err)},
               {"extrinsic_rot_err_deg", r.extrinsic_rot_err_deg},
               {"extrinsic_trans_err", r.extrinsic_trans_err},
               {"nees_mean", r.nees_mean},
               {"nees_band_fraction", r.nees_band_fraction},
               {"nees_dof", r.nees_dof}};
  return j.dump(2) + "\n";
}

MetricsReport report_from_json(const std::string& text) {
  const json j = parse_text(text, "report");
  MetricsReport r;
  try {
    r.filter = j.at("filter").get<std::string>();
    r.dataset = j.at("dataset").get<std::string>();
    r.seed = j.at("seed").get<std::uint64_t>();
    r.scans = j.at("scans").get<int>();
    r.ate_rmse = j.at("ate_rmse").get<double>();
    r.end_to_end = j.at("end_to_end").get<double>();
    r.bias_gyro_err = vec_from_json(j.at("bias_gyro_err"), "report.bias_gyro_err");
    r.bias_accel_err = vec_from_json(j.at("bias_accel_err"), "report.bias_accel_err");
    r.extrinsic_rot_err_deg = j.at("extrinsic_rot_err_deg").get<double>();
    r.extrinsic_trans_err = j.at("extrinsic_trans_err").get<double>();
    r.nees_mean = j.at("nees_mean").get<double>();
    r.nees_band_fraction = j.at("nees_band_fraction").get<double>();
    r.nees_dof = j.at("nees_dof").get<int>();
  } catch (const json::exception& e) {
    throw LioError(ErrorCode::BadConfig, std::string("report: ") + e.what());
  }
  if (!std::isfinite(r.ate_rmse) || !std::isfinite(r.end_to_end) || !std::isfinite(r.nees_mean) ||
      r.nees_mean < 0.0) {
    throw LioError(ErrorCode::BadConfig, "report: metrics must be finite and NEES >= 0");
  }
  return r;
}

RunResult run_filter(const Dataset& data, const RunConfig& cfg) {
  if (cfg.max_iter < 1) throw LioError(ErrorCode::BadConfig, "max_iter must be >= 1");
  if (cfg.measurement.knn < 3) throw LioError(ErrorCode::BadConfig, "knn must be >= 3");
  if (cfg.filter == FilterKind::Ekf && cfg.gravity_estimation) {
    throw LioError(ErrorCode::BadConfig, "gravity estimation is only available for the eqf filter");
  }
  const double ratio = data.meta.imu_hz / data.meta.lidar_hz;
  const long per = std::lround(ratio);
  if (per <= 0 || std::abs(ratio - static_cast<double>(per)) > 1e-9) {
    throw LioError(ErrorCode::DatasetCorrupt, "imu rate is not an integer multiple of scan rate");
  }
  if (data.meta.n_imu != data.meta.n_scans * per ||
      data.truth.size() != static_cast<std::size_t>(data.meta.n_imu) + 1) {
    throw LioError(ErrorCode::DatasetCorrupt, "imu / scan / truth counts are inconsistent");
  }
  const NoiseConfig noise = cfg.noise ? *cfg.noise : data.meta.noise;
  const MeasurementConfig& mcfg = cfg.measurement;
  const long n_scans = data.meta.n_scans;

  // Initial estimate: truth perturbed by the configured offsets, or by a
  // draw from the prior.
  std::mt19937_64 rng(cfg.seed);
  Vec24 delta;
  delta.segment<3>(0) = cfg.init_attitude_deg * kDegToRad;
  delta.segment<3>(3) = cfg.init_velocity_mps;
  delta.segment<3>(6) = cfg.init_position_m;
  delta.segment<3>(9) = cfg.init_gyro_bias;
  delta.segment<3>(12) = cfg.init_accel_bias;
  delta.segment<3>(15) = cfg.init_mu_bias;
  delta.segment<3>(18) = cfg.init_extrinsic_rot_deg * kDegToRad;
  delta.segment<3>(21) = cfg.init_extrinsic_trans_m;
  Vec2 gravity_delta = Vec2::Zero();
  if (cfg.sample_init_from_prior) {
    std::normal_distribution<double> gauss;
    const Vec24 sig = prior_sigma_vec(cfg.prior);
    for (int i = 0; i < 24; ++i) delta(i) = gauss(rng) * sig(i);
    if (cfg.gravity_estimation) {
      gravity_delta << gauss(rng) * cfg.prior.gravity, gauss(rng) * cfg.prior.gravity;
    }
  }
  const SystemState xi_true0 = truth_state(data, 0);
  const SystemState xi0_hat = apply_perturbation(xi_true0, delta);
  GravityDir gravity_true;
  gravity_true.magnitude = data.meta.gravity.norm();
  gravity_true.dir = data.meta.gravity / gravity_true.magnitude;
  GravityDir gravity_hat = gravity_true;
  if (cfg.gravity_estimation) gravity_hat.dir = s2_boxplus(gravity_true.dir, gravity_delta);

  std::optional<FilterState> eqf;
  std::optional<EkfBaseline> ekf;
  if (cfg.filter == FilterKind::Eqf) {
    eqf = make_filter_state(xi0_hat, eqf_prior_sigma(xi0_hat, cfg.prior, cfg.gravity_estimation),
                            cfg.gravity_estimation, gravity_hat);
    eqf->t = data.truth[0].t;
  } else {
    ekf.emplace(xi0_hat, ekf_prior_sigma(cfg.prior), gravity_true);
    ekf->t = data.truth[0].t;
  }
  const auto current = [&]() { return eqf ? eqf->estimate() : ekf->estimate(); };

  MapIndex map(mcfg);
  if (cfg.seed_map_from_world) prime_map(map, data.meta.world, cfg.map_seed_spacing);

  RunResult res;
  res.est.push_back(to_state_row(data.truth[0].t, current()));
  res.nees_series.reserve(n_scans);
  PropagateOptions popts;
  popts.exact_expm = cfg.exact_expm;

  std::vector<PoseSample> poses;
  const auto tic = std::chrono::steady_clock::now();
  for (long k = 0; k < n_scans; ++k) {
    // Propagate across the scan, recording the LiDAR pose on the IMU grid
    // for de-skewing. Times come from the truth rows, which sit on the
    // exact written grid.
    poses.clear();
    poses.push_back({data.truth[k * per].t, lidar_pose(current())});
    for (long i = k * per; i < (k + 1) * per; ++i) {
      const double dt = data.truth[i + 1].t - data.truth[i].t;
      if (eqf) {
        propagate(*eqf, data.imu[i].w, data.imu[i].a, dt, noise, popts);
        eqf->t = data.truth[i + 1].t;
      } else {
        ekf->propagate(data.imu[i].w, data.imu[i].a, dt, noise);
        ekf->t = data.truth[i + 1].t;
      }
      poses.push_back({data.truth[i + 1].t, lidar_pose(current())});
    }
    const double t_end = data.truth[(k + 1) * per].t;
    const std::vector<ScanPoint> deskewed =
        deskew(data.scans[k], data.scan_start(k), poses, t_end);

    // Iterated update with re-association at each linearisation point.
    if (eqf) {
      const RowProvider provider = [&](const FilterState& s) {
        std::vector<MeasurementRow> rows;
        const SystemState xi = s.estimate();
        const std::vector<Association> assoc =
            associate(deskewed, xi, map, mcfg, noise.lidar_sigma);
        rows.reserve(assoc.size());
        for (const Association& a : assoc) {
          try {
            rows.push_back(build_row(xi, a.p_lidar, a.fit, a.var, mcfg));
          } catch (const LioError& e) {
            if (e.code() != ErrorCode::GatedOutlier) throw;
          }
        }
        return rows;
      };
      update(*eqf, provider, cfg.max_iter);
    } else {
      const EkfBaseline::Provider provider = [&](const EkfBaseline& b) {
        std::vector<MeasurementRow> rows;
        const SystemState xi = b.estimate();
        const Pose t_wl = lidar_pose(xi);
        const std::vector<Association> assoc =
            associate(deskewed, xi, map, mcfg, noise.lidar_sigma);
        rows.reserve(assoc.size());
        for (const Association& a : assoc) {
          const double resid = a.fit.n.dot(t_wl * a.p_lidar - a.fit.q);
          if (std::abs(resid) > mcfg.gate) continue;
          rows.push_back(b.build_row(a.p_lidar, a.fit.n, a.fit.q, a.var));
        }
        return rows;
      };
      ekf->update(provider, cfg.max_iter);
    }

    // Register the scan into the map at the posterior pose.
    const SystemState xi_post = current();
    if (cfg.map_insert) {
      const Pose t_wl = lidar_pose(xi_post);
      std::vector<Vec3> world_pts;
      world_pts.reserve(deskewed.size());
      for (const ScanPoint& sp : deskewed) world_pts.push_back(t_wl * sp.p);
      map.insert(world_pts);
    }

    const SystemState xi_true = truth_state(data, (k + 1) * per);
    const Vec3 pos_err = xi_post.T.position() - xi_true.T.position();
    if (!pos_err.allFinite() || pos_err.norm() > 100.0) {
      std::ostringstream msg;
      msg << "position error " << pos_err.norm() << " m at scan " << k << " (t = " << t_end
          << " s)";
      throw LioError(ErrorCode::FilterDiverged, msg.str());
    }
    res.nees_series.push_back(eqf ? nees(*eqf, xi_true) : ekf->nees(xi_true));
    res.est.push_back(to_state_row(t_end, xi_post));
  }
  const auto toc = std::chrono::steady_clock::now();

  // Metrics.
  MetricsReport rep;
  rep.filter = filter_name(cfg.filter);
  rep.dataset = cfg.dataset;
  rep.seed = cfg.seed;
  rep.scans = static_cast<int>(n_scans);
  const std::size_t n_est = res.est.size();
  Eigen::Matrix3Xd src(3, n_est), dst(3, n_est);
  for (std::size_t m = 0; m < n_est; ++m) {
    src.col(m) = res.est[m].r;
    dst.col(m) = data.truth[m * per].r;
  }
  const Mat4 align = Eigen::umeyama(src, dst, false);
  const Eigen::Matrix3Xd resid =
      ((align.topLeftCorner<3, 3>() * src).colwise() + align.topRightCorner<3, 1>()) - dst;
  rep.ate_rmse = std::sqrt(resid.squaredNorm() / static_cast<double>(n_est));
  rep.end_to_end = (res.est.back().r - data.truth.back().r).norm();
  const SystemState xi_end = current();
  rep.bias_gyro_err = xi_end.b.head<3>() - data.truth.back().bg;
  rep.bias_accel_err = xi_end.b.segment<3>(3) - data.truth.back().ba;
  rep.extrinsic_rot_err_deg =
      (data.meta.k_true.rotation().inverse() * xi_end.K.rotation()).log().norm() / kDegToRad;
  rep.extrinsic_trans_err = (xi_end.K.translation() - data.meta.k_true.translation()).norm();
  rep.nees_dof = eqf ? 24 : 21;
  double lo = 0.0, hi = 0.0;
  chi2_band_95(rep.nees_dof, &lo, &hi);
  double nees_sum = 0.0;
  long in_band = 0;
  for (double v : res.nees_series) {
    nees_sum += v;
    if (v >= lo && v <= hi) ++in_band;
  }
  rep.nees_mean = n_scans > 0 ? nees_sum / static_cast<double>(n_scans) : 0.0;
  rep.nees_band_fraction =
      n_scans > 0 ? static_cast<double>(in_band) / static_cast<double>(n_scans) : 0.0;
  rep.wall_ms_per_scan =
      n_scans > 0
          ? std::chrono::duration<double, std::milli>(toc - tic).count() / static_cast<double>(n_scans)
          : 0.0;
  res.report = rep;

  const SystemState xi_true_end = truth_state(data, data.truth.size() - 1);
  if (eqf) {
    res.final_error = error_coords(eqf->X, xi_true_end);
    res.final_sigma_diag = eqf->sigma.diagonal();
  } else {
    res.final_error = ekf->error_vector(xi_true_end);
    res.final_sigma_diag = ekf->sigma().diagonal();
  }
  return res;
}

int cmd_simulate(const std::string& spec_path, const std::string& out_dir,
                 std::optional<std::uint64_t> seed_override) {
  try {
    SimSpec spec = load_sim_spec(spec_path);
    if (seed_override) spec.seed = *seed_override;
    const SimDataset data = simulate_dataset(spec);
    save_dataset(data, out_dir);
    std::printf("wrote %zu imu rows, %zu scans to %s\n", data.imu.size(), data.scans.size(),
                out_dir.c_str());
    return 0;
  } catch (const LioError& e) {
    return classify_exit(e);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
}

int cmd_run(const std::string& config_path, const std::string& out_dir) {
  try {
    const RunConfig cfg = load_run_config(config_path);
    const Dataset data = load_dataset(cfg.dataset);
    const RunResult res = run_filter(data, cfg);
    fs::create_directories(out_dir);
    write_state_csv((fs::path(out_dir) / "est.csv").string(), res.est);
    {
      const std::string path = (fs::path(out_dir) / "report.json").string();
      std::ofstream out(path, std::ios::binary);
      if (!out) throw LioError(ErrorCode::IoError, "cannot open " + path);
      out << report_to_json(res.report);
      if (!out) throw LioError(ErrorCode::IoError, "cannot write " + path);
    }
    {
      const std::string path = (fs::path(out_dir) / "nees.csv").string();
      std::ofstream out(path, std::ios::binary);
      if (!out) throw LioError(ErrorCode::IoError, "cannot open " + path);
      out << "scan,nees\n";
      for (std::size_t k = 0; k < res.nees_series.size(); ++k) {
        out << k << "," << format_double(res.nees_series[k]) << "\n";
      }
      if (!out) throw LioError(ErrorCode::IoError, "cannot write " + path);
    }
    const MetricsReport& r = res.report;
    std::printf("filter              %s\n", r.filter.c_str());
    std::printf("scans               %d\n", r.scans);
    std::printf("ate rmse            %.6f m\n", r.ate_rmse);
    std::printf("end-to-end error    %.6f m\n", r.end_to_end);
    std::printf("gyro bias err       [%.3e, %.3e, %.3e] rad/s\n", r.bias_gyro_err.x(),
                r.bias_gyro_err.y(), r.bias_gyro_err.z());
    std::printf("accel bias err      [%.3e, %.3e, %.3e] m/s^2\n", r.bias_accel_err.x(),
                r.bias_accel_err.y(), r.bias_accel_err.z());
    std::printf("extrinsic err       %.4f deg / %.4f m\n", r.extrinsic_rot_err_deg,
                r.extrinsic_trans_err);
    std::printf("nees mean           %.3f (dof %d)\n", r.nees_mean, r.nees_dof);
    std::printf("nees band fraction  %.3f\n", r.nees_band_fraction);
    std::printf("wall per scan       %.3f ms\n", r.wall_ms_per_scan);
    return 0;
  } catch (const LioError& e) {
    return classify_exit(e);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
}

int cmd_compare(const std::vector<std::string>& config_paths, const std::string& out_path) {
  try {
    if (config_paths.size() < 2) {
      throw LioError(ErrorCode::BadConfig, "compare needs at least two configs");
    }
    std::vector<RunConfig> cfgs;
    cfgs.reserve(config_paths.size());
    for (const std::string& p : config_paths) cfgs.push_back(load_run_config(p));
    const fs::path canon = fs::weakly_canonical(cfgs.front().dataset);
    for (const RunConfig& c : cfgs) {
      if (fs::weakly_canonical(c.dataset) != canon) {
        throw LioError(ErrorCode::MismatchedDataset,
                       "compare configs reference different datasets");
      }
    }
    const Dataset data = load_dataset(cfgs.front().dataset);
    json rows = json::array();
    std::printf("%-24s %-6s %12s %12s %10s %12s\n", "config", "filter", "ate_rmse", "end_to_end",
                "nees_mean", "band_frac");
    for (std::size_t i = 0; i < cfgs.size(); ++i) {
      const RunResult res = run_filter(data, cfgs[i]);
      const MetricsReport& r = res.report;
      rows.push_back({{"config", config_paths[i]},
                      {"filter", r.filter},
                      {"ate_rmse", r.ate_rmse},
                      {"end_to_end", r.end_to_end},
                      {"nees_mean", r.nees_mean},
                      {"nees_band_fraction", r.nees_band_fraction},
                      {"nees_dof", r.nees_dof},
                      {"scans", r.scans}});
      const std::string base = fs::path(config_paths[i]).filename().string();
      std::printf("%-24s %-6s %12.6f %12.6f %10.3f %12.3f\n", base.c_str(), r.filter.c_str(),
                  r.ate_rmse, r.end_to_end, r.nees_mean, r.nees_band_fraction);
    }
    const json out{{"dataset", cfgs.front().dataset}, {"rows", rows}};
    std::ofstream f(out_path, std::ios::binary);
    if (!f) throw LioError(ErrorCode::IoError, "cannot open " + out_path);
    f << out.dump(2) << "\n";
    if (!f) throw LioError(ErrorCode::IoError, "cannot write " + out_path);
    return 0;
  } catch (const LioError& e) {
    return classify_exit(e);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
}

}  // namespace lio
