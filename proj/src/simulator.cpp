#include "lio/simulator.hpp"

#include <cmath>

#include "lio/errors.hpp"

namespace lio {

namespace {

// Quintic spin-up: s(t) ramps from rest (s = s' = s'' = 0) into unit-rate
// time s' = 1 with continuous acceleration and jerk at the junction.
struct Warp {
  double s = 0.0;
  double ds = 1.0;
  double dds = 0.0;
};

Warp eval_warp(double t, double lead_in) {
  Warp w;
  if (lead_in <= 0.0) {
    w.s = t;
    return w;
  }
  if (t >= lead_in) {
    w.s = t - 0.4 * lead_in;
    return w;
  }
  const double tau = t / lead_in;
  const double t2 = tau * tau;
  const double t3 = t2 * tau;
  w.s = lead_in * (2.0 * t3 - 2.0 * t3 * tau + 0.6 * t3 * t2);
  w.ds = 6.0 * t2 - 8.0 * t3 + 3.0 * t2 * t2;
  w.dds = (12.0 * tau - 24.0 * t2 + 12.0 * t3) / lead_in;
  return w;
}

// Path and attitude as analytic functions of the warped parameter s, with
// derivatives taken with respect to s.
struct PathEval {
  Vec3 p = Vec3::Zero();
  Vec3 dp = Vec3::Zero();
  Vec3 ddp = Vec3::Zero();
  double roll = 0.0, droll = 0.0;
  double pitch = 0.0, dpitch = 0.0;
  double yaw = 0.0, dyaw = 0.0;
};

PathEval eval_path(const TrajectorySpec& spec, double s) {
  PathEval e;
  const double two_pi = 2.0 * M_PI;
  switch (spec.kind) {
    case TrajectoryKind::Static:
      e.p = spec.start;
      break;
    case TrajectoryKind::Circle: {
      const double om = two_pi / spec.period;
      const double a = om * s;
      const double r = spec.radius;
      e.p = spec.start + Vec3(r * (std::cos(a) - 1.0), r * std::sin(a), 0.0);
      e.dp = Vec3(-r * om * std::sin(a), r * om * std::cos(a), 0.0);
      e.ddp = Vec3(-r * om * om * std::cos(a), -r * om * om * std::sin(a), 0.0);
      e.yaw = a + 0.5 * M_PI + spec.yaw_rate * s;
      e.dyaw = om + spec.yaw_rate;
      break;
    }
    case TrajectoryKind::Figure8: {
      const double om = two_pi / spec.period;
      const double r = spec.radius;
      const double a = om * s;
      e.p = spec.start + Vec3(r * std::sin(a), 0.5 * r * std::sin(2.0 * a), 0.0);
      e.dp = Vec3(r * om * std::cos(a), r * om * std::cos(2.0 * a), 0.0);
      e.ddp = Vec3(-r * om * om * std::sin(a), -2.0 * r * om * om * std::sin(2.0 * a), 0.0);
      // Heading follows the path tangent; the tangent never vanishes because
      // cos(a) and cos(2a) have no common zero.
      e.yaw = std::atan2(e.dp.y(), e.dp.x()) + spec.yaw_rate * s;
      const double t2 = e.dp.x() * e.dp.x() + e.dp.y() * e.dp.y();
      e.dyaw = (e.dp.x() * e.ddp.y() - e.dp.y() * e.ddp.x()) / t2 + spec.yaw_rate;
      // Banked turns plus a gentle pitch swell; the roll-pitch excitation
      // makes the full extrinsic observable from planar geometry.
      e.roll = 0.25 * std::sin(2.0 * a);
      e.droll = 0.5 * om * std::cos(2.0 * a);
      e.pitch = 0.15 * std::sin(a + 0.7);
      e.dpitch = 0.15 * om * std::cos(a + 0.7);
      break;
    }
    case TrajectoryKind::SinusoidAggressive: {
      const double om = two_pi / spec.period;
      const double r = spec.radius;
      const double ax = r, ay = 0.8 * r, az = 0.5 * r;
      const double fx = om, fy = 1.2 * om, fz = 0.8 * om;
      const double px = 0.0, py = 1.0, pz = 2.0;
      e.p = spec.start + Vec3(ax * std::sin(fx * s + px), ay * std::sin(fy * s + py),
                              az * std::sin(fz * s + pz));
      e.dp = Vec3(ax * fx * std::cos(fx * s + px), ay * fy * std::cos(fy * s + py),
                  az * fz * std::cos(fz * s + pz));
      e.ddp = Vec3(-ax * fx * fx * std::sin(fx * s + px), -ay * fy * fy * std::sin(fy * s + py),
                   -az * fz * fz * std::sin(fz * s + pz));
      const double fr = 1.3 * om, fp = 0.9 * om, fw = om;
      e.roll = 0.5 * std::sin(fr * s);
      e.droll = 0.5 * fr * std::cos(fr * s);
      e.pitch = 0.35 * std::sin(fp * s + 0.4);
      e.dpitch = 0.35 * fp * std::cos(fp * s + 0.4);
      e.yaw = 1.6 * std::sin(fw * s) + spec.yaw_rate * s;
      e.dyaw = 1.6 * fw * std::cos(fw * s) + spec.yaw_rate;
      break;
    }
  }
  return e;
}

Mat3 euler_zyx(double roll, double pitch, double yaw) {
  return (Eigen::AngleAxisd(yaw, Vec3::UnitZ()) * Eigen::AngleAxisd(pitch, Vec3::UnitY()) *
          Eigen::AngleAxisd(roll, Vec3::UnitX()))
      .toRotationMatrix();
}

}  // namespace

TruthSample truth_at(const TrajectorySpec& spec, double t, const Vec3& gravity) {
  TruthSample out;
  if (spec.kind == TrajectoryKind::Static) {
    out.r = spec.start;
    out.a_body = -gravity;  // C = I
    return out;
  }

  const Warp w = eval_warp(t, spec.lead_in);
  const PathEval e = eval_path(spec, w.s);

  out.r = e.p;
  out.v = e.dp * w.ds;
  const Vec3 acc = e.ddp * (w.ds * w.ds) + e.dp * w.dds;

  out.C = euler_zyx(e.roll, e.pitch, e.yaw);
  const double droll = e.droll * w.ds;
  const double dpitch = e.dpitch * w.ds;
  const double dyaw = e.dyaw * w.ds;

  // Body rates for the z-y-x Euler sequence.
  const double cr = std::cos(e.roll), sr = std::sin(e.roll);
  const double cp = std::cos(e.pitch), sp = std::sin(e.pitch);
  out.w_body = Vec3(droll - dyaw * sp, dpitch * cr + dyaw * cp * sr,
                    -dpitch * sr + dyaw * cp * cr);

  out.a_body = out.C.transpose() * (acc - gravity);
  return out;
}

ImuSample sample_imu(const SensorRig& rig, const TruthSample& truth, double dt,
                     BiasTrajectory& bias, std::mt19937_64& rng) {
  std::normal_distribution<double> nd(0.0, 1.0);
  auto draw3 = [&]() { return Vec3(nd(rng), nd(rng), nd(rng)); };

  const double sg = rig.noise.gyro_noise_density * std::sqrt(rig.imu_hz);
  const double sa = rig.noise.accel_noise_density * std::sqrt(rig.imu_hz);

  ImuSample out;
  out.w = truth.w_body + bias.bg + sg * draw3();
  out.a = truth.a_body + bias.ba + sa * draw3();

  const double sq = std::sqrt(dt);
  bias.bg += rig.noise.gyro_bias_walk * sq * draw3();
  bias.ba += rig.noise.accel_bias_walk * sq * draw3();
  bias.bmu += rig.noise.velocity_bias_walk * sq * draw3();
  return out;
}

PlanarWorld box_room(const Vec3& c, const Vec3& size) {
  const double hx = 0.5 * size.x(), hy = 0.5 * size.y(), hz = 0.5 * size.z();
  PlanarWorld w;
  auto add = [&](const Vec3& corner, const Vec3& eu, const Vec3& ev) {
    w.rects.push_back(WorldRect{corner, eu, ev});
  };
  add(c + Vec3(+hx, -hy, -hz), Vec3(0, 2 * hy, 0), Vec3(0, 0, 2 * hz));  // +x wall
  add(c + Vec3(-hx, -hy, -hz), Vec3(0, 2 * hy, 0), Vec3(0, 0, 2 * hz));  // -x wall
  add(c + Vec3(-hx, +hy, -hz), Vec3(2 * hx, 0, 0), Vec3(0, 0, 2 * hz));  // +y wall
  add(c + Vec3(-hx, -hy, -hz), Vec3(2 * hx, 0, 0), Vec3(0, 0, 2 * hz));  // -y wall
  add(c + Vec3(-hx, -hy, +hz), Vec3(2 * hx, 0, 0), Vec3(0, 2 * hy, 0));  // ceiling
  add(c + Vec3(-hx, -hy, -hz), Vec3(2 * hx, 0, 0), Vec3(0, 2 * hy, 0));  // floor
  return w;
}

double raycast(const PlanarWorld& world, const Vec3& origin, const Vec3& dir, int* hit_rect) {
  double best = -1.0;
  int best_idx = -1;
  for (std::size_t i = 0; i < world.rects.size(); ++i) {
    const WorldRect& rect = world.rects[i];
    const Vec3 n = rect.normal();
    const double denom = n.dot(dir);
    if (std::abs(denom) < 1e-12) continue;  // ray parallel to the plane
    const double range = n.dot(rect.corner - origin) / denom;
    if (range < 1e-6 || range > world.fov.max_range) continue;
    if (best >= 0.0 && range >= best) continue;
    const Vec3 local = origin + range * dir - rect.corner;
    const double lu = rect.eu.norm(), lv = rect.ev.norm();
    const double u = local.dot(rect.eu) / lu;
    const double v = local.dot(rect.ev) / lv;
    if (u < 0.0 || u > lu || v < 0.0 || v > lv) continue;
    best = range;
    best_idx = static_cast<int>(i);
  }
  if (hit_rect) *hit_rect = best_idx;
  return best;
}

std::vector<ScanPoint> raycast_scan(const PlanarWorld& world, const TrajectorySpec& traj,
                                    const SensorRig& rig, double scan_start,
                                    std::mt19937_64& rng) {
  std::normal_distribution<double> nd(0.0, 1.0);
  const LidarFov& fov = world.fov;
  const double period = 1.0 / rig.lidar_hz;

  std::vector<ScanPoint> out;
  out.reserve(static_cast<std::size_t>(fov.n_azimuth) * fov.n_elevation);
  for (int j = 0; j < fov.n_azimuth; ++j) {
    const double t_off = period * j / fov.n_azimuth;
    const double az = fov.az_min + (fov.az_max - fov.az_min) * j / fov.n_azimuth;
    const TruthSample truth = truth_at(traj, scan_start + t_off, rig.gravity);
    const Pose lidar_pose = truth.pose() * rig.k_true;
    const Vec3 origin = lidar_pose.translation();
    for (int i = 0; i < fov.n_elevation; ++i) {
      const double el =
          fov.n_elevation > 1
              ? fov.el_min + (fov.el_max - fov.el_min) * i / (fov.n_elevation - 1)
              : 0.5 * (fov.el_min + fov.el_max);
      const Vec3 d_lidar(std::cos(el) * std::cos(az), std::cos(el) * std::sin(az), std::sin(el));
      const double range = raycast(world, origin, lidar_pose.rotation() * d_lidar);
      if (range < 0.0) continue;
      const double noisy = range + rig.noise.lidar_sigma * nd(rng);
      out.push_back(ScanPoint{t_off, noisy * d_lidar});
    }
  }
  return out;
}

SimDataset simulate_dataset(const SimSpec& spec) {
  const SensorRig& rig = spec.rig;
  if (!(rig.imu_hz > 0.0) || !(rig.lidar_hz > 0.0) || !(spec.trajectory.duration > 0.0)) {
    throw LioError(ErrorCode::BadConfig, "rates and duration must be positive");
  }
  const double ratio = rig.imu_hz / rig.lidar_hz;
  const long per_scan = std::lround(ratio);
  if (per_scan < 1 || std::abs(ratio - static_cast<double>(per_scan)) > 1e-9) {
    throw LioError(ErrorCode::BadConfig, "imu_hz must be an integer multiple of lidar_hz");
  }
  const long n_imu = std::lround(spec.trajectory.duration * rig.imu_hz);
  const long n_scans = std::lround(spec.trajectory.duration * rig.lidar_hz);
  if (n_imu != n_scans * per_scan) {
    throw LioError(ErrorCode::BadConfig, "duration must hold a whole number of scans");
  }

  std::mt19937_64 rng(spec.seed);
  BiasTrajectory bias{rig.bg0, rig.ba0, rig.bmu0};

  SimDataset out;
  out.spec = spec;
  out.imu.reserve(n_imu);
  out.truth.reserve(n_imu + 1);
  const double dt = 1.0 / rig.imu_hz;
  for (long i = 0; i <= n_imu; ++i) {
    const double t = static_cast<double>(i) / rig.imu_hz;
    const TruthSample truth = truth_at(spec.trajectory, t, rig.gravity);
    out.truth.push_back(StateRow{t, Rot3(truth.C), truth.r, truth.v, bias.bg, bias.ba});
    if (i == n_imu) break;  // final truth row at t = duration, no sample past the end
    const ImuSample s = sample_imu(rig, truth, dt, bias, rng);
    out.imu.push_back(ImuRow{t, s.w, s.a});
  }

  out.scans.reserve(n_scans);
  for (long k = 0; k < n_scans; ++k) {
    const double t_start = static_cast<double>(k) / rig.lidar_hz;
    out.scans.push_back(SimScan{t_start, raycast_scan(spec.world, spec.trajectory, rig, t_start, rng)});
  }
  return out;
}

}  // namespace lio
