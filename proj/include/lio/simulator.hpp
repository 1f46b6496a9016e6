#pragma once

// Synthetic data generation: analytic ground-truth trajectories, IMU samples
// with white noise and random-walk biases, and LiDAR scans ray-cast against a
// planar rectangle world. Truth is closed form (no integration), so the
// filter's propagation model can be checked against it exactly.

#include <cstdint>
#include <random>
#include <vector>

#include "lio/eqf.hpp"
#include "lio/measurement.hpp"

namespace lio {

// --------------------------------------------------------------------------
// Trajectories

enum class TrajectoryKind { Static, Circle, Figure8, SinusoidAggressive };

struct TrajectorySpec {
  TrajectoryKind kind = TrajectoryKind::Circle;
  double radius = 5.0;    // path scale (m)
  double period = 20.0;   // seconds per lap / oscillation
  double yaw_rate = 0.0;  // constant extra yaw rate stacked on the path heading (rad/s)
  double duration = 60.0; // seconds
  double lead_in = 2.0;   // smooth spin-up from rest (s); 0 disables
  Vec3 start = Vec3::Zero();
};

struct TruthSample {
  Mat3 C = Mat3::Identity();  // body to world
  Vec3 v = Vec3::Zero();      // world frame
  Vec3 r = Vec3::Zero();      // world frame
  Vec3 w_body = Vec3::Zero();
  Vec3 a_body = Vec3::Zero();  // specific force C^T (r_ddot - g)

  ExtendedPose nav() const { return ExtendedPose(Rot3(C), v, r); }
  Pose pose() const { return Pose(Rot3(C), r); }
};

// Exact state and body-frame rates at time t. The position path and attitude
// are analytic; velocities and accelerations are their closed-form
// derivatives, so there is no integration error to tune around.
TruthSample truth_at(const TrajectorySpec& spec, double t,
                     const Vec3& gravity = Vec3(0.0, 0.0, -9.81));

// --------------------------------------------------------------------------
// Sensor rig

struct SensorRig {
  Pose k_true;                 // LiDAR pose in the body (IMU) frame
  Vec3 bg0 = Vec3::Zero();     // initial gyro bias (rad/s)
  Vec3 ba0 = Vec3::Zero();     // initial accel bias (m/s^2)
  Vec3 bmu0 = Vec3::Zero();    // initial virtual-velocity bias (m/s)
  NoiseConfig noise;           // densities for white noise and bias walks
  Vec3 gravity = Vec3(0.0, 0.0, -9.81);
  double imu_hz = 100.0;
  double lidar_hz = 10.0;
};

struct BiasTrajectory {
  Vec3 bg = Vec3::Zero();
  Vec3 ba = Vec3::Zero();
  Vec3 bmu = Vec3::Zero();
};

struct ImuSample {
  Vec3 w = Vec3::Zero();
  Vec3 a = Vec3::Zero();
};

// One IMU measurement at the current bias state, followed by an
// Euler-Maruyama step of the bias walk over dt. White-noise sigma per sample
// is density * sqrt(rate); walk increment sigma is density * sqrt(dt).
ImuSample sample_imu(const SensorRig& rig, const TruthSample& truth, double dt,
                     BiasTrajectory& bias, std::mt19937_64& rng);

// --------------------------------------------------------------------------
// Planar world and ray casting

struct WorldRect {
  Vec3 corner = Vec3::Zero();  // one corner
  Vec3 eu = Vec3::UnitX();     // full edge vectors, orthogonal to each other
  Vec3 ev = Vec3::UnitY();

  Vec3 normal() const { return eu.cross(ev).normalized(); }
};

struct LidarFov {
  int n_azimuth = 48;
  int n_elevation = 8;
  double az_min = -M_PI;  // azimuth sweep [az_min, az_max), columns exclusive of the end
  double az_max = M_PI;
  double el_min = -0.35;  // elevation rows inclusive of both ends
  double el_max = 0.35;
  double max_range = 50.0;
};

struct PlanarWorld {
  std::vector<WorldRect> rects;
  LidarFov fov;
};

// Six inward-facing rectangles forming a closed room.
PlanarWorld box_room(const Vec3& center, const Vec3& size);

// Nearest rectangle hit along a world-frame ray, or a negative range when
// nothing is hit within max_range. hit_rect (optional) receives the index.
double raycast(const PlanarWorld& world, const Vec3& origin, const Vec3& dir,
               int* hit_rect = nullptr);

// One full sweep starting at scan_start. The sensor moves during the sweep:
// column j of the azimuth grid fires at t_offset = j * period / n_azimuth
// from the pose at that instant, which is what makes de-skew meaningful.
// Ranges carry N(0, sigma_range^2) noise along the ray; misses are dropped.
// Points are returned in the LiDAR frame with their t_offset.
std::vector<ScanPoint> raycast_scan(const PlanarWorld& world, const TrajectorySpec& traj,
                                    const SensorRig& rig, double scan_start,
                                    std::mt19937_64& rng);

// --------------------------------------------------------------------------
// Whole-dataset synthesis

struct SimSpec {
  TrajectorySpec trajectory;
  PlanarWorld world = box_room(Vec3(0.0, 0.0, 0.0), Vec3(24.0, 20.0, 6.0));
  SensorRig rig;
  std::uint64_t seed = 1;
};

struct ImuRow {
  double t = 0.0;
  Vec3 w = Vec3::Zero();
  Vec3 a = Vec3::Zero();
};

struct StateRow {
  double t = 0.0;
  Rot3 C;
  Vec3 r = Vec3::Zero();
  Vec3 v = Vec3::Zero();
  Vec3 bg = Vec3::Zero();
  Vec3 ba = Vec3::Zero();
};

struct SimScan {
  double t_start = 0.0;
  std::vector<ScanPoint> points;
};

struct SimDataset {
  SimSpec spec;
  std::vector<ImuRow> imu;      // duration * imu_hz rows at t = 0, dt, ...
  std::vector<StateRow> truth;  // same grid plus a final row at t = duration
  std::vector<SimScan> scans;   // duration * lidar_hz sweeps
};

// Deterministic per spec.seed. Requires imu_hz to be an integer multiple of
// lidar_hz so scan boundaries land on IMU timestamps (BadConfig otherwise).
SimDataset simulate_dataset(const SimSpec& spec);

}  // namespace lio
