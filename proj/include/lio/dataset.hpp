#pragma once

// Dataset files on disk: imu.csv, truth.csv, scans/NNNNNN.csv, and a JSON
// meta file tying them together. Values are written with shortest
// round-trip formatting, so a fixed seed produces byte-identical files.

#include <cstdint>
#include <string>
#include <vector>

#include "lio/simulator.hpp"

namespace lio {

struct DatasetMeta {
  int format = 1;
  std::uint64_t seed = 0;
  double imu_hz = 0.0;
  double lidar_hz = 0.0;
  Vec3 gravity = Vec3(0.0, 0.0, -9.81);
  Pose k_true;
  Vec3 bg0 = Vec3::Zero();
  Vec3 ba0 = Vec3::Zero();
  Vec3 bmu0 = Vec3::Zero();
  NoiseConfig noise;  // densities the data was generated with
  TrajectorySpec trajectory;
  PlanarWorld world;
  long n_imu = 0;
  long n_scans = 0;
};

struct Dataset {
  DatasetMeta meta;
  std::vector<ImuRow> imu;
  std::vector<StateRow> truth;  // IMU grid plus a final row at t = duration
  std::vector<std::vector<ScanPoint>> scans;

  double scan_start(long k) const { return static_cast<double>(k) / meta.lidar_hz; }
  double scan_period() const { return 1.0 / meta.lidar_hz; }
};

// Shortest exact decimal representation (round-trips through parsing).
std::string format_double(double v);

// Column schemas are fixed; readers reject on header mismatch, bad field
// counts, non-numeric fields, or non-finite values (DatasetCorrupt).
void write_imu_csv(const std::string& path, const std::vector<ImuRow>& rows);
std::vector<ImuRow> read_imu_csv(const std::string& path);

// t,px,py,pz,qw,qx,qy,qz,vx,vy,vz,bgx,bgy,bgz,bax,bay,baz with the
// quaternion in wxyz order, canonicalised to w >= 0.
void write_state_csv(const std::string& path, const std::vector<StateRow>& rows);
std::vector<StateRow> read_state_csv(const std::string& path);

void write_scan_csv(const std::string& path, const std::vector<ScanPoint>& points);
std::vector<ScanPoint> read_scan_csv(const std::string& path);

// Directory-level round trip. save_dataset creates dir and dir/scans.
void save_dataset(const SimDataset& data, const std::string& dir);
Dataset load_dataset(const std::string& dir);

// Trajectory kind names used in JSON files ("static", "circle", "figure8",
// "sinusoid-aggressive").
std::string trajectory_kind_name(TrajectoryKind kind);
TrajectoryKind trajectory_kind_from_name(const std::string& name);

// Generation recipe from JSON: trajectory, world (explicit rects or a
// box_center/box_size shorthand), rig, seed. Unknown keys are rejected.
SimSpec parse_sim_spec(const std::string& text);
SimSpec load_sim_spec(const std::string& path);

// Rz(yaw) Ry(pitch) Rx(roll), angles in degrees; used by config files.
Rot3 rot_from_rpy_deg(const Vec3& rpy_deg);

}  // namespace lio
