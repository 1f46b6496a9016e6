#pragma once

// Full odometry runs: run configuration, the propagate / de-skew / update
// loop over a dataset, consistency metrics, machine-readable reports, and
// the command fronts used by the CLI.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "lio/dataset.hpp"

namespace lio {

enum class FilterKind { Eqf, Ekf };

// Diagonal prior standard deviations. They build Sigma0 (mapped into the
// filter's error coordinates) and, when sample_init_from_prior is set, the
// distribution the initial estimate error is drawn from.
struct PriorSigmas {
  double attitude = 0.05;        // rad
  double velocity = 0.1;         // m/s
  double position = 0.1;         // m
  double gyro_bias = 0.02;       // rad/s
  double accel_bias = 0.1;       // m/s^2
  double velocity_bias = 0.05;   // m/s
  double extrinsic_rot = 0.05;   // rad
  double extrinsic_trans = 0.05; // m
  double gravity = 0.01;         // S^2 tangent, used only with gravity estimation
};

struct RunConfig {
  std::string dataset;
  FilterKind filter = FilterKind::Eqf;
  std::optional<NoiseConfig> noise;  // filter-side densities; dataset meta when unset

  // Fixed initial estimate errors, applied to the true initial state.
  Vec3 init_attitude_deg = Vec3::Zero();
  Vec3 init_position_m = Vec3::Zero();
  Vec3 init_velocity_mps = Vec3::Zero();
  Vec3 init_gyro_bias = Vec3::Zero();
  Vec3 init_accel_bias = Vec3::Zero();
  Vec3 init_mu_bias = Vec3::Zero();
  Vec3 init_extrinsic_rot_deg = Vec3::Zero();
  Vec3 init_extrinsic_trans_m = Vec3::Zero();
  bool sample_init_from_prior = false;  // draw the errors from `prior` instead

  bool gravity_estimation = false;
  int max_iter = 5;
  bool seed_map_from_world = true;   // prime the map from the meta geometry
  double map_seed_spacing = 0.25;    // grid spacing of the primed points (m)
  // Insert registered scans into the map (the full odometry loop). Off turns
  // the run into localization against the primed map, which keeps the
  // measurement stream independent of past estimation errors; consistency
  // studies use that mode.
  bool map_insert = true;
  std::uint64_t seed = 0;
  PriorSigmas prior;
  MeasurementConfig measurement;
  bool exact_expm = false;
};

RunConfig parse_run_config(const std::string& text);
RunConfig load_run_config(const std::string& path);

struct MetricsReport {
  std::string filter;  // "eqf" | "ekf"
  std::string dataset;
  std::uint64_t seed = 0;
  int scans = 0;
  double ate_rmse = 0.0;    // m, after rigid alignment
  double end_to_end = 0.0;  // m, final position error, no alignment
  Vec3 bias_gyro_err = Vec3::Zero();   // terminal, per axis
  Vec3 bias_accel_err = Vec3::Zero();  // terminal, per axis
  double extrinsic_rot_err_deg = 0.0;  // terminal
  double extrinsic_trans_err = 0.0;    // terminal (m)
  double nees_mean = 0.0;
  double nees_band_fraction = 0.0;  // fraction of scans inside the 95% band
  int nees_dof = 24;
  // Printed, never written to files: keeps reports byte-identical per seed.
  double wall_ms_per_scan = 0.0;
};

std::string report_to_json(const MetricsReport& r);
MetricsReport report_from_json(const std::string& text);

struct RunResult {
  MetricsReport report;
  std::vector<StateRow> est;        // initial state plus one row per scan
  std::vector<double> nees_series;  // one value per scan
  // Terminal error in the filter's own coordinates with matching marginal
  // variances (24 for the EqF, 21 for the EKF baseline); lets callers form
  // per-state z-scores without re-deriving the coordinate conventions.
  Eigen::VectorXd final_error;
  Eigen::VectorXd final_sigma_diag;
};

// Runs the configured filter over a loaded dataset. Throws FilterDiverged
// when the position error passes 100 m, BadConfig / MismatchedDataset on
// inconsistent inputs.
RunResult run_filter(const Dataset& data, const RunConfig& cfg);

// CLI command fronts. Each returns a process exit code: 0 success, 1 check
// or assertion failure, 2 I/O or config error.
int cmd_simulate(const std::string& spec_path, const std::string& out_dir,
                 std::optional<std::uint64_t> seed_override);
int cmd_run(const std::string& config_path, const std::string& out_dir);
int cmd_compare(const std::vector<std::string>& config_paths, const std::string& out_path);

}  // namespace lio
