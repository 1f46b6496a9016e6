#pragma once

// LiDAR measurement pipeline: motion de-skew, exact k-nearest-neighbour
// queries against the incremental map, plane extraction, and the
// point-to-plane measurement rows consumed by the filter update.

#include <Eigen/Dense>

#include <cstdint>
#include <unordered_set>
#include <vector>

#include "lio/eqf.hpp"

namespace lio {

struct ScanPoint {
  double t_offset = 0.0;  // seconds from scan start
  Vec3 p = Vec3::Zero();  // LiDAR frame
};

struct MeasurementConfig {
  int knn = 5;
  double plane_dist_max = 0.1;   // max support-point distance for a valid fit (m)
  double plane_rms_max = 0.05;   // max fit rms (m)
  double gate = 1.0;             // innovation gate (m)
  double voxel = 0.5;            // map down-sampling voxel edge (m)
  double rebuild_fraction = 0.2; // pending/tree ratio that triggers a rebuild
};

// --------------------------------------------------------------------------
// De-skew

struct PoseSample {
  double t = 0.0;
  Pose pose;  // LiDAR pose in the world frame
};

// Transforms every point into the frame of the pose at t_end. Poses are
// interpolated between bracketing samples on SE(3) via log/exp; samples must
// cover [scan_start + min offset, t_end].
std::vector<ScanPoint> deskew(const std::vector<ScanPoint>& scan, double scan_start,
                              const std::vector<PoseSample>& poses, double t_end);

// --------------------------------------------------------------------------
// Map index: exact k-NN over inserted points. Queries scan a k-d tree over
// the bulk of the points plus a linear pass over recent insertions; the tree
// is rebuilt once the pending share exceeds rebuild_fraction.

struct Neighbor {
  int index;      // insertion order id
  double dist2;
};

class MapIndex {
 public:
  explicit MapIndex(const MeasurementConfig& cfg = {}) : cfg_(cfg) {}

  // Inserts points after voxel down-sampling (first point per voxel wins,
  // also against previously inserted content). Returns accepted count.
  int insert(const std::vector<Vec3>& points);

  // Exact k nearest neighbours, ties broken by insertion order. Throws
  // InsufficientMap when fewer than k points have been inserted.
  std::vector<Neighbor> knn(const Vec3& query, int k) const;

  const Vec3& point(int index) const { return points_[index]; }
  int size() const { return static_cast<int>(points_.size()); }
  int tree_size() const { return static_cast<int>(tree_count_); }
  int rebuilds() const { return rebuilds_; }

 private:
  void maybe_rebuild();
  void build_tree();

  struct Node {
    int point = -1;     // index into points_
    int axis = 0;
    int left = -1;
    int right = -1;
  };

  void knn_recurse(int node, const Vec3& q, int k, std::vector<Neighbor>& heap) const;
  int build_recurse(std::vector<int>& ids, int lo, int hi, int depth);

  MeasurementConfig cfg_;
  std::vector<Vec3> points_;
  std::vector<Node> nodes_;
  int root_ = -1;
  std::size_t tree_count_ = 0;  // points_[0, tree_count_) are indexed by the tree
  int rebuilds_ = 0;
  std::unordered_set<std::int64_t> voxels_;
};

// --------------------------------------------------------------------------
// Plane extraction

struct PlaneFit {
  Vec3 n = Vec3::UnitZ();  // unit normal
  Vec3 q = Vec3::Zero();   // centroid
  double rms = 0.0;        // fit residual rms
  bool valid = false;      // within the thickness thresholds
};

// Least-squares plane through the support points (eigenvector of the
// smallest covariance eigenvalue). The normal is oriented toward view_point.
// Collinear supports (two smallest eigenvalues within 1e-12, or fewer than
// three points) throw DegenerateCloud. The fit is marked invalid when any
// support sits farther than plane_dist_max from the plane or the rms
// exceeds plane_rms_max.
PlaneFit fit_plane(const std::vector<Vec3>& points, const Vec3& view_point = Vec3::Zero(),
                   const MeasurementConfig& cfg = {});

// --------------------------------------------------------------------------
// Measurement rows

// The printed row form for the extrinsic block uses the world-frame point;
// the finite-difference oracle selects the body-centred variant (world point
// minus estimated position), which is what ships.
enum class HkPoint { BodyCentred, PrintedWorld };

struct RowOptions {
  HkPoint hk = HkPoint::BodyCentred;
};

// Point-to-plane row in the filter's error coordinates. Throws GatedOutlier
// when the point sits farther than cfg.gate from the plane. var should be
// sigma_lidar^2 + rms^2.
MeasurementRow build_row(const SystemState& xi_hat, const Vec3& p_lidar, const PlaneFit& plane,
                         double var, const MeasurementConfig& cfg = {},
                         const RowOptions& opts = {});

}  // namespace lio
