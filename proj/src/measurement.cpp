#include "lio/measurement.hpp"

#include <algorithm>
#include <cmath>

namespace lio {

// --------------------------------------------------------------------------
// De-skew

std::vector<ScanPoint> deskew(const std::vector<ScanPoint>& scan, double scan_start,
                              const std::vector<PoseSample>& poses, double t_end) {
  if (poses.size() < 1) {
    throw LioError(ErrorCode::MissingPoseCoverage, "empty pose buffer");
  }
  for (std::size_t i = 1; i < poses.size(); ++i) {
    if (poses[i].t <= poses[i - 1].t) {
      throw LioError(ErrorCode::MissingPoseCoverage, "pose samples not strictly increasing");
    }
  }
  const double t_lo = poses.front().t;
  const double t_hi = poses.back().t;
  const double eps = 1e-9;
  if (t_end < t_lo - eps || t_end > t_hi + eps) {
    throw LioError(ErrorCode::MissingPoseCoverage, "target time outside pose buffer");
  }

  auto pose_at = [&](double t) -> Pose {
    if (t < t_lo - eps || t > t_hi + eps) {
      throw LioError(ErrorCode::MissingPoseCoverage, "point time outside pose buffer");
    }
    t = std::min(std::max(t, t_lo), t_hi);
    auto it = std::upper_bound(poses.begin(), poses.end(), t,
                               [](double v, const PoseSample& s) { return v < s.t; });
    if (it == poses.begin()) return poses.front().pose;
    if (it == poses.end()) return poses.back().pose;
    const PoseSample& b = *it;
    const PoseSample& a = *(it - 1);
    const double s = (t - a.t) / (b.t - a.t);
    return a.pose * Pose::exp(s * (a.pose.inverse() * b.pose).log());
  };

  const Pose end_inv = pose_at(t_end).inverse();
  std::vector<ScanPoint> out;
  out.reserve(scan.size());
  for (const ScanPoint& sp : scan) {
    const Pose rel = end_inv * pose_at(scan_start + sp.t_offset);
    out.push_back(ScanPoint{sp.t_offset, rel * sp.p});
  }
  return out;
}

// --------------------------------------------------------------------------
// MapIndex

namespace {

std::int64_t voxel_key(const Vec3& p, double voxel) {
  // 21 bits per axis, biased; covers +-0.5e6 voxels which is far beyond the
  // working volumes here.
  const std::int64_t bias = 1 << 20;
  const std::int64_t x = static_cast<std::int64_t>(std::floor(p.x() / voxel)) + bias;
  const std::int64_t y = static_cast<std::int64_t>(std::floor(p.y() / voxel)) + bias;
  const std::int64_t z = static_cast<std::int64_t>(std::floor(p.z() / voxel)) + bias;
  return (x << 42) | (y << 21) | z;
}

bool neighbor_better(const Neighbor& a, const Neighbor& b) {
  if (a.dist2 != b.dist2) return a.dist2 < b.dist2;
  return a.index < b.index;
}

}  // namespace

int MapIndex::insert(const std::vector<Vec3>& points) {
  int accepted = 0;
  for (const Vec3& p : points) {
    if (!p.allFinite()) {
      throw LioError(ErrorCode::NonFiniteInput, "MapIndex::insert");
    }
    if (cfg_.voxel > 0.0) {
      const std::int64_t key = voxel_key(p, cfg_.voxel);
      if (!voxels_.insert(key).second) continue;  // voxel already occupied
    }
    points_.push_back(p);
    ++accepted;
  }
  maybe_rebuild();
  return accepted;
}

void MapIndex::maybe_rebuild() {
  const std::size_t pending = points_.size() - tree_count_;
  if (pending == 0) return;
  if (tree_count_ == 0 ||
      static_cast<double>(pending) > cfg_.rebuild_fraction * static_cast<double>(tree_count_)) {
    build_tree();
  }
}

void MapIndex::build_tree() {
  nodes_.clear();
  nodes_.reserve(points_.size());
  std::vector<int> ids(points_.size());
  for (std::size_t i = 0; i < points_.size(); ++i) ids[i] = static_cast<int>(i);
  root_ = points_.empty() ? -1 : build_recurse(ids, 0, static_cast<int>(ids.size()), 0);
  tree_count_ = points_.size();
  ++rebuilds_;
}

int MapIndex::build_recurse(std::vector<int>& ids, int lo, int hi, int depth) {
  if (lo >= hi) return -1;
  const int axis = depth % 3;
  const int mid = (lo + hi) / 2;
  std::nth_element(ids.begin() + lo, ids.begin() + mid, ids.begin() + hi,
                   [&](int a, int b) {
                     if (points_[a](axis) != points_[b](axis)) {
                       return points_[a](axis) < points_[b](axis);
                     }
                     return a < b;
                   });
  Node node;
  node.point = ids[mid];
  node.axis = axis;
  const int self = static_cast<int>(nodes_.size());
  nodes_.push_back(node);
  const int left = build_recurse(ids, lo, mid, depth + 1);
  const int right = build_recurse(ids, mid + 1, hi, depth + 1);
  nodes_[self].left = left;
  nodes_[self].right = right;
  return self;
}

void MapIndex::knn_recurse(int node_id, const Vec3& q, int k, std::vector<Neighbor>& heap) const {
  if (node_id < 0) return;
  const Node& node = nodes_[node_id];
  const Vec3& p = points_[node.point];
  const Neighbor cand{node.point, (p - q).squaredNorm()};

  if (static_cast<int>(heap.size()) < k) {
    heap.push_back(cand);
    std::push_heap(heap.begin(), heap.end(), neighbor_better);
  } else if (neighbor_better(cand, heap.front())) {
    std::pop_heap(heap.begin(), heap.end(), neighbor_better);
    heap.back() = cand;
    std::push_heap(heap.begin(), heap.end(), neighbor_better);
  }

  const double delta = q(node.axis) - p(node.axis);
  const int near = delta < 0 ? node.left : node.right;
  const int far = delta < 0 ? node.right : node.left;
  knn_recurse(near, q, k, heap);
  // Descend the far side unless it provably cannot hold a better neighbour.
  // Equality must still descend so duplicate distances resolve by index.
  if (static_cast<int>(heap.size()) < k || delta * delta <= heap.front().dist2) {
    knn_recurse(far, q, k, heap);
  }
}

std::vector<Neighbor> MapIndex::knn(const Vec3& query, int k) const {
  if (k <= 0) throw LioError(ErrorCode::BadConfig, "knn needs k >= 1");
  if (static_cast<int>(points_.size()) < k) {
    throw LioError(ErrorCode::InsufficientMap,
                   "map holds " + std::to_string(points_.size()) + " points, need " +
                       std::to_string(k));
  }
  std::vector<Neighbor> heap;  // max-heap on (dist2, index)
  heap.reserve(k + 1);
  knn_recurse(root_, query, k, heap);
  // Linear pass over points not yet indexed by the tree.
  for (std::size_t i = tree_count_; i < points_.size(); ++i) {
    const Neighbor cand{static_cast<int>(i), (points_[i] - query).squaredNorm()};
    if (static_cast<int>(heap.size()) < k) {
      heap.push_back(cand);
      std::push_heap(heap.begin(), heap.end(), neighbor_better);
    } else if (neighbor_better(cand, heap.front())) {
      std::pop_heap(heap.begin(), heap.end(), neighbor_better);
      heap.back() = cand;
      std::push_heap(heap.begin(), heap.end(), neighbor_better);
    }
  }
  std::sort(heap.begin(), heap.end(), neighbor_better);
  return heap;
}

// --------------------------------------------------------------------------
// Plane extraction

PlaneFit fit_plane(const std::vector<Vec3>& points, const Vec3& view_point,
                   const MeasurementConfig& cfg) {
  if (points.size() < 3) {
    throw LioError(ErrorCode::DegenerateCloud, "plane fit needs at least 3 points");
  }

  Vec3 centroid = Vec3::Zero();
  for (const Vec3& p : points) centroid += p;
  centroid /= static_cast<double>(points.size());

  Mat3 cov = Mat3::Zero();
  for (const Vec3& p : points) {
    const Vec3 d = p - centroid;
    cov += d * d.transpose();
  }
  cov /= static_cast<double>(points.size());

  Eigen::SelfAdjointEigenSolver<Mat3> es(cov);  // ascending eigenvalues
  const Vec3 evals = es.eigenvalues();
  if (evals(1) - evals(0) < 1e-12) {
    throw LioError(ErrorCode::DegenerateCloud, "support points are collinear");
  }

  PlaneFit fit;
  fit.n = es.eigenvectors().col(0);
  fit.q = centroid;
  if (fit.n.dot(view_point - centroid) < 0.0) fit.n = -fit.n;

  double sq = 0.0;
  double max_abs = 0.0;
  for (const Vec3& p : points) {
    const double d = fit.n.dot(p - centroid);
    sq += d * d;
    max_abs = std::max(max_abs, std::abs(d));
  }
  fit.rms = std::sqrt(sq / static_cast<double>(points.size()));
  fit.valid = max_abs <= cfg.plane_dist_max && fit.rms <= cfg.plane_rms_max;
  return fit;
}

// --------------------------------------------------------------------------
// Measurement rows

MeasurementRow build_row(const SystemState& xi_hat, const Vec3& p_lidar, const PlaneFit& plane,
                         double var, const MeasurementConfig& cfg, const RowOptions& opts) {
  const Mat3 c = xi_hat.T.rotation().matrix();
  const Mat3 cb = xi_hat.K.rotation().matrix();
  const Vec3 p_body = cb * p_lidar + xi_hat.K.translation();
  const Vec3 p_world = c * p_body + xi_hat.T.position();

  const double residual = plane.n.dot(p_world - plane.q);
  if (std::abs(residual) > cfg.gate) {
    throw LioError(ErrorCode::GatedOutlier, "point-to-plane distance exceeds the gate");
  }

  MeasurementRow row;
  row.z = -residual;
  row.var = var;

  // Navigation block: [-n^T (p^w)^, 0, n^T].
  row.h.segment<3>(0) = skew(p_world).transpose() * plane.n * -1.0;
  row.h.segment<3>(6) = plane.n;

  // Extrinsic block: rotation column uses the body-centred world point (the
  // printed world-frame variant is kept for the oracle mismatch regression).
  const Vec3 pk = opts.hk == HkPoint::BodyCentred ? Vec3(p_world - xi_hat.T.position()) : p_world;
  row.h.segment<3>(18) = skew(pk).transpose() * plane.n * -1.0;
  row.h.segment<3>(21) = plane.n;
  return row;
}

}  // namespace lio
