#include "lio/dataset.hpp"

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <system_error>

#include "json.hpp"
#include "json_util.hpp"
#include "lio/errors.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace lio {

using jsonu::get_num;
using jsonu::noise_from_json;
using jsonu::noise_to_json;
using jsonu::reject_unknown_keys;
using jsonu::vec_from_json;
using jsonu::vec_to_json;

namespace {

constexpr const char* kImuHeader = "t,wx,wy,wz,ax,ay,az";
constexpr const char* kStateHeader =
    "t,px,py,pz,qw,qx,qy,qz,vx,vy,vz,bgx,bgy,bgz,bax,bay,baz";
constexpr const char* kScanHeader = "t_offset,x,y,z";

[[noreturn]] void corrupt(const std::string& path, const std::string& why) {
  throw LioError(ErrorCode::DatasetCorrupt, path + ": " + why);
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw LioError(ErrorCode::IoError, "cannot write " + path);
  return out;
}

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LioError(ErrorCode::IoError, "cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

double parse_field(const std::string& path, int line_no, std::string_view field) {
  double v = 0.0;
  const char* first = field.data();
  const char* last = field.data() + field.size();
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last) {
    corrupt(path, "bad numeric field '" + std::string(field) + "' on line " +
                      std::to_string(line_no));
  }
  if (!std::isfinite(v)) {
    corrupt(path, "non-finite value on line " + std::to_string(line_no));
  }
  return v;
}

// Splits one CSV line and parses every field; count must match exactly.
std::vector<double> parse_row(const std::string& path, int line_no, const std::string& line,
                              std::size_t expect) {
  std::vector<double> out;
  out.reserve(expect);
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    const std::size_t end = comma == std::string::npos ? line.size() : comma;
    out.push_back(parse_field(path, line_no, std::string_view(line).substr(start, end - start)));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  if (out.size() != expect) {
    corrupt(path, "expected " + std::to_string(expect) + " fields on line " +
                      std::to_string(line_no) + ", got " + std::to_string(out.size()));
  }
  return out;
}

// Reads all data rows after verifying the header line.
std::vector<std::vector<double>> read_csv(const std::string& path, const char* header,
                                          std::size_t fields) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LioError(ErrorCode::IoError, "cannot read " + path);
  std::string line;
  if (!std::getline(in, line)) corrupt(path, "empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != header) corrupt(path, "unexpected header '" + line + "'");
  std::vector<std::vector<double>> rows;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    rows.push_back(parse_row(path, line_no, line, fields));
  }
  return rows;
}

void append_double(std::string& out, double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  (void)ec;
  out.append(buf, ptr);
}

void append_row(std::string& out, const double* vals, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    if (i) out.push_back(',');
    append_double(out, vals[i]);
  }
  out.push_back('\n');
}

// wxyz with w >= 0; for w == 0 the first nonzero component is made positive.
Eigen::Vector4d canonical_quat(const Rot3& r) {
  Eigen::Quaterniond q(r.matrix());
  Eigen::Vector4d v(q.w(), q.x(), q.y(), q.z());
  for (int i = 0; i < 4; ++i) {
    if (v(i) > 0.0) break;
    if (v(i) < 0.0) {
      v = -v;
      break;
    }
  }
  return v;
}

Rot3 rot_from_quat(const std::string& path, int line_no, double w, double x, double y, double z) {
  Eigen::Quaterniond q(w, x, y, z);
  if (std::abs(q.norm() - 1.0) > 1e-6) {
    corrupt(path, "quaternion not unit on line " + std::to_string(line_no));
  }
  q.normalize();
  return Rot3(q.toRotationMatrix());
}

// ---------------------------------------------------------------------------
// JSON helpers

json pose_to_json(const Pose& p) {
  const Eigen::Vector4d q = canonical_quat(p.rotation());
  return json{{"q_wxyz", json::array({q(0), q(1), q(2), q(3)})},
              {"t", vec_to_json(p.translation())}};
}

Pose pose_from_json(const json& j, const std::string& what) {
  if (!j.is_object() || !j.contains("q_wxyz") || !j.contains("t")) {
    throw LioError(ErrorCode::BadConfig, what + " needs q_wxyz and t");
  }
  const json& q = j.at("q_wxyz");
  if (!q.is_array() || q.size() != 4) {
    throw LioError(ErrorCode::BadConfig, what + ".q_wxyz must be a 4-element array");
  }
  return Pose(rot_from_quat(what, 0, q[0].get<double>(), q[1].get<double>(), q[2].get<double>(),
                            q[3].get<double>()),
              vec_from_json(j.at("t"), what + ".t"));
}

json trajectory_to_json(const TrajectorySpec& t) {
  return json{{"kind", trajectory_kind_name(t.kind)}, {"radius", t.radius},
              {"period", t.period},                   {"yaw_rate", t.yaw_rate},
              {"duration", t.duration},               {"lead_in", t.lead_in},
              {"start", vec_to_json(t.start)}};
}

TrajectorySpec trajectory_from_json(const json& j, const std::string& where) {
  reject_unknown_keys(j, {"kind", "radius", "period", "yaw_rate", "duration", "lead_in", "start"},
                      where);
  TrajectorySpec t;
  if (j.contains("kind")) {
    if (!j.at("kind").is_string()) {
      throw LioError(ErrorCode::BadConfig, where + ".kind must be a string");
    }
    t.kind = trajectory_kind_from_name(j.at("kind").get<std::string>());
  }
  t.radius = get_num(j, "radius", t.radius, where);
  t.period = get_num(j, "period", t.period, where);
  t.yaw_rate = get_num(j, "yaw_rate", t.yaw_rate, where);
  t.duration = get_num(j, "duration", t.duration, where);
  t.lead_in = get_num(j, "lead_in", t.lead_in, where);
  if (j.contains("start")) t.start = vec_from_json(j.at("start"), where + ".start");
  return t;
}

json fov_to_json(const LidarFov& f) {
  return json{{"n_azimuth", f.n_azimuth}, {"n_elevation", f.n_elevation},
              {"az_min", f.az_min},       {"az_max", f.az_max},
              {"el_min", f.el_min},       {"el_max", f.el_max},
              {"max_range", f.max_range}};
}

LidarFov fov_from_json(const json& j, const std::string& where) {
  reject_unknown_keys(
      j, {"n_azimuth", "n_elevation", "az_min", "az_max", "el_min", "el_max", "max_range"}, where);
  LidarFov f;
  f.n_azimuth = static_cast<int>(get_num(j, "n_azimuth", f.n_azimuth, where));
  f.n_elevation = static_cast<int>(get_num(j, "n_elevation", f.n_elevation, where));
  f.az_min = get_num(j, "az_min", f.az_min, where);
  f.az_max = get_num(j, "az_max", f.az_max, where);
  f.el_min = get_num(j, "el_min", f.el_min, where);
  f.el_max = get_num(j, "el_max", f.el_max, where);
  f.max_range = get_num(j, "max_range", f.max_range, where);
  if (f.n_azimuth < 1 || f.n_elevation < 1 || f.max_range <= 0.0) {
    throw LioError(ErrorCode::BadConfig, where + ": degenerate field of view");
  }
  return f;
}

json world_to_json(const PlanarWorld& w) {
  json rects = json::array();
  for (const WorldRect& r : w.rects) {
    rects.push_back(json{{"corner", vec_to_json(r.corner)},
                         {"eu", vec_to_json(r.eu)},
                         {"ev", vec_to_json(r.ev)}});
  }
  return json{{"rects", rects}, {"fov", fov_to_json(w.fov)}};
}

PlanarWorld world_from_json(const json& j, const std::string& where) {
  reject_unknown_keys(j, {"rects", "box_center", "box_size", "fov"}, where);
  PlanarWorld w;
  if (j.contains("rects")) {
    if (j.contains("box_center") || j.contains("box_size")) {
      throw LioError(ErrorCode::BadConfig, where + ": give either rects or a box, not both");
    }
    for (const json& rj : j.at("rects")) {
      WorldRect r;
      r.corner = vec_from_json(rj.at("corner"), where + ".corner");
      r.eu = vec_from_json(rj.at("eu"), where + ".eu");
      r.ev = vec_from_json(rj.at("ev"), where + ".ev");
      if (std::abs(r.eu.dot(r.ev)) > 1e-9 * r.eu.norm() * r.ev.norm()) {
        throw LioError(ErrorCode::BadConfig, where + ": rectangle edges must be orthogonal");
      }
      w.rects.push_back(r);
    }
  } else if (j.contains("box_center") || j.contains("box_size")) {
    const Vec3 center = j.contains("box_center")
                            ? vec_from_json(j.at("box_center"), where + ".box_center")
                            : Vec3::Zero();
    const Vec3 size = j.contains("box_size") ? vec_from_json(j.at("box_size"), where + ".box_size")
                                             : Vec3(24.0, 20.0, 6.0);
    w.rects = box_room(center, size).rects;
  } else {
    w.rects = box_room(Vec3::Zero(), Vec3(24.0, 20.0, 6.0)).rects;
  }
  if (j.contains("fov")) w.fov = fov_from_json(j.at("fov"), where + ".fov");
  return w;
}

}  // namespace

std::string format_double(double v) {
  std::string out;
  append_double(out, v);
  return out;
}

void write_imu_csv(const std::string& path, const std::vector<ImuRow>& rows) {
  std::string text(kImuHeader);
  text.push_back('\n');
  for (const ImuRow& r : rows) {
    const double vals[7] = {r.t, r.w.x(), r.w.y(), r.w.z(), r.a.x(), r.a.y(), r.a.z()};
    append_row(text, vals, 7);
  }
  open_out(path) << text;
}

std::vector<ImuRow> read_imu_csv(const std::string& path) {
  std::vector<ImuRow> out;
  for (const auto& v : read_csv(path, kImuHeader, 7)) {
    out.push_back(ImuRow{v[0], Vec3(v[1], v[2], v[3]), Vec3(v[4], v[5], v[6])});
    if (out.size() > 1 && out[out.size() - 2].t >= out.back().t) {
      corrupt(path, "timestamps not strictly increasing");
    }
  }
  return out;
}

void write_state_csv(const std::string& path, const std::vector<StateRow>& rows) {
  std::string text(kStateHeader);
  text.push_back('\n');
  for (const StateRow& r : rows) {
    const Eigen::Vector4d q = canonical_quat(r.C);
    const double vals[17] = {r.t,      r.r.x(),  r.r.y(),  r.r.z(),  q(0),     q(1),
                             q(2),     q(3),     r.v.x(),  r.v.y(),  r.v.z(),  r.bg.x(),
                             r.bg.y(), r.bg.z(), r.ba.x(), r.ba.y(), r.ba.z()};
    append_row(text, vals, 17);
  }
  open_out(path) << text;
}

std::vector<StateRow> read_state_csv(const std::string& path) {
  std::vector<StateRow> out;
  int line_no = 1;
  for (const auto& v : read_csv(path, kStateHeader, 17)) {
    ++line_no;
    StateRow r;
    r.t = v[0];
    r.r = Vec3(v[1], v[2], v[3]);
    r.C = rot_from_quat(path, line_no, v[4], v[5], v[6], v[7]);
    r.v = Vec3(v[8], v[9], v[10]);
    r.bg = Vec3(v[11], v[12], v[13]);
    r.ba = Vec3(v[14], v[15], v[16]);
    out.push_back(r);
    if (out.size() > 1 && out[out.size() - 2].t >= out.back().t) {
      corrupt(path, "timestamps not strictly increasing");
    }
  }
  return out;
}

void write_scan_csv(const std::string& path, const std::vector<ScanPoint>& points) {
  std::string text(kScanHeader);
  text.push_back('\n');
  for (const ScanPoint& p : points) {
    const double vals[4] = {p.t_offset, p.p.x(), p.p.y(), p.p.z()};
    append_row(text, vals, 4);
  }
  open_out(path) << text;
}

std::vector<ScanPoint> read_scan_csv(const std::string& path) {
  std::vector<ScanPoint> out;
  for (const auto& v : read_csv(path, kScanHeader, 4)) {
    out.push_back(ScanPoint{v[0], Vec3(v[1], v[2], v[3])});
  }
  return out;
}

std::string trajectory_kind_name(TrajectoryKind kind) {
  switch (kind) {
    case TrajectoryKind::Static: return "static";
    case TrajectoryKind::Circle: return "circle";
    case TrajectoryKind::Figure8: return "figure8";
    case TrajectoryKind::SinusoidAggressive: return "sinusoid-aggressive";
  }
  return "unknown";
}

TrajectoryKind trajectory_kind_from_name(const std::string& name) {
  if (name == "static") return TrajectoryKind::Static;
  if (name == "circle") return TrajectoryKind::Circle;
  if (name == "figure8") return TrajectoryKind::Figure8;
  if (name == "sinusoid-aggressive") return TrajectoryKind::SinusoidAggressive;
  throw LioError(ErrorCode::BadConfig, "unknown trajectory kind '" + name + "'");
}

SimSpec parse_sim_spec(const std::string& text) {
  const json j = jsonu::parse_text(text, "sim spec");
  reject_unknown_keys(j, {"trajectory", "world", "rig", "seed"}, "sim spec");

  SimSpec spec;
  if (j.contains("trajectory")) {
    spec.trajectory = trajectory_from_json(j.at("trajectory"), "trajectory");
  }
  if (j.contains("world")) spec.world = world_from_json(j.at("world"), "world");
  if (j.contains("rig")) {
    const json& r = j.at("rig");
    reject_unknown_keys(
        r, {"imu_hz", "lidar_hz", "k_rot_deg", "k_trans", "bg0", "ba0", "bmu0", "gravity", "noise"},
        "rig");
    spec.rig.imu_hz = get_num(r, "imu_hz", spec.rig.imu_hz, "rig");
    spec.rig.lidar_hz = get_num(r, "lidar_hz", spec.rig.lidar_hz, "rig");
    Vec3 rpy = Vec3::Zero(), trans = Vec3::Zero();
    if (r.contains("k_rot_deg")) rpy = vec_from_json(r.at("k_rot_deg"), "rig.k_rot_deg");
    if (r.contains("k_trans")) trans = vec_from_json(r.at("k_trans"), "rig.k_trans");
    spec.rig.k_true = Pose(rot_from_rpy_deg(rpy), trans);
    if (r.contains("bg0")) spec.rig.bg0 = vec_from_json(r.at("bg0"), "rig.bg0");
    if (r.contains("ba0")) spec.rig.ba0 = vec_from_json(r.at("ba0"), "rig.ba0");
    if (r.contains("bmu0")) spec.rig.bmu0 = vec_from_json(r.at("bmu0"), "rig.bmu0");
    if (r.contains("gravity")) spec.rig.gravity = vec_from_json(r.at("gravity"), "rig.gravity");
    if (r.contains("noise")) spec.rig.noise = noise_from_json(r.at("noise"), "rig.noise");
  }
  if (j.contains("seed")) {
    if (!j.at("seed").is_number_unsigned()) {
      throw LioError(ErrorCode::BadConfig, "seed must be a non-negative integer");
    }
    spec.seed = j.at("seed").get<std::uint64_t>();
  }
  return spec;
}

SimSpec load_sim_spec(const std::string& path) { return parse_sim_spec(read_text(path)); }

Rot3 rot_from_rpy_deg(const Vec3& rpy_deg) {
  const double d2r = M_PI / 180.0;
  return Rot3((Eigen::AngleAxisd(rpy_deg.z() * d2r, Vec3::UnitZ()) *
               Eigen::AngleAxisd(rpy_deg.y() * d2r, Vec3::UnitY()) *
               Eigen::AngleAxisd(rpy_deg.x() * d2r, Vec3::UnitX()))
                  .toRotationMatrix());
}

void save_dataset(const SimDataset& data, const std::string& dir) {
  std::error_code ec;
  fs::create_directories(fs::path(dir) / "scans", ec);
  if (ec) throw LioError(ErrorCode::IoError, "cannot create " + dir + ": " + ec.message());

  write_imu_csv((fs::path(dir) / "imu.csv").string(), data.imu);
  write_state_csv((fs::path(dir) / "truth.csv").string(), data.truth);
  for (std::size_t k = 0; k < data.scans.size(); ++k) {
    char name[32];
    std::snprintf(name, sizeof(name), "%06zu.csv", k);
    write_scan_csv((fs::path(dir) / "scans" / name).string(), data.scans[k].points);
  }

  const SensorRig& rig = data.spec.rig;
  json meta{{"format", 1},
            {"seed", data.spec.seed},
            {"imu_hz", rig.imu_hz},
            {"lidar_hz", rig.lidar_hz},
            {"gravity", vec_to_json(rig.gravity)},
            {"k_true", pose_to_json(rig.k_true)},
            {"bias0",
             json{{"bg", vec_to_json(rig.bg0)},
                  {"ba", vec_to_json(rig.ba0)},
                  {"bmu", vec_to_json(rig.bmu0)}}},
            {"noise", noise_to_json(rig.noise)},
            {"trajectory", trajectory_to_json(data.spec.trajectory)},
            {"world", world_to_json(data.spec.world)},
            {"counts",
             json{{"imu", static_cast<long>(data.imu.size())},
                  {"scans", static_cast<long>(data.scans.size())}}}};
  open_out((fs::path(dir) / "meta.json").string()) << meta.dump(2) << '\n';
}

Dataset load_dataset(const std::string& dir) {
  const std::string meta_path = (fs::path(dir) / "meta.json").string();
  json j;
  try {
    j = json::parse(read_text(meta_path));
  } catch (const json::exception& e) {
    corrupt(meta_path, e.what());
  }

  Dataset d;
  try {
    d.meta.format = j.at("format").get<int>();
    d.meta.seed = j.at("seed").get<std::uint64_t>();
    d.meta.imu_hz = j.at("imu_hz").get<double>();
    d.meta.lidar_hz = j.at("lidar_hz").get<double>();
    d.meta.gravity = vec_from_json(j.at("gravity"), "gravity");
    d.meta.k_true = pose_from_json(j.at("k_true"), "k_true");
    d.meta.bg0 = vec_from_json(j.at("bias0").at("bg"), "bias0.bg");
    d.meta.ba0 = vec_from_json(j.at("bias0").at("ba"), "bias0.ba");
    d.meta.bmu0 = vec_from_json(j.at("bias0").at("bmu"), "bias0.bmu");
    d.meta.noise = noise_from_json(j.at("noise"), "noise");
    d.meta.trajectory = trajectory_from_json(j.at("trajectory"), "trajectory");
    d.meta.world = world_from_json(j.at("world"), "world");
    d.meta.n_imu = j.at("counts").at("imu").get<long>();
    d.meta.n_scans = j.at("counts").at("scans").get<long>();
  } catch (const json::exception& e) {
    corrupt(meta_path, e.what());
  } catch (const LioError& e) {
    corrupt(meta_path, e.what());
  }
  if (d.meta.format != 1) corrupt(meta_path, "unsupported format");
  if (!(d.meta.imu_hz > 0.0) || !(d.meta.lidar_hz > 0.0)) corrupt(meta_path, "bad rates");

  // Files named by meta but unreadable mean the dataset is incomplete.
  try {
    d.imu = read_imu_csv((fs::path(dir) / "imu.csv").string());
    d.truth = read_state_csv((fs::path(dir) / "truth.csv").string());
    d.scans.reserve(d.meta.n_scans);
    for (long k = 0; k < d.meta.n_scans; ++k) {
      char name[32];
      std::snprintf(name, sizeof(name), "%06ld.csv", k);
      d.scans.push_back(read_scan_csv((fs::path(dir) / "scans" / name).string()));
    }
  } catch (const LioError& e) {
    if (e.code() == ErrorCode::IoError) corrupt(dir, e.what());
    throw;
  }
  if (static_cast<long>(d.imu.size()) != d.meta.n_imu) {
    corrupt(dir, "imu.csv row count does not match meta");
  }
  if (static_cast<long>(d.truth.size()) != d.meta.n_imu + 1) {
    corrupt(dir, "truth.csv must cover the IMU grid plus the final time");
  }
  return d;
}

}  // namespace lio
