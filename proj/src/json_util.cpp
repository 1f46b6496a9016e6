#include "json_util.hpp"

#include <cmath>

namespace lio::jsonu {

json parse_text(const std::string& text, const std::string& what) {
  json j = json::parse(text, nullptr, false);
  if (j.is_discarded()) throw LioError(ErrorCode::BadConfig, what + ": invalid JSON");
  return j;
}

json vec_to_json(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

Vec3 vec_from_json(const json& j, const std::string& what) {
  if (!j.is_array() || j.size() != 3) {
    throw LioError(ErrorCode::BadConfig, what + " must be a 3-element array");
  }
  Vec3 v;
  for (int i = 0; i < 3; ++i) {
    if (!j[i].is_number()) throw LioError(ErrorCode::BadConfig, what + " must be numeric");
    v(i) = j[i].get<double>();
  }
  if (!v.allFinite()) throw LioError(ErrorCode::BadConfig, what + " must be finite");
  return v;
}

void reject_unknown_keys(const json& j, std::initializer_list<const char*> known,
                         const std::string& where) {
  for (const auto& item : j.items()) {
    bool ok = false;
    for (const char* k : known) {
      if (item.key() == k) {
        ok = true;
        break;
      }
    }
    if (!ok) throw LioError(ErrorCode::BadConfig, where + ": unknown key '" + item.key() + "'");
  }
}

double get_num(const json& j, const char* key, double fallback, const std::string& where) {
  if (!j.contains(key)) return fallback;
  if (!j.at(key).is_number()) {
    throw LioError(ErrorCode::BadConfig, where + "." + key + " must be numeric");
  }
  const double v = j.at(key).get<double>();
  if (!std::isfinite(v)) {
    throw LioError(ErrorCode::BadConfig, where + "." + key + " must be finite");
  }
  return v;
}

bool get_bool(const json& j, const char* key, bool fallback, const std::string& where) {
  if (!j.contains(key)) return fallback;
  if (!j.at(key).is_boolean()) {
    throw LioError(ErrorCode::BadConfig, where + "." + key + " must be a boolean");
  }
  return j.at(key).get<bool>();
}

json noise_to_json(const NoiseConfig& n) {
  return json{{"gyro_noise_density", n.gyro_noise_density},
              {"accel_noise_density", n.accel_noise_density},
              {"gyro_bias_walk", n.gyro_bias_walk},
              {"accel_bias_walk", n.accel_bias_walk},
              {"velocity_bias_walk", n.velocity_bias_walk},
              {"extrinsic_drift", n.extrinsic_drift},
              {"lidar_sigma", n.lidar_sigma}};
}

NoiseConfig noise_from_json(const json& j, const std::string& where) {
  reject_unknown_keys(j,
                      {"gyro_noise_density", "accel_noise_density", "gyro_bias_walk",
                       "accel_bias_walk", "velocity_bias_walk", "extrinsic_drift", "lidar_sigma"},
                      where);
  NoiseConfig n;
  n.gyro_noise_density = get_num(j, "gyro_noise_density", n.gyro_noise_density, where);
  n.accel_noise_density = get_num(j, "accel_noise_density", n.accel_noise_density, where);
  n.gyro_bias_walk = get_num(j, "gyro_bias_walk", n.gyro_bias_walk, where);
  n.accel_bias_walk = get_num(j, "accel_bias_walk", n.accel_bias_walk, where);
  n.velocity_bias_walk = get_num(j, "velocity_bias_walk", n.velocity_bias_walk, where);
  n.extrinsic_drift = get_num(j, "extrinsic_drift", n.extrinsic_drift, where);
  n.lidar_sigma = get_num(j, "lidar_sigma", n.lidar_sigma, where);
  return n;
}

}  // namespace lio::jsonu
