#pragma once

// Internal JSON helpers shared by the dataset and pipeline readers. Not part
// of the public headers.

#include <initializer_list>
#include <string>

#include "json.hpp"
#include "lio/eqf.hpp"
#include "lio/errors.hpp"

namespace lio::jsonu {

using nlohmann::json;

json parse_text(const std::string& text, const std::string& what);

json vec_to_json(const Vec3& v);
Vec3 vec_from_json(const json& j, const std::string& what);

// Config readers are strict about key names so typos surface as BadConfig.
void reject_unknown_keys(const json& j, std::initializer_list<const char*> known,
                         const std::string& where);

double get_num(const json& j, const char* key, double fallback, const std::string& where);
bool get_bool(const json& j, const char* key, bool fallback, const std::string& where);

json noise_to_json(const NoiseConfig& n);
NoiseConfig noise_from_json(const json& j, const std::string& where);

}  // namespace lio::jsonu
