#pragma once

// Private JSON helpers shared by the file-format code. Not installed.

#include <string>

#include <json.hpp>

#include "h2r/error.hpp"
#include "h2r/geometry.hpp"

namespace h2r::detail {

using Json = nlohmann::ordered_json;

inline Json vec_to_json(const Vec3& v) { return Json::array({v.x(), v.y(), v.z()}); }

inline Json pose_to_json(const Pose& p) {
  const auto& q = p.orientation();
  return Json{{"frame", std::string(to_string(p.frame()))},
              {"position", vec_to_json(p.position())},
              {"orientation", Json::array({q.w(), q.x(), q.y(), q.z()})}};
}

inline Vec3 vec_from_json(const Json& j, const char* what) {
  if (!j.is_array() || j.size() != 3) {
    throw FormatError(std::string(what) + ": expected a 3-element array");
  }
  return Vec3(j[0].get<double>(), j[1].get<double>(), j[2].get<double>());
}

inline Pose pose_from_json(const Json& j, Frame default_frame = Frame::kCamera) {
  if (!j.is_object()) throw FormatError("pose: expected an object");
  const Vec3 p = vec_from_json(j.at("position"), "pose.position");
  const auto& o = j.at("orientation");
  if (!o.is_array() || o.size() != 4) throw FormatError("pose.orientation: expected [w,x,y,z]");
  const Quat q(o[0].get<double>(), o[1].get<double>(), o[2].get<double>(), o[3].get<double>());
  const Frame f = j.contains("frame") ? frame_from_string(j.at("frame").get<std::string>())
                                      : default_frame;
  return Pose(p, q, f);
}

inline Json parse_json(const std::string& text, const std::string& what) {
  try {
    return Json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(what + ": " + e.what());
  }
}

// Consistent indentation so files are byte-stable across runs.
inline std::string dump_json(const Json& j) { return j.dump(2) + "\n"; }

}  // namespace h2r::detail
