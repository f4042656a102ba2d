#pragma once

// Race-track files (JSON), their validation, and the transformations that turn
// a track into a planning problem: margins, waypoint mode, lap concatenation.
//
// Schema (schema_version 1):
//
//   {
//     "schema_version": 1,
//     "quad": {"preset": "quad_a"}  or explicit fields:
//             {"mass": kg, "arm_length": m, "inertia": [3], "inertia_unit": "g*m^2" | "kg*m^2",
//              "torque_const": c, "f_min": N, "f_max": N, "omega_max": [3], "gravity": [3]},
//             a preset may be combined with explicit overrides,
//     "start": [x, y, z], "finish": [x, y, z],
//     "gates": [
//       {"type": "ball", "center": [3], "radius": m},
//       {"type": "polygon", "vertices": [[3], ...]},
//       {"type": "polyhedron", "vertices": [[3], ...]},
//       {"type": "tunnel", "entrance": [[3], ...], "exit": [[3], ...]}
//     ],
//     "options": {"margin": m, "laps": n, "mode": "togt" | "togt-wp",
//                 "waypoint_tolerance": m, "sequence": [gate indices]}
//   }
//
// Every gate record may carry "margin" (overrides options.margin) and "name".

#include "togt/cost.hpp"
#include "togt/gates.hpp"
#include "togt/model.hpp"

#include <json.hpp>

#include <fstream>
#include <limits>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace togt {

inline constexpr int kTrackSchemaVersion = 1;
inline constexpr int kMaxLaps = 1000;

enum class PlanMode { Togt, TogtWp };

inline const char *to_string(PlanMode m) { return m == PlanMode::Togt ? "togt" : "togt-wp"; }

inline PlanMode parse_mode(const std::string &s) {
  if (s == "togt") return PlanMode::Togt;
  if (s == "togt-wp") return PlanMode::TogtWp;
  throw Error(ErrorCode::ValidationError, "unknown mode '" + s + "' (expected togt or togt-wp)");
}

enum class GateKind { Ball, Polygon, Polyhedron, Tunnel };

inline const char *to_string(GateKind k) {
  switch (k) {
    case GateKind::Ball: return "ball";
    case GateKind::Polygon: return "polygon";
    case GateKind::Polyhedron: return "polyhedron";
    case GateKind::Tunnel: return "tunnel";
  }
  return "unknown";
}

/// One gate as written in the file. A tunnel expands to three planning gates.
struct GateRecord {
  GateKind kind = GateKind::Ball;
  std::string name;
  Vec3 center = Vec3::Zero();    // ball
  double radius = 0.0;           // ball
  std::vector<Vec3> vertices;    // polygon, polyhedron, tunnel entrance
  std::vector<Vec3> exit;        // tunnel exit
  std::optional<double> margin;  // overrides TrackOptions::margin

  bool operator==(const GateRecord &o) const {
    return kind == o.kind && name == o.name && center == o.center && radius == o.radius &&
           vertices == o.vertices && exit == o.exit && margin == o.margin;
  }
};

struct TrackOptions {
  double margin = 0.0;  // m
  int laps = 1;
  PlanMode mode = PlanMode::Togt;
  double waypoint_tolerance = 0.3;  // m, ball radius in waypoint mode
  std::vector<int> sequence;        // gate visiting order for one lap; empty = file order

  bool operator==(const TrackOptions &o) const = default;
};

struct TrackFile {
  int schema_version = kTrackSchemaVersion;
  QuadParams quad = QuadParams::quad_a();
  Vec3 start = Vec3::Zero();
  Vec3 finish = Vec3::Zero();
  std::vector<GateRecord> gates;
  TrackOptions options;

  bool operator==(const TrackFile &o) const {
    const auto &a = quad, &b = o.quad;
    const bool same_quad = a.mass == b.mass && a.arm_length == b.arm_length &&
                           a.inertia_diag == b.inertia_diag && a.torque_const == b.torque_const &&
                           a.f_min == b.f_min && a.f_max == b.f_max && a.omega_max == b.omega_max &&
                           a.gravity == b.gravity;
    return schema_version == o.schema_version && same_quad && start == o.start &&
           finish == o.finish && gates == o.gates && options == o.options;
  }
};

namespace detail {

using nlohmann::json;

[[noreturn]] inline void parse_fail(const std::string &path, const std::string &msg) {
  throw Error(ErrorCode::ParseError, path + ": " + msg);
}

[[noreturn]] inline void invalid(const std::string &path, const std::string &msg) {
  throw Error(ErrorCode::ValidationError, path + ": " + msg);
}

inline void reject_unknown(const json &obj, const std::string &path,
                           std::initializer_list<const char *> allowed) {
  const std::set<std::string> keys(allowed.begin(), allowed.end());
  for (const auto &[k, v] : obj.items()) {
    if (!keys.count(k)) parse_fail(path, "unknown key '" + k + "'");
  }
}

inline const json &require(const json &obj, const char *key, const std::string &path) {
  if (!obj.contains(key)) parse_fail(path, std::string("missing key '") + key + "'");
  return obj.at(key);
}

inline double read_number(const json &v, const std::string &path) {
  if (!v.is_number()) parse_fail(path, "expected a number");
  const double x = v.get<double>();
  if (!std::isfinite(x)) invalid(path, "must be finite");
  return x;
}

inline int read_int(const json &v, const std::string &path) {
  if (!v.is_number_integer()) parse_fail(path, "expected an integer");
  constexpr auto lo = std::numeric_limits<int>::min(), hi = std::numeric_limits<int>::max();
  const bool fits = v.is_number_unsigned()
                        ? v.get<unsigned long long>() <= static_cast<unsigned long long>(hi)
                        : v.get<long long>() >= lo && v.get<long long>() <= hi;
  if (!fits) invalid(path, "integer out of range");
  const long long x = v.get<long long>();
  return static_cast<int>(x);
}

inline Vec3 read_vec3(const json &v, const std::string &path) {
  if (!v.is_array() || v.size() != 3) parse_fail(path, "expected an array of 3 numbers");
  Vec3 out;
  for (int k = 0; k < 3; ++k) out(k) = read_number(v[static_cast<std::size_t>(k)], path + "[" + std::to_string(k) + "]");
  return out;
}

inline std::vector<Vec3> read_points(const json &v, const std::string &path) {
  if (!v.is_array()) parse_fail(path, "expected an array of points");
  std::vector<Vec3> out;
  for (std::size_t i = 0; i < v.size(); ++i) out.push_back(read_vec3(v[i], path + "[" + std::to_string(i) + "]"));
  return out;
}

inline json write_vec3(const Vec3 &v) { return json::array({v.x(), v.y(), v.z()}); }

inline json write_points(const std::vector<Vec3> &pts) {
  json arr = json::array();
  for (const auto &p : pts) arr.push_back(write_vec3(p));
  return arr;
}

inline QuadParams read_quad(const json &q, const std::string &path, bool strict) {
  if (!q.is_object()) parse_fail(path, "expected an object");
  if (strict) {
    reject_unknown(q, path, {"preset", "mass", "arm_length", "inertia", "inertia_unit",
                             "torque_const", "f_min", "f_max", "omega_max", "gravity"});
  }
  QuadParams p;
  bool have_preset = false;
  if (q.contains("preset")) {
    const auto &pv = q.at("preset");
    if (!pv.is_string()) parse_fail(path + ".preset", "expected a string");
    const auto name = pv.get<std::string>();
    if (name == "quad_a") {
      p = QuadParams::quad_a();
    } else if (name == "quad_b") {
      p = QuadParams::quad_b();
    } else {
      invalid(path + ".preset", "unknown preset '" + name + "'");
    }
    have_preset = true;
  }
  auto scalar = [&](const char *key, double &dst) {
    if (q.contains(key)) {
      dst = read_number(q.at(key), path + "." + key);
    } else if (!have_preset) {
      parse_fail(path, std::string("missing key '") + key + "'");
    }
  };
  scalar("mass", p.mass);
  scalar("arm_length", p.arm_length);
  scalar("torque_const", p.torque_const);
  scalar("f_max", p.f_max);
  if (q.contains("f_min")) p.f_min = read_number(q.at("f_min"), path + ".f_min");
  if (q.contains("inertia")) {
    const Vec3 j = read_vec3(q.at("inertia"), path + ".inertia");
    const auto unit_path = path + ".inertia_unit";
    const auto &unit = require(q, "inertia_unit", path);
    if (!unit.is_string()) parse_fail(unit_path, "expected a string");
    const auto u = unit.get<std::string>();
    if (u == "g*m^2") {
      p.inertia_diag = QuadParams::inertia_from_gram_m2(j);
    } else if (u == "kg*m^2") {
      p.inertia_diag = j;
    } else {
      invalid(unit_path, "unknown unit '" + u + "' (expected g*m^2 or kg*m^2)");
    }
  } else if (!have_preset) {
    parse_fail(path, "missing key 'inertia'");
  }
  if (q.contains("omega_max")) {
    p.omega_max = read_vec3(q.at("omega_max"), path + ".omega_max");
  } else if (!have_preset) {
    parse_fail(path, "missing key 'omega_max'");
  }
  if (q.contains("gravity")) p.gravity = read_vec3(q.at("gravity"), path + ".gravity");
  try {
    p.validate();
  } catch (const Error &e) {
    invalid(path, e.message());
  }
  return p;
}

inline GateRecord read_gate(const json &g, const std::string &path, bool strict) {
  if (!g.is_object()) parse_fail(path, "expected an object");
  const auto &type = require(g, "type", path);
  if (!type.is_string()) parse_fail(path + ".type", "expected a string");
  const auto t = type.get<std::string>();
  GateRecord r;
  if (g.contains("name")) {
    if (!g.at("name").is_string()) parse_fail(path + ".name", "expected a string");
    r.name = g.at("name").get<std::string>();
  }
  if (g.contains("margin")) {
    r.margin = read_number(g.at("margin"), path + ".margin");
    if (*r.margin < 0.0) invalid(path + ".margin", "must be >= 0");
  }
  if (t == "ball") {
    if (strict) reject_unknown(g, path, {"type", "name", "margin", "center", "radius"});
    r.kind = GateKind::Ball;
    r.center = read_vec3(require(g, "center", path), path + ".center");
    r.radius = read_number(require(g, "radius", path), path + ".radius");
    if (r.radius < 0.0) invalid(path + ".radius", "must be >= 0");
  } else if (t == "polygon" || t == "polyhedron") {
    if (strict) reject_unknown(g, path, {"type", "name", "margin", "vertices"});
    r.kind = t == "polygon" ? GateKind::Polygon : GateKind::Polyhedron;
    r.vertices = read_points(require(g, "vertices", path), path + ".vertices");
  } else if (t == "tunnel") {
    if (strict) reject_unknown(g, path, {"type", "name", "margin", "entrance", "exit"});
    r.kind = GateKind::Tunnel;
    r.vertices = read_points(require(g, "entrance", path), path + ".entrance");
    r.exit = read_points(require(g, "exit", path), path + ".exit");
  } else {
    invalid(path + ".type", "unknown gate type '" + t + "'");
  }
  return r;
}

/// Gates a record expands to, before margins.
inline std::vector<Gate> expand(const GateRecord &r) {
  switch (r.kind) {
    case GateKind::Ball: return {BallGate{r.center, r.radius}};
    case GateKind::Polygon: return {PolytopeGate::polygon(r.vertices)};
    case GateKind::Polyhedron: return {PolytopeGate::polyhedron(r.vertices)};
    case GateKind::Tunnel: {
      GateSequence seq;
      append_tunnel(seq, r.vertices, r.exit, 0);
      return seq.gates;
    }
  }
  return {};
}

}  // namespace detail

/// Checks everything the planner relies on; errors name the offending field.
inline void validate(const TrackFile &track) {
  using detail::invalid;
  if (track.schema_version != kTrackSchemaVersion) {
    invalid("schema_version", "unsupported version " + std::to_string(track.schema_version));
  }
  try {
    track.quad.validate();
  } catch (const Error &e) {
    invalid("quad", e.message());
  }
  if (!track.start.allFinite()) invalid("start", "must be finite");
  if (!track.finish.allFinite()) invalid("finish", "must be finite");
  if (track.gates.empty()) invalid("gates", "at least one gate is required");
  const auto &o = track.options;
  if (o.laps < 1 || o.laps > kMaxLaps) {
    invalid("options.laps", "must be in [1, " + std::to_string(kMaxLaps) + "]");
  }
  if (!(o.margin >= 0.0)) invalid("options.margin", "must be >= 0");
  if (!(o.waypoint_tolerance > 0.0)) invalid("options.waypoint_tolerance", "must be > 0");
  for (std::size_t i = 0; i < o.sequence.size(); ++i) {
    const int g = o.sequence[i];
    if (g < 0 || g >= static_cast<int>(track.gates.size())) {
      invalid("options.sequence[" + std::to_string(i) + "]", "gate index out of range");
    }
  }
  for (std::size_t i = 0; i < track.gates.size(); ++i) {
    const auto path = "gates[" + std::to_string(i) + "]";
    const auto &r = track.gates[i];
    try {
      const double m = r.margin.value_or(o.margin);
      for (const auto &g : detail::expand(r)) {
        if (const auto *b = std::get_if<BallGate>(&g)) b->validate();
        if (o.mode == PlanMode::Togt) shrink_margin(g, m);
      }
    } catch (const Error &e) {
      invalid(path, e.message());
    }
  }
}

inline TrackFile parse_track(const nlohmann::json &doc, bool strict = false) {
  using detail::parse_fail;
  if (!doc.is_object()) parse_fail("$", "expected an object");
  if (strict) {
    detail::reject_unknown(doc, "$", {"schema_version", "quad", "start", "finish", "gates", "options"});
  }
  TrackFile t;
  t.schema_version = detail::read_int(detail::require(doc, "schema_version", "$"), "schema_version");
  if (doc.contains("quad")) t.quad = detail::read_quad(doc.at("quad"), "quad", strict);
  t.start = detail::read_vec3(detail::require(doc, "start", "$"), "start");
  t.finish = doc.contains("finish") ? detail::read_vec3(doc.at("finish"), "finish") : t.start;
  const auto &gates = detail::require(doc, "gates", "$");
  if (!gates.is_array()) parse_fail("gates", "expected an array");
  for (std::size_t i = 0; i < gates.size(); ++i) {
    t.gates.push_back(detail::read_gate(gates[i], "gates[" + std::to_string(i) + "]", strict));
  }
  if (doc.contains("options")) {
    const auto &o = doc.at("options");
    if (!o.is_object()) parse_fail("options", "expected an object");
    if (strict) {
      detail::reject_unknown(o, "options", {"margin", "laps", "mode", "waypoint_tolerance", "sequence"});
    }
    if (o.contains("margin")) t.options.margin = detail::read_number(o.at("margin"), "options.margin");
    if (o.contains("laps")) t.options.laps = detail::read_int(o.at("laps"), "options.laps");
    if (o.contains("mode")) {
      if (!o.at("mode").is_string()) parse_fail("options.mode", "expected a string");
      t.options.mode = parse_mode(o.at("mode").get<std::string>());
    }
    if (o.contains("waypoint_tolerance")) {
      t.options.waypoint_tolerance =
          detail::read_number(o.at("waypoint_tolerance"), "options.waypoint_tolerance");
    }
    if (o.contains("sequence")) {
      const auto &s = o.at("sequence");
      if (!s.is_array()) parse_fail("options.sequence", "expected an array");
      for (std::size_t i = 0; i < s.size(); ++i) {
        t.options.sequence.push_back(
            detail::read_int(s[i], "options.sequence[" + std::to_string(i) + "]"));
      }
    }
  }
  validate(t);
  return t;
}

inline TrackFile parse_track_string(const std::string &text, bool strict = false) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception &e) {
    throw Error(ErrorCode::ParseError, std::string("malformed JSON: ") + e.what());
  }
  try {
    return parse_track(doc, strict);
  } catch (const nlohmann::json::exception &e) {
    throw Error(ErrorCode::ParseError, e.what());
  }
}

inline TrackFile load_track(const std::string &path, bool strict = false) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open track file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return parse_track_string(ss.str(), strict);
  } catch (const Error &e) {
    throw Error(e.code(), path + ": " + e.message());
  }
}

inline nlohmann::json to_json(const TrackFile &t) {
  using detail::write_points;
  using detail::write_vec3;
  nlohmann::json doc;
  doc["schema_version"] = t.schema_version;
  const auto &q = t.quad;
  doc["quad"] = {{"mass", q.mass},
                 {"arm_length", q.arm_length},
                 {"inertia", write_vec3(q.inertia_diag)},
                 {"inertia_unit", "kg*m^2"},
                 {"torque_const", q.torque_const},
                 {"f_min", q.f_min},
                 {"f_max", q.f_max},
                 {"omega_max", write_vec3(q.omega_max)},
                 {"gravity", write_vec3(q.gravity)}};
  doc["start"] = write_vec3(t.start);
  doc["finish"] = write_vec3(t.finish);
  auto &gates = doc["gates"] = nlohmann::json::array();
  for (const auto &r : t.gates) {
    nlohmann::json g;
    g["type"] = to_string(r.kind);
    if (!r.name.empty()) g["name"] = r.name;
    if (r.margin) g["margin"] = *r.margin;
    switch (r.kind) {
      case GateKind::Ball:
        g["center"] = write_vec3(r.center);
        g["radius"] = r.radius;
        break;
      case GateKind::Polygon:
      case GateKind::Polyhedron: g["vertices"] = write_points(r.vertices); break;
      case GateKind::Tunnel:
        g["entrance"] = write_points(r.vertices);
        g["exit"] = write_points(r.exit);
        break;
    }
    gates.push_back(std::move(g));
  }
  const auto &o = t.options;
  doc["options"] = {{"margin", o.margin},
                    {"laps", o.laps},
                    {"mode", to_string(o.mode)},
                    {"waypoint_tolerance", o.waypoint_tolerance}};
  if (!o.sequence.empty()) doc["options"]["sequence"] = o.sequence;
  return doc;
}

inline std::string serialize_track(const TrackFile &t) { return to_json(t).dump(2) + "\n"; }

inline Vec3 record_center(const GateRecord &r) {
  if (r.kind == GateKind::Ball) return r.center;
  return geometry::centroid(r.vertices);
}

/// Every gate becomes a ball of radius waypoint_tolerance at its center or
/// centroid. Tunnels turn into three balls (entrance, body, exit) sharing
/// their group, matching the three planning gates of the tunnel.
inline TrackFile to_waypoint_mode(const TrackFile &track) {
  TrackFile out = track;
  out.options.mode = PlanMode::TogtWp;
  out.gates.clear();
  std::vector<int> remap;
  for (const auto &r : track.gates) {
    remap.push_back(static_cast<int>(out.gates.size()));
    GateRecord b;
    b.kind = GateKind::Ball;
    b.radius = track.options.waypoint_tolerance;
    b.name = r.name;
    if (r.kind == GateKind::Tunnel) {
      std::vector<Vec3> body = r.vertices;
      body.insert(body.end(), r.exit.begin(), r.exit.end());
      for (const Vec3 &c : {geometry::centroid(r.vertices), geometry::centroid(body),
                            geometry::centroid(r.exit)}) {
        b.center = c;
        out.gates.push_back(b);
      }
    } else {
      b.center = record_center(r);
      out.gates.push_back(b);
    }
  }
  if (!track.options.sequence.empty()) {
    out.options.sequence.clear();
    for (const int g : track.options.sequence) {
      const int first = remap[static_cast<std::size_t>(g)];
      const int n = track.gates[static_cast<std::size_t>(g)].kind == GateKind::Tunnel ? 3 : 1;
      for (int k = 0; k < n; ++k) out.options.sequence.push_back(first + k);
    }
  }
  return out;
}

/// One lap of planning gates: margins applied, sequence order followed.
/// Margins do not apply in waypoint mode (the balls already encode the
/// tolerance). Tunnel group ids are unique per expanded tunnel.
inline GateSequence build_lap(const TrackFile &track, int first_group = 0, int *next_group = nullptr) {
  std::vector<int> order = track.options.sequence;
  if (order.empty()) {
    for (std::size_t i = 0; i < track.gates.size(); ++i) order.push_back(static_cast<int>(i));
  }
  GateSequence seq;
  int group = first_group;
  for (const int idx : order) {
    const auto &r = track.gates[static_cast<std::size_t>(idx)];
    const double m = track.options.mode == PlanMode::Togt ? r.margin.value_or(track.options.margin) : 0.0;
    const auto gates = detail::expand(r);
    const int id = r.kind == GateKind::Tunnel ? group++ : -1;
    for (const auto &g : gates) seq.push_back(shrink_margin(g, m), id);
  }
  if (next_group) *next_group = group;
  return seq;
}

/// The lap gate list repeated `laps` times in one sequence.
inline GateSequence concatenate_laps(const TrackFile &track, int laps) {
  if (laps < 1) throw Error(ErrorCode::ValidationError, "laps must be >= 1");
  GateSequence out;
  int group = 0;
  for (int l = 0; l < laps; ++l) {
    const GateSequence lap = build_lap(track, group, &group);
    for (std::size_t i = 0; i < lap.size(); ++i) out.push_back(lap.gates[i], lap.tunnel_group[i]);
  }
  return out;
}

/// Applies mode and laps from the track options.
inline Problem make_problem(const TrackFile &track) {
  validate(track);
  const TrackFile t = track.options.mode == PlanMode::TogtWp ? to_waypoint_mode(track) : track;
  Problem p;
  p.gates = concatenate_laps(t, t.options.laps);
  p.params = t.quad;
  p.start = t.start;
  p.finish = t.finish;
  return p;
}

}  // namespace togt
