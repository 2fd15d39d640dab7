#pragma once

// Run configuration and scene descriptions in a flat, versioned key=value
// text format:
//
//   apc-config 1
//   # comment
//   scene = sandwich
//   ranks = 3
//
// Unknown keys are rejected. Doubles are written in shortest round-trip form,
// so serialize(parse(text)) reproduces every value exactly.

#include <apc/error.hpp>
#include <apc/image.hpp>
#include <apc/moments.hpp>
#include <apc/scene.hpp>

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

namespace apc {

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

inline constexpr std::string_view kConfigHeader = "apc-config";
inline constexpr int kConfigVersion = 1;
inline constexpr std::string_view kSceneHeader = "apc-scene";

namespace detail {

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

inline std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline double parse_double(const std::string& key, const std::string& v) {
  double out = 0.0;
  const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc{} || res.ptr != v.data() + v.size()) throw ConfigError("bad number for " + key + ": " + v);
  return out;
}

template <typename Int>
Int parse_int(const std::string& key, const std::string& v) {
  Int out = 0;
  const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc{} || res.ptr != v.data() + v.size()) throw ConfigError("bad integer for " + key + ": " + v);
  return out;
}

inline bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError("bad boolean for " + key + ": " + v);
}

inline std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(v);
  while (std::getline(in, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

inline std::string join_list(const std::vector<std::string>& items) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) out += (i ? "," : "") + items[i];
  return out;
}

// Parses "header version" then key = value lines, preserving order.
inline std::vector<std::pair<std::string, std::string>> parse_key_values(std::string_view text,
                                                                         std::string_view header) {
  std::vector<std::pair<std::string, std::string>> out;
  std::istringstream in{std::string(text)};
  std::string line;
  bool seen_header = false;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    if (!seen_header) {
      std::istringstream hs(t);
      std::string name;
      int version = 0;
      hs >> name >> version;
      if (name != header) throw ConfigError("missing '" + std::string(header) + "' header");
      if (version != kConfigVersion) throw ConfigError("unsupported format version " + std::to_string(version));
      seen_header = true;
      continue;
    }
    const auto eq = t.find('=');
    if (eq == std::string::npos) throw ConfigError("line " + std::to_string(line_no) + ": expected key = value");
    out.emplace_back(trim(std::string_view(t).substr(0, eq)), trim(std::string_view(t).substr(eq + 1)));
  }
  if (!seen_header) throw ConfigError("missing '" + std::string(header) + "' header");
  return out;
}

}  // namespace detail

// What to build: a named generator plus its parameters.
struct SceneSpec {
  std::string name{"sandwich"};
  int ranks{2};
  int resolution{64};        // voxels per cube edge (slab face for sandwich)
  int slab_thickness{2};     // voxels per sandwich slab
  int shells{4};             // concentric shells

  friend bool operator==(const SceneSpec&, const SceneSpec&) = default;

  void validate() const {
    if (name != "sandwich" && name != "concentric" && name != "spikes") {
      throw ConfigError("unknown scene '" + name + "' (expected sandwich, concentric, spikes)");
    }
    if (ranks < 1) throw ConfigError("ranks must be >= 1");
    if (resolution < 2) throw ConfigError("resolution must be >= 2");
    if (slab_thickness < 1) throw ConfigError("slab_thickness must be >= 1");
    if (shells < 2) throw ConfigError("shells must be >= 2");
    if (name != "sandwich" && ranks != 1 && ranks != 2 && ranks != 4 && ranks != 8) {
      throw ConfigError(name + " scene splits the cube into 1, 2, 4, or 8 ranks");
    }
  }
};

struct Scene {
  SceneSpec spec;
  ScenePartition partition;
  TransferFunction transfer;
  // Nominal voxel size; transfer-function opacities refer to this length.
  double nominal_spacing;
};

inline Scene build_scene(const SceneSpec& spec) {
  spec.validate();
  const double nominal = 1.0 / spec.resolution;
  if (spec.name == "sandwich") {
    return {spec, make_sandwich_scene(spec.ranks, spec.resolution, spec.slab_thickness), sandwich_transfer_function(),
            nominal};
  }
  if (spec.name == "concentric") {
    return {spec, make_concentric_scene(spec.shells, spec.ranks, spec.resolution),
            concentric_transfer_function(spec.shells), nominal};
  }
  return {spec, make_spikes_scene(spec.resolution, spec.ranks), spikes_transfer_function(), nominal};
}

inline std::string scene_spec_to_text(const SceneSpec& s) {
  std::ostringstream out;
  out << kSceneHeader << ' ' << kConfigVersion << '\n'
      << "name = " << s.name << '\n'
      << "ranks = " << s.ranks << '\n'
      << "resolution = " << s.resolution << '\n'
      << "slab_thickness = " << s.slab_thickness << '\n'
      << "shells = " << s.shells << '\n';
  return out.str();
}

namespace detail {

inline bool apply_scene_key(SceneSpec& s, const std::string& key, const std::string& value, bool prefixed) {
  const std::string k = prefixed ? (key.rfind("scene.", 0) == 0 ? key.substr(6) : std::string{}) : key;
  if (k == "name") s.name = value;
  else if (k == "ranks") s.ranks = parse_int<int>(key, value);
  else if (k == "resolution") s.resolution = parse_int<int>(key, value);
  else if (k == "slab_thickness") s.slab_thickness = parse_int<int>(key, value);
  else if (k == "shells") s.shells = parse_int<int>(key, value);
  else return false;
  return true;
}

}  // namespace detail

inline SceneSpec parse_scene_spec(std::string_view text) {
  SceneSpec s;
  for (const auto& [k, v] : detail::parse_key_values(text, kSceneHeader)) {
    if (!detail::apply_scene_key(s, k, v, false)) throw ConfigError("unknown scene key '" + k + "'");
  }
  s.validate();
  return s;
}

struct RunConfig {
  SceneSpec scene;
  int width{256};
  int height{256};
  int orbit{1};
  double orbit_radius{2.5};
  double orbit_elevation{15.0};
  double fov{30.0};
  double step{0.0};            // 0: half the smallest voxel spacing
  double reference_step{0.0};  // 0: the scene's nominal voxel size
  ReconstructionParams params;
  std::vector<std::string> algorithms{"apc", "sort_last", "single_node_mboit"};
  bool compare{false};
  bool check{false};
  std::string out{"apc_out"};
  std::string background{"white"};
  std::uint64_t seed{1};
  int threads{0};
  int moment_scalars{5};
  bool skip_empty_tiles{false};
  std::vector<int> sweep;  // rank counts for the bench command

  friend bool operator==(const RunConfig& a, const RunConfig& b) {
    return a.scene == b.scene && a.width == b.width && a.height == b.height && a.orbit == b.orbit &&
           a.orbit_radius == b.orbit_radius && a.orbit_elevation == b.orbit_elevation && a.fov == b.fov &&
           a.step == b.step && a.reference_step == b.reference_step &&
           a.params.moment_bias == b.params.moment_bias && a.params.bias_vector == b.params.bias_vector &&
           a.params.overestimation == b.params.overestimation && a.params.absorbance_max == b.params.absorbance_max &&
           a.params.renormalize == b.params.renormalize &&
           a.algorithms == b.algorithms && a.compare == b.compare && a.check == b.check && a.out == b.out &&
           a.background == b.background && a.seed == b.seed && a.threads == b.threads &&
           a.moment_scalars == b.moment_scalars && a.skip_empty_tiles == b.skip_empty_tiles && a.sweep == b.sweep;
  }

  Background background_color() const {
    return background == "black" ? Background::black() : Background::white();
  }

  void validate() const {
    scene.validate();
    if (width < 1 || height < 1) throw ConfigError("width and height must be >= 1");
    if (orbit < 1) throw ConfigError("orbit must be >= 1");
    if (!(orbit_radius > 0.0)) throw ConfigError("orbit_radius must be positive");
    if (!(fov > 0.0 && fov < 180.0)) throw ConfigError("fov must lie in (0, 180)");
    if (step < 0.0 || reference_step < 0.0) throw ConfigError("step sizes must be non-negative");
    if (background != "white" && background != "black") throw ConfigError("background must be white or black");
    if (moment_scalars != 4 && moment_scalars != 5) throw ConfigError("moment_scalars must be 4 or 5");
    if (algorithms.empty()) throw ConfigError("no algorithms requested");
    for (const auto& a : algorithms) {
      if (a != "apc" && a != "sort_last" && a != "single_node_mboit") {
        throw ConfigError("unknown algorithm '" + a + "'");
      }
    }
    for (int n : sweep) {
      if (n < 1) throw ConfigError("sweep rank counts must be >= 1");
    }
    try {
      params.validate();
    } catch (const ContractViolation& e) {
      throw ConfigError(e.what());
    }
  }

  bool wants(std::string_view algorithm) const {
    return std::find(algorithms.begin(), algorithms.end(), algorithm) != algorithms.end();
  }
};

inline void apply_config_value(RunConfig& c, const std::string& key, const std::string& value) {
  using namespace detail;
  if (apply_scene_key(c.scene, key, value, true)) return;
  if (key == "scene") c.scene.name = value;
  else if (key == "ranks") c.scene.ranks = parse_int<int>(key, value);
  else if (key == "width") c.width = parse_int<int>(key, value);
  else if (key == "height") c.height = parse_int<int>(key, value);
  else if (key == "orbit") c.orbit = parse_int<int>(key, value);
  else if (key == "orbit_radius") c.orbit_radius = parse_double(key, value);
  else if (key == "orbit_elevation") c.orbit_elevation = parse_double(key, value);
  else if (key == "fov") c.fov = parse_double(key, value);
  else if (key == "step") c.step = parse_double(key, value);
  else if (key == "reference_step") c.reference_step = parse_double(key, value);
  else if (key == "moment_bias") c.params.moment_bias = parse_double(key, value);
  else if (key == "bias_vector") {
    const auto items = split_list(value);
    if (items.size() != 4) throw ConfigError("bias_vector needs 4 entries");
    for (std::size_t i = 0; i < 4; ++i) c.params.bias_vector[i] = parse_double(key, items[i]);
  } else if (key == "overestimation") c.params.overestimation = parse_double(key, value);
  else if (key == "absorbance_max") c.params.absorbance_max = parse_double(key, value);
  else if (key == "renormalize") c.params.renormalize = parse_bool(key, value);
  else if (key == "algorithms") c.algorithms = split_list(value);
  else if (key == "compare") c.compare = parse_bool(key, value);
  else if (key == "check") c.check = parse_bool(key, value);
  else if (key == "out") c.out = value;
  else if (key == "background") c.background = value;
  else if (key == "seed") c.seed = parse_int<std::uint64_t>(key, value);
  else if (key == "threads") c.threads = parse_int<int>(key, value);
  else if (key == "moment_scalars") c.moment_scalars = parse_int<int>(key, value);
  else if (key == "skip_empty_tiles") c.skip_empty_tiles = parse_bool(key, value);
  else if (key == "sweep") {
    c.sweep.clear();
    for (const auto& item : split_list(value)) c.sweep.push_back(parse_int<int>(key, item));
  } else {
    throw ConfigError("unknown config key '" + key + "'");
  }
}

inline RunConfig parse_run_config(std::string_view text, RunConfig base = {}) {
  for (const auto& [k, v] : detail::parse_key_values(text, kConfigHeader)) apply_config_value(base, k, v);
  return base;
}

inline std::string run_config_to_text(const RunConfig& c) {
  using detail::format_double;
  std::ostringstream out;
  std::vector<std::string> bias;
  for (double v : c.params.bias_vector) bias.push_back(format_double(v));
  std::vector<std::string> sweep;
  for (int n : c.sweep) sweep.push_back(std::to_string(n));
  out << kConfigHeader << ' ' << kConfigVersion << '\n'
      << "scene = " << c.scene.name << '\n'
      << "ranks = " << c.scene.ranks << '\n'
      << "scene.resolution = " << c.scene.resolution << '\n'
      << "scene.slab_thickness = " << c.scene.slab_thickness << '\n'
      << "scene.shells = " << c.scene.shells << '\n'
      << "width = " << c.width << '\n'
      << "height = " << c.height << '\n'
      << "orbit = " << c.orbit << '\n'
      << "orbit_radius = " << format_double(c.orbit_radius) << '\n'
      << "orbit_elevation = " << format_double(c.orbit_elevation) << '\n'
      << "fov = " << format_double(c.fov) << '\n'
      << "step = " << format_double(c.step) << '\n'
      << "reference_step = " << format_double(c.reference_step) << '\n'
      << "moment_bias = " << format_double(c.params.moment_bias) << '\n'
      << "bias_vector = " << detail::join_list(bias) << '\n'
      << "overestimation = " << format_double(c.params.overestimation) << '\n'
      << "absorbance_max = " << format_double(c.params.absorbance_max) << '\n'
      << "renormalize = " << (c.params.renormalize ? "true" : "false") << '\n'
      << "algorithms = " << detail::join_list(c.algorithms) << '\n'
      << "compare = " << (c.compare ? "true" : "false") << '\n'
      << "check = " << (c.check ? "true" : "false") << '\n'
      << "out = " << c.out << '\n'
      << "background = " << c.background << '\n'
      << "seed = " << c.seed << '\n'
      << "threads = " << c.threads << '\n'
      << "moment_scalars = " << c.moment_scalars << '\n'
      << "skip_empty_tiles = " << (c.skip_empty_tiles ? "true" : "false") << '\n'
      << "sweep = " << detail::join_list(sweep) << '\n';
  return out.str();
}

}  // namespace apc
