#include "imime/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <boost/algorithm/string.hpp>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <fmt/format.h>

#include "imime/error.hpp"

namespace imime::harness {

std::string_view to_string(Mode m) noexcept { return m == Mode::Labels ? "labels" : "pixels"; }

std::string_view to_string(Controller c) noexcept {
  switch (c) {
    case Controller::Learning: return "learning";
    case Controller::Random: return "random";
    case Controller::Fixed: return "fixed";
  }
  return "?";
}

long EpisodeConfig::decision_period() const {
  return std::lround(decision_seconds * fps);
}

void EpisodeConfig::validate() {
  if (steps < 1) throw Error(Errc::ConfigError, "episode.steps must be >= 1");
  if (!(fps > 0)) throw Error(Errc::ConfigError, "episode.fps must be positive");
  const double ratio = decision_seconds * fps;
  if (!(decision_seconds > 0) || std::abs(ratio - std::round(ratio)) > 1e-9 || ratio < 1) {
    throw Error(Errc::ConfigError,
                "episode.decision_seconds must be a positive multiple of the frame period");
  }
  if (!(change_probability >= 0 && change_probability <= 1)) {
    throw Error(Errc::ConfigError, "episode.change_probability outside [0,1]");
  }
  if (controller == Controller::Fixed && !fixed_routine) {
    throw Error(Errc::ConfigError, "episode.controller: fixed needs a routine (fixed:<Routine>)");
  }
  profile.validate();
  if (fixed_routine && std::find(profile.routines.begin(), profile.routines.end(), *fixed_routine) ==
                           profile.routines.end()) {
    throw Error(Errc::ConfigError, "episode.controller: fixed routine is not in profile.routines");
  }
  scene.validate();
  learning.validate();
  behavior.fps = fps;
  behavior.selectable = profile.routines;
  behavior.validate();
  if (vision.background_frames < 2) {
    throw Error(Errc::ConfigError, "vision.background_frames must be >= 2");
  }
}

namespace {

// Keys keep file order; it decides tie-breaking among expression references.
using Keys = std::vector<std::pair<std::string, std::string>>;
using Sections = std::map<std::string, Keys>;

const std::string* find_key(const Keys& keys, const std::string& key) {
  for (const auto& [k, v] : keys) {
    if (k == key) return &v;
  }
  return nullptr;
}

class Reader {
 public:
  explicit Reader(Sections data) : data_(std::move(data)) {}

  std::optional<std::string> raw(const std::string& section, const std::string& key) {
    const auto s = data_.find(section);
    if (s == data_.end()) return std::nullopt;
    const std::string* v = find_key(s->second, key);
    if (!v) return std::nullopt;
    used_.insert(section + "." + key);
    return boost::trim_copy(*v);
  }

  template <typename T>
  void number(const std::string& section, const std::string& key, T& target) {
    const auto v = raw(section, key);
    if (!v) return;
    try {
      std::size_t used = 0;
      if constexpr (std::is_floating_point_v<T>) {
        target = static_cast<T>(std::stod(*v, &used));
      } else if constexpr (std::is_unsigned_v<T>) {
        if (!v->empty() && (*v)[0] == '-') throw std::invalid_argument(*v);
        target = static_cast<T>(std::stoull(*v, &used));
      } else {
        target = static_cast<T>(std::stoll(*v, &used));
      }
      if (used != v->size()) throw std::invalid_argument(*v);
    } catch (const std::exception&) {
      throw Error(Errc::ConfigError, fmt::format("{}.{}: '{}' is not a number", section, key, *v));
    }
  }

  void boolean(const std::string& section, const std::string& key, bool& target) {
    const auto v = raw(section, key);
    if (!v) return;
    if (*v == "true" || *v == "1" || *v == "yes") {
      target = true;
    } else if (*v == "false" || *v == "0" || *v == "no") {
      target = false;
    } else {
      throw Error(Errc::ConfigError, fmt::format("{}.{}: '{}' is not a boolean", section, key, *v));
    }
  }

  std::vector<std::string> list(const std::string& section, const std::string& key,
                                const std::string& value) {
    std::vector<std::string> out;
    boost::split(out, value, boost::is_any_of(","));
    for (auto& s : out) boost::trim(s);
    if (out.empty() || (out.size() == 1 && out[0].empty())) {
      throw Error(Errc::ConfigError, fmt::format("{}.{}: empty list", section, key));
    }
    return out;
  }

  Routine routine(const std::string& section, const std::string& key, const std::string& name) {
    const auto r = parse_routine(name);
    if (!r) throw Error(Errc::ConfigError, fmt::format("{}.{}: unknown routine '{}'", section, key, name));
    return *r;
  }

  std::vector<std::string> keys(const std::string& section) const {
    std::vector<std::string> out;
    const auto s = data_.find(section);
    if (s == data_.end()) return out;
    for (const auto& [k, v] : s->second) out.push_back(k);
    return out;
  }

  void finish() const {
    for (const auto& [section, keys] : data_) {
      for (const auto& [key, value] : keys) {
        if (!used_.contains(section + "." + key)) {
          throw Error(Errc::ConfigError, fmt::format("{}.{}: unknown key", section, key));
        }
      }
    }
  }

 private:
  Sections data_;
  std::set<std::string> used_;
};

Sections read_sections(std::istream& in, const std::string& origin) {
  boost::property_tree::ptree tree;
  try {
    boost::property_tree::ini_parser::read_ini(in, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw Error(Errc::ConfigError, fmt::format("{}:{}: {}", origin, e.line(), e.message()));
  }
  Sections out;
  for (const auto& [section, body] : tree) {
    if (body.empty()) {
      throw Error(Errc::ConfigError, fmt::format("{}: key outside a section", section));
    }
    for (const auto& [key, value] : body) out[section].emplace_back(key, value.data());
  }
  return out;
}

Sections read_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::ConfigError, "cannot read config " + path.string());
  return read_sections(in, path.string());
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  const std::filesystem::path path(p);
  return path.is_absolute() ? path : base / path;
}

void read_profile(Reader& r, sim::ViewerProfile& p) {
  const std::string sec = "profile";
  if (const auto v = r.raw(sec, "routines")) {
    p.routines.clear();
    for (const auto& name : r.list(sec, "routines", *v)) p.routines.push_back(r.routine(sec, "routines", name));
    p.p_star.assign(p.state_count() * p.action_count(), -1.0);
  }
  for (const auto& key : r.keys(sec)) {
    if (!key.starts_with("from.")) continue;
    std::string name = key.substr(5);
    std::size_t attending = 0;
    if (name.ends_with(".attending")) {
      name.resize(name.size() - 10);
      attending = 1;
    }
    const Routine from = r.routine(sec, key, name);
    const auto it = std::find(p.routines.begin(), p.routines.end(), from);
    if (it == p.routines.end()) {
      throw Error(Errc::ConfigError, fmt::format("{}.{}: routine not in profile.routines", sec, key));
    }
    const auto values = r.list(sec, key, *r.raw(sec, key));
    if (values.size() != p.action_count()) {
      throw Error(Errc::ConfigError,
                  fmt::format("{}.{}: expected {} probabilities", sec, key, p.action_count()));
    }
    const auto state = 2 * static_cast<std::size_t>(it - p.routines.begin()) + attending;
    for (std::size_t a = 0; a < values.size(); ++a) {
      try {
        p.at(state, a) = std::stod(values[a]);
      } catch (const std::exception&) {
        throw Error(Errc::ConfigError, fmt::format("{}.{}: '{}' is not a number", sec, key, values[a]));
      }
    }
  }
  for (double v : p.p_star) {
    if (v < 0) throw Error(Errc::ConfigError, "profile: missing from.<Routine>[.attending] rows");
  }
  r.number(sec, "erratic_rate", p.erratic_rate);
  r.number(sec, "erratic_frames", p.erratic_frames);
  r.number(sec, "compliance", p.compliance);
  r.number(sec, "wrong_gesture_rate", p.wrong_gesture_rate);
  r.number(sec, "gesture_delay_seconds", p.gesture_delay_seconds);
  r.number(sec, "gesture_seconds", p.gesture_seconds);
}

void read_scene(Reader& r, sim::SceneConfig& s) {
  const std::string sec = "scene";
  r.number(sec, "face_width", s.face_width);
  r.number(sec, "face_height", s.face_height);
  r.number(sec, "background", s.background);
  r.number(sec, "noise_sigma", s.noise_sigma);
  r.number(sec, "face_intensity", s.face_intensity);
  r.number(sec, "face_a", s.face_a);
  r.number(sec, "face_b", s.face_b);
  r.number(sec, "eye_intensity", s.eye_intensity);
  r.number(sec, "eye_radius", s.eye_radius);
  r.number(sec, "eye_dx", s.eye_dx);
  r.number(sec, "eye_dy", s.eye_dy);
  r.number(sec, "mouth_intensity", s.mouth_intensity);
  r.number(sec, "mouth_width", s.mouth_width);
  r.number(sec, "mouth_height", s.mouth_height);
  r.number(sec, "mouth_dy", s.mouth_dy);
  r.number(sec, "shading_per_degree", s.shading_per_degree);
  r.number(sec, "blob_threshold", s.blob_threshold);
  r.number(sec, "sway_amplitude", s.sway_amplitude);
  r.number(sec, "sway_period_frames", s.sway_period_frames);
  r.number(sec, "burst_amplitude", s.burst_amplitude);
  r.number(sec, "body_width", s.body_width);
  r.number(sec, "body_height", s.body_height);
  r.number(sec, "body_background", s.body_background);
  r.number(sec, "silhouette_intensity", s.silhouette_intensity);
}

std::vector<double> numbers(Reader& r, const std::string& section, const std::string& key,
                            std::size_t expected) {
  std::vector<double> out;
  for (const auto& cell : r.list(section, key, *r.raw(section, key))) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(cell, &used));
      if (used != cell.size()) throw std::invalid_argument(cell);
    } catch (const std::exception&) {
      throw Error(Errc::ConfigError, fmt::format("{}.{}: '{}' is not a number", section, key, cell));
    }
  }
  if (out.size() != expected) {
    throw Error(Errc::ConfigError, fmt::format("{}.{}: expected {} numbers", section, key, expected));
  }
  return out;
}

// region.<Region> = x0,y0,x1,y1 and expression.<Label> = 14 flow values.
void read_face_tables(Reader& r, face::FaceConfig& f) {
  const std::string sec = "vision";
  std::vector<face::ExpressionReference> refs;
  for (const auto& key : r.keys(sec)) {
    if (key.starts_with("region.")) {
      const std::string name = key.substr(7);
      std::optional<std::size_t> idx;
      for (std::size_t i = 0; i < face::kRegionCount; ++i) {
        if (face::to_string(static_cast<face::Region>(i)) == name) idx = i;
      }
      if (!idx) throw Error(Errc::ConfigError, fmt::format("{}.{}: unknown region", sec, key));
      const auto v = numbers(r, sec, key, 4);
      f.layout.regions[*idx] = {v[0], v[1], v[2], v[3]};
    } else if (key.starts_with("expression.")) {
      face::ExpressionReference ref{key.substr(11), {}};
      const auto v = numbers(r, sec, key, face::CharacteristicFlow{}.size());
      std::copy(v.begin(), v.end(), ref.flow.begin());
      refs.push_back(std::move(ref));
    }
  }
  if (!refs.empty()) f.references = std::move(refs);
  try {
    f.layout.validate();
  } catch (const Error& e) {
    throw Error(Errc::ConfigError, fmt::format("vision.region.*: {}", e.what()));
  }
}

void apply(Reader& r, EpisodeConfig& c, const std::filesystem::path& base) {
  const std::string ep = "episode";
  if (const auto v = r.raw(ep, "mode")) {
    if (*v == "labels") {
      c.mode = Mode::Labels;
    } else if (*v == "pixels") {
      c.mode = Mode::Pixels;
    } else {
      throw Error(Errc::ConfigError, fmt::format("episode.mode: '{}' is not labels|pixels", *v));
    }
  }
  r.number(ep, "steps", c.steps);
  r.number(ep, "fps", c.fps);
  r.number(ep, "decision_seconds", c.decision_seconds);
  r.number(ep, "seed", c.seed);
  r.number(ep, "change_probability", c.change_probability);
  if (const auto v = r.raw(ep, "controller")) {
    if (*v == "learning") {
      c.controller = Controller::Learning;
    } else if (*v == "random") {
      c.controller = Controller::Random;
    } else if (v->starts_with("fixed:")) {
      c.controller = Controller::Fixed;
      c.fixed_routine = r.routine(ep, "controller", v->substr(6));
    } else {
      throw Error(Errc::ConfigError,
                  fmt::format("episode.controller: '{}' is not learning|random|fixed:<Routine>", *v));
    }
  }
  if (const auto v = r.raw(ep, "value_mode")) {
    if (*v == "sync") {
      c.value_mode = learning::ValueMode::Synchronous;
    } else if (*v == "async") {
      c.value_mode = learning::ValueMode::Asynchronous;
    } else {
      throw Error(Errc::ConfigError, fmt::format("episode.value_mode: '{}' is not sync|async", *v));
    }
  }
  if (const auto v = r.raw(ep, "out")) c.out_dir = resolve(base, *v);
  r.boolean(ep, "dump_frames", c.dump_frames);
  if (const auto v = r.raw(ep, "warm_start")) c.warm_start = resolve(base, *v);
  if (const auto v = r.raw(ep, "pose_references")) c.pose_references = resolve(base, *v);

  const std::string le = "learning";
  r.number(le, "epsilon", c.learning.epsilon);
  r.number(le, "gamma", c.learning.gamma);
  r.number(le, "tolerance", c.learning.tolerance);
  r.number(le, "max_sweeps", c.learning.max_sweeps);

  read_profile(r, c.profile);
  read_scene(r, c.scene);

  const std::string be = "behavior";
  if (const auto v = r.raw(be, "prompt_gestures")) c.behavior.prompt_gestures = r.list(be, "prompt_gestures", *v);
  r.number(be, "idle_seconds", c.behavior.idle_seconds);
  r.number(be, "ponder_seconds", c.behavior.ponder_seconds);
  r.number(be, "response_seconds", c.behavior.response_seconds);
  r.number(be, "reward_seconds", c.behavior.reward_seconds);
  r.number(be, "reflex_hold_seconds", c.behavior.reflex_hold_seconds);
  r.number(be, "area_low", c.behavior.area_low);
  r.number(be, "area_high", c.behavior.area_high);

  const std::string vi = "vision";
  auto& f = c.vision.face;
  r.number(vi, "block_size", f.flow.block_size);
  r.number(vi, "search_radius", f.flow.search_radius);
  r.number(vi, "still_threshold", f.motion.still);
  r.number(vi, "zone_threshold", f.motion.zone);
  r.number(vi, "spread_threshold", f.motion.spread);
  r.number(vi, "peak_quantile", f.motion.peak_quantile);
  r.number(vi, "symmetry_threshold", f.orientation.symmetry);
  r.number(vi, "edge_offset_threshold", f.orientation.edge);
  r.number(vi, "edge_magnitude", f.edge_threshold);
  r.number(vi, "expression_similarity", f.expression_similarity);
  r.number(vi, "expression_magnitude", f.expression_magnitude);
  r.number(vi, "jerk_threshold", c.vision.fusion.jerk_threshold);
  r.number(vi, "erratic_frames", c.vision.fusion.erratic_frames);
  r.number(vi, "expression_recent_seconds", c.vision.fusion.recent_seconds);
  r.number(vi, "pose_threshold", c.vision.pose_threshold);
  r.number(vi, "segment_threshold", c.vision.segment_threshold);
  r.number(vi, "variance_floor", c.vision.variance_floor);
  r.number(vi, "background_frames", c.vision.background_frames);
  r.number(vi, "min_face_area", c.vision.min_face_area);
  r.number(vi, "drape_gravity", c.vision.drape.gravity);
  r.number(vi, "drape_coupling", c.vision.drape.coupling);
  r.number(vi, "drape_tolerance", c.vision.drape.tolerance);
  r.number(vi, "drape_max_iterations", c.vision.drape.max_iterations);
  read_face_tables(r, f);
}

// `profile_file` / `scene_file` in [episode] pull in sections from separate
// files; keys in the including file win.
Sections merge_includes(Sections data, const std::filesystem::path& base) {
  const auto ep = data.find("episode");
  if (ep == data.end()) return data;
  std::vector<std::string> files;
  for (const std::string key : {"profile_file", "scene_file"}) {
    const auto it = std::find_if(ep->second.begin(), ep->second.end(),
                                 [&](const auto& kv) { return kv.first == key; });
    if (it == ep->second.end()) continue;
    files.push_back(boost::trim_copy(it->second));
    ep->second.erase(it);
  }
  for (const auto& f : files) {
    for (const auto& [section, keys] : read_file(resolve(base, f))) {
      for (const auto& [k, v] : keys) {
        if (!find_key(data[section], k)) data[section].emplace_back(k, v);
      }
    }
  }
  return data;
}

EpisodeConfig build(Sections data, const std::filesystem::path& base) {
  static const std::set<std::string> known{"episode", "learning", "profile", "scene", "behavior", "vision"};
  for (const auto& [section, keys] : data) {
    if (!known.contains(section)) throw Error(Errc::ConfigError, fmt::format("[{}]: unknown section", section));
  }
  Reader reader(merge_includes(std::move(data), base));
  EpisodeConfig cfg;
  apply(reader, cfg, base);
  reader.finish();
  cfg.validate();
  return cfg;
}

}  // namespace

EpisodeConfig load_config(const std::filesystem::path& path) {
  return build(read_file(path), path.parent_path().empty() ? std::filesystem::path(".") : path.parent_path());
}

EpisodeConfig parse_config(const std::string& text, const std::filesystem::path& base_dir) {
  std::istringstream in(text);
  return build(read_sections(in, "<config>"), base_dir);
}

}  // namespace imime::harness
