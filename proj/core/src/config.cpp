#include "tabletrec/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "tabletrec/errors.hpp"

namespace tabletrec {

namespace {

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

std::vector<int> parse_int_list(const std::string& v) {
  std::vector<int> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(std::stoi(item));
  }
  return out;
}

struct Binder {
  std::map<std::string, std::function<void(const std::string&)>> setters;
  std::map<std::string, std::function<std::string()>> getters;

  void number(const std::string& key, double* v) {
    setters[key] = [v](const std::string& s) { *v = std::stod(s); };
    getters[key] = [v] {
      std::ostringstream os;
      os << *v;
      return os.str();
    };
  }
  void integer(const std::string& key, int* v) {
    setters[key] = [v](const std::string& s) { *v = std::stoi(s); };
    getters[key] = [v] { return std::to_string(*v); };
  }
  void uint64(const std::string& key, uint64_t* v) {
    setters[key] = [v](const std::string& s) { *v = std::stoull(s); };
    getters[key] = [v] { return std::to_string(*v); };
  }
  void boolean(const std::string& key, bool* v) {
    setters[key] = [v](const std::string& s) { *v = s == "true" || s == "1"; };
    getters[key] = [v] { return *v ? "true" : "false"; };
  }
  void int_list(const std::string& key, std::vector<int>* v) {
    setters[key] = [v](const std::string& s) { *v = parse_int_list(s); };
    getters[key] = [v] {
      std::string out;
      for (size_t i = 0; i < v->size(); ++i) out += (i ? "," : "") + std::to_string((*v)[i]);
      return out;
    };
  }
};

Binder make_binder(Config& c) {
  Binder b;
  b.integer("schedule.keyframes_per_fragment", &c.schedule.keyframes_per_fragment);
  b.integer("schedule.epochs_separate", &c.schedule.epochs_separate);
  b.integer("schedule.epochs_joint", &c.schedule.epochs_joint);
  b.int_list("schedule.merge_epochs", &c.schedule.merge_epochs);
  b.integer("schedule.joint_merge_interval", &c.schedule.joint_merge_interval);
  b.number("schedule.keyframe_translation", &c.schedule.keyframe_translation);
  b.number("schedule.keyframe_rotation_deg", &c.schedule.keyframe_rotation_deg);
  b.number("schedule.distance_lr_after_second_merge", &c.schedule.distance_lr_after_second_merge);

  b.integer("merge.k_neighbors", &c.merge.k_neighbors);
  b.number("merge.min_cos_pair", &c.merge.min_cos_pair);
  b.number("merge.min_cos_set", &c.merge.min_cos_set);
  b.number("merge.max_plane_dist", &c.merge.max_plane_dist);
  b.number("merge.max_color_dist", &c.merge.max_color_dist);
  b.number("weight_check.threshold", &c.weight_check.weight_threshold);
  b.integer("weight_check.min_points", &c.weight_check.min_points);

  b.number("loss.w_photometric", &c.weights.photometric);
  b.number("loss.w_alpha_inverse", &c.weights.alpha_inverse);
  b.number("loss.w_distortion", &c.weights.distortion);
  b.number("loss.w_depth", &c.weights.depth);
  b.number("loss.w_normal", &c.weights.normal);
  b.boolean("loss.distortion_blending_weights", &c.loss.distortion_blending_weights);
  b.number("loss.min_opacity", &c.loss.min_opacity);

  b.integer("raster.layers", &c.raster.layers);
  b.number("raster.background_r", &c.raster.background.x);
  b.number("raster.background_g", &c.raster.background.y);
  b.number("raster.background_b", &c.raster.background.z);
  b.number("raster.min_opacity", &c.raster.min_opacity);

  b.number("adam.lr_texture", &c.adam.lr_texture);
  b.number("adam.lr_alpha", &c.adam.lr_alpha);
  b.number("adam.lr_normal", &c.adam.lr_normal);
  b.number("adam.lr_distance", &c.adam.lr_distance);
  b.number("adam.beta1", &c.adam.beta1);
  b.number("adam.beta2", &c.adam.beta2);

  b.integer("pipeline.superpixel_block", &c.superpixel_block);
  b.number("pipeline.slic_compactness", &c.slic_compactness);
  b.integer("pipeline.working_long_side", &c.working_long_side);
  b.uint64("pipeline.seed", &c.seed);
  return b;
}

}  // namespace

Config parse_config_text(const std::string& text) {
  Config config;
  Binder binder = make_binder(config);
  std::stringstream ss(text);
  std::string line;
  int line_no = 0;
  while (std::getline(ss, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw LoadError("config line " + std::to_string(line_no) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    const auto it = binder.setters.find(key);
    if (it == binder.setters.end())
      throw LoadError("config line " + std::to_string(line_no) + ": unknown key '" + key + "'");
    it->second(value);
  }
  return config;
}

Config load_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw LoadError("cannot open config: " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_config_text(ss.str());
}

std::string serialize_config(const Config& config) {
  Config copy = config;
  Binder binder = make_binder(copy);
  std::string out;
  for (const auto& [key, get] : binder.getters) out += key + " = " + get() + "\n";
  return out;
}

}  // namespace tabletrec
