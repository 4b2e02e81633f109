#pragma once

// Flat "key = value" run configuration; '#' starts a comment.

#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "scnn/evaluation.hpp"

namespace scnn {

struct RunConfig {
  std::string task = "AD-vs-CN";
  std::string manifest;
  std::string output = "out";
  std::string model = "spherical";  // spherical, planar or both
  std::string preset = "desk";      // paper, desk or tiny
  std::string checkpoint;
  std::string subject;
  int folds = 10;
  int class_index = 1;
  bool dry_run = false;  // cv: oracle probabilities instead of training
  std::size_t sample_k = 10;
  TrainConfig train;
  CohortSpec cohort;
  std::uint64_t seed = 0;

  // Keys and their current values, in documentation order.
  std::vector<std::pair<std::string, std::string>> entries() const;
  void set(const std::string& key, const std::string& value);

  Preset models() const { return preset_by_name(preset); }

  void validate() const {
    parse_task(task);
    if (model != "spherical" && model != "planar" && model != "both") throw ValidationError("config: model must be spherical, planar or both");
    preset_by_name(preset);
    if (folds < 3) throw ValidationError("config: folds must be >= 3");
    if (sample_k < 1) throw ValidationError("config: sample_k must be >= 1");
    train.validate();
    cohort.validate();
  }
};

namespace detail {

inline std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

template <class N>
N parse_number(const std::string& key, const std::string& v) {
  std::istringstream in(v);
  N out{};
  std::string rest;
  if (!(in >> out) || (in >> rest)) throw ValidationError("config: '" + key + "' expects a number, got '" + v + "'");
  return out;
}

inline bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ValidationError("config: '" + key + "' expects true or false, got '" + v + "'");
}

}  // namespace detail

inline std::vector<std::pair<std::string, std::string>> RunConfig::entries() const {
  using detail::fmt_double;
  return {
      {"task", task},
      {"manifest", manifest},
      {"output", output},
      {"model", model},
      {"preset", preset},
      {"checkpoint", checkpoint},
      {"subject", subject},
      {"folds", std::to_string(folds)},
      {"class_index", std::to_string(class_index)},
      {"dry_run", dry_run ? "true" : "false"},
      {"sample_k", std::to_string(sample_k)},
      {"seed", std::to_string(seed)},
      {"batch_size", std::to_string(train.batch_size)},
      {"epochs", std::to_string(train.epochs)},
      {"lr_switch_epoch", std::to_string(train.lr_switch_epoch)},
      {"lr_initial", fmt_double(train.lr_initial)},
      {"lr_final", fmt_double(train.lr_final)},
      {"momentum", fmt_double(train.momentum)},
      {"cohort_cn", std::to_string(cohort.counts[0])},
      {"cohort_mci_s", std::to_string(cohort.counts[1])},
      {"cohort_mci_p", std::to_string(cohort.counts[2])},
      {"cohort_ad", std::to_string(cohort.counts[3])},
      {"cohort_bandwidth", std::to_string(cohort.bandwidth)},
      {"cohort_base_mean", fmt_double(cohort.base_mean)},
      {"cohort_smooth_amplitude", fmt_double(cohort.smooth_amplitude)},
      {"cohort_smooth_degree", std::to_string(cohort.smooth_degree)},
      {"cohort_site_depth", fmt_double(cohort.sites.empty() ? 0.0 : cohort.sites[0].depth)},
      {"cohort_site_radius", fmt_double(cohort.sites.empty() ? 0.0 : cohort.sites[0].radius)},
      {"cohort_depth_jitter", fmt_double(cohort.depth_jitter)},
      {"cohort_noise_std", fmt_double(cohort.noise_std)},
      {"cohort_misregistration_std", fmt_double(cohort.misregistration_std)},
  };
}

inline void RunConfig::set(const std::string& key, const std::string& v) {
  using detail::parse_number;
  if (key == "task") task = v;
  else if (key == "manifest") manifest = v;
  else if (key == "output") output = v;
  else if (key == "model") model = v;
  else if (key == "preset") preset = v;
  else if (key == "checkpoint") checkpoint = v;
  else if (key == "subject") subject = v;
  else if (key == "folds") folds = parse_number<int>(key, v);
  else if (key == "class_index") class_index = parse_number<int>(key, v);
  else if (key == "dry_run") dry_run = detail::parse_bool(key, v);
  else if (key == "sample_k") sample_k = parse_number<std::size_t>(key, v);
  else if (key == "seed") seed = parse_number<std::uint64_t>(key, v);
  else if (key == "batch_size") train.batch_size = parse_number<int>(key, v);
  else if (key == "epochs") train.epochs = parse_number<int>(key, v);
  else if (key == "lr_switch_epoch") train.lr_switch_epoch = parse_number<int>(key, v);
  else if (key == "lr_initial") train.lr_initial = parse_number<double>(key, v);
  else if (key == "lr_final") train.lr_final = parse_number<double>(key, v);
  else if (key == "momentum") train.momentum = parse_number<double>(key, v);
  else if (key == "cohort_cn") cohort.counts[0] = parse_number<int>(key, v);
  else if (key == "cohort_mci_s") cohort.counts[1] = parse_number<int>(key, v);
  else if (key == "cohort_mci_p") cohort.counts[2] = parse_number<int>(key, v);
  else if (key == "cohort_ad") cohort.counts[3] = parse_number<int>(key, v);
  else if (key == "cohort_bandwidth") cohort.bandwidth = parse_number<int>(key, v);
  else if (key == "cohort_base_mean") cohort.base_mean = parse_number<double>(key, v);
  else if (key == "cohort_smooth_amplitude") cohort.smooth_amplitude = parse_number<double>(key, v);
  else if (key == "cohort_smooth_degree") cohort.smooth_degree = parse_number<int>(key, v);
  else if (key == "cohort_site_depth") {
    const double d = parse_number<double>(key, v);
    for (auto& s : cohort.sites) s.depth = d;
  } else if (key == "cohort_site_radius") {
    const double r = parse_number<double>(key, v);
    for (auto& s : cohort.sites) s.radius = r;
  } else if (key == "cohort_depth_jitter") cohort.depth_jitter = parse_number<double>(key, v);
  else if (key == "cohort_noise_std") cohort.noise_std = parse_number<double>(key, v);
  else if (key == "cohort_misregistration_std") cohort.misregistration_std = parse_number<double>(key, v);
  else throw ValidationError("config: unknown key '" + key + "'");
}

inline std::string config_text(const RunConfig& c) {
  std::string out;
  for (const auto& [k, v] : c.entries()) out += k + " = " + v + "\n";
  return out;
}

// Later keys override earlier ones; values keep inner spaces.
inline RunConfig parse_config(const std::string& text, RunConfig base = {}) {
  std::istringstream in(text);
  std::string line;
  std::size_t offset = 0;
  while (std::getline(in, line)) {
    const std::size_t at = offset;
    offset += line.size() + 1;
    if (auto h = line.find('#'); h != std::string::npos) line.resize(h);
    auto trim = [](std::string s) {
      const auto a = s.find_first_not_of(" \t\r");
      if (a == std::string::npos) return std::string();
      return s.substr(a, s.find_last_not_of(" \t\r") - a + 1);
    };
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ParseError("config: expected 'key = value'", at);
    const std::string key = trim(line.substr(0, eq));
    if (key.empty()) throw ParseError("config: empty key", at);
    base.set(key, trim(line.substr(eq + 1)));
  }
  return base;
}

inline RunConfig load_config(const std::string& path, RunConfig base = {}) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open config " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), std::move(base));
}

}  // namespace scnn
