#pragma once

// Pipeline configuration: flat `key = value` files, command-line overrides
// and dataset profiles. Precedence is command line > file > profile >
// built-in defaults. Unknown keys are errors.

#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "evattn/activity.hpp"
#include "evattn/draw_read.hpp"
#include "evattn/error.hpp"
#include "evattn/event_io.hpp"
#include "evattn/integrator.hpp"
#include "evattn/profiles.hpp"

namespace evattn {

enum class MaskGrouping { closure, per_peak };
enum class ControllerKind { centroid, frozen };
enum class InputFormat { automatic, aer, csv };

struct PipelineConfig {
  std::string profile;
  StreamHeader geometry;
  double leak = detail::kDefaultLeak;
  PeakSettings peaks;
  int region_width = 23;
  int region_height = 23;
  int region_stride = 5;
  int patch_size = 29;
  ExtractionMode mode = ExtractionMode::centered;
  double threshold = 0.1 * Integrator::kIncrement;
  MaskGrouping grouping = MaskGrouping::closure;
  bool flush_tail = true;
  bool write_frames = true;

  int attention_patch_size = 12;
  std::int64_t attention_interval_us = 0;  // 0: 4 activity intervals
  int reset_every = 0;                     // attention intervals between resets, 0 = never
  ControllerKind controller = ControllerKind::centroid;
  ControllerSettings controller_settings;
  int controller_batch = 16;  // events per controller update
  double blank_eps = 1e-6;

  int embed_width = 0;  // > 0: place the input at a random offset of a larger field
  int embed_height = 0;
  std::uint64_t seed = 0;

  std::string input;
  std::string output;
  InputFormat format = InputFormat::automatic;

  std::int64_t effective_attention_interval() const {
    return attention_interval_us > 0 ? attention_interval_us : 4 * peaks.bin_us;
  }
};

// Ordered key/value assignments, as read from a file or command line.
using ConfigAssignments = std::vector<std::pair<std::string, std::string>>;

namespace detail {

inline std::string trim(std::string s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

template <typename T>
T parse_number(const std::string& key, const std::string& value) {
  std::istringstream in(value);
  T out{};
  in >> out;
  if (in.fail() || !(in >> std::ws).eof()) throw ConfigError(key, "cannot parse '" + value + "'");
  return out;
}

inline bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1" || value == "yes" || value == "on") return true;
  if (value == "false" || value == "0" || value == "no" || value == "off") return false;
  throw ConfigError(key, "expected a boolean, got '" + value + "'");
}

}  // namespace detail

inline ConfigAssignments parse_config_text(const std::string& text) {
  ConfigAssignments out;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("", "line " + std::to_string(line_no) + ": expected key = value");
    out.emplace_back(detail::trim(line.substr(0, eq)), detail::trim(line.substr(eq + 1)));
  }
  return out;
}

inline ConfigAssignments read_config_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open config file " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

inline ConfigAssignments parse_override(const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) throw ConfigError(assignment, "override must be key=value");
  return {{detail::trim(assignment.substr(0, eq)), detail::trim(assignment.substr(eq + 1))}};
}

inline void apply_profile(PipelineConfig& cfg, const DatasetProfile& p) {
  cfg.profile = std::string(p.name);
  cfg.mode = p.mode;
  cfg.region_stride = p.region_stride;
  cfg.region_width = p.region_size;
  cfg.region_height = p.region_size;
  cfg.patch_size = p.patch_size;
  cfg.peaks.window = p.window;
  cfg.peaks.representative = p.representative;
  cfg.peaks.bin_us = p.bin_us;
  cfg.leak = p.leak;
  if (p.width > 0) cfg.geometry = {p.width, p.height};
  if (p.attention_patch_size > 0) cfg.attention_patch_size = p.attention_patch_size;
}

inline void apply_key(PipelineConfig& cfg, const std::string& key, const std::string& value) {
  using detail::parse_bool;
  using detail::parse_number;
  if (key == "profile") {
    const DatasetProfile* p = find_profile(value);
    if (!p) throw ConfigError(key, "unknown profile '" + value + "'");
    apply_profile(cfg, *p);
  } else if (key == "width") {
    cfg.geometry.width = parse_number<int>(key, value);
  } else if (key == "height") {
    cfg.geometry.height = parse_number<int>(key, value);
  } else if (key == "leak") {
    cfg.leak = parse_number<double>(key, value);
  } else if (key == "window") {
    cfg.peaks.window = parse_number<int>(key, value);
  } else if (key == "representative") {
    cfg.peaks.representative = parse_number<int>(key, value);
  } else if (key == "bin_us") {
    cfg.peaks.bin_us = parse_number<std::int64_t>(key, value);
  } else if (key == "alpha") {
    cfg.peaks.alpha = parse_number<double>(key, value);
  } else if (key == "stats_before_test") {
    cfg.peaks.stats_before_test = parse_bool(key, value);
  } else if (key == "region_size") {
    cfg.region_width = cfg.region_height = parse_number<int>(key, value);
  } else if (key == "region_width") {
    cfg.region_width = parse_number<int>(key, value);
  } else if (key == "region_height") {
    cfg.region_height = parse_number<int>(key, value);
  } else if (key == "region_stride") {
    cfg.region_stride = parse_number<int>(key, value);
  } else if (key == "patch_size") {
    cfg.patch_size = parse_number<int>(key, value);
  } else if (key == "mode") {
    const auto m = parse_extraction_mode(value);
    if (!m) throw ConfigError(key, "expected centered, follower or draw-event");
    cfg.mode = *m;
  } else if (key == "threshold") {
    cfg.threshold = parse_number<double>(key, value);
  } else if (key == "mask_grouping") {
    if (value == "closure")
      cfg.grouping = MaskGrouping::closure;
    else if (value == "per-peak")
      cfg.grouping = MaskGrouping::per_peak;
    else
      throw ConfigError(key, "expected closure or per-peak");
  } else if (key == "flush_tail") {
    cfg.flush_tail = parse_bool(key, value);
  } else if (key == "write_frames") {
    cfg.write_frames = parse_bool(key, value);
  } else if (key == "attention_patch_size") {
    cfg.attention_patch_size = parse_number<int>(key, value);
  } else if (key == "attention_interval_us") {
    cfg.attention_interval_us = parse_number<std::int64_t>(key, value);
  } else if (key == "reset_every") {
    cfg.reset_every = parse_number<int>(key, value);
  } else if (key == "controller") {
    if (value == "centroid")
      cfg.controller = ControllerKind::centroid;
    else if (value == "frozen")
      cfg.controller = ControllerKind::frozen;
    else
      throw ConfigError(key, "expected centroid or frozen");
  } else if (key == "ema_decay") {
    cfg.controller_settings.ema_decay = parse_number<double>(key, value);
  } else if (key == "coverage") {
    cfg.controller_settings.coverage = parse_number<double>(key, value);
  } else if (key == "min_span") {
    cfg.controller_settings.min_span = parse_number<double>(key, value);
  } else if (key == "sigma_ratio") {
    cfg.controller_settings.sigma_ratio = parse_number<double>(key, value);
  } else if (key == "controller_batch") {
    cfg.controller_batch = parse_number<int>(key, value);
  } else if (key == "blank_eps") {
    cfg.blank_eps = parse_number<double>(key, value);
  } else if (key == "embed_width") {
    cfg.embed_width = parse_number<int>(key, value);
  } else if (key == "embed_height") {
    cfg.embed_height = parse_number<int>(key, value);
  } else if (key == "seed") {
    cfg.seed = parse_number<std::uint64_t>(key, value);
  } else if (key == "input") {
    cfg.input = value;
  } else if (key == "output") {
    cfg.output = value;
  } else if (key == "format") {
    if (value == "auto")
      cfg.format = InputFormat::automatic;
    else if (value == "aer")
      cfg.format = InputFormat::aer;
    else if (value == "csv")
      cfg.format = InputFormat::csv;
    else
      throw ConfigError(key, "expected auto, aer or csv");
  } else {
    throw ConfigError(key, "unknown configuration key");
  }
}

// Profile first (wherever it was named, last one wins), then every other
// assignment in order.
inline PipelineConfig build_config(const ConfigAssignments& assignments) {
  PipelineConfig cfg;
  for (const auto& [k, v] : assignments)
    if (k == "profile") apply_key(cfg, k, v);
  const std::string profile = cfg.profile;
  for (const auto& [k, v] : assignments)
    if (k != "profile") apply_key(cfg, k, v);
  cfg.profile = profile;
  return cfg;
}

// Field geometry the pipelines run on, after optional embedding.
inline StreamHeader pipeline_geometry(const PipelineConfig& cfg) {
  if (cfg.embed_width > 0 || cfg.embed_height > 0) return {cfg.embed_width, cfg.embed_height};
  return cfg.geometry;
}

inline void validate_config(const PipelineConfig& cfg) {
  const auto require = [](bool ok, const char* key, const std::string& what) {
    if (!ok) throw ConfigError(key, what);
  };
  require(cfg.geometry.width >= 1, "width", "must be set to a positive value");
  require(cfg.geometry.height >= 1, "height", "must be set to a positive value");
  require(cfg.geometry.width <= 4096 && cfg.geometry.height <= 4096, "width", "field of view too large");
  if (cfg.embed_width > 0 || cfg.embed_height > 0) {
    require(cfg.embed_width >= cfg.geometry.width, "embed_width", "must be at least width");
    require(cfg.embed_height >= cfg.geometry.height, "embed_height", "must be at least height");
    require(cfg.embed_width <= 4096 && cfg.embed_height <= 4096, "embed_width", "field of view too large");
  }
  const StreamHeader g = pipeline_geometry(cfg);
  require(cfg.leak >= 0.0 && std::isfinite(cfg.leak), "leak", "must be finite and non-negative");
  require(cfg.peaks.window >= 1, "window", "must be at least 1");
  require(cfg.peaks.representative >= 1 && cfg.peaks.representative <= cfg.peaks.window,
          "representative", "must lie in [1, window]");
  require(cfg.peaks.bin_us >= 1, "bin_us", "must be at least 1");
  require(std::isfinite(cfg.peaks.alpha), "alpha", "must be finite");
  require(cfg.region_width >= 1 && cfg.region_width <= g.width, "region_width",
          "must lie in [1, field width]");
  require(cfg.region_height >= 1 && cfg.region_height <= g.height, "region_height",
          "must lie in [1, field height]");
  require(cfg.region_stride >= 1, "region_stride", "must be at least 1");
  require(cfg.patch_size >= 1 && cfg.patch_size <= std::min(g.width, g.height), "patch_size",
          "must fit inside the field of view");
  require(cfg.threshold > 0.0, "threshold", "must be positive");
  require(cfg.attention_patch_size >= 1, "attention_patch_size", "must be positive");
  require(cfg.attention_interval_us >= 0, "attention_interval_us", "must be non-negative");
  require(cfg.reset_every >= 0, "reset_every", "must be non-negative");
  require(cfg.controller_settings.ema_decay > 0.0 && cfg.controller_settings.ema_decay <= 1.0,
          "ema_decay", "must lie in (0, 1]");
  require(cfg.controller_settings.coverage > 0.0, "coverage", "must be positive");
  require(cfg.controller_settings.min_span >= 0.0, "min_span", "must be non-negative");
  require(cfg.controller_settings.sigma_ratio > 0.0, "sigma_ratio", "must be positive");
  require(cfg.controller_batch >= 1, "controller_batch", "must be at least 1");
  require(cfg.blank_eps >= 0.0, "blank_eps", "must be non-negative");
}

}  // namespace evattn
