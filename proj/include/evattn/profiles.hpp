#pragma once

// Named parameter sets for the shipped datasets: region stride, region size
// and patch size for each extraction mode, plus the activity window used for
// that dataset family.

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace evattn {

enum class ExtractionMode { centered, follower, draw_event };

inline std::string_view to_string(ExtractionMode m) {
  switch (m) {
    case ExtractionMode::centered: return "centered";
    case ExtractionMode::follower: return "follower";
    case ExtractionMode::draw_event: return "draw-event";
  }
  return "unknown";
}

inline std::optional<ExtractionMode> parse_extraction_mode(std::string_view s) {
  if (s == "centered") return ExtractionMode::centered;
  if (s == "follower") return ExtractionMode::follower;
  if (s == "draw-event") return ExtractionMode::draw_event;
  return std::nullopt;
}

struct DatasetProfile {
  std::string_view name;     // "<dataset>-<mode>"
  std::string_view dataset;  // sdvs-sc4, sdvs-sc8, sdvs-sc16, sdvs-sc4+8, sdvs-all, sn, cif10, cal101
  ExtractionMode mode;
  int region_stride;
  int region_size;  // regions are square
  int patch_size;
  int window;
  int representative;
  std::int64_t bin_us;
  // Leak rate in value units per microsecond. A pixel at 1.0 empties in
  // 1 / leak us; 1e-5 drains a saccade-length (100 ms) trace.
  double leak;
  int width;   // default field of view, 0 when the dataset has none
  int height;
  int attention_patch_size;  // N for the attention pipeline, 0 when unset
};

namespace detail {

inline constexpr int kNmnistWindow = 101;
inline constexpr int kNmnistRepresentative = 51;
inline constexpr int kDvsWindow = 81;
inline constexpr int kDvsRepresentative = 41;
inline constexpr std::int64_t kBinUs = 1000;
inline constexpr double kDefaultLeak = 1e-5;

}  // namespace detail

inline constexpr std::array<DatasetProfile, 16> kProfiles{{
    // name                 dataset        mode                      s_r  W_r  N    L_w                       R_w                               L_bin           leak                 W    H   N_att
    {"sdvs-sc4-centered",   "sdvs-sc4",    ExtractionMode::centered, 11,  24,  29,  detail::kDvsWindow,    detail::kDvsRepresentative,    detail::kBinUs, detail::kDefaultLeak, 0,   0,   12},
    {"sdvs-sc8-centered",   "sdvs-sc8",    ExtractionMode::centered, 24,  32,  55,  detail::kDvsWindow,    detail::kDvsRepresentative,    detail::kBinUs, detail::kDefaultLeak, 0,   0,   24},
    {"sdvs-sc16-centered",  "sdvs-sc16",   ExtractionMode::centered, 24,  32,  105, detail::kDvsWindow,    detail::kDvsRepresentative,    detail::kBinUs, detail::kDefaultLeak, 0,   0,   48},
    {"sdvs-sc4+8-centered", "sdvs-sc4+8",  ExtractionMode::centered, 24,  32,  55,  detail::kDvsWindow,    detail::kDvsRepresentative,    detail::kBinUs, detail::kDefaultLeak, 0,   0,   0},
    {"sdvs-all-centered",   "sdvs-all",    ExtractionMode::centered, 24,  32,  105, detail::kDvsWindow,    detail::kDvsRepresentative,    detail::kBinUs, detail::kDefaultLeak, 0,   0,   0},
    {"sn-centered",         "sn",          ExtractionMode::centered, 5,   23,  29,  detail::kNmnistWindow, detail::kNmnistRepresentative, detail::kBinUs, detail::kDefaultLeak, 68,  68,  12},
    {"cif10-centered",      "cif10",       ExtractionMode::centered, 10,  48,  105, detail::kNmnistWindow, detail::kNmnistRepresentative, detail::kBinUs, detail::kDefaultLeak, 128, 128, 48},
    {"cal101-centered",     "cal101",      ExtractionMode::centered, 10,  48,  105, detail::kNmnistWindow, detail::kNmnistRepresentative, detail::kBinUs, detail::kDefaultLeak, 128, 128, 48},
    {"sdvs-sc4-follower",   "sdvs-sc4",    ExtractionMode::follower, 5,   9,   13,  detail::kDvsWindow,    detail::kDvsRepresentative,    detail::kBinUs, detail::kDefaultLeak, 0,   0,   12},
    {"sdvs-sc8-follower",   "sdvs-sc8",    ExtractionMode::follower, 15,  23,  23,  detail::kDvsWindow,    detail::kDvsRepresentative,    detail::kBinUs, detail::kDefaultLeak, 0,   0,   24},
    {"sdvs-sc16-follower",  "sdvs-sc16",   ExtractionMode::follower, 24,  32,  53,  detail::kDvsWindow,    detail::kDvsRepresentative,    detail::kBinUs, detail::kDefaultLeak, 0,   0,   48},
    {"sdvs-sc4+8-follower", "sdvs-sc4+8",  ExtractionMode::follower, 24,  32,  23,  detail::kDvsWindow,    detail::kDvsRepresentative,    detail::kBinUs, detail::kDefaultLeak, 0,   0,   0},
    {"sdvs-all-follower",   "sdvs-all",    ExtractionMode::follower, 24,  32,  53,  detail::kDvsWindow,    detail::kDvsRepresentative,    detail::kBinUs, detail::kDefaultLeak, 0,   0,   0},
    {"sn-follower",         "sn",          ExtractionMode::follower, 5,   9,   13,  detail::kNmnistWindow, detail::kNmnistRepresentative, detail::kBinUs, detail::kDefaultLeak, 68,  68,  12},
    {"cif10-follower",      "cif10",       ExtractionMode::follower, 12,  32,  75,  detail::kNmnistWindow, detail::kNmnistRepresentative, detail::kBinUs, detail::kDefaultLeak, 128, 128, 48},
    {"cal101-follower",     "cal101",      ExtractionMode::follower, 12,  32,  75,  detail::kNmnistWindow, detail::kNmnistRepresentative, detail::kBinUs, detail::kDefaultLeak, 128, 128, 48},
}};

inline const DatasetProfile* find_profile(std::string_view name) {
  for (const DatasetProfile& p : kProfiles)
    if (p.name == name) return &p;
  return nullptr;
}

}  // namespace evattn
