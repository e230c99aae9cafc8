#pragma once

// Region-wise event activity and peak detection.
//
// The field of view is tiled by (possibly overlapping) regions. Each region
// counts its events per interval of `bin_us` microseconds and keeps the last
// `window` counts. When an interval closes, a region reports a peak if the
// count at position `representative` of its window (1-based, oldest first) is
// at least every other count in the window and exceeds mu + alpha * sigma, the
// mean and standard deviation of every count of every region seen so far.
//
// The window tested at a closure is made of the `window` intervals that
// precede the one being closed; the just-closed count enters afterwards. A
// peak is therefore reported exactly window - representative + 1 closures
// after its own interval closed.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "evattn/error.hpp"
#include "evattn/event_io.hpp"

namespace evattn {

// Half-open pixel rectangle [x0, x1) x [y0, y1).
struct Box {
  int x0 = 0;
  int y0 = 0;
  int x1 = 0;
  int y1 = 0;

  int width() const noexcept { return x1 - x0; }
  int height() const noexcept { return y1 - y0; }
  bool contains(int x, int y) const noexcept { return x >= x0 && x < x1 && y >= y0 && y < y1; }

  friend bool operator==(const Box&, const Box&) = default;
};

struct RegionGrid {
  int frame_width = 0;
  int frame_height = 0;
  int region_width = 0;
  int region_height = 0;
  int stride = 1;
  int cols = 0;  // regions along x
  int rows = 0;  // regions along y

  std::size_t size() const noexcept { return static_cast<std::size_t>(cols) * rows; }
  std::size_t index(int a, int b) const noexcept { return static_cast<std::size_t>(b) * cols + a; }

  Box rect(int a, int b) const noexcept {
    return {a * stride, b * stride, a * stride + region_width, b * stride + region_height};
  }

  // Calls f(a, b) for every region whose rectangle contains pixel (x, y).
  template <typename F>
  void for_each_containing(int x, int y, F&& f) const {
    const auto span_of = [this](int p, int extent, int count) {
      // a * stride <= p < a * stride + extent
      int lo = p - extent + 1;
      lo = lo <= 0 ? 0 : (lo + stride - 1) / stride;
      const int hi = std::min(p / stride, count - 1);
      return std::pair{lo, hi};
    };
    const auto [a0, a1] = span_of(x, region_width, cols);
    const auto [b0, b1] = span_of(y, region_height, rows);
    for (int b = b0; b <= b1; ++b)
      for (int a = a0; a <= a1; ++a) f(a, b);
  }
};

inline RegionGrid build_grid(const StreamHeader& geometry, int region_width, int region_height,
                             int stride) {
  validate_header(geometry);
  if (stride < 1) throw ValidationError("region stride must be at least 1");
  if (region_width < 1 || region_height < 1) throw ValidationError("region size must be positive");
  if (region_width > geometry.width || region_height > geometry.height)
    throw ValidationError("region " + std::to_string(region_width) + "x" +
                          std::to_string(region_height) + " larger than the field of view");
  RegionGrid g;
  g.frame_width = geometry.width;
  g.frame_height = geometry.height;
  g.region_width = region_width;
  g.region_height = region_height;
  g.stride = stride;
  g.cols = (geometry.width - region_width) / stride + 1;
  g.rows = (geometry.height - region_height) / stride + 1;
  return g;
}

struct PeakSettings {
  int window = 101;
  int representative = 51;  // 1-based, oldest first
  std::int64_t bin_us = 1000;
  double alpha = 2.0;
  // Fold the closing interval into mu/sigma before the peak test (true) or
  // after it (false).
  bool stats_before_test = true;
};

inline void validate_peak_settings(const PeakSettings& s) {
  if (s.window < 1) throw ValidationError("activity window length must be at least 1");
  if (s.representative < 1 || s.representative > s.window)
    throw ValidationError("representative position must lie in [1, window]");
  if (s.bin_us < 1) throw ValidationError("interval length must be at least 1 us");
  if (!std::isfinite(s.alpha)) throw ValidationError("alpha must be finite");
}

struct PeakEvent {
  int region_a = 0;
  int region_b = 0;
  std::int64_t t1 = 0;
  std::int64_t t2 = 0;
  std::uint32_t value = 0;
  std::int64_t interval = 0;     // index of the peak interval
  std::int64_t reported_at = 0;  // index of the closure that reported it
  // Closures between the peak interval and the report, window - representative + 1.
  int frame_delay = 0;

  // Position of the peak interval's frame in a FrameBuffer that holds
  // snapshots up to, but not including, the reporting closure.
  std::size_t buffer_delay() const noexcept { return static_cast<std::size_t>(frame_delay - 1); }

  friend bool operator==(const PeakEvent&, const PeakEvent&) = default;
};

// Sums behind the global activity mean and deviation. Counts are integers so
// both sums stay exact.
struct ActivityStats {
  std::uint64_t sum = 0;
  std::uint64_t sum_sq = 0;
  std::uint64_t intervals = 0;
  std::uint64_t regions = 0;

  std::uint64_t count() const noexcept { return intervals * regions; }

  double mean() const noexcept {
    const auto n = count();
    return n == 0 ? 0.0 : static_cast<double>(sum) / static_cast<double>(n);
  }

  // Negative variance from cancellation is clamped to zero.
  double stddev() const noexcept {
    const auto n = count();
    if (n == 0) return 0.0;
    const double mu = mean();
    const double var = static_cast<double>(sum_sq) / static_cast<double>(n) - mu * mu;
    return var > 0.0 ? std::sqrt(var) : 0.0;
  }
};

class PeakDetector {
 public:
  PeakDetector(RegionGrid grid, PeakSettings settings)
      : grid_(grid),
        settings_(settings),
        counters_(grid.size(), 0),
        windows_(grid.size() * static_cast<std::size_t>(settings.window), 0) {
    validate_peak_settings(settings);
    if (grid.size() == 0) throw ValidationError("region grid is empty");
    stats_.regions = grid.size();
  }

  const RegionGrid& grid() const noexcept { return grid_; }
  const PeakSettings& settings() const noexcept { return settings_; }
  const ActivityStats& stats() const noexcept { return stats_; }

  bool started() const noexcept { return started_; }
  std::int64_t interval_start() const noexcept { return interval_start_; }
  std::int64_t interval_end() const noexcept { return interval_start_ + settings_.bin_us; }
  std::int64_t closed_intervals() const noexcept { return closed_; }
  int frame_delay() const noexcept { return settings_.window - settings_.representative + 1; }

  // Whether an event at `ts` lies past the current interval, which must be
  // closed first.
  bool interval_due(std::int64_t ts) const noexcept { return started_ && ts >= interval_end(); }

  // Starts interval timing at `ts` if no event has been seen yet.
  void start(std::int64_t ts) {
    if (!started_) {
      started_ = true;
      interval_start_ = ts;
    }
  }

  // Counts `e` in every region that contains it. Regressing timestamps are
  // counted in the current interval.
  void record(const Event& e) {
    validate_event(e, {grid_.frame_width, grid_.frame_height});
    start(e.ts);
    grid_.for_each_containing(e.x, e.y, [this](int a, int b) { ++counters_[grid_.index(a, b)]; });
  }

  std::uint32_t current_count(int a, int b) const { return counters_[grid_.index(a, b)]; }

  // Values held in region (a, b)'s window, oldest first.
  std::vector<std::uint32_t> window_values(int a, int b) const {
    std::vector<std::uint32_t> out;
    const std::size_t base = grid_.index(a, b) * static_cast<std::size_t>(settings_.window);
    for (int k = 0; k < filled_; ++k) out.push_back(windows_[base + slot(k)]);
    return out;
  }

  // Closes the current interval and returns the peaks it completes.
  std::vector<PeakEvent> close_interval() {
    if (!started_) throw ValidationError("close_interval before any event");
    if (settings_.stats_before_test) fold_stats();

    std::vector<PeakEvent> peaks;
    if (filled_ == settings_.window) test_windows(peaks);
    if (!settings_.stats_before_test) fold_stats();

    // Append the closing interval's counts, evicting the oldest when full.
    const auto w = static_cast<std::size_t>(settings_.window);
    const std::size_t write = filled_ == settings_.window ? head_ : slot(filled_);
    for (std::size_t r = 0; r < counters_.size(); ++r) windows_[r * w + write] = counters_[r];
    if (filled_ == settings_.window)
      head_ = (head_ + 1) % w;
    else
      ++filled_;

    std::fill(counters_.begin(), counters_.end(), 0u);
    interval_start_ += settings_.bin_us;
    ++closed_;
    return peaks;
  }

 private:
  std::size_t slot(int k) const noexcept {
    return (head_ + static_cast<std::size_t>(k)) % static_cast<std::size_t>(settings_.window);
  }

  void fold_stats() {
    for (std::uint32_t v : counters_) {
      stats_.sum += v;
      stats_.sum_sq += static_cast<std::uint64_t>(v) * v;
    }
    ++stats_.intervals;
  }

  void test_windows(std::vector<PeakEvent>& peaks) const {
    const double gate = stats_.mean() + settings_.alpha * stats_.stddev();
    const auto w = static_cast<std::size_t>(settings_.window);
    const std::size_t rep_slot = slot(settings_.representative - 1);
    const std::int64_t delay = frame_delay();
    for (int b = 0; b < grid_.rows; ++b) {
      for (int a = 0; a < grid_.cols; ++a) {
        const std::size_t base = grid_.index(a, b) * w;
        const std::uint32_t rep = windows_[base + rep_slot];
        if (!(static_cast<double>(rep) > gate)) continue;
        const auto first = windows_.begin() + static_cast<std::ptrdiff_t>(base);
        if (*std::max_element(first, first + static_cast<std::ptrdiff_t>(w)) > rep) continue;
        PeakEvent p;
        p.region_a = a;
        p.region_b = b;
        p.interval = closed_ - delay;
        p.reported_at = closed_;
        p.t1 = interval_start_ - delay * settings_.bin_us;
        p.t2 = p.t1 + settings_.bin_us;
        p.value = rep;
        p.frame_delay = static_cast<int>(delay);
        peaks.push_back(p);
      }
    }
  }

  RegionGrid grid_;
  PeakSettings settings_;
  std::vector<std::uint32_t> counters_;
  std::vector<std::uint32_t> windows_;  // region-major ring buffers
  std::size_t head_ = 0;                // slot of the oldest value
  int filled_ = 0;
  ActivityStats stats_;
  bool started_ = false;
  std::int64_t interval_start_ = 0;
  std::int64_t closed_ = 0;
};

}  // namespace evattn
