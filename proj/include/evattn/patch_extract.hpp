#pragma once

// Patch placement on reconstructed frames.
//
// Centered extraction merges active regions into macro-regions and covers
// each with equally spaced N x N patches. Follower extraction walks the
// above-threshold pixels of a macro-region and drops a patch on every pixel
// that no earlier patch covers.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "evattn/activity.hpp"
#include "evattn/error.hpp"
#include "evattn/integrator.hpp"

namespace evattn {

enum class PatchSource { centered, follower, draw };

inline std::string_view to_string(PatchSource s) {
  switch (s) {
    case PatchSource::centered: return "centered";
    case PatchSource::follower: return "follower";
    case PatchSource::draw: return "draw";
  }
  return "unknown";
}

struct PatchOrigin {
  int x = 0;
  int y = 0;

  friend bool operator==(const PatchOrigin&, const PatchOrigin&) = default;
};

struct PatchRecord {
  int n = 0;
  std::vector<double> pixels;  // n x n, row-major
  std::int64_t ts = 0;
  PatchOrigin origin;
  PatchSource source = PatchSource::centered;

  double at(int x, int y) const { return pixels[static_cast<std::size_t>(y) * n + x]; }
};

// Which regions of a grid peaked, indexed like RegionGrid::index.
class ActiveMask {
 public:
  explicit ActiveMask(const RegionGrid& grid)
      : cols_(grid.cols), rows_(grid.rows), cells_(grid.size(), 0) {}
  ActiveMask(int cols, int rows) : cols_(cols), rows_(rows), cells_(static_cast<std::size_t>(cols) * rows, 0) {}

  int cols() const noexcept { return cols_; }
  int rows() const noexcept { return rows_; }

  bool get(int a, int b) const { return cells_[static_cast<std::size_t>(b) * cols_ + a] != 0; }
  void set(int a, int b, bool on = true) { cells_[static_cast<std::size_t>(b) * cols_ + a] = on ? 1 : 0; }

  bool any() const { return std::any_of(cells_.begin(), cells_.end(), [](auto c) { return c != 0; }); }

 private:
  int cols_;
  int rows_;
  std::vector<std::uint8_t> cells_;
};

inline ActiveMask mask_from_peaks(const RegionGrid& grid, const std::vector<PeakEvent>& peaks) {
  ActiveMask m(grid);
  for (const PeakEvent& p : peaks) m.set(p.region_a, p.region_b);
  return m;
}

// Pixel bounding boxes of the 8-connected components of active cells, in the
// order their first cell is met by a row-major scan.
inline std::vector<Box> macro_regions(const ActiveMask& mask, const RegionGrid& grid) {
  if (mask.cols() != grid.cols || mask.rows() != grid.rows)
    throw ValidationError("active mask does not match the region grid");
  std::vector<int> label(grid.size(), -1);
  std::vector<Box> boxes;
  std::vector<std::pair<int, int>> stack;
  for (int b = 0; b < grid.rows; ++b) {
    for (int a = 0; a < grid.cols; ++a) {
      if (!mask.get(a, b) || label[grid.index(a, b)] >= 0) continue;
      const int id = static_cast<int>(boxes.size());
      Box box = grid.rect(a, b);
      label[grid.index(a, b)] = id;
      stack.assign(1, {a, b});
      while (!stack.empty()) {
        const auto [ca, cb] = stack.back();
        stack.pop_back();
        const Box r = grid.rect(ca, cb);
        box = {std::min(box.x0, r.x0), std::min(box.y0, r.y0), std::max(box.x1, r.x1),
               std::max(box.y1, r.y1)};
        for (int db = -1; db <= 1; ++db) {
          for (int da = -1; da <= 1; ++da) {
            const int na = ca + da;
            const int nb = cb + db;
            if (na < 0 || nb < 0 || na >= grid.cols || nb >= grid.rows) continue;
            if (!mask.get(na, nb) || label[grid.index(na, nb)] >= 0) continue;
            label[grid.index(na, nb)] = id;
            stack.emplace_back(na, nb);
          }
        }
      }
      boxes.push_back(box);
    }
  }
  return boxes;
}

namespace detail {

inline int clamp_origin(int p, int n, int extent) { return std::clamp(p, 0, std::max(extent - n, 0)); }

// Patch starts along one axis for the span [lo, hi).
inline std::vector<int> spaced_positions(int lo, int hi, int n, int extent) {
  const int span = hi - lo;
  const int count = std::max(1, (span + n - 1) / n);
  std::vector<int> out;
  out.reserve(static_cast<std::size_t>(count));
  if (count == 1) {
    const int centred = lo + static_cast<int>(std::floor((span - n) / 2.0));
    out.push_back(clamp_origin(centred, n, extent));
    return out;
  }
  const double step = static_cast<double>(span - n) / (count - 1);
  for (int i = 0; i < count; ++i)
    out.push_back(clamp_origin(lo + static_cast<int>(std::lround(i * step)), n, extent));
  return out;
}

inline void require_patch_fits(int n, int width, int height) {
  if (n < 1) throw ValidationError("patch size must be positive");
  if (n > width || n > height)
    throw ValidationError("patch size " + std::to_string(n) + " exceeds the " +
                          std::to_string(width) + "x" + std::to_string(height) + " frame");
}

}  // namespace detail

// Equally spaced N x N patch origins covering `box`: ceil(extent / N) per axis
// (at least one), first at the box start and last flush with its end. A
// single patch is centred on the box. Origins are clamped into the frame.
inline std::vector<PatchOrigin> centered_patches(const Box& box, int n, const StreamHeader& geometry) {
  detail::require_patch_fits(n, geometry.width, geometry.height);
  const auto xs = detail::spaced_positions(box.x0, box.x1, n, geometry.width);
  const auto ys = detail::spaced_positions(box.y0, box.y1, n, geometry.height);
  std::vector<PatchOrigin> out;
  out.reserve(xs.size() * ys.size());
  for (int y : ys)
    for (int x : xs) out.push_back({x, y});
  return out;
}

// Row-major walk over the pixels of `region` whose value is >= threshold. A
// pixel no earlier patch covers gets an N x N patch centred on it (clamped to
// the frame), so every such pixel ends up covered.
inline std::vector<PatchOrigin> follower_patches(const Frame& frame, const Box& region,
                                                 double threshold, int n) {
  detail::require_patch_fits(n, frame.width, frame.height);
  if (!(threshold > 0.0)) throw ValidationError("follower threshold must be positive");
  const Box r{std::max(region.x0, 0), std::max(region.y0, 0), std::min(region.x1, frame.width),
              std::min(region.y1, frame.height)};
  std::vector<std::uint8_t> covered(frame.values.size(), 0);
  std::vector<PatchOrigin> out;
  for (int y = r.y0; y < r.y1; ++y) {
    for (int x = r.x0; x < r.x1; ++x) {
      const std::size_t i = static_cast<std::size_t>(y) * frame.width + x;
      if (covered[i] || frame.values[i] < threshold) continue;
      const PatchOrigin o{detail::clamp_origin(x - n / 2, n, frame.width),
                          detail::clamp_origin(y - n / 2, n, frame.height)};
      out.push_back(o);
      for (int py = o.y; py < o.y + n; ++py)
        std::fill_n(covered.begin() + static_cast<std::ptrdiff_t>(py) * frame.width + o.x, n, 1);
    }
  }
  return out;
}

inline std::vector<PatchOrigin> follower_patches(const Frame& frame, double threshold, int n) {
  return follower_patches(frame, Box{0, 0, frame.width, frame.height}, threshold, n);
}

inline PatchRecord crop(const Frame& frame, PatchOrigin origin, int n,
                        PatchSource source = PatchSource::centered) {
  detail::require_patch_fits(n, frame.width, frame.height);
  PatchRecord p;
  p.n = n;
  p.ts = frame.ts;
  p.source = source;
  p.origin = {detail::clamp_origin(origin.x, n, frame.width),
              detail::clamp_origin(origin.y, n, frame.height)};
  p.pixels.resize(static_cast<std::size_t>(n) * n);
  for (int y = 0; y < n; ++y) {
    const auto row = frame.values.begin() +
                     static_cast<std::ptrdiff_t>(p.origin.y + y) * frame.width + p.origin.x;
    std::copy_n(row, n, p.pixels.begin() + static_cast<std::ptrdiff_t>(y) * n);
  }
  return p;
}

}  // namespace evattn
