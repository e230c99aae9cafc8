#pragma once

// Leaky frame integration. Every event decays the whole frame linearly by
// lambda * dt (clamped at zero) and adds one to the pixel it hits.
//
// Decay is applied lazily: each pixel remembers the time it was last brought
// up to date, and max(max(p - l*a, 0) - l*b, 0) == max(p - l*(a + b), 0) for
// p >= 0 lets one subtraction stand in for the whole chain.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include "evattn/error.hpp"
#include "evattn/event_io.hpp"

namespace evattn {

// Dense row-major image of non-negative values.
struct Frame {
  int width = 0;
  int height = 0;
  std::vector<double> values;
  std::int64_t ts = 0;

  Frame() = default;
  Frame(int w, int h, std::int64_t t = 0)
      : width(w), height(h), values(static_cast<std::size_t>(w) * static_cast<std::size_t>(h), 0.0), ts(t) {}

  double& at(int x, int y) { return values[static_cast<std::size_t>(y) * width + x]; }
  double at(int x, int y) const { return values[static_cast<std::size_t>(y) * width + x]; }

  double max_value() const {
    return values.empty() ? 0.0 : *std::max_element(values.begin(), values.end());
  }
};

class Integrator {
 public:
  static constexpr double kIncrement = 1.0;

  Integrator(StreamHeader geometry, double leak_per_us)
      : geometry_(geometry),
        leak_(leak_per_us),
        value_(static_cast<std::size_t>(geometry.width) * geometry.height, 0.0),
        touched_(value_.size(), 0) {
    validate_header(geometry);
    if (!(leak_per_us >= 0.0) || !std::isfinite(leak_per_us))
      throw ValidationError("leak rate must be a finite non-negative number");
  }

  const StreamHeader& geometry() const noexcept { return geometry_; }
  double leak() const noexcept { return leak_; }

  // Time the frame is currently evaluated at. Regressing timestamps never move
  // it backwards, which is the same as treating their dt as zero.
  std::int64_t clock() const noexcept { return clock_; }
  bool started() const noexcept { return started_; }

  void apply(const Event& e) {
    validate_event(e, geometry_);
    if (!started_) {
      started_ = true;
      clock_ = e.ts;
      std::fill(touched_.begin(), touched_.end(), clock_);
    } else {
      clock_ = std::max(clock_, e.ts);
    }
    const std::size_t i = index(e.x, e.y);
    value_[i] = decayed(i, clock_) + kIncrement;
    touched_[i] = clock_;
  }

  // Pixel value at the current clock.
  double value(int x, int y) const { return decayed(index(x, y), clock_); }

  // Dense frame evaluated at `ts`; times before the clock read as the clock.
  Frame snapshot(std::int64_t ts) const {
    const std::int64_t at = started_ ? std::max(ts, clock_) : ts;
    Frame f(geometry_.width, geometry_.height, ts);
    if (!started_) return f;
    for (std::size_t i = 0; i < value_.size(); ++i) f.values[i] = decayed(i, at);
    return f;
  }

  Frame snapshot() const { return snapshot(clock_); }

 private:
  std::size_t index(int x, int y) const {
    return static_cast<std::size_t>(y) * geometry_.width + x;
  }

  double decayed(std::size_t i, std::int64_t at) const {
    const double v = value_[i];
    if (v == 0.0) return 0.0;
    return std::max(v - leak_ * static_cast<double>(at - touched_[i]), 0.0);
  }

  StreamHeader geometry_;
  double leak_;
  std::vector<double> value_;
  std::vector<std::int64_t> touched_;
  std::int64_t clock_ = 0;
  bool started_ = false;
};

// Ring of interval-end snapshots, newest first. A peak is reported some
// intervals after it happens, so the frame it refers to has to be kept.
class FrameBuffer {
 public:
  explicit FrameBuffer(std::size_t capacity) : capacity_(capacity) {
    if (capacity == 0) throw ValidationError("frame buffer capacity must be positive");
  }

  // Capacity needed to reach back to a representative value at position
  // `representative` (1-based, oldest first) of a window of `window` values.
  static std::size_t capacity_for(int window, int representative) {
    return static_cast<std::size_t>(window - representative + 1);
  }

  std::size_t capacity() const noexcept { return capacity_; }
  std::size_t size() const noexcept { return frames_.size(); }

  void push(Frame f) {
    if (!frames_.empty() && f.ts < frames_.front().ts)
      throw ValidationError("frame buffer snapshots must be pushed in time order");
    frames_.push_front(std::move(f));
    if (frames_.size() > capacity_) frames_.pop_back();
  }

  // Snapshot pushed `k` pushes ago (0 = newest), or nullptr while the buffer
  // does not yet hold k + 1 frames.
  const Frame* frame_at_delay(std::size_t k) const {
    if (k >= capacity_) throw ValidationError("delay " + std::to_string(k) + " beyond buffer capacity");
    if (k >= frames_.size()) return nullptr;
    return &frames_[k];
  }

 private:
  std::size_t capacity_;
  std::deque<Frame> frames_;
};

// --- PGM export ---------------------------------------------------------------
//
// Binary P5 with maxval 65535 (two bytes per sample, big-endian). The comment
// line `# scale=<s>` records the value mapped to 65535; a sample k decodes to
// k / 65535 * s. The scale is the frame maximum, or 1 for an all-zero frame.

inline constexpr int kPgmMaxval = 65535;

inline std::string encode_pgm(int width, int height, const std::vector<double>& values) {
  double scale = 0.0;
  for (double v : values) scale = std::max(scale, v);
  if (!(scale > 0.0)) scale = 1.0;

  std::ostringstream head;
  head << "P5\n# scale=" << std::setprecision(17) << scale << "\n"
       << width << ' ' << height << "\n" << kPgmMaxval << "\n";
  std::string out = head.str();
  out.reserve(out.size() + values.size() * 2);
  for (double v : values) {
    const auto k = static_cast<std::uint16_t>(
        std::lround(std::clamp(v / scale, 0.0, 1.0) * kPgmMaxval));
    out.push_back(static_cast<char>(k >> 8));
    out.push_back(static_cast<char>(k & 0xFF));
  }
  return out;
}

inline std::string encode_pgm(const Frame& f) { return encode_pgm(f.width, f.height, f.values); }

struct PgmImage {
  int width = 0;
  int height = 0;
  double scale = 1.0;
  std::vector<double> values;
};

inline PgmImage decode_pgm(const std::string& data) {
  std::size_t pos = 0;
  auto skip_space_and_comments = [&](PgmImage& img) {
    for (;;) {
      while (pos < data.size() && std::isspace(static_cast<unsigned char>(data[pos]))) ++pos;
      if (pos < data.size() && data[pos] == '#') {
        const std::size_t eol = data.find('\n', pos);
        const std::string comment = data.substr(pos, eol == std::string::npos ? eol : eol - pos);
        if (comment.rfind("# scale=", 0) == 0) img.scale = std::stod(comment.substr(8));
        pos = eol == std::string::npos ? data.size() : eol + 1;
      } else {
        return;
      }
    }
  };
  auto read_int = [&](PgmImage& img) {
    skip_space_and_comments(img);
    std::size_t used = 0;
    int v = 0;
    try {
      v = std::stoi(data.substr(pos, 16), &used);
    } catch (const std::exception&) {
      throw DecodeError("PGM header: expected integer", pos);
    }
    pos += used;
    return v;
  };

  if (data.rfind("P5", 0) != 0) throw DecodeError("not a binary PGM (P5) file", 0);
  pos = 2;
  PgmImage img;
  img.width = read_int(img);
  img.height = read_int(img);
  const int maxval = read_int(img);
  if (img.width < 1 || img.height < 1 || maxval < 1 || maxval > 65535)
    throw DecodeError("PGM header: bad dimensions or maxval", pos);
  ++pos;  // single whitespace before the raster
  const std::size_t bytes_per = maxval > 255 ? 2 : 1;
  const std::size_t n = static_cast<std::size_t>(img.width) * img.height;
  if (data.size() < pos + n * bytes_per) throw DecodeError("PGM raster truncated", data.size());
  img.values.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    unsigned k = static_cast<unsigned char>(data[pos + i * bytes_per]);
    if (bytes_per == 2) k = (k << 8) | static_cast<unsigned char>(data[pos + i * 2 + 1]);
    img.values[i] = static_cast<double>(k) / maxval * img.scale;
  }
  return img;
}

}  // namespace evattn
