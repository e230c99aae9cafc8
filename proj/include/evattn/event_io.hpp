#pragma once

// Event streams: the AER binary and CSV codecs, shifted-field embedding and a
// synthetic saccade generator used as a test fixture.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "evattn/error.hpp"
#include "evattn/rng.hpp"

namespace evattn {

struct Event {
  int x = 0;
  int y = 0;
  std::int64_t ts = 0;  // microseconds
  int polarity = 1;     // -1 or +1

  friend bool operator==(const Event&, const Event&) = default;
};

// Field-of-view geometry of a stream.
struct StreamHeader {
  int width = 0;
  int height = 0;

  bool contains(int x, int y) const noexcept {
    return x >= 0 && y >= 0 && x < width && y < height;
  }

  friend bool operator==(const StreamHeader&, const StreamHeader&) = default;
};

inline void validate_header(const StreamHeader& h) {
  if (h.width < 1 || h.height < 1)
    throw ValidationError("stream geometry must be at least 1x1, got " +
                          std::to_string(h.width) + "x" + std::to_string(h.height));
}

inline void validate_event(const Event& e, const StreamHeader& h) {
  if (!h.contains(e.x, e.y))
    throw ValidationError("event (" + std::to_string(e.x) + ", " + std::to_string(e.y) +
                          ") outside " + std::to_string(h.width) + "x" +
                          std::to_string(h.height) + " field of view");
}

// --- AER binary -------------------------------------------------------------
//
// 5 bytes per event: x, y, then a 24-bit big-endian word whose top bit is the
// polarity (1 -> +1, 0 -> -1) and whose low 23 bits are the timestamp in us.

inline constexpr std::size_t kAerRecordSize = 5;
inline constexpr std::int64_t kAerMaxTimestamp = (std::int64_t{1} << 23) - 1;

inline Event decode_aer_record(std::span<const std::uint8_t, kAerRecordSize> r) {
  Event e;
  e.x = r[0];
  e.y = r[1];
  e.polarity = (r[2] & 0x80) ? 1 : -1;
  e.ts = (std::int64_t{r[2] & 0x7F} << 16) | (std::int64_t{r[3]} << 8) | r[4];
  return e;
}

inline std::vector<Event> read_aer_bin(std::span<const std::uint8_t> bytes,
                                       const StreamHeader& header) {
  validate_header(header);
  const std::size_t whole = bytes.size() / kAerRecordSize * kAerRecordSize;
  if (whole != bytes.size())
    throw DecodeError("truncated AER record at byte offset " + std::to_string(whole), whole);

  std::vector<Event> events;
  events.reserve(bytes.size() / kAerRecordSize);
  for (std::size_t off = 0; off < bytes.size(); off += kAerRecordSize) {
    const Event e = decode_aer_record(bytes.subspan(off).first<kAerRecordSize>());
    if (!header.contains(e.x, e.y))
      throw ValidationError("AER record at byte offset " + std::to_string(off) +
                            " has coordinates (" + std::to_string(e.x) + ", " +
                            std::to_string(e.y) + ") outside the field of view");
    events.push_back(e);
  }
  return events;
}

inline std::vector<std::uint8_t> write_aer_bin(std::span<const Event> events) {
  std::vector<std::uint8_t> out;
  out.reserve(events.size() * kAerRecordSize);
  for (const Event& e : events) {
    if (e.x < 0 || e.x > 255 || e.y < 0 || e.y > 255)
      throw ValidationError("AER coordinates must fit in one byte");
    if (e.ts < 0 || e.ts > kAerMaxTimestamp)
      throw ValidationError("AER timestamp " + std::to_string(e.ts) + " exceeds 23 bits");
    const auto ts = static_cast<std::uint32_t>(e.ts);
    out.push_back(static_cast<std::uint8_t>(e.x));
    out.push_back(static_cast<std::uint8_t>(e.y));
    out.push_back(static_cast<std::uint8_t>(((ts >> 16) & 0x7F) | (e.polarity > 0 ? 0x80 : 0)));
    out.push_back(static_cast<std::uint8_t>((ts >> 8) & 0xFF));
    out.push_back(static_cast<std::uint8_t>(ts & 0xFF));
  }
  return out;
}

// --- CSV --------------------------------------------------------------------

struct CsvStream {
  std::vector<Event> events;
  // Set when some timestamp is smaller than its predecessor. Events keep file
  // order regardless.
  bool non_monotone = false;
};

namespace detail {

template <typename T>
bool parse_field(std::string_view s, T& out) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
  if (s.empty()) return false;
  if (s.front() == '+') s.remove_prefix(1);
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

}  // namespace detail

inline CsvStream read_csv(std::string_view text, const StreamHeader& header) {
  validate_header(header);
  CsvStream stream;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.find_first_not_of(" \t") == std::string_view::npos) continue;
    if (line.front() == '#') continue;

    if (std::count(line.begin(), line.end(), ',') != 3)
      throw DecodeError("line " + std::to_string(line_no) + ": expected 4 fields x,y,ts_us,polarity",
                        line_no);
    std::string_view fields[4];
    for (std::size_t i = 0, start = 0; i < 4; ++i) {
      const std::size_t comma = line.find(',', start);
      fields[i] = line.substr(start, comma == std::string_view::npos ? line.npos : comma - start);
      start = comma + 1;
    }

    Event e;
    if (!detail::parse_field(fields[0], e.x) || !detail::parse_field(fields[1], e.y) ||
        !detail::parse_field(fields[2], e.ts) || !detail::parse_field(fields[3], e.polarity))
      throw DecodeError("line " + std::to_string(line_no) + ": non-integer field", line_no);
    if (e.polarity != 1 && e.polarity != -1)
      throw DecodeError("line " + std::to_string(line_no) + ": polarity must be -1 or 1", line_no);
    if (e.ts < 0)
      throw DecodeError("line " + std::to_string(line_no) + ": negative timestamp", line_no);
    if (!header.contains(e.x, e.y))
      throw ValidationError("line " + std::to_string(line_no) + ": coordinates (" +
                            std::to_string(e.x) + ", " + std::to_string(e.y) +
                            ") outside the field of view");
    if (!stream.events.empty() && e.ts < stream.events.back().ts) stream.non_monotone = true;
    stream.events.push_back(e);
  }
  return stream;
}

inline std::string write_csv(std::span<const Event> events) {
  std::string out = "# x,y,ts_us,polarity\n";
  for (const Event& e : events) {
    out += std::to_string(e.x);
    out += ',';
    out += std::to_string(e.y);
    out += ',';
    out += std::to_string(e.ts);
    out += ',';
    out += e.polarity > 0 ? "1" : "-1";
    out += '\n';
  }
  return out;
}

// --- Shifted field of view --------------------------------------------------

struct Offset {
  int dx = 0;
  int dy = 0;

  friend bool operator==(const Offset&, const Offset&) = default;
};

// Uniform over every legal placement of `src` inside `dst`: dx is drawn
// first, then dy, each with Rng::below.
inline Offset random_offset(const StreamHeader& src, const StreamHeader& dst, std::uint64_t seed) {
  validate_header(src);
  validate_header(dst);
  if (src.width > dst.width || src.height > dst.height)
    throw ValidationError("source field of view larger than destination");
  Rng rng(seed);
  Offset o;
  o.dx = static_cast<int>(rng.below(static_cast<std::uint64_t>(dst.width - src.width + 1)));
  o.dy = static_cast<int>(rng.below(static_cast<std::uint64_t>(dst.height - src.height + 1)));
  return o;
}

inline std::vector<Event> shift_embed(std::span<const Event> events, const StreamHeader& src,
                                      const StreamHeader& dst, Offset offset) {
  validate_header(src);
  validate_header(dst);
  if (offset.dx < 0 || offset.dy < 0 || offset.dx + src.width > dst.width ||
      offset.dy + src.height > dst.height)
    throw ValidationError("offset (" + std::to_string(offset.dx) + ", " +
                          std::to_string(offset.dy) + ") places the source outside the destination");
  std::vector<Event> out;
  out.reserve(events.size());
  for (Event e : events) {
    validate_event(e, src);
    e.x += offset.dx;
    e.y += offset.dy;
    out.push_back(e);
  }
  return out;
}

// --- Synthetic saccade recording --------------------------------------------

struct Point2 {
  double x = 0.0;
  double y = 0.0;
};

struct SaccadeSpec {
  StreamHeader geometry{34, 34};
  double blob_radius = 5.0;  // pixels
  int n_saccades = 3;
  double saccade_ms = 100.0;
  double rate = 10.0;  // mean events per millisecond
  std::uint64_t seed = 1;
};

inline void validate_saccade_spec(const SaccadeSpec& s) {
  validate_header(s.geometry);
  if (!(s.blob_radius > 0) || s.n_saccades < 1 || !(s.saccade_ms > 0) || !(s.rate > 0))
    throw ValidationError("saccade parameters must be positive");
  if (2.0 * s.blob_radius + 1.0 > std::min(s.geometry.width, s.geometry.height))
    throw ValidationError("field of view too small for a blob of radius " +
                          std::to_string(s.blob_radius));
}

// n_saccades + 1 waypoints; the blob centre moves from waypoint k to k + 1
// during saccade k. Waypoints are uniform over the centres that keep the
// whole blob inside the field of view. Uses its own generator stream
// (seed ^ 0x5ACCADE) so event jitter does not shift the trajectory.
inline std::vector<Point2> saccade_waypoints(const SaccadeSpec& s) {
  validate_saccade_spec(s);
  Rng rng(s.seed ^ 0x5ACCADEull);
  const double r = s.blob_radius;
  std::vector<Point2> pts(static_cast<std::size_t>(s.n_saccades) + 1);
  for (Point2& p : pts) {
    p.x = rng.uniform(r, s.geometry.width - 1 - r);
    p.y = rng.uniform(r, s.geometry.height - 1 - r);
  }
  return pts;
}

// A blob that stays at `centre`, by default the middle of the field of view.
inline std::vector<Point2> stationary_waypoints(const SaccadeSpec& s, std::optional<Point2> centre = std::nullopt) {
  validate_saccade_spec(s);
  const Point2 c = centre.value_or(Point2{(s.geometry.width - 1) / 2.0, (s.geometry.height - 1) / 2.0});
  const double r = s.blob_radius;
  if (c.x < r || c.y < r || c.x > s.geometry.width - 1 - r || c.y > s.geometry.height - 1 - r)
    throw ValidationError("blob centre too close to the border");
  return std::vector<Point2>(static_cast<std::size_t>(s.n_saccades) + 1, c);
}

// Position of `ts_us` within its saccade, in [0, 1], and the saccade index.
inline std::pair<std::size_t, double> saccade_phase(std::size_t n_saccades, double saccade_ms, double ts_us) {
  const double saccade_us = saccade_ms * 1000.0;
  const double k = std::clamp(std::floor(ts_us / saccade_us), 0.0, static_cast<double>(n_saccades) - 1.0);
  return {static_cast<std::size_t>(k), std::clamp(ts_us / saccade_us - k, 0.0, 1.0)};
}

// Each saccade starts and ends at rest: the covered fraction of the segment is
// u - sin(2 pi u) / (2 pi), so the speed is proportional to sin^2(pi u).
inline Point2 blob_center_at(std::span<const Point2> waypoints, double saccade_ms, double ts_us) {
  const auto [k, u] = saccade_phase(waypoints.size() - 1, saccade_ms, ts_us);
  const double f = u - std::sin(2.0 * std::numbers::pi * u) / (2.0 * std::numbers::pi);
  const Point2& a = waypoints[k];
  const Point2& b = waypoints[k + 1];
  return {a.x + (b.x - a.x) * f, a.y + (b.y - a.y) * f};
}

// Events along the boundary of a circular blob following `waypoints`. Event
// intensity follows the saccade speed profile, 2 * rate * sin^2(pi u), so
// the mean rate is `rate` and every saccade produces one burst of activity.
// Arrivals are a thinned Poisson process; each event lands on a uniformly
// random boundary angle and gets a fair-coin polarity.
inline std::vector<Event> synth_saccade(const SaccadeSpec& s, std::span<const Point2> waypoints) {
  validate_saccade_spec(s);
  if (waypoints.size() != static_cast<std::size_t>(s.n_saccades) + 1)
    throw ValidationError("expected n_saccades + 1 waypoints");
  Rng rng(s.seed);
  const double total_us = s.n_saccades * s.saccade_ms * 1000.0;
  const double mean_gap_us = 1000.0 / (2.0 * s.rate);
  std::vector<Event> events;
  events.reserve(static_cast<std::size_t>(total_us / mean_gap_us * 0.6) + 16);

  for (double t = rng.exponential(mean_gap_us); t < total_us; t += rng.exponential(mean_gap_us)) {
    const double u = saccade_phase(waypoints.size() - 1, s.saccade_ms, t).second;
    const double keep = std::sin(std::numbers::pi * u);
    const double accept = rng.unit();
    const double angle = 2.0 * std::numbers::pi * rng.unit();
    const bool positive = rng.unit() < 0.5;
    if (accept >= keep * keep) continue;
    const Point2 c = blob_center_at(waypoints, s.saccade_ms, t);
    Event e;
    e.x = std::clamp(static_cast<int>(std::lround(c.x + s.blob_radius * std::cos(angle))), 0,
                     s.geometry.width - 1);
    e.y = std::clamp(static_cast<int>(std::lround(c.y + s.blob_radius * std::sin(angle))), 0,
                     s.geometry.height - 1);
    e.ts = static_cast<std::int64_t>(t);
    e.polarity = positive ? 1 : -1;
    events.push_back(e);
  }
  return events;
}

inline std::vector<Event> synth_saccade(const SaccadeSpec& s) {
  const auto pts = saccade_waypoints(s);
  return synth_saccade(s, pts);
}

}  // namespace evattn
