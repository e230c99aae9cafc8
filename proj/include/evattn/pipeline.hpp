#pragma once

// End-to-end pipelines.
//
// Peak pipeline: events feed the leaky integrator and the peak detector. At
// every interval closure the frame at the interval end is snapshotted; when a
// closure reports peaks, the frame of the peak interval (held in a FrameBuffer)
// is cut into patches by centered or follower extraction.
//
// Attention pipeline: events are grouped into intervals of fixed length. Each
// event is projected through the current filterbank; events that land inside
// it update a controller that moves the filterbank. At the end of an interval
// the filterbank reads an N x N patch from the integrated frame.
//
// Output directory layout:
//   manifest.jsonl   header line, then one line per patch
//   patches/         one PGM per patch, numbered in emission order
//   frames/          frames patches were cut from (peak pipeline)
//   logs/            peaks.jsonl or attention.jsonl, and summary.json

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "evattn/activity.hpp"
#include "evattn/config.hpp"
#include "evattn/draw_read.hpp"
#include "evattn/error.hpp"
#include "evattn/event_io.hpp"
#include "evattn/integrator.hpp"
#include "evattn/patch_extract.hpp"

namespace evattn {

using ordered_json = nlohmann::ordered_json;

// --- Peak-driven extraction -------------------------------------------------

struct ClosureOutput {
  std::int64_t closure = 0;
  std::vector<PeakEvent> peaks;
  const Frame* frame = nullptr;  // frame of the peak interval
  std::vector<PatchRecord> patches;
};

class PeakPipeline {
 public:
  using Sink = std::function<void(const ClosureOutput&)>;

  PeakPipeline(const PipelineConfig& cfg, StreamHeader geometry, Sink sink = {})
      : cfg_(cfg),
        geometry_(geometry),
        integrator_(geometry, cfg.leak),
        detector_(build_grid(geometry, cfg.region_width, cfg.region_height, cfg.region_stride), cfg.peaks),
        frames_(FrameBuffer::capacity_for(cfg.peaks.window, cfg.peaks.representative)),
        sink_(std::move(sink)) {
    if (cfg.mode == ExtractionMode::draw_event)
      throw ConfigError("mode", "draw-event extraction runs through the attention pipeline");
    detail::require_patch_fits(cfg.patch_size, geometry.width, geometry.height);
  }

  const PeakDetector& detector() const noexcept { return detector_; }
  const Integrator& integrator() const noexcept { return integrator_; }
  std::size_t events() const noexcept { return events_; }
  std::size_t peaks() const noexcept { return peaks_; }
  std::size_t patches() const noexcept { return patches_; }

  void push(const Event& e) {
    validate_event(e, geometry_);
    while (detector_.interval_due(e.ts)) close_one();
    integrator_.apply(e);
    detector_.record(e);
    ++events_;
  }

  // Closes the open interval and, with flush_tail, enough empty intervals for
  // every recorded interval to be tested as a representative value.
  void finish() {
    if (!detector_.started() || finished_) return;
    finished_ = true;
    close_one();
    if (cfg_.flush_tail)
      for (int i = 0; i < detector_.frame_delay(); ++i) close_one();
  }

 private:
  void close_one() {
    Frame frame = integrator_.snapshot(detector_.interval_end());
    const std::int64_t closure = detector_.closed_intervals();
    std::vector<PeakEvent> peaks = detector_.close_interval();
    if (!peaks.empty()) handle(closure, std::move(peaks));
    frames_.push(std::move(frame));
  }

  void handle(std::int64_t closure, std::vector<PeakEvent> peaks) {
    ClosureOutput out;
    out.closure = closure;
    out.frame = frames_.frame_at_delay(peaks.front().buffer_delay());
    if (!out.frame) throw Error("frame buffer underfilled at a peak report");
    const RegionGrid& grid = detector_.grid();

    std::vector<Box> boxes;
    if (cfg_.grouping == MaskGrouping::closure) {
      boxes = macro_regions(mask_from_peaks(grid, peaks), grid);
    } else {
      for (const PeakEvent& p : peaks) boxes.push_back(grid.rect(p.region_a, p.region_b));
    }
    for (const Box& box : boxes) {
      if (cfg_.mode == ExtractionMode::centered) {
        for (PatchOrigin o : centered_patches(box, cfg_.patch_size, geometry_))
          out.patches.push_back(crop(*out.frame, o, cfg_.patch_size, PatchSource::centered));
      } else {
        for (PatchOrigin o : follower_patches(*out.frame, box, cfg_.threshold, cfg_.patch_size))
          out.patches.push_back(crop(*out.frame, o, cfg_.patch_size, PatchSource::follower));
      }
    }
    peaks_ += peaks.size();
    patches_ += out.patches.size();
    out.peaks = std::move(peaks);
    if (sink_) sink_(out);
  }

  PipelineConfig cfg_;
  StreamHeader geometry_;
  Integrator integrator_;
  PeakDetector detector_;
  FrameBuffer frames_;
  Sink sink_;
  std::size_t events_ = 0;
  std::size_t peaks_ = 0;
  std::size_t patches_ = 0;
  bool finished_ = false;
};

// --- Attention-driven extraction --------------------------------------------

struct IntervalOutput {
  std::int64_t index = 0;
  std::int64_t t1 = 0;
  std::int64_t t2 = 0;
  AttentionParams params;        // parameters used for the read
  AttentionParams start_params;  // parameters at the start of the interval
  double gx = 0.0;
  double gy = 0.0;
  double delta = 0.0;
  double variance = 0.0;
  double gamma = 1.0;
  bool reset = false;  // controller was reset before this interval
  std::size_t events = 0;
  std::size_t skipped = 0;
  const Frame* frame = nullptr;
  Matrix patch;
};

class AttentionPipeline {
 public:
  using Sink = std::function<void(const IntervalOutput&)>;

  AttentionPipeline(const PipelineConfig& cfg, StreamHeader geometry, Sink sink = {})
      : cfg_(cfg),
        geometry_(geometry),
        n_(cfg.attention_patch_size),
        interval_us_(cfg.effective_attention_interval()),
        integrator_(geometry, cfg.leak),
        controller_(geometry, cfg.attention_patch_size, cfg.controller_settings),
        sink_(std::move(sink)) {
    if (interval_us_ < 1) throw ConfigError("attention_interval_us", "must be positive");
    if (cfg.controller_batch < 1) throw ConfigError("controller_batch", "must be at least 1");
    set_params(controller_.params());
    start_params_ = params_;
  }

  const AttentionParams& params() const noexcept { return params_; }
  const FilterBank& filterbank() const noexcept { return fb_; }
  const Integrator& integrator() const noexcept { return integrator_; }
  std::size_t events() const noexcept { return events_total_; }
  std::size_t skipped() const noexcept { return skipped_total_; }
  std::size_t intervals() const noexcept { return static_cast<std::size_t>(index_); }

  void push(const Event& e) {
    validate_event(e, geometry_);
    if (!started_) {
      started_ = true;
      start_ = e.ts;
    }
    if (e.ts >= start_ + interval_us_) {
      if (events_ > 0) end_interval();
      // Intervals without events produce no patch.
      start_ += (e.ts - start_) / interval_us_ * interval_us_;
    }
    integrator_.apply(e);
    ++events_;
    ++events_total_;
    if (!event_read(e, fb_, cfg_.blank_eps)) {
      ++skipped_;
      ++skipped_total_;
      return;
    }
    if (cfg_.controller == ControllerKind::centroid) {
      batch_.push_back(e);
      if (batch_.size() >= static_cast<std::size_t>(cfg_.controller_batch)) flush_batch();
    }
  }

  void finish() {
    if (events_ > 0) end_interval();
  }

 private:
  void set_params(const AttentionParams& p) {
    params_ = p;
    fb_ = build_filterbank(p, geometry_, n_);
  }

  void flush_batch() {
    if (batch_.empty()) return;
    set_params(controller_.update(batch_));
    batch_.clear();
  }

  void end_interval() {
    flush_batch();
    const Frame frame = integrator_.snapshot(start_ + interval_us_);
    IntervalOutput out;
    out.index = index_;
    out.t1 = start_;
    out.t2 = start_ + interval_us_;
    out.params = params_;
    out.start_params = start_params_;
    out.gx = fb_.gx;
    out.gy = fb_.gy;
    out.delta = fb_.delta;
    out.variance = fb_.variance;
    out.gamma = fb_.gamma;
    out.reset = pending_reset_;
    out.events = events_;
    out.skipped = skipped_;
    out.frame = &frame;
    out.patch = read(frame, fb_);
    if (sink_) sink_(out);

    ++index_;
    events_ = 0;
    skipped_ = 0;
    pending_reset_ = false;
    if (cfg_.reset_every > 0 && index_ % cfg_.reset_every == 0) {
      controller_.reset();
      set_params(controller_.params());
      pending_reset_ = true;
    }
    start_params_ = params_;
  }

  PipelineConfig cfg_;
  StreamHeader geometry_;
  int n_;
  std::int64_t interval_us_;
  Integrator integrator_;
  CentroidController controller_;
  Sink sink_;
  AttentionParams params_;
  AttentionParams start_params_;
  FilterBank fb_;
  std::vector<Event> batch_;
  bool started_ = false;
  bool pending_reset_ = false;
  std::int64_t start_ = 0;
  std::int64_t index_ = 0;
  std::size_t events_ = 0;
  std::size_t skipped_ = 0;
  std::size_t events_total_ = 0;
  std::size_t skipped_total_ = 0;
};

// --- Input / output ------------------------------------------------------------

namespace detail {

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw IoError("error reading " + path.string());
  return ss.str();
}

inline void write_file(const std::filesystem::path& path, const std::string& data) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(data.data(), static_cast<std::streamsize>(data.size()));
  if (!out) throw IoError("error writing " + path.string());
}

inline void make_dirs(const std::filesystem::path& path) {
  std::error_code ec;
  std::filesystem::create_directories(path, ec);
  if (ec) throw IoError("cannot create " + path.string() + ": " + ec.message());
}

inline std::string sequence_name(std::size_t k, const char* ext) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%06zu.%s", k, ext);
  return buf;
}

inline bool is_csv_path(const std::string& path) {
  const auto ext = std::filesystem::path(path).extension().string();
  return ext == ".csv" || ext == ".txt";
}

}  // namespace detail

struct LoadedStream {
  std::vector<Event> events;
  StreamHeader geometry;
  std::optional<Offset> offset;  // set when the stream was embedded
  bool non_monotone = false;
};

inline LoadedStream load_events(const PipelineConfig& cfg) {
  if (cfg.input.empty()) throw ConfigError("input", "no input file given");
  const std::string data = detail::read_file(cfg.input);
  LoadedStream s;
  s.geometry = cfg.geometry;
  const bool csv = cfg.format == InputFormat::csv ||
                   (cfg.format == InputFormat::automatic && detail::is_csv_path(cfg.input));
  if (csv) {
    CsvStream parsed = read_csv(data, cfg.geometry);
    s.events = std::move(parsed.events);
    s.non_monotone = parsed.non_monotone;
  } else {
    s.events = read_aer_bin(std::span(reinterpret_cast<const std::uint8_t*>(data.data()), data.size()),
                            cfg.geometry);
    for (std::size_t i = 1; i < s.events.size(); ++i)
      if (s.events[i].ts < s.events[i - 1].ts) s.non_monotone = true;
  }
  if (cfg.embed_width > 0 || cfg.embed_height > 0) {
    const StreamHeader dst{cfg.embed_width, cfg.embed_height};
    s.offset = random_offset(cfg.geometry, dst, cfg.seed);
    s.events = shift_embed(s.events, cfg.geometry, dst, *s.offset);
    s.geometry = dst;
  }
  return s;
}

// Every parameter that shapes the output, in a fixed order.
inline ordered_json config_json(const PipelineConfig& cfg, StreamHeader geometry) {
  ordered_json j;
  j["profile"] = cfg.profile;
  j["width"] = geometry.width;
  j["height"] = geometry.height;
  j["leak"] = cfg.leak;
  j["window"] = cfg.peaks.window;
  j["representative"] = cfg.peaks.representative;
  j["bin_us"] = cfg.peaks.bin_us;
  j["alpha"] = cfg.peaks.alpha;
  j["stats_before_test"] = cfg.peaks.stats_before_test;
  j["region_stride"] = cfg.region_stride;
  j["region_width"] = cfg.region_width;
  j["region_height"] = cfg.region_height;
  j["patch_size"] = cfg.patch_size;
  j["mode"] = std::string(to_string(cfg.mode));
  j["threshold"] = cfg.threshold;
  j["mask_grouping"] = cfg.grouping == MaskGrouping::closure ? "closure" : "per-peak";
  j["flush_tail"] = cfg.flush_tail;
  j["attention_patch_size"] = cfg.attention_patch_size;
  j["attention_interval_us"] = cfg.effective_attention_interval();
  j["reset_every"] = cfg.reset_every;
  j["controller"] = cfg.controller == ControllerKind::centroid ? "centroid" : "frozen";
  j["ema_decay"] = cfg.controller_settings.ema_decay;
  j["coverage"] = cfg.controller_settings.coverage;
  j["min_span"] = cfg.controller_settings.min_span;
  j["sigma_ratio"] = cfg.controller_settings.sigma_ratio;
  j["controller_batch"] = cfg.controller_batch;
  j["blank_eps"] = cfg.blank_eps;
  j["embed_width"] = cfg.embed_width;
  j["embed_height"] = cfg.embed_height;
  j["seed"] = cfg.seed;
  return j;
}

struct RunSummary {
  std::size_t events = 0;
  std::size_t peaks = 0;
  std::size_t patches = 0;
  std::size_t intervals = 0;
  std::size_t skipped = 0;
  bool non_monotone = false;
  std::filesystem::path manifest;
};

namespace detail {

class OutputDir {
 public:
  explicit OutputDir(const std::string& root) : root_(root) {
    if (root.empty()) throw ConfigError("output", "no output directory given");
    make_dirs(root_ / "patches");
    make_dirs(root_ / "frames");
    make_dirs(root_ / "logs");
  }

  const std::filesystem::path& root() const noexcept { return root_; }

  std::string write_patch(const Matrix& m) {
    const std::string rel = "patches/" + sequence_name(patch_seq_++, "pgm");
    write_file(root_ / rel, encode_pgm(m.cols, m.rows, m.data));
    return rel;
  }

  std::string write_patch(const PatchRecord& p) {
    const std::string rel = "patches/" + sequence_name(patch_seq_++, "pgm");
    write_file(root_ / rel, encode_pgm(p.n, p.n, p.pixels));
    return rel;
  }

  std::string write_frame(const Frame& f) {
    const std::string rel = "frames/" + sequence_name(frame_seq_++, "pgm");
    write_file(root_ / rel, encode_pgm(f));
    return rel;
  }

 private:
  std::filesystem::path root_;
  std::size_t patch_seq_ = 0;
  std::size_t frame_seq_ = 0;
};

inline void append_line(std::string& out, const ordered_json& j) {
  out += j.dump();
  out += '\n';
}

inline ordered_json summary_json(const RunSummary& s, const LoadedStream& in) {
  ordered_json j;
  j["events"] = s.events;
  j["peaks"] = s.peaks;
  j["patches"] = s.patches;
  j["intervals"] = s.intervals;
  j["skipped_events"] = s.skipped;
  j["non_monotone_input"] = s.non_monotone;
  if (in.offset) j["embed_offset"] = {in.offset->dx, in.offset->dy};
  return j;
}

}  // namespace detail

inline RunSummary run_peak_pipeline(const PipelineConfig& cfg, const LoadedStream& in) {
  validate_config(cfg);
  detail::OutputDir out(cfg.output);
  std::string manifest;
  std::string peak_log;
  ordered_json header;
  header["type"] = "header";
  header["pipeline"] = "peaks";
  header["params"] = config_json(cfg, in.geometry);
  detail::append_line(manifest, header);

  PeakPipeline pipeline(cfg, in.geometry, [&](const ClosureOutput& c) {
    for (const PeakEvent& p : c.peaks) {
      ordered_json j;
      j["region_a"] = p.region_a;
      j["region_b"] = p.region_b;
      j["t1_us"] = p.t1;
      j["t2_us"] = p.t2;
      j["value"] = p.value;
      detail::append_line(peak_log, j);
    }
    std::string frame_file;
    if (cfg.write_frames) frame_file = out.write_frame(*c.frame);
    for (const PatchRecord& patch : c.patches) {
      ordered_json j;
      j["ts_us"] = patch.ts;
      j["x0"] = patch.origin.x;
      j["y0"] = patch.origin.y;
      j["n"] = patch.n;
      j["source"] = std::string(to_string(patch.source));
      j["file"] = out.write_patch(patch);
      j["closure"] = c.closure;
      if (!frame_file.empty()) j["frame"] = frame_file;
      detail::append_line(manifest, j);
    }
  });
  for (const Event& e : in.events) pipeline.push(e);
  pipeline.finish();

  RunSummary s;
  s.events = pipeline.events();
  s.peaks = pipeline.peaks();
  s.patches = pipeline.patches();
  s.intervals = static_cast<std::size_t>(pipeline.detector().closed_intervals());
  s.non_monotone = in.non_monotone;
  s.manifest = out.root() / "manifest.jsonl";
  detail::write_file(s.manifest, manifest);
  detail::write_file(out.root() / "logs" / "peaks.jsonl", peak_log);
  detail::write_file(out.root() / "logs" / "summary.json", detail::summary_json(s, in).dump(2) + "\n");
  return s;
}

inline RunSummary run_peak_pipeline(const PipelineConfig& cfg) {
  validate_config(cfg);
  return run_peak_pipeline(cfg, load_events(cfg));
}

inline RunSummary run_attention_pipeline(const PipelineConfig& cfg, const LoadedStream& in) {
  validate_config(cfg);
  if (cfg.attention_patch_size > std::min(in.geometry.width, in.geometry.height))
    throw ConfigError("attention_patch_size", "must fit inside the field of view");
  detail::OutputDir out(cfg.output);
  std::string manifest;
  std::string trace;
  ordered_json header;
  header["type"] = "header";
  header["pipeline"] = "attention";
  header["params"] = config_json(cfg, in.geometry);
  detail::append_line(manifest, header);

  const int n = cfg.attention_patch_size;
  AttentionPipeline pipeline(cfg, in.geometry, [&](const IntervalOutput& iv) {
    const std::string file = out.write_patch(iv.patch);
    const double half = n * iv.delta / 2.0;
    ordered_json m;
    m["ts_us"] = iv.t2;
    m["x0"] = static_cast<int>(std::floor(iv.gx - half));
    m["y0"] = static_cast<int>(std::floor(iv.gy - half));
    m["n"] = n;
    m["source"] = "draw";
    m["file"] = file;
    detail::append_line(manifest, m);

    ordered_json t;
    t["interval"] = iv.index;
    t["t1_us"] = iv.t1;
    t["t2_us"] = iv.t2;
    t["gx"] = iv.gx;
    t["gy"] = iv.gy;
    t["delta"] = iv.delta;
    t["delta_tilde"] = std::exp(iv.params.log_delta);
    t["start_delta_tilde"] = std::exp(iv.start_params.log_delta);
    t["sigma2"] = iv.variance;
    t["gamma"] = iv.gamma;
    t["events"] = iv.events;
    t["skipped"] = iv.skipped;
    t["reset"] = iv.reset;
    t["patch_file"] = file;
    detail::append_line(trace, t);
  });
  for (const Event& e : in.events) pipeline.push(e);
  pipeline.finish();

  RunSummary s;
  s.events = pipeline.events();
  s.skipped = pipeline.skipped();
  s.intervals = pipeline.intervals();
  s.patches = s.intervals;
  s.non_monotone = in.non_monotone;
  s.manifest = out.root() / "manifest.jsonl";
  detail::write_file(s.manifest, manifest);
  detail::write_file(out.root() / "logs" / "attention.jsonl", trace);
  detail::write_file(out.root() / "logs" / "summary.json", detail::summary_json(s, in).dump(2) + "\n");
  return s;
}

inline RunSummary run_attention_pipeline(const PipelineConfig& cfg) {
  validate_config(cfg);
  return run_attention_pipeline(cfg, load_events(cfg));
}

}  // namespace evattn
