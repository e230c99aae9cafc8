#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "evattn/config.hpp"
#include "evattn/pipeline.hpp"
#include "evattn/testing/reference.hpp"

using namespace evattn;
namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("evattn_unit_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

SaccadeSpec three_saccades() {
  SaccadeSpec s;
  s.geometry = {68, 68};
  s.blob_radius = 2.0;
  s.rate = 30.0;
  s.seed = 7;
  return s;
}

std::vector<json> read_jsonl(const fs::path& p) {
  std::ifstream in(p);
  std::vector<json> out;
  for (std::string line; std::getline(in, line);)
    if (!line.empty()) out.push_back(json::parse(line));
  return out;
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(EVATTN_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

PipelineConfig config(const ConfigAssignments& a) { return build_config(a); }

}  // namespace

TEST(PeakPipeline, ThreeSaccadeRecording) {
  const fs::path dir = scratch("three_saccades");
  const auto events = synth_saccade(three_saccades());
  detail::write_file(dir / "in.csv", write_csv(events));
  const auto cfg = config({{"profile", "sn-centered"}, {"input", (dir / "in.csv").string()}, {"output", (dir / "out").string()}});
  const RunSummary s = run_peak_pipeline(cfg);
  EXPECT_GE(s.peaks, 3u);
  EXPECT_GE(s.patches, 3u);
  const auto lines = read_jsonl(s.manifest);
  ASSERT_EQ(lines.size(), s.patches + 1);
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto ts = lines[i]["ts_us"].get<std::int64_t>();
    EXPECT_GE(ts, events.front().ts);
    EXPECT_LE(ts, events.back().ts + cfg.peaks.bin_us);
  }
}

TEST(PeakPipeline, EmptyInputGivesHeaderOnlyManifest) {
  const fs::path dir = scratch("empty");
  detail::write_file(dir / "in.csv", "");
  EXPECT_EQ(run_cli("run-peaks -p sn-centered -i " + (dir / "in.csv").string() + " -o " + (dir / "out").string()), 0);
  const auto lines = read_jsonl(dir / "out" / "manifest.jsonl");
  ASSERT_EQ(lines.size(), 1u);
  EXPECT_EQ(lines[0]["type"], "header");
}

TEST(PeakPipeline, ProfileEchoedInHeader) {
  const fs::path dir = scratch("header");
  detail::write_file(dir / "in.csv", "1,1,0,1\n");
  const RunSummary s = run_peak_pipeline(
      config({{"profile", "sn-centered"}, {"input", (dir / "in.csv").string()}, {"output", (dir / "out").string()}}));
  const json params = read_jsonl(s.manifest).at(0)["params"];
  EXPECT_EQ(params["profile"], "sn-centered");
  EXPECT_EQ(params["region_stride"], 5);
  EXPECT_EQ(params["region_width"], 23);
  EXPECT_EQ(params["region_height"], 23);
  EXPECT_EQ(params["patch_size"], 29);
  EXPECT_EQ(params["window"], 101);
  EXPECT_EQ(params["representative"], 51);
}

TEST(PeakPipeline, PatchesComeFromDelayedFrame) {
  const auto events = synth_saccade(three_saccades());
  auto cfg = config({{"profile", "sn-centered"}});
  std::size_t fed = 0;
  int checked = 0;
  PeakPipeline pipeline(cfg, cfg.geometry, [&](const ClosureOutput& c) {
    ASSERT_FALSE(c.peaks.empty());
    const std::int64_t t2 = c.peaks.front().t2;
    for (const PeakEvent& p : c.peaks) {
      EXPECT_EQ(p.t2, t2);
      EXPECT_EQ(c.closure - p.interval, cfg.peaks.window - cfg.peaks.representative + 1);
    }
    EXPECT_EQ(c.frame->ts, t2);
    // Every event that belongs before t2 has been pushed by now.
    reference::EagerIntegrator replay(cfg.geometry, cfg.leak);
    for (std::size_t i = 0; i < fed && events[i].ts < t2; ++i) replay.apply(events[i]);
    const auto want = replay.frame_at(t2);
    for (const PatchRecord& patch : c.patches) {
      EXPECT_EQ(patch.ts, t2);
      for (int y = 0; y < patch.n; ++y)
        for (int x = 0; x < patch.n; ++x)
          ASSERT_NEAR(patch.at(x, y), want[static_cast<std::size_t>(patch.origin.y + y) * cfg.geometry.width + patch.origin.x + x],
                      1e-12);
      ++checked;
    }
  });
  for (const Event& e : events) {
    pipeline.push(e);
    ++fed;
  }
  pipeline.finish();
  EXPECT_GT(checked, 0);
}

TEST(PeakPipeline, PatchFilesRoundTrip) {
  const fs::path dir = scratch("roundtrip");
  detail::write_file(dir / "in.csv", write_csv(synth_saccade(three_saccades())));
  const RunSummary s = run_peak_pipeline(
      config({{"profile", "sn-follower"}, {"input", (dir / "in.csv").string()}, {"output", (dir / "out").string()}}));
  const auto lines = read_jsonl(s.manifest);
  ASSERT_GT(lines.size(), 1u);
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const fs::path f = dir / "out" / lines[i]["file"].get<std::string>();
    ASSERT_TRUE(fs::exists(f)) << f;
    const PgmImage img = decode_pgm(detail::read_file(f));
    EXPECT_EQ(img.width, lines[i]["n"].get<int>());
    EXPECT_EQ(img.height, lines[i]["n"].get<int>());
    EXPECT_EQ(lines[i]["source"], "follower");
    ASSERT_TRUE(fs::exists(dir / "out" / lines[i]["frame"].get<std::string>()));
  }
  EXPECT_TRUE(fs::exists(dir / "out" / "logs" / "peaks.jsonl"));
  EXPECT_TRUE(fs::exists(dir / "out" / "logs" / "summary.json"));
}

TEST(PeakPipeline, DeterministicOutput) {
  const fs::path dir = scratch("determinism");
  detail::write_file(dir / "in.csv", write_csv(synth_saccade(three_saccades())));
  for (const char* out : {"a", "b"})
    run_peak_pipeline(config({{"profile", "sn-centered"},
                              {"embed_width", "100"},
                              {"embed_height", "100"},
                              {"seed", "42"},
                              {"input", (dir / "in.csv").string()},
                              {"output", (dir / out).string()}}));
  EXPECT_EQ(detail::read_file(dir / "a" / "manifest.jsonl"), detail::read_file(dir / "b" / "manifest.jsonl"));
  EXPECT_EQ(detail::read_file(dir / "a" / "logs" / "summary.json"), detail::read_file(dir / "b" / "logs" / "summary.json"));
}

TEST(AttentionPipeline, FrozenControllerMatchesDirectRead) {
  auto cfg = config({{"profile", "sn-centered"}, {"controller", "frozen"}});
  const AttentionParams start = CentroidController::full_frame(cfg.geometry, cfg.attention_patch_size);
  int seen = 0;
  AttentionPipeline pipeline(cfg, cfg.geometry, [&](const IntervalOutput& iv) {
    EXPECT_EQ(iv.params, start);
    const Matrix direct = read(*iv.frame, build_filterbank(start, cfg.geometry, cfg.attention_patch_size));
    EXPECT_EQ(iv.patch.data, direct.data);
    ++seen;
  });
  for (const Event& e : synth_saccade(three_saccades())) pipeline.push(e);
  pipeline.finish();
  EXPECT_GT(seen, 10);
}

TEST(AttentionPipeline, ResetRestoresFullFrameStride) {
  const fs::path dir = scratch("reset");
  detail::write_file(dir / "in.csv", write_csv(synth_saccade(three_saccades())));
  run_attention_pipeline(config({{"profile", "sn-centered"},
                                 {"reset_every", "4"},
                                 {"input", (dir / "in.csv").string()},
                                 {"output", (dir / "out").string()}}));
  const auto trace = read_jsonl(dir / "out" / "logs" / "attention.jsonl");
  ASSERT_GT(trace.size(), 8u);
  const double start = trace[0]["start_delta_tilde"].get<double>();
  EXPECT_DOUBLE_EQ(start, 1.0);
  int resets = 0;
  bool moved = false;
  for (const json& t : trace) {
    moved = moved || t["delta_tilde"].get<double>() < start;
    if (t["reset"].get<bool>()) {
      ++resets;
      EXPECT_DOUBLE_EQ(t["start_delta_tilde"].get<double>(), start);
      EXPECT_EQ(t["interval"].get<int>() % 4, 0);
    }
  }
  EXPECT_GT(resets, 0);
  EXPECT_TRUE(moved);
}

TEST(AttentionPipeline, StationaryBlobEndsOnBlob) {
  SaccadeSpec s = three_saccades();
  s.blob_radius = 4.0;
  const Point2 centre{20, 45};
  const auto events = synth_saccade(s, stationary_waypoints(s, centre));
  auto cfg = config({{"profile", "sn-centered"}});
  double gx = 0, gy = 0;
  AttentionPipeline pipeline(cfg, cfg.geometry, [&](const IntervalOutput& iv) {
    gx = iv.gx;
    gy = iv.gy;
  });
  for (const Event& e : events) pipeline.push(e);
  pipeline.finish();
  EXPECT_LE(std::hypot(gx - centre.x, gy - centre.y), cfg.attention_patch_size / 4.0);
}

TEST(AttentionPipeline, ManifestListsOnePatchPerInterval) {
  const fs::path dir = scratch("attention_manifest");
  detail::write_file(dir / "in.csv", write_csv(synth_saccade(three_saccades())));
  const RunSummary s = run_attention_pipeline(
      config({{"profile", "sn-centered"}, {"input", (dir / "in.csv").string()}, {"output", (dir / "out").string()}}));
  const auto lines = read_jsonl(s.manifest);
  ASSERT_EQ(lines.size(), s.intervals + 1);
  EXPECT_EQ(lines[0]["pipeline"], "attention");
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const PgmImage img = decode_pgm(detail::read_file(dir / "out" / lines[i]["file"].get<std::string>()));
    EXPECT_EQ(img.width, 12);
    EXPECT_EQ(lines[i]["source"], "draw");
  }
}

TEST(Config, PrecedenceCliOverFileOverProfile) {
  const fs::path dir = scratch("precedence");
  detail::write_file(dir / "run.conf", "# comment\nprofile = sn-centered\nwindow = 51\nrepresentative = 26\nalpha = 3\n");
  ConfigAssignments a = read_config_file((dir / "run.conf").string());
  const auto cli = parse_override("window=31");
  a.insert(a.end(), cli.begin(), cli.end());
  const PipelineConfig cfg = build_config(a);
  EXPECT_EQ(cfg.peaks.window, 31);
  EXPECT_EQ(cfg.peaks.representative, 26);
  EXPECT_EQ(cfg.peaks.alpha, 3.0);
  EXPECT_EQ(cfg.region_width, 23);
  EXPECT_EQ(cfg.peaks.bin_us, 1000);
}

TEST(Config, ProfileNamedLastStillYieldsToOtherKeys) {
  const PipelineConfig cfg = build_config({{"patch_size", "31"}, {"profile", "sn-centered"}});
  EXPECT_EQ(cfg.patch_size, 31);
  EXPECT_EQ(cfg.profile, "sn-centered");
}

TEST(Config, UnknownKeyAndBadValues) {
  EXPECT_THROW(build_config({{"windw", "3"}}), ConfigError);
  EXPECT_THROW(build_config({{"window", "three"}}), ConfigError);
  EXPECT_THROW(build_config({{"profile", "nope"}}), ConfigError);
  EXPECT_THROW(parse_config_text("no equals sign\n"), ConfigError);
  PipelineConfig cfg = build_config({{"profile", "sn-centered"}, {"patch_size", "69"}});
  EXPECT_THROW(validate_config(cfg), ConfigError);
  cfg = build_config({{"profile", "sdvs-sc4-centered"}});
  EXPECT_THROW(validate_config(cfg), ConfigError);
}

TEST(Cli, ExitCodes) {
  const fs::path dir = scratch("cli");
  detail::write_file(dir / "in.csv", "1,1,0,1\n");
  detail::write_file(dir / "bad.bin", std::string(7, '\0'));
  detail::write_file(dir / "bad.csv", "1,1\n");
  const std::string in = " -i " + (dir / "in.csv").string() + " -o " + (dir / "out").string();
  EXPECT_EQ(run_cli("run-peaks -p sn-centered" + in), 0);
  EXPECT_EQ(run_cli("run-peaks -p sn-centered --set bogus=1" + in), 2);
  EXPECT_EQ(run_cli("run-peaks -p no-such-profile" + in), 2);
  EXPECT_EQ(run_cli("run-peaks" + in), 2);
  EXPECT_EQ(run_cli("run-attention -p sn-centered -i " + (dir / "missing.csv").string() + " -o " + (dir / "o2").string()), 3);
  EXPECT_EQ(run_cli("run-peaks -p sn-centered -i " + (dir / "bad.bin").string() + " -o " + (dir / "o3").string()), 3);
  EXPECT_EQ(run_cli("run-peaks -p sn-centered -i " + (dir / "bad.csv").string() + " -o " + (dir / "o4").string()), 3);
  EXPECT_EQ(run_cli("decode -i " + (dir / "bad.bin").string() + " --width 34 --height 34"), 3);
  EXPECT_EQ(run_cli("decode -i " + (dir / "bad.bin").string() + " --width 0 --height 34"), 2);
  EXPECT_EQ(run_cli(""), 2);
  EXPECT_EQ(run_cli("frobnicate"), 2);
}

TEST(Cli, SynthThenDecode) {
  const fs::path dir = scratch("synth_decode");
  ASSERT_EQ(run_cli("synth --seed 9 -o " + (dir / "s.bin").string()), 0);
  ASSERT_EQ(run_cli("synth --seed 9 -o " + (dir / "s.csv").string()), 0);
  ASSERT_EQ(run_cli("decode -i " + (dir / "s.bin").string() + " --width 34 --height 34 -o " + (dir / "d.csv").string()), 0);
  EXPECT_EQ(detail::read_file(dir / "d.csv"), detail::read_file(dir / "s.csv"));
  SaccadeSpec s;
  s.seed = 9;
  EXPECT_EQ(read_csv(detail::read_file(dir / "s.csv"), {34, 34}).events, synth_saccade(s));
  EXPECT_EQ(run_cli("synth --radius 30 -o " + (dir / "x.csv").string()), 2);
}

TEST(Config, ShippedConfigsValidate) {
  int n = 0;
  for (const auto& entry : fs::directory_iterator(fs::path(EVATTN_SOURCE_DIR) / "configs")) {
    if (entry.path().extension() != ".conf") continue;
    const PipelineConfig cfg = build_config(read_config_file(entry.path().string()));
    EXPECT_NO_THROW(validate_config(cfg)) << entry.path();
    ++n;
  }
  EXPECT_GE(n, 4);
}
