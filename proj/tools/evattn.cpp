// evattn: command-line front end for the event attention pipelines.
//
// Exit codes: 0 success, 1 failed self-check, 2 configuration or usage
// error, 3 input/output or malformed-data error.

#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "evattn/config.hpp"
#include "evattn/error.hpp"
#include "evattn/event_io.hpp"
#include "evattn/pipeline.hpp"
#include "evattn/testing/selfcheck.hpp"

namespace {

constexpr int kExitCheckFailed = 1;
constexpr int kExitConfig = 2;
constexpr int kExitIo = 3;

struct RunOptions {
  std::string config_file;
  std::string profile;
  std::string input;
  std::string output;
  std::vector<std::string> overrides;
};

void add_run_options(CLI::App* cmd, RunOptions& o) {
  cmd->add_option("-c,--config", o.config_file, "key = value configuration file");
  cmd->add_option("-p,--profile", o.profile, "dataset profile, e.g. sn-centered");
  cmd->add_option("-i,--input", o.input, "event file (.bin AER or .csv)");
  cmd->add_option("-o,--output", o.output, "output directory");
  cmd->add_option("-s,--set", o.overrides, "override a configuration key (key=value)")->take_all();
}

evattn::PipelineConfig resolve_config(const RunOptions& o) {
  evattn::ConfigAssignments a;
  if (!o.config_file.empty()) a = evattn::read_config_file(o.config_file);
  if (!o.profile.empty()) a.emplace_back("profile", o.profile);
  if (!o.input.empty()) a.emplace_back("input", o.input);
  if (!o.output.empty()) a.emplace_back("output", o.output);
  for (const std::string& s : o.overrides) {
    const auto kv = evattn::parse_override(s);
    a.insert(a.end(), kv.begin(), kv.end());
  }
  return evattn::build_config(a);
}

void print_summary(const char* pipeline, const evattn::RunSummary& s) {
  std::cout << pipeline << ": " << s.events << " events, " << s.peaks << " peaks, " << s.intervals
            << " intervals, " << s.patches << " patches";
  if (s.skipped) std::cout << ", " << s.skipped << " events skipped";
  if (s.non_monotone) std::cout << " (input timestamps not monotone)";
  std::cout << "\nmanifest: " << s.manifest.string() << "\n";
}

int run_check() {
  using namespace evattn::selfcheck;
  const std::vector<Outcome> outcomes{
      integrator_equivalence(2000, {34, 34}, 1e-4, 11),
      streaming_statistics(10000, 10, 12),
      peak_oracle(15, 13),
      read_reference(20, 14),
      read_gradient(10, 15),
      event_read_consistency(300, {34, 34}, 12, 16),
      filterbank_normalization(200, 17),
      delta_limit_crop(18),
  };
  bool all = true;
  for (const Outcome& o : outcomes) {
    std::printf("[%s] %-40s %6.2fs  %s\n", o.passed ? "PASS" : "FAIL", o.name.c_str(), o.seconds, o.detail.c_str());
    all = all && o.passed;
  }
  return all ? 0 : kExitCheckFailed;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Event-camera attention toolkit"};
  app.require_subcommand(1);

  RunOptions peaks_opts;
  auto* peaks = app.add_subcommand("run-peaks", "peak-driven patch extraction");
  add_run_options(peaks, peaks_opts);

  RunOptions attn_opts;
  auto* attn = app.add_subcommand("run-attention", "attention-window patch extraction");
  add_run_options(attn, attn_opts);

  std::string dec_in, dec_out;
  int dec_w = 0, dec_h = 0;
  auto* decode = app.add_subcommand("decode", "convert an AER binary file to CSV");
  decode->add_option("-i,--input", dec_in, "AER file")->required();
  decode->add_option("--width", dec_w, "sensor width")->required();
  decode->add_option("--height", dec_h, "sensor height")->required();
  decode->add_option("-o,--output", dec_out, "CSV file (default: stdout)");

  evattn::SaccadeSpec spec;
  std::string synth_out, synth_format;
  bool stationary = false;
  std::vector<double> blob_at;
  auto* synth = app.add_subcommand("synth", "generate a synthetic moving-blob recording");
  synth->add_option("--width", spec.geometry.width)->capture_default_str();
  synth->add_option("--height", spec.geometry.height)->capture_default_str();
  synth->add_option("--radius", spec.blob_radius, "blob radius in pixels")->capture_default_str();
  synth->add_option("--saccades", spec.n_saccades)->capture_default_str();
  synth->add_option("--saccade-ms", spec.saccade_ms)->capture_default_str();
  synth->add_option("--rate", spec.rate, "events per millisecond")->capture_default_str();
  synth->add_option("--seed", spec.seed)->capture_default_str();
  synth->add_option("--format", synth_format, "csv or aer (default: from the file extension)")
      ->check(CLI::IsMember({"csv", "aer"}));
  synth->add_flag("--stationary", stationary, "keep the blob still");
  synth->add_option("--at", blob_at, "stationary blob centre X Y (default: frame centre)")->expected(2);
  synth->add_option("-o,--output", synth_out, "output file")->required();

  auto* check = app.add_subcommand("check", "run the built-in oracle comparisons");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  // Invalid command-line parameters are usage errors, not data errors.
  try {
    if (*decode) evattn::validate_header({dec_w, dec_h});
    if (*synth) {
      evattn::validate_saccade_spec(spec);
      if (stationary && !blob_at.empty()) evattn::stationary_waypoints(spec, evattn::Point2{blob_at[0], blob_at[1]});
    }
  } catch (const evattn::ValidationError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  }

  try {
    if (*peaks) {
      const auto cfg = resolve_config(peaks_opts);
      print_summary("run-peaks", evattn::run_peak_pipeline(cfg));
    } else if (*attn) {
      const auto cfg = resolve_config(attn_opts);
      print_summary("run-attention", evattn::run_attention_pipeline(cfg));
    } else if (*decode) {
      const std::string data = evattn::detail::read_file(dec_in);
      const auto events = evattn::read_aer_bin(
          std::span(reinterpret_cast<const std::uint8_t*>(data.data()), data.size()), {dec_w, dec_h});
      const std::string csv = evattn::write_csv(events);
      if (dec_out.empty())
        std::cout << csv;
      else
        evattn::detail::write_file(dec_out, csv);
    } else if (*synth) {
      std::optional<evattn::Point2> at;
      if (!blob_at.empty()) at = evattn::Point2{blob_at[0], blob_at[1]};
      const auto waypoints = stationary ? evattn::stationary_waypoints(spec, at) : evattn::saccade_waypoints(spec);
      const auto events = evattn::synth_saccade(spec, waypoints);
      const bool csv = synth_format.empty() ? evattn::detail::is_csv_path(synth_out) : synth_format == "csv";
      if (csv) {
        evattn::detail::write_file(synth_out, evattn::write_csv(events));
      } else {
        const auto bytes = evattn::write_aer_bin(events);
        evattn::detail::write_file(synth_out, std::string(bytes.begin(), bytes.end()));
      }
      std::cout << "synth: " << events.size() << " events written to " << synth_out << "\n";
    } else if (*check) {
      return run_check();
    }
  } catch (const evattn::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const evattn::DecodeError& e) {
    std::cerr << "decode error at " << e.position() << ": " << e.what() << "\n";
    return kExitIo;
  } catch (const evattn::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitIo;
  }
  return 0;
}
