#include "fcnet/error.hpp"
#include "fcnet/pipeline.hpp"
#include "fcnet/report.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace {

using fcnet::pipeline::RunConfig;

enum ExitCode { kOk = 0, kUsage = 1, kData = 2, kNumeric = 3 };

struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> jobs;
  std::optional<std::string> out;
  std::optional<std::string> preset;
  std::optional<std::string> manifest;
  std::optional<std::string> method;
};

void add_common(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--seed", o.seed, "Seed for CV and (unless set in the config) the cohort");
  cmd->add_option("--jobs", o.jobs, "Worker threads")->check(CLI::PositiveNumber);
  cmd->add_option("--out", o.out, "Parent directory for outputs");
}

void add_input(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--preset", o.preset, "Synthetic preset (ad_like, sz_like, null)");
  cmd->add_option("--manifest", o.manifest, "Cohort manifest JSON");
  cmd->add_option("--method", o.method, "pearson, spearman, granger or raw");
}

RunConfig resolve(const std::string& path, const Overrides& o) {
  RunConfig cfg;
  if (!path.empty()) {
    cfg = fcnet::pipeline::load_config(path);
  } else {
    cfg.input.preset = "ad_like";
  }
  if (o.preset) {
    cfg.input.preset = *o.preset;
    cfg.input.manifest.clear();
  }
  if (o.manifest) {
    cfg.input.manifest = *o.manifest;
    cfg.input.preset.clear();
  }
  if (o.method) {
    cfg = fcnet::pipeline::config_from_json([&] {
      auto j = fcnet::pipeline::to_json(cfg);
      j["connectivity"]["method"] = *o.method;
      return j;
    }());
  }
  if (o.seed) cfg.seed = *o.seed;
  if (o.jobs) cfg.jobs = *o.jobs;
  if (o.out) cfg.output_dir = *o.out;
  cfg.validate();
  return cfg;
}

void print_config(const RunConfig& cfg) {
  std::cout << fcnet::pipeline::to_json(cfg).dump(2) << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Functional-connectivity CNN classifier for two-class EEG cohorts"};
  app.set_version_flag("--version", fcnet::pipeline::kVersion);
  app.require_subcommand(0, 1);
  bool print_defaults = false;
  app.add_flag("--print-config", print_defaults, "Print the default config and exit");

  // synth
  auto* synth = app.add_subcommand("synth", "Write a synthetic cohort (CSV + manifest)");
  std::string preset = "ad_like";
  std::uint64_t synth_seed = 0;
  int per_class = 24;
  std::size_t synth_jobs = 1;
  std::string synth_out = "cohorts";
  synth->add_option("--preset", preset, "ad_like, sz_like or null")->capture_default_str();
  synth->add_option("--seed", synth_seed)->capture_default_str();
  synth->add_option("--subjects", per_class, "Subjects per class")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  synth->add_option("--jobs", synth_jobs)->check(CLI::PositiveNumber);
  synth->add_option("--out", synth_out)->capture_default_str();

  // connectivity
  auto* conn = app.add_subcommand("connectivity", "Write one connectivity matrix per recording");
  std::string conn_config;
  Overrides conn_o;
  bool conn_print = false;
  conn->add_option("--config", conn_config, "Run config JSON")->check(CLI::ExistingFile);
  conn->add_flag("--print-config", conn_print, "Print the resolved config and exit");
  add_common(conn, conn_o);
  add_input(conn, conn_o);

  // run
  auto* run = app.add_subcommand("run", "Nested cross-validated experiment");
  std::string run_config;
  Overrides run_o;
  bool run_print = false;
  run->add_option("--config", run_config, "Run config JSON or a previous run manifest")
      ->check(CLI::ExistingFile);
  run->add_flag("--print-config", run_print, "Print the resolved config and exit");
  add_common(run, run_o);
  add_input(run, run_o);

  // compare
  auto* compare = app.add_subcommand("compare", "Run two configs on one cohort and compare");
  std::vector<std::string> compare_configs;
  Overrides cmp_o;
  bool allow_seed_mismatch = false;
  bool cmp_print = false;
  compare->add_option("--config", compare_configs, "Two run configs (A then B)")
      ->required()
      ->expected(2)
      ->check(CLI::ExistingFile);
  compare->add_flag("--allow-seed-mismatch", allow_seed_mismatch);
  compare->add_flag("--print-config", cmp_print, "Print both resolved configs and exit");
  add_common(compare, cmp_o);

  // report
  auto* report = app.add_subcommand("report", "Summarize a saved report.json");
  std::string report_path;
  std::string report_svg;
  report->add_option("report", report_path, "report.json or a run directory")->required();
  report->add_option("--svg", report_svg, "Also write a ROC SVG here");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (print_defaults && app.get_subcommands().empty()) {
      RunConfig cfg;
      cfg.input.preset = "ad_like";
      print_config(cfg);
      return kOk;
    }
    if (*synth) {
      fcnet::pipeline::cmd_synth(preset, synth_seed, per_class, synth_out, synth_jobs,
                                 std::cout);
    } else if (*conn) {
      const auto cfg = resolve(conn_config, conn_o);
      if (conn_print) {
        print_config(cfg);
        return kOk;
      }
      fcnet::pipeline::cmd_connectivity(cfg, std::cout);
    } else if (*run) {
      const auto cfg = resolve(run_config, run_o);
      if (run_print) {
        print_config(cfg);
        return kOk;
      }
      fcnet::pipeline::cmd_run(cfg, std::cout);
    } else if (*compare) {
      const auto a = resolve(compare_configs[0], cmp_o);
      const auto b = resolve(compare_configs[1], cmp_o);
      if (cmp_print) {
        print_config(a);
        print_config(b);
        return kOk;
      }
      const std::filesystem::path out = a.output_dir;
      fcnet::pipeline::cmd_compare(a, b, allow_seed_mismatch, std::cout, &out);
    } else if (*report) {
      std::filesystem::path p = report_path;
      if (std::filesystem::is_directory(p)) p /= "report.json";
      if (!std::filesystem::exists(p)) throw fcnet::UsageError("no report at " + p.string());
      const auto r = fcnet::eval::read_report(p);
      std::cout << fcnet::eval::format_report(r);
      std::cout << "report digest " << fcnet::eval::report_digest(r) << '\n';
      if (!report_svg.empty()) fcnet::eval::write_roc_svg(r, "ROC", report_svg);
    } else {
      std::cout << app.help();
      return kUsage;
    }
  } catch (const fcnet::UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return kUsage;
  } catch (const fcnet::NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << '\n';
    return kNumeric;
  } catch (const std::exception& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kData;
  }
  return kOk;
}
