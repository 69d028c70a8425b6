#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "artde/config.hpp"
#include "artde/metrics.hpp"
#include "artde/presets.hpp"

namespace fs = std::filesystem;
using namespace artde;

namespace {

struct RunOptions {
  std::vector<std::string> presets;
  std::vector<std::string> configs;
  std::string controllers = "tdc,atde,artde";
  std::string out = "results";
  std::optional<std::uint64_t> seed;
  std::optional<double> duration;
  std::uint64_t seed_value = 0;
  double duration_value = 0.0;
  std::vector<std::string> overrides;
  unsigned workers = 0;
  std::string format = "table";
  std::size_t stride = 1;
};

std::vector<Variant> parse_variant_list(const std::string& list) {
  std::vector<Variant> out;
  std::stringstream ss(list);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item.erase(std::remove_if(item.begin(), item.end(), ::isspace), item.end());
    if (item.empty()) continue;
    const Variant v = parse_variant(item);
    if (std::find(out.begin(), out.end(), v) == out.end()) out.push_back(v);
  }
  if (out.empty()) throw Error("--controller: no controller variants given");
  return out;
}

// Every scenario goes through JSON so presets and files see identical override
// and validation handling.
std::vector<std::pair<std::string, Json>> collect_sources(const RunOptions& o) {
  std::vector<std::pair<std::string, Json>> sources;
  for (const auto& p : o.presets) sources.emplace_back("preset " + p, to_json(builtin_preset(p)));
  for (const auto& c : o.configs) sources.emplace_back(c, read_json_file(c));
  if (sources.empty()) throw Error("nothing to run: give at least one --preset or --config");
  return sources;
}

int print_config_errors(const std::string& source, const ConfigErrors& e) {
  std::cerr << source << ": " << e.what() << '\n';
  return 2;
}

int cmd_run(const RunOptions& o) {
  const auto variants = parse_variant_list(o.controllers);
  const ReportFormat format = parse_report_format(o.format);

  std::vector<std::string> extra = o.overrides;
  if (o.seed) extra.push_back("seed=" + std::to_string(*o.seed));
  if (o.duration) {
    std::ostringstream s;
    s << std::setprecision(17) << "duration=" << *o.duration;
    extra.push_back(s.str());
  }

  std::vector<ScenarioConfig> jobs;
  int failures = 0;
  for (const auto& [source, json] : collect_sources(o)) {
    try {
      const ScenarioConfig base = load_scenario(json, extra);
      for (Variant v : variants) {
        ScenarioConfig c = base;
        c.variant = v;
        jobs.push_back(std::move(c));
      }
    } catch (const ConfigErrors& e) {
      failures = print_config_errors(source, e);
    }
  }
  if (failures) return failures;

  std::error_code ec;
  fs::create_directories(o.out, ec);
  if (ec || !fs::is_directory(o.out)) {
    std::cerr << "cannot create output directory '" << o.out << "'\n";
    return 2;
  }

  const unsigned workers = o.workers ? o.workers : std::max(1u, std::thread::hardware_concurrency());
  const auto traces = run_batch(jobs, workers);

  std::vector<VariantResult> results;
  for (const auto& tr : traces) {
    const fs::path path = fs::path(o.out) / (tr.scenario + "__" + to_string(tr.variant) + ".csv");
    std::ofstream csv(path);
    if (!csv) {
      std::cerr << "cannot write '" << path.string() << "'\n";
      return 2;
    }
    write_trace_csv(csv, tr, o.stride);
    results.push_back({tr.scenario, tr.variant, channel_stats(tr)});
    std::cerr << tr.scenario << " / " << to_string(tr.variant) << ": ";
    if (tr.diverged())
      std::cerr << "diverged at t = " << *tr.diverged_at << " s (" << tr.divergence_reason << ")\n";
    else
      std::cerr << "completed " << tr.rows.size() << " samples\n";
  }

  std::vector<Variant> baselines;
  const bool has_artde = std::find(variants.begin(), variants.end(), Variant::ARTDE) != variants.end();
  if (has_artde)
    for (Variant b : {Variant::TDC, Variant::ATDE})
      if (std::find(variants.begin(), variants.end(), b) != variants.end()) baselines.push_back(b);
  const auto notes = reference_discrepancies(reference_s1_rms_figures());

  std::ofstream rc(fs::path(o.out) / "report.csv");
  emit_report(rc, results, ReportFormat::Csv, baselines, notes);
  std::ofstream rt(fs::path(o.out) / "report.txt");
  emit_report(rt, results, ReportFormat::Table, baselines, notes);
  if (!rc || !rt) {
    std::cerr << "cannot write report files in '" << o.out << "'\n";
    return 2;
  }
  emit_report(std::cout, results, format, baselines, notes);
  return 0;
}

int cmd_validate(const std::vector<std::string>& paths, const std::vector<std::string>& overrides) {
  int status = 0;
  for (const auto& p : paths) {
    try {
      const ScenarioConfig c = load_scenario(read_json_file(p), overrides);
      std::cout << p << ": ok (" << c.name << ", " << to_string(c.plant) << ", " << c.dof() << " dof)\n";
    } catch (const ConfigErrors& e) {
      status = print_config_errors(p, e);
    } catch (const Error& e) {
      std::cerr << p << ": " << e.what() << '\n';
      status = 2;
    }
  }
  return status;
}

int cmd_presets(const std::string& dump, const std::string& write_dir) {
  if (!write_dir.empty()) {
    fs::create_directories(write_dir);
    for (const auto& name : preset_names()) {
      std::ofstream f(fs::path(write_dir) / (name + ".json"));
      f << to_json(builtin_preset(name)).dump(2) << '\n';
      if (!f) {
        std::cerr << "cannot write preset '" << name << "'\n";
        return 2;
      }
    }
    return 0;
  }
  if (!dump.empty()) {
    std::cout << to_json(builtin_preset(dump)).dump(2) << '\n';
    return 0;
  }
  for (const auto& name : preset_names()) std::cout << name << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Time-delay-estimation controller benchmark (TDC, ATDE, ARTDE)"};
  app.require_subcommand(1);

  RunOptions run;
  auto* run_cmd = app.add_subcommand("run", "Simulate scenarios for each controller and write traces and a report");
  run_cmd->add_option("--preset", run.presets, "Built-in scenario (chain-s1, chain-s2, chain-s3, quad-infinity)");
  run_cmd->add_option("--config", run.configs, "Scenario JSON file")->check(CLI::ExistingFile);
  run_cmd->add_option("--controller", run.controllers, "Comma list of tdc, atde, artde")->capture_default_str();
  run_cmd->add_option("--out", run.out, "Output directory")->capture_default_str();
  auto* seed_opt = run_cmd->add_option("--seed", run.seed_value, "Override the scenario seed");
  auto* duration_opt = run_cmd->add_option("--duration", run.duration_value, "Override the run length in seconds")
                           ->check(CLI::PositiveNumber);
  run_cmd->add_option("--set", run.overrides, "Override a config value, e.g. controller.alpha=3 (repeatable)");
  run_cmd->add_option("--workers", run.workers, "Parallel runs (0 = hardware threads)")->capture_default_str();
  run_cmd->add_option("--format", run.format, "Report printed to stdout: csv or table")
      ->check(CLI::IsMember({"csv", "table"}))
      ->capture_default_str();
  run_cmd->add_option("--stride", run.stride, "Write every n-th trace row")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();

  std::vector<std::string> validate_paths, validate_overrides;
  auto* val_cmd = app.add_subcommand("validate", "Check scenario files and list every problem found");
  val_cmd->add_option("paths", validate_paths, "Scenario JSON files")->required();
  val_cmd->add_option("--set", validate_overrides, "Override applied before validation (repeatable)");

  std::string dump, write_dir;
  auto* pre_cmd = app.add_subcommand("presets", "List built-in presets, print one, or write them all as JSON");
  pre_cmd->add_option("--dump", dump, "Print this preset as JSON");
  pre_cmd->add_option("--write", write_dir, "Write every preset to <dir>/<name>.json");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run_cmd) {
      if (seed_opt->count()) run.seed = run.seed_value;
      if (duration_opt->count()) run.duration = run.duration_value;
      return cmd_run(run);
    }
    if (*val_cmd) return cmd_validate(validate_paths, validate_overrides);
    if (*pre_cmd) return cmd_presets(dump, write_dir);
  } catch (const ConfigErrors& e) {
    std::cerr << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
