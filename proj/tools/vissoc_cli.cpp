// vissoc command-line entry point: simulate | analyze | report | validate.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "vissoc/vissoc.hpp"

#ifndef VISSOC_VERSION
#define VISSOC_VERSION "0.0.0"
#endif

namespace fs = std::filesystem;
using vissoc::ojson;

namespace {

std::string hex64(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string file_hash(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return hex64(vissoc::hash_string(ss.str()));
}

void write_manifest(const fs::path& dir, const std::string& command, const std::string& config_hash,
                    std::uint64_t seed, const std::vector<fs::path>& inputs, const std::vector<std::string>& outputs,
                    double seconds) {
  ojson in = ojson::array(), out = ojson::object();
  for (const auto& p : inputs) in.push_back(p.string());
  for (const auto& name : outputs) out[name] = file_hash(dir / name);
  const ojson m{{"command", command},   {"config_hash", config_hash},
                {"seed", seed},         {"inputs", in},
                {"output_dir", dir.string()}, {"outputs", out},
                {"tool_version", VISSOC_VERSION}, {"wall_clock_seconds", seconds}};
  std::ofstream f(dir / "manifest.json", std::ios::binary | std::ios::trunc);
  if (!f) throw vissoc::Error("cannot write " + (dir / "manifest.json").string());
  f << m.dump(2) << '\n';
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw vissoc::Error("cannot create " + dir.string() + ": " + ec.message());
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

int cmd_simulate(const std::string& config_path, const fs::path& out_dir, std::optional<std::uint64_t> seed) {
  const auto t0 = std::chrono::steady_clock::now();
  auto cfg = vissoc::load_sim_config(config_path);
  if (seed) cfg.seed = *seed;
  auto result = vissoc::run_simulation(cfg);
  ensure_dir(out_dir);
  vissoc::export_dataset(result.dataset, out_dir);
  vissoc::write_ground_truth(result, cfg, out_dir / vissoc::kGroundTruthFile);
  const auto cfg_hash = hex64(vissoc::hash_string(vissoc::sim_config_to_json(cfg).dump()));
  write_manifest(out_dir, "simulate", cfg_hash, cfg.seed, {config_path},
                 {vissoc::kAgentsFile, vissoc::kPostsFile, vissoc::kRepliesFile, vissoc::kInteractionsFile,
                  vissoc::kMetaFile, vissoc::kGroundTruthFile},
                 seconds_since(t0));
  std::cerr << "simulated " << result.dataset.agents.size() << " agents, " << result.dataset.posts.size()
            << " posts, " << result.dataset.replies.size() << " replies, " << result.events.size()
            << " events (hash " << hex64(result.event_hash) << ")\n";
  return 0;
}

int cmd_analyze(const fs::path& data_dir, const std::string& filter, const fs::path& out_dir, std::uint64_t seed) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto ids = vissoc::parse_experiment_filter(filter);
  const auto d = vissoc::ingest_dataset(data_dir);
  vissoc::AnalysisOptions opts;
  opts.seed = seed;
  std::vector<fs::path> inputs{data_dir};
  if (fs::exists(data_dir / vissoc::kGroundTruthFile)) {
    opts.ground_truth = vissoc::read_ground_truth(data_dir / vissoc::kGroundTruthFile);
    inputs.push_back(data_dir / vissoc::kGroundTruthFile);
  }
  const auto reports = vissoc::run_all(d, opts, ids);
  ensure_dir(out_dir);
  const auto doc = vissoc::report_document(reports, opts);
  {
    std::ofstream f(out_dir / "report.json", std::ios::binary | std::ios::trunc);
    if (!f) throw vissoc::Error("cannot write report.json");
    f << doc.dump(2) << '\n';
  }
  {
    std::ofstream f(out_dir / "report.csv", std::ios::binary | std::ios::trunc);
    if (!f) throw vissoc::Error("cannot write report.csv");
    vissoc::write_report_csv(vissoc::flatten_report(nlohmann::json::parse(doc.dump())), f);
  }
  write_manifest(out_dir, "analyze", hex64(vissoc::hash_string(opts.to_json().dump())), seed, inputs,
                 {"report.json", "report.csv"}, seconds_since(t0));
  for (const auto& r : reports)
    if (r.error) std::cerr << r.experiment_id << ": " << *r.error << '\n';
  return 0;
}

int cmd_report(const fs::path& report_path, const std::string& format) {
  std::ifstream in(report_path);
  if (!in) throw vissoc::Error("cannot open " + report_path.string());
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw vissoc::Error("malformed report: " + std::string(e.what()));
  }
  const auto rows = vissoc::flatten_report(doc);
  if (format == "csv") {
    vissoc::write_report_csv(rows, std::cout);
  } else if (format == "json") {
    ojson arr = ojson::array();
    for (const auto& r : rows)
      arr.push_back(ojson{{"experiment", r.experiment},
                          {"metric", r.metric},
                          {"observed", vissoc::detail::opt_json(r.observed)},
                          {"baseline", vissoc::detail::opt_json(r.baseline)},
                          {"p_value", vissoc::detail::opt_json(r.p_value)},
                          {"phenomenon", r.phenomenon}});
    std::cout << arr.dump(2) << '\n';
  } else {
    vissoc::write_report_text(rows, std::cout);
  }
  return 0;
}

int cmd_validate(const fs::path& data_dir) {
  vissoc::IngestOptions opts;
  opts.strict = false;
  const auto d = vissoc::ingest_dataset(data_dir, opts);
  const auto violations = vissoc::validate_dataset(d);
  for (const auto& v : violations) std::cout << v.code << ": " << v.message << '\n';
  std::cout << d.agents.size() << " agents, " << d.posts.size() << " posts, " << d.replies.size() << " replies, "
            << d.interactions.size() << " interactions; " << violations.size() << " violation(s)\n";
  return violations.empty() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"vissoc: visual social network simulator and analysis engine"};
  app.set_version_flag("--version", VISSOC_VERSION);
  app.require_subcommand(1);

  std::string config, data, out, experiments, format = "text", report_path;
  std::optional<std::uint64_t> seed;

  auto* sim = app.add_subcommand("simulate", "Run the simulator and write a dataset");
  sim->add_option("--config", config, "Simulation config (JSON)")->required();
  sim->add_option("--out", out, "Output directory")->required();
  sim->add_option("--seed", seed, "Override the config seed");

  auto* ana = app.add_subcommand("analyze", "Run experiments on a dataset");
  ana->add_option("--data", data, "Dataset directory")->required();
  ana->add_option("--out", out, "Output directory")->required();
  ana->add_option("--seed", seed, "Analysis seed (default 0)");
  ana->add_option("--experiments", experiments, "Comma-separated subset of e1..e8,r1,r2,r3,f1");

  auto* rep = app.add_subcommand("report", "Render a report.json as a table");
  rep->add_option("report", report_path, "Path to report.json")->required();
  rep->add_option("--format", format, "Output format")->check(CLI::IsMember({"text", "csv", "json"}));

  auto* val = app.add_subcommand("validate", "Check a dataset against the schema invariants");
  val->add_option("--data", data, "Dataset directory")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*sim) return cmd_simulate(config, out, seed);
    if (*ana) return cmd_analyze(data, experiments, out, seed.value_or(0));
    if (*rep) return cmd_report(report_path, format);
    if (*val) return cmd_validate(data);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
