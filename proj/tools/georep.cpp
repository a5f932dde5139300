#include <filesystem>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "georep/harness/deployment.hpp"
#include "georep/harness/metrics.hpp"

namespace fs = std::filesystem;
using namespace georep;
using namespace georep::harness;

namespace {

struct Overrides {
  std::optional<std::uint64_t> seed;
  std::string mode;
  std::string irmc;
  bool full_trace = false;
};

ScenarioConfig load(const std::string& path, const Overrides& o) {
  ScenarioConfig cfg = load_scenario(path);
  if (o.seed) cfg.seed = *o.seed;
  if (!o.mode.empty()) cfg.mode = *parse_mode(o.mode);
  if (!o.irmc.empty()) {
    const irmc::Variant v = o.irmc == "sc" ? irmc::Variant::Sc : irmc::Variant::Rc;
    cfg.request_variant = v;
    cfg.commit_variant = v;
  }
  if (o.full_trace) cfg.trace = TraceLevel::Full;
  return cfg;
}

bool beyond_threshold(const TraceLog& trace) {
  for (const auto& r : trace.records()) {
    if (r.event == "scenario") return parse_detail(r.detail).at("beyond_threshold") == "1";
  }
  return false;
}

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream os(p);
  if (!os) throw std::runtime_error("cannot write " + p.string());
  os << text;
}

int report_and_exit(const MetricsReport& rep, std::ostream& os) {
  os << report_text(rep);
  return rep.ok() ? 0 : 1;
}

int cmd_run(const std::string& path, const Overrides& o, const std::string& out) {
  Deployment d(load(path, o));
  d.run();
  const MetricsReport rep = make_report(d.trace(), !d.config().beyond_threshold);
  if (!out.empty()) {
    fs::create_directories(out);
    std::ofstream trace(fs::path(out) / "trace.log");
    d.trace().write(trace);
    write_file(fs::path(out) / "report.json", report_json(rep));
    write_file(fs::path(out) / "latency.csv", latency_csv(rep.latency));
  }
  return report_and_exit(rep, std::cout);
}

int cmd_audit(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot read " + path);
  const TraceLog trace = TraceLog::read(is);
  return report_and_exit(make_report(trace, !beyond_threshold(trace)), std::cout);
}

int cmd_sweep(const std::string& path, const Overrides& o, const std::string& seeds) {
  const auto dots = seeds.find("..");
  if (dots == std::string::npos) throw CLI::ValidationError("--seeds", "expected A..B");
  const std::uint64_t from = std::stoull(seeds.substr(0, dots));
  const std::uint64_t to = std::stoull(seeds.substr(dots + 2));
  if (to < from) throw CLI::ValidationError("--seeds", "empty range");
  int status = 0;
  std::optional<std::string> first;
  for (std::uint64_t seed = from; seed <= to; ++seed) {
    Overrides each = o;
    each.seed = seed;
    Deployment d(load(path, each));
    d.run();
    const MetricsReport rep = make_report(d.trace(), !d.config().beyond_threshold);
    std::string verdicts;
    for (const auto& v : rep.verdicts) verdicts += (v.pass ? "+" : "-") + v.name + " ";
    std::cout << "seed " << seed << " " << (rep.ok() ? "ok" : "FAIL") << " " << verdicts << "trace " << rep.trace_digest.substr(0, 16)
              << "\n";
    if (!rep.ok()) {
      status = 1;
      for (const auto& v : rep.verdicts) {
        if (!v.pass) std::cout << "  " << v.name << ": " << v.detail << "\n";
      }
    }
    if (!first) first = verdicts;
    if (verdicts != *first) status = 1;
  }
  return status;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Geo-replicated BFT simulation harness"};
  app.require_subcommand(1);
  Overrides o;
  std::string scenario, out, trace, seeds;

  auto add_overrides = [&o](CLI::App* cmd) {
    cmd->add_option("--seed", o.seed, "simulation seed");
    cmd->add_option("--mode", o.mode, "spider, flat-bft or oracle")->check(CLI::IsMember({"spider", "flat-bft", "oracle"}));
    cmd->add_option("--irmc", o.irmc, "channel variant for every channel")->check(CLI::IsMember({"rc", "sc"}));
    cmd->add_flag("--full-trace", o.full_trace, "also record every send, receive and drop");
  };

  CLI::App* run = app.add_subcommand("run", "run a scenario, audit it and report");
  run->add_option("scenario", scenario, "scenario file")->required()->check(CLI::ExistingFile);
  add_overrides(run);
  run->add_option("--out", out, "directory for trace.log, report.json and latency.csv");

  CLI::App* audit = app.add_subcommand("audit", "audit a recorded trace");
  audit->add_option("trace", trace, "trace file")->required()->check(CLI::ExistingFile);

  CLI::App* sweep = app.add_subcommand("sweep", "run a scenario over a seed range");
  sweep->add_option("scenario", scenario, "scenario file")->required()->check(CLI::ExistingFile);
  add_overrides(sweep);
  sweep->add_option("--seeds", seeds, "inclusive range A..B")->required();

  CLI11_PARSE(app, argc, argv);
  try {
    if (run->parsed()) return cmd_run(scenario, o, out);
    if (audit->parsed()) return cmd_audit(trace);
    return cmd_sweep(scenario, o, seeds);
  } catch (const ConfigError& e) {
    std::cerr << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
