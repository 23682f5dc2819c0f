// socnav-bench: run benchmark plans, rebuild reports from persisted logs and
// serve interactive sessions.
//
// Exit codes: 0 success, 2 validation error, 3 partial or total run failure,
// 1 anything else (I/O and the like). SOCNAV_LOG=quiet|info|debug sets verbosity.

#include <chrono>
#include <cstdlib>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "socnav/bench.hpp"
#include "socnav/server.hpp"

namespace {

using namespace socnav;
using nlohmann::json;
namespace fs = std::filesystem;

enum class Verbosity { quiet, info, debug };

Verbosity verbosity() {
  const char* v = std::getenv("SOCNAV_LOG");
  if (!v) return Verbosity::info;
  const std::string s = v;
  if (s == "quiet" || s == "0") return Verbosity::quiet;
  if (s == "debug" || s == "2") return Verbosity::debug;
  return Verbosity::info;
}

void log(Verbosity level, const std::string& msg) {
  if (static_cast<int>(level) <= static_cast<int>(verbosity())) std::cerr << msg << "\n";
}

constexpr int kOk = 0;
constexpr int kOther = 1;
constexpr int kInvalid = 2;
constexpr int kPartial = 3;

std::vector<std::string> csv_list(const std::string& s) {
  std::vector<std::string> out;
  for (auto& p : io::split(s))
    if (!p.empty()) out.push_back(p);
  return out;
}

struct RunArgs {
  std::string config, methods, layouts, out;
  std::optional<int> trials;
  std::optional<std::uint64_t> seed_base;
  unsigned threads = 0;
};

int cmd_run(const RunArgs& a) {
  json doc = json::object();
  if (!a.config.empty()) {
    try {
      doc = json::parse(io::read_file(a.config));
    } catch (const json::parse_error& e) {
      throw ValidationError("config", a.config + ": " + e.what());
    }
  }
  if (!a.methods.empty()) doc["methods"] = csv_list(a.methods);
  if (!a.layouts.empty()) doc["layouts"] = csv_list(a.layouts);
  if (a.trials) doc["trials_per_cell"] = *a.trials;
  if (a.seed_base) {
    doc.erase("seeds");
    doc["seed_base"] = *a.seed_base;
  }
  auto plan = bench::plan_from_json(doc);
  plan.output_dir = a.out;
  if (a.threads) plan.threads = a.threads;
  const PolicyRegistry registry;
  for (const auto& m : plan.methods)
    if (!registry.registered(m)) throw ValidationError("methods", "unknown method '" + m.str() + "' (MB, SNL, TDP, HH)");

  const auto n = plan.methods.size() * plan.layouts.size() * (static_cast<std::size_t>(plan.trials_per_cell) + 1);
  log(Verbosity::info, "plan " + bench::plan_hash(plan) + ": " + std::to_string(n) + " robot runs into " + a.out);
  const auto t0 = std::chrono::steady_clock::now();
  std::size_t finished = 0;
  const auto report = bench::run_benchmark(plan, registry, [&](const std::string& what) {
    ++finished;
    log(Verbosity::debug, "[" + std::to_string(finished) + "] " + what);
    if (what.find("FAILED") != std::string::npos) log(Verbosity::info, what);
  });
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  for (auto f : {bench::Format::json, bench::Format::csv, bench::Format::markdown})
    for (const auto& p : bench::export_report(report, a.out, f)) log(Verbosity::debug, "wrote " + p.string());
  log(Verbosity::info, "done in " + bench::detail::fmt3(secs) + " s; report in " + (fs::path(a.out) / "report.json").string());
  for (const auto& t : report.trend)
    log(Verbosity::info, std::string("trend ") + (t.holds ? "holds" : "diverges") + ": " + t.name + " (" + t.observed + ")");
  if (report.partial()) {
    for (const auto& c : report.cells)
      if (c.failure) log(Verbosity::quiet, "cell " + c.method.str() + "/" + to_string(c.layout) + " failed: " + *c.failure);
    return kPartial;
  }
  return kOk;
}

int cmd_report(const std::string& in, const std::string& responses_path, const std::string& format,
               const std::string& out) {
  const auto fmt = bench::parse_format(format);
  std::optional<std::vector<rosas::RosasResponse>> responses;
  if (!responses_path.empty()) {
    try {
      responses = rosas::load_responses(responses_path);
    } catch (const io::IoError& e) {
      if (!fs::exists(responses_path)) throw;
      throw ValidationError("responses", e.what());
    }
    log(Verbosity::info, "loaded " + std::to_string(responses->size()) + " questionnaire responses");
  }
  const auto report = bench::aggregate_from_dir(in, responses ? &*responses : nullptr);
  if (report.hcm)
    for (const auto& w : report.hcm->warnings) log(Verbosity::info, "warning: " + w);
  const auto files = bench::export_report(report, out.empty() ? in : out, fmt);
  for (const auto& f : files) std::cout << f.string() << "\n";
  return report.partial() ? kPartial : kOk;
}

int cmd_serve(const std::string& address, unsigned short port, const std::string& root, int tick_ms) {
  if (tick_ms < 1) throw ValidationError("tick-ms", "must be >= 1");
  gateway::SessionManager mgr(root);
  gateway::Server server(mgr, {address, port, std::chrono::milliseconds(tick_ms)},
                         [](const std::string& m) { log(Verbosity::debug, m); });
  server.stop_on_signals();
  log(Verbosity::quiet, "serving on http://" + address + ":" + std::to_string(server.port()) + " (store " + root + ")");
  server.run();
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Desk-scale social navigation benchmark"};
  app.require_subcommand(1);

  RunArgs run;
  auto* run_cmd = app.add_subcommand("run", "Run a benchmark plan and write logs plus reports");
  run_cmd->add_option("--config", run.config, "Plan file (JSON)")->check(CLI::ExistingFile);
  run_cmd->add_option("--methods", run.methods, "Comma-separated methods, e.g. MB,SNL,TDP,HH");
  run_cmd->add_option("--layouts", run.layouts, "Comma-separated layouts: coinciding,perpendicular");
  run_cmd->add_option("--trials", run.trials, "Trials per method x layout cell");
  run_cmd->add_option("--seed-base", run.seed_base, "Seeds are seed-base .. seed-base + trials - 1");
  run_cmd->add_option("--threads", run.threads, "Worker threads (default: all cores)");
  run_cmd->add_option("--out", run.out, "Output directory")->required();

  std::string in, responses, format = "json", report_out;
  auto* report_cmd = app.add_subcommand("report", "Rebuild the report from persisted logs");
  report_cmd->add_option("--in", in, "Directory written by `run`")->required()->check(CLI::ExistingDirectory);
  report_cmd->add_option("--responses", responses, "Questionnaire responses (.csv or .json)");
  report_cmd->add_option("--format", format, "json | csv | markdown")->check(CLI::IsMember({"json", "csv", "markdown", "md"}));
  report_cmd->add_option("--out", report_out, "Where to write (default: --in)");

  std::string address = "127.0.0.1", root = "sessions";
  unsigned short port = 8080;
  int tick_ms = 100;
  auto* serve_cmd = app.add_subcommand("serve", "Serve interactive sessions over HTTP and WebSocket");
  serve_cmd->add_option("--port", port, "TCP port (0 picks a free one)");
  serve_cmd->add_option("--address", address, "Bind address");
  serve_cmd->add_option("--store", root, "Session store directory");
  serve_cmd->add_option("--tick-ms", tick_ms, "Wall-clock milliseconds per simulation tick (100 = real time)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kInvalid;
  }

  try {
    if (*run_cmd) return cmd_run(run);
    if (*report_cmd) return cmd_report(in, responses, format, report_out);
    if (*serve_cmd) return cmd_serve(address, port, root, tick_ms);
  } catch (const ValidationError& e) {
    std::cerr << "invalid: " << e.what() << "\n";
    return kInvalid;
  } catch (const bench::BenchError& e) {
    std::cerr << "failed: " << e.what() << "\n";
    return kPartial;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kOther;
  }
  return kOther;
}
