#include <gtest/gtest.h>

#include <filesystem>
#include <random>

#include "socnav/bench.hpp"

using namespace socnav;
using namespace socnav::bench;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("socnav_bench_" + name + "_" + std::to_string(::getpid()));
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

BenchmarkPlan small_plan(const fs::path& out, int trials = 2) {
  BenchmarkPlan p;
  p.methods = {MethodId::mb(), MethodId::snl()};
  p.trials_per_cell = trials;
  p.output_dir = out;
  p.threads = 1;
  return p;
}

std::size_t count_files(const fs::path& dir, const std::string& ext) {
  std::size_t n = 0;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.path().extension() == ext) ++n;
  return n;
}

}  // namespace

TEST(Plan, JsonRoundTripAndValidation) {
  const auto p = plan_from_json(json{{"methods", {"MB", "TDP"}}, {"layouts", {"coinciding"}}, {"trials_per_cell", 3},
                                     {"seed_base", 10}, {"ped_mode", "reactive"}, {"avoidance_gain", 0.5}});
  EXPECT_EQ(p.trial_seeds(), (std::vector<std::uint64_t>{10, 11, 12}));
  EXPECT_DOUBLE_EQ(p.ped_mode->avoidance_gain, 0.5);
  EXPECT_EQ(plan_from_json(to_json(p)).trial_seeds(), p.trial_seeds());
  EXPECT_EQ(plan_hash(plan_from_json(to_json(p))), plan_hash(p));

  EXPECT_THROW(plan_from_json(json{{"trials", 3}}), ValidationError);
  EXPECT_THROW(plan_from_json(json{{"methods", json::array()}}), ValidationError);
  EXPECT_THROW(plan_from_json(json{{"trials_per_cell", 0}}), ValidationError);
  EXPECT_THROW(plan_from_json(json{{"trials_per_cell", 3}, {"seeds", {1, 2}}}), ValidationError);
  EXPECT_THROW(plan_from_json(json{{"ped_mode", "live"}}), ValidationError);
  EXPECT_THROW(plan_from_json(json{{"scenario", {{"v_max_robot", -1}}}}), ValidationError);
  EXPECT_THROW(plan_from_json(json{{"scenario", {{"bogus", 1}}}}), ValidationError);
}

TEST(Plan, HashTracksEveryPlanField) {
  BenchmarkPlan base;
  const auto h = plan_hash(base);
  auto changed = [&](auto mutate) {
    BenchmarkPlan p = base;
    mutate(p);
    return plan_hash(p) != h;
  };
  EXPECT_TRUE(changed([](BenchmarkPlan& p) { p.trials_per_cell = 19; }));
  EXPECT_TRUE(changed([](BenchmarkPlan& p) { p.seeds = std::vector<std::uint64_t>(20, 7); }));
  EXPECT_TRUE(changed([](BenchmarkPlan& p) { p.methods.pop_back(); }));
  EXPECT_TRUE(changed([](BenchmarkPlan& p) { p.layouts = {Layout::perpendicular}; }));
  EXPECT_TRUE(changed([](BenchmarkPlan& p) { p.ped_mode = sim::PedestrianMode::reactive(); }));
  EXPECT_TRUE(changed([](BenchmarkPlan& p) { p.ped_mode.reset(); }));
  EXPECT_TRUE(changed([](BenchmarkPlan& p) { p.scenario = {{"d_social", 0.5}}; }));
  // execution-only settings do not count
  EXPECT_FALSE(changed([](BenchmarkPlan& p) { p.threads = 7; }));
  EXPECT_FALSE(changed([](BenchmarkPlan& p) { p.output_dir = "/elsewhere"; }));
  // an override equal to the default resolves to the same scenario but is a different plan document
  EXPECT_TRUE(changed([](BenchmarkPlan& p) { p.scenario = {{"d_social", 0.4}}; }));
}

TEST(Bench, HumanFreeSingleTrialMatchesBaseline) {
  BenchmarkPlan p;
  p.methods = {MethodId::mb()};
  p.trials_per_cell = 1;
  p.ped_mode.reset();
  p.threads = 1;
  const auto r = run_benchmark(p);
  ASSERT_EQ(r.cells.size(), 2u);
  for (const auto& c : r.cells) {
    ASSERT_TRUE(c.rcm) << c.failure.value_or("");
    EXPECT_EQ(c.rcm->r_succ, 1.0);
    EXPECT_EQ(c.rcm->r_dist, 1.0);
    EXPECT_EQ(c.rcm->r_extra_robot, 1.0);
    EXPECT_FALSE(c.rcm->r_extra_human);
  }
  EXPECT_FALSE(r.partial());
  EXPECT_EQ(r.provenance.ped_mode, "none");
}

TEST(Bench, RepeatRunsGiveIdenticalReportJson) {
  const auto a = run_benchmark(small_plan(scratch("rep_a")));
  const auto b = run_benchmark(small_plan(scratch("rep_b")));
  EXPECT_EQ(to_json(a).dump(), to_json(b).dump());
}

TEST(Bench, GridPersistsEveryLog) {
  const auto out = scratch("grid");
  BenchmarkPlan p;
  p.methods = {MethodId::mb(), MethodId::snl(), MethodId::hh()};
  p.trials_per_cell = 5;
  p.output_dir = out;
  const auto r = run_benchmark(p);
  EXPECT_FALSE(r.partial());
  // 6 robot baselines + 30 trials + 2 human baselines, each as CSV and JSON
  const auto logs = logs_dir(out);
  EXPECT_EQ(count_files(logs, ".csv"), 38u);
  EXPECT_EQ(count_files(logs, ".json"), 38u);
  std::size_t baselines = 0, trials = 0;
  for (const auto& e : fs::directory_iterator(logs)) {
    if (e.path().extension() != ".csv") continue;
    const auto stem = e.path().stem().string();
    if (stem.rfind("human_", 0) == 0) continue;
    if (stem.size() > 9 && stem.substr(stem.size() - 9) == "_baseline") ++baselines;
    else ++trials;
  }
  EXPECT_EQ(baselines, 6u);
  EXPECT_EQ(trials, 30u);
  for (const auto& m : p.methods)
    for (auto l : p.layouts)
      for (auto s : p.trial_seeds())
        EXPECT_TRUE(fs::exists(logs / (io::trial_stem(m.str(), to_string(l), s) + ".csv")));
  EXPECT_TRUE(fs::exists(out / "plan.json"));
  EXPECT_TRUE(fs::exists(out / "failures.json"));
  for (const auto& e : fs::recursive_directory_iterator(out)) EXPECT_NE(e.path().extension(), ".tmp");
}

TEST(Bench, ThreadedEqualsSerial) {
  auto serial = small_plan(scratch("serial"), 3);
  auto threaded = small_plan(scratch("threaded"), 3);
  threaded.threads = 4;
  EXPECT_EQ(run_benchmark(serial), run_benchmark(threaded));
}

TEST(Bench, AggregationFromLogsReproducesReport) {
  const auto out = scratch("agg");
  const auto r = run_benchmark(small_plan(out, 3));
  EXPECT_EQ(to_json(aggregate_from_dir(out)).dump(), to_json(r).dump());
}

TEST(Bench, ThrowingExternalPolicyIsolatedToItsCells) {
  PolicyRegistry reg;
  reg.register_external("Boom", [](const ScenarioConfig&) {
    return std::make_unique<ExternalPolicy>("Boom", [](const json&) -> json { throw std::runtime_error("boom"); });
  });
  const auto out = scratch("boom");
  auto p = small_plan(out);
  p.methods = {MethodId::mb(), MethodId::external("Boom")};
  p.threads = 3;
  const auto r = run_benchmark(p, reg);
  EXPECT_TRUE(r.partial());
  for (auto l : p.layouts) {
    const auto* bad = r.cell(MethodId::external("Boom"), l);
    ASSERT_NE(bad, nullptr);
    EXPECT_FALSE(bad->rcm);
    ASSERT_TRUE(bad->failure);
    EXPECT_NE(bad->failure->find("boom"), std::string::npos);
    const auto* good = r.cell(MethodId::mb(), l);
    ASSERT_TRUE(good->rcm);
    EXPECT_FALSE(good->failure);
  }
  // MB results equal an MB-only run
  auto mb_only = small_plan(scratch("boom_mb"));
  mb_only.methods = {MethodId::mb()};
  const auto ref = run_benchmark(mb_only);
  for (auto l : p.layouts)
    EXPECT_EQ(metrics::to_json(*r.cell(MethodId::mb(), l)->rcm), metrics::to_json(*ref.cell(MethodId::mb(), l)->rcm));
  // failures survive reloading
  EXPECT_EQ(to_json(aggregate_from_dir(out)).dump(), to_json(r).dump());
}

TEST(Bench, NothingSucceedsIsAnError) {
  PolicyRegistry reg;
  reg.register_external("Boom", [](const ScenarioConfig&) {
    return std::make_unique<ExternalPolicy>("Boom", [](const json&) -> json { throw std::runtime_error("boom"); });
  });
  auto p = small_plan({}, 1);
  p.methods = {MethodId::external("Boom")};
  EXPECT_THROW(run_benchmark(p, reg), BenchError);
}

TEST(Bench, UnregisteredExternalRejectedPerCell) {
  auto p = small_plan({}, 1);
  p.methods = {MethodId::mb(), MethodId::external("Nope")};
  const auto r = run_benchmark(p);
  EXPECT_TRUE(r.partial());
  EXPECT_NE(r.cell(MethodId::external("Nope"), Layout::coinciding)->failure->find("Nope"), std::string::npos);
}

TEST(Bench, PerMethodMeansAverageTrialMetrics) {
  const auto r = run_benchmark(small_plan({}, 3));
  for (const auto& s : r.per_method) {
    double dist = 0.0, extra = 0.0;
    std::size_t n = 0;
    for (auto l : {Layout::coinciding, Layout::perpendicular}) {
      const auto& ing = r.cell(s.method, l)->rcm->ingredients;
      for (const auto& t : ing.trials) {
        dist += ing.D_r / t.D_rh;
        extra += ing.T_r / t.T_rh;
        ++n;
      }
    }
    EXPECT_EQ(s.trials, n);
    EXPECT_NEAR(s.r_dist, dist / n, 1e-12);
    EXPECT_NEAR(s.r_extra_robot, extra / n, 1e-12);
  }
  ASSERT_EQ(r.anova.size(), 6u);
  EXPECT_EQ(r.anova.front().first, "r_haza");
  EXPECT_EQ(r.anova.front().second.df_between, 1);
  EXPECT_EQ(r.anova.front().second.df_within, 10);
}

TEST(Bench, TrendChecksCompareThreeMethods) {
  std::vector<MethodSummary> s(3);
  s[0].method = MethodId::mb();
  s[1].method = MethodId::snl();
  s[2].method = MethodId::tdp();
  s[0].r_dist = 1.1, s[1].r_dist = 1.2, s[2].r_dist = 1.3;
  s[0].r_extra_robot = 1.4, s[1].r_extra_robot = 1.2, s[2].r_extra_robot = 1.3;
  const auto t = trend_checks(s);
  ASSERT_EQ(t.size(), 2u);
  EXPECT_TRUE(t[0].holds);
  EXPECT_FALSE(t[1].holds);
  s.pop_back();
  EXPECT_TRUE(trend_checks(s).empty());
}

namespace {

// Responses for participants P01..Pn in cyclic order, items drawn per seed.
std::vector<rosas::RosasResponse> synthetic_responses(const std::vector<MethodId>& methods, int participants) {
  std::mt19937 rng(42);
  std::uniform_int_distribution<int> score(1, 9);
  std::vector<rosas::RosasResponse> out;
  const auto order = latin_square_order(static_cast<int>(methods.size()), participants);
  for (int p = 0; p < participants; ++p)
    for (int k : order[static_cast<std::size_t>(p)]) {
      rosas::RosasResponse r;
      r.participant_id = participant_for(static_cast<std::size_t>(p));
      r.method = methods[static_cast<std::size_t>(k)];
      for (const auto& item : rosas::roster()) r.items[item] = score(rng);
      out.push_back(r);
    }
  return out;
}

}  // namespace

TEST(Bench, ResponsesAddHcmAnovaAndCorrelation) {
  const auto out = scratch("hcm");
  auto p = small_plan(out, 4);
  const auto r0 = run_benchmark(p);
  const auto responses = synthetic_responses(p.methods, 4);
  const auto r = aggregate_from_dir(out, &responses);
  ASSERT_TRUE(r.hcm);
  EXPECT_EQ(r.hcm->responses, 8u);
  EXPECT_EQ(r.hcm->per_method.size(), 2u);
  EXPECT_TRUE(r.hcm->warnings.empty());
  EXPECT_EQ(r.hcm->per_method.at(MethodId::mb()), rosas::aggregate_hcm(responses).at(MethodId::mb()));
  EXPECT_EQ(r.anova.size(), 9u);
  ASSERT_TRUE(r.correlation);
  EXPECT_EQ(r.correlation->pairs, 8u);
  // same trial data as without responses
  for (std::size_t i = 0; i < r.cells.size(); ++i)
    EXPECT_EQ(metrics::to_json(*r.cells[i].rcm), metrics::to_json(*r0.cells[i].rcm));
}

TEST(Export, JsonRoundTrip) {
  const auto out = scratch("export");
  auto p = small_plan(out, 3);
  run_benchmark(p);
  const auto responses = synthetic_responses(p.methods, 3);
  const auto r = aggregate_from_dir(out, &responses);
  const auto files = export_report(r, out, Format::json);
  ASSERT_EQ(files.size(), 1u);
  const auto back = report_from_json(json::parse(io::read_file(files.front())));
  EXPECT_EQ(back, r);
  EXPECT_EQ(to_json(back).dump(2), to_json(r).dump(2));
}

TEST(Export, MarkdownHasFactorRowPerMethod) {
  const auto out = scratch("md");
  auto p = small_plan(out, 2);
  run_benchmark(p);
  const auto responses = synthetic_responses(p.methods, 2);
  const auto r = aggregate_from_dir(out, &responses);
  const auto md = io::read_file(export_report(r, out, Format::markdown).front());
  EXPECT_NE(md.find("| Method | Warmth | Competence | Discomfort |"), std::string::npos);
  for (const auto& m : p.methods) {
    const auto row = md.find("\n| " + m.str() + " | `");
    EXPECT_NE(row, std::string::npos) << m.str();
  }
  // trend checks need MB, SNL and TDP
  EXPECT_EQ(md.find("Trend checks"), std::string::npos);
}

TEST(Export, CsvTablesHaveMetricColumns) {
  const auto out = scratch("csv");
  auto p = small_plan(out, 2);
  run_benchmark(p);
  const auto responses = synthetic_responses(p.methods, 2);
  const auto files = export_report(aggregate_from_dir(out, &responses), out, Format::csv);
  EXPECT_EQ(files.size(), 5u);
  const auto rcm = io::read_file(out / "rcm.csv");
  EXPECT_EQ(rcm.substr(0, rcm.find('\n')),
            "method,layout,status,trials,r_haza,r_extra_human,r_dist,r_dec,r_extra_robot,r_succ");
  EXPECT_EQ(std::count(rcm.begin(), rcm.end(), '\n'), 5);
  const auto corr = io::read_file(out / "correlation.csv");
  EXPECT_EQ(corr.substr(0, corr.find('\n')), "factor,r_haza,r_extra_human,r_dist,r_dec,r_extra_robot,r_succ");
  EXPECT_TRUE(fs::exists(out / "hcm.csv"));
  EXPECT_TRUE(fs::exists(out / "anova.csv"));
  EXPECT_THROW(parse_format("pdf"), ValidationError);
}
