#include "support.hpp"

#include "vigor/data/synthetic.hpp"
#include "vigor/error.hpp"
#include "vigor/generator/generator.hpp"
#include "vigor/loop/convergence.hpp"
#include "vigor/loop/orchestrator.hpp"
#include "vigor/loop/validator.hpp"

#include <doctest.h>

using namespace vigor;
using loop::Decision;
using loop::RoundSignal;

namespace {

Decision decide(std::vector<RoundSignal> history, loop::LoopConfig cfg = {}) {
  return loop::check_convergence(history, cfg);
}

validation::SignalSummary summary(double delta, double rho) {
  validation::SignalSummary s;
  s.delta_elbo = delta;
  s.rho_max = rho;
  s.p_value = 0.01;
  return s;
}

nlohmann::json fixture_script() {
  return {{"proposals",
           {{{"name", "Placental Function Efficiency"}, {"explanation", "placental supply"}},
            {{"name", "Genetic Susceptibility"}, {"explanation", "inherited risk"}},
            {{"name", "Prenatal Care Quality Index"}, {"explanation", "care access"}},
            {{"name", "Spare"}}}}};
}

std::vector<validation::SignalSummary> fixture_signals() {
  std::vector<validation::SignalSummary> s{summary(0.002, 0.142), summary(0.0045, 0.188), summary(0.0112, 0.215)};
  s[0].delta_elbo_std = 0.0026; // same spread as the feedback golden fixture
  return s;
}

} // namespace

TEST_SUITE("loop") {

TEST_CASE("convergence rule examples") {
  CHECK(decide({{false, 0.0112, 0.215}}) == Decision::Success);
  CHECK(decide({{false, 0.002, 0.142}}) == Decision::Continue);
  CHECK(decide({{false, 0.01, 0.5}}) == Decision::Continue);
  CHECK(decide({{false, 0.5, 0.2}}) == Decision::Continue);
  CHECK_THROWS_AS(decide({}), ValidationError);
}

TEST_CASE("three-round fixture decisions") {
  std::vector<RoundSignal> h;
  std::vector<Decision> got;
  for (auto [d, r] : {std::pair{0.002, 0.142}, {0.0045, 0.188}, {0.0112, 0.215}}) {
    h.push_back({false, d, r});
    got.push_back(decide(h));
  }
  CHECK(got == std::vector<Decision>{Decision::Continue, Decision::Continue, Decision::Success});
}

TEST_CASE("iteration budget and diminishing returns") {
  loop::LoopConfig cfg;
  cfg.k_max = 3;
  CHECK(decide({{false, 0.001, 0.1}, {false, 0.004, 0.1}, {false, 0.009, 0.1}}, cfg) == Decision::MaxIters);
  // success outranks the budget
  CHECK(decide({{false, 0.001, 0.1}, {false, 0.004, 0.1}, {false, 0.02, 0.3}}, cfg) == Decision::Success);

  cfg = {};
  cfg.m = 2;
  CHECK(decide({{false, 0.002, 0.1}, {false, 0.0025, 0.1}, {false, 0.0028, 0.1}}, cfg) == Decision::Diminishing);
  CHECK(decide({{false, 0.002, 0.1}, {false, 0.0025, 0.1}}, cfg) == Decision::Continue);
  CHECK(decide({{false, 0.002, 0.1}, {false, 0.0045, 0.1}, {false, 0.0048, 0.1}}, cfg) == Decision::Continue);
  // a failed round breaks the chain
  CHECK(decide({{false, 0.002, 0.1}, {true, 0, 0}, {false, 0.0021, 0.1}}, cfg) == Decision::Continue);
  // budget outranks diminishing returns
  cfg.k_max = 3;
  CHECK(decide({{false, 0.002, 0.1}, {false, 0.0025, 0.1}, {false, 0.0028, 0.1}}, cfg) == Decision::MaxIters);
}

TEST_CASE("config validation") {
  loop::LoopConfig cfg;
  CHECK(cfg.seeds == std::vector<std::uint64_t>{0, 1, 2, 3, 4});
  cfg.seeds = {1, 1};
  CHECK_THROWS_AS(cfg.validate(), ValidationError);
  cfg = {};
  cfg.k_max = 0;
  CHECK_THROWS_AS(cfg.validate(), ValidationError);
  cfg = {};
  nlohmann::ordered_json j = cfg;
  j["tau_rho"] = 0.3;
  CHECK(j.get<loop::LoopConfig>().tau_rho == 0.3);
}

TEST_CASE("scripted loop over stubbed signals") {
  const auto ds = testing::toy_dataset(40, 3, 1);
  generator::ScriptedGenerator gen(fixture_script(), ".");

  SUBCASE("reaches SUCCESS at round 3") {
    loop::StubValidator val(fixture_signals());
    const auto log = loop::run_loop(ds, gen, val, {});
    REQUIRE(log.records.size() == 3);
    CHECK(log.termination == Decision::Success);
    CHECK(log.records[0].proposal->name == "Placental Function Efficiency");
    CHECK(log.records[0].status == loop::RoundStatus::Fail);
    CHECK(log.records[1].status == loop::RoundStatus::Fail);
    CHECK(log.records[2].status == loop::RoundStatus::Success);
    CHECK(log.best_round == std::size_t{3});
    CHECK(log.generator_backend == "scripted");
    CHECK(loop::exit_code(log.termination) == 0);
    // the first round's diagnosis is redundancy
    CHECK(log.records[0].feedback->rendered_text.find(feedback::kRedundantSentence) != std::string::npos);
  }
  SUBCASE("feedback of round k excludes every name up to k") {
    loop::StubValidator val(fixture_signals());
    const auto log = loop::run_loop(ds, gen, val, {});
    for (std::size_t k = 0; k < log.records.size(); ++k) {
      const auto& excl = log.records[k].feedback->exclusion_list;
      REQUIRE(excl.size() == k + 1);
      for (std::size_t j = 0; j <= k; ++j) CHECK(excl[j] == log.records[j].proposal->name);
    }
  }
  SUBCASE("k_max 1 stops after one redundant round") {
    loop::StubValidator val(fixture_signals());
    loop::LoopConfig cfg;
    cfg.k_max = 1;
    const auto log = loop::run_loop(ds, gen, val, cfg);
    CHECK(log.records.size() == 1);
    CHECK(log.termination == Decision::MaxIters);
    CHECK(log.records[0].status == loop::RoundStatus::Stopped);
    CHECK(loop::exit_code(log.termination) == 3);
  }
  SUBCASE("flat gains end in DIMINISHING") {
    loop::StubValidator val({summary(0.002, 0.1), summary(0.0025, 0.1), summary(0.0028, 0.1), summary(0.0, 0.0)});
    const auto log = loop::run_loop(ds, gen, val, {});
    CHECK(log.records.size() == 3);
    CHECK(log.termination == Decision::Diminishing);
    CHECK(loop::exit_code(log.termination) == 4);
  }
}

TEST_CASE("generator failures become FAIL records and the loop goes on") {
  const auto ds = testing::toy_dataset(40, 3, 1);
  const nlohmann::json script = {{"proposals",
                                  {{{"error", "transport"}, {"message", "HTTP 503"}},
                                   {{"name", "A"}},
                                   {{"name", "a "}},
                                   {{"error", "format"}, {"message", "garbled"}},
                                   {{"name", "B"}}}}};
  generator::ScriptedGenerator gen(script, ".");
  loop::StubValidator val({summary(0.001, 0.1), summary(0.02, 0.3)});
  const auto log = loop::run_loop(ds, gen, val, {});
  REQUIRE(log.records.size() == 5);
  CHECK(log.records[0].failed());
  CHECK(log.records[0].error_kind == "transport");
  CHECK(log.records[0].status == loop::RoundStatus::Fail);
  CHECK(log.records[2].error_kind == "rejection");
  CHECK(log.records[3].error_kind == "format");
  CHECK(log.records[4].status == loop::RoundStatus::Success);
  // round 2 sees no feedback from the failed round 1, round 5 sees round 2's
  CHECK(log.records[4].feedback->exclusion_list == std::vector<std::string>{"A", "B"});
  const auto table = loop::render_round_table(log);
  CHECK(table.find("(generation failed: transport)") != std::string::npos);
}

TEST_CASE("failed final round under the budget") {
  const auto ds = testing::toy_dataset(40, 3, 1);
  generator::ScriptedGenerator gen(nlohmann::json{{"proposals", {{{"error", "other"}}}}}, ".");
  loop::StubValidator val({});
  loop::LoopConfig cfg;
  cfg.k_max = 1;
  const auto log = loop::run_loop(ds, gen, val, cfg);
  CHECK(log.termination == Decision::MaxIters);
  CHECK(log.records[0].status == loop::RoundStatus::Fail);
  CHECK_FALSE(log.best_round.has_value());
}

TEST_CASE("run_round refuses to continue a finished loop") {
  const auto ds = testing::toy_dataset(40, 3, 1);
  const auto obs = generator::observe(ds);
  generator::ScriptedGenerator gen(fixture_script(), ".");
  loop::StubValidator val({summary(0.5, 0.5), summary(0.5, 0.5)});
  loop::LoopConfig cfg;
  loop::LoopState state{&obs, &gen, &val, &cfg, {}};
  CHECK(loop::run_round(state).decision == Decision::Success);
  CHECK_THROWS_AS(loop::run_round(state), StateError);
}

TEST_CASE("run log round trip and leakage guard") {
  data::SyntheticSpec spec;
  spec.n = 300;
  const auto syn = data::generate_synthetic(spec);
  loop::LoopConfig cfg;
  cfg.seeds = {0, 1};
  cfg.cevae.epochs = 2;
  cfg.cevae.hidden_dim = 16;
  cfg.cevae.latent_dim = 2;
  cfg.generator.api_key_env = "VIGOR_TEST_KEY_NAME";
  ::setenv("VIGOR_TEST_KEY_NAME", "sk-must-not-leak", 1);
  generator::ScriptedGenerator gen(nlohmann::json{{"proposals", {{{"name", "Noise"}}, {{"name", "Copy"}, {"mean", "column:x1"}, {"std", 0.0}}}}}, ".");
  loop::CevaeValidator val(syn.dataset, cfg);
  cfg.k_max = 2;
  const auto log = loop::run_loop(syn.dataset, gen, val, cfg);
  ::unsetenv("VIGOR_TEST_KEY_NAME");

  CHECK(val.baseline_trainings() == 2); // once per seed, not per round
  CHECK(log.baselines.size() == 2);
  CHECK(log.records.size() == 2);
  CHECK(log.ate_table.front().method == "Naive Difference (Unadjusted)");
  CHECK(log.ate_table[1].method == "CEVAE Baseline (No U)");
  CHECK(log.ate_table.back().method.find("(Final)") != std::string::npos);

  const std::string text = log.to_json().dump();
  CHECK(text.find("true_ate") == std::string::npos);
  CHECK(text.find("u_star") == std::string::npos);
  CHECK(text.find("sk-must-not-leak") == std::string::npos);
  CHECK(text.find("VIGOR_TEST_KEY_NAME") != std::string::npos);

  const auto back = loop::RunLog::from_json(log.to_json());
  CHECK(loop::render_report(back) == loop::render_report(log));
  CHECK(back.to_json()["records"][0]["validation"]["summary"] == log.to_json()["records"][0]["validation"]["summary"]);
  CHECK_THROWS_AS(loop::RunLog::from_json(nlohmann::ordered_json{{"format", "other"}}), ParseError);
}

TEST_CASE("validator strips ground truth and orders seeds") {
  data::SyntheticSpec spec;
  spec.n = 200;
  const auto syn = data::generate_synthetic(spec);
  loop::LoopConfig cfg;
  cfg.seeds = {3, 1};
  cfg.cevae.epochs = 1;
  cfg.cevae.hidden_dim = 8;
  cfg.cevae.latent_dim = 2;
  loop::CevaeValidator val(syn.dataset, cfg);
  const auto b = val.baselines();
  REQUIRE(b.size() == 2);
  CHECK(b[0].seed == 1);
  CHECK(b[1].seed == 3);
  const auto r = val.validate(std::vector<double>(200, 0.5));
  CHECK(r.per_seed.size() == 2);
  CHECK(r.summary.delta_elbo_std.has_value());
  CHECK(val.baseline_trainings() == 2);
  CHECK_THROWS(val.validate(std::vector<double>(10, 0.0)));
}

TEST_CASE("seed split is stratified and seeded") {
  const auto ds = testing::toy_dataset(100, 2, 5);
  const auto a = loop::seed_split(ds, 0.2, 7);
  CHECK(a.eval == loop::seed_split(ds, 0.2, 7).eval);
  CHECK(a.eval.size() == 20);
}

} // TEST_SUITE

TEST_SUITE("loop_benchmark") {

// Oracle generator without noise on the strong-confounding benchmark.
TEST_CASE("noise-free oracle converges in round 1") {
  std::size_t successes = 0;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    data::SyntheticSpec spec;
    spec.seed = seed;
    const auto syn = data::generate_synthetic(spec);
    loop::LoopConfig cfg;
    cfg.seeds = {seed};
    cfg.k_max = 1;
    generator::OracleGenerator gen(*syn.dataset.u_star, {0.0});
    loop::CevaeValidator val(syn.dataset, cfg);
    const auto log = loop::run_loop(syn.dataset, gen, val, cfg);
    if (log.termination == Decision::Success) ++successes;
  }
  MESSAGE("oracle SUCCESS in round 1 for " << successes << "/5 seeds");
  CHECK(successes >= 4);
}

} // TEST_SUITE
