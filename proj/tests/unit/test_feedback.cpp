#include "support.hpp"

#include "vigor/error.hpp"
#include "vigor/feedback/feedback.hpp"

#include <doctest.h>

#include <cmath>

using namespace vigor;
using feedback::DiagnosisCode;

namespace {

validation::SignalSummary summary(double delta, double rho, std::optional<double> spread = std::nullopt) {
  validation::SignalSummary s;
  s.delta_elbo = delta;
  s.rho_max = rho;
  s.delta_elbo_std = spread;
  return s;
}

std::vector<DiagnosisCode> codes(double delta, double rho, std::optional<double> spread = std::nullopt,
                                 feedback::FeedbackConfig cfg = {}) {
  return feedback::diagnose(summary(delta, rho, spread), cfg).codes;
}

feedback::FeedbackInputs golden_inputs() {
  feedback::FeedbackInputs in;
  in.round = 1;
  in.confounder_name = "Placental Function Efficiency";
  validation::SignalSummary s;
  s.delta_elbo = 0.002;
  s.delta_elbo_std = 0.0026;
  s.rho_max = 0.142;
  s.p_value = 1e-91;
  s.r_squared = 0.013;
  in.signal = s;
  in.diagnosis = feedback::diagnose(s, {});
  in.hints.redundant_covariates = {"age", "anemia", "cardiac", "diabetes", "hypertension"};
  in.hints.suggested_domains = {"factors related to tobacco", "factors related to alcohol"};
  return in;
}

} // namespace

TEST_SUITE("feedback") {

TEST_CASE("diagnosis codes") {
  using V = std::vector<DiagnosisCode>;
  CHECK(codes(0.0005, 0.05) == V{DiagnosisCode::Redundant, DiagnosisCode::WeakAlignment, DiagnosisCode::Noise});
  CHECK(codes(0.02, 0.05) == V{DiagnosisCode::WeakAlignment, DiagnosisCode::Noise});
  CHECK(codes(0.0005, 0.35) == V{DiagnosisCode::Redundant});
  CHECK(codes(0.02, 0.35).empty());
  CHECK(codes(-0.01, 0.05) == V{DiagnosisCode::Redundant, DiagnosisCode::WeakAlignment});
  CHECK(codes(0.0, 0.05) == V{DiagnosisCode::Redundant, DiagnosisCode::WeakAlignment});
  // thresholds are strict
  CHECK(codes(0.001, 0.1).empty());
}

TEST_CASE("seed spread widens the redundancy test") {
  using V = std::vector<DiagnosisCode>;
  CHECK(codes(0.002, 0.3, 0.0026) == V{DiagnosisCode::Redundant});
  CHECK(codes(0.002, 0.3, 0.0015).empty());
  CHECK(codes(0.002, 0.3).empty());
  feedback::FeedbackConfig off;
  off.redundancy_uses_seed_spread = false;
  CHECK(codes(0.002, 0.3, 0.0026, off).empty());
}

TEST_CASE("diagnosis text") {
  const auto all = feedback::diagnose(summary(0.0005, 0.05), {});
  CHECK(all.text == std::string(feedback::kRedundantSentence) + "\n" + feedback::kWeakAlignmentSentence + "\n" +
                        feedback::kNoiseSentence);
  CHECK(feedback::diagnose(summary(0.02, 0.35), {}).text == feedback::kNoDeficiencySentence);
  CHECK(feedback::to_string(DiagnosisCode::WeakAlignment) == "WEAK_ALIGNMENT");
}

TEST_CASE("p-value formatting") {
  CHECK(feedback::format_p_value(0.5) == "p=0.5000");
  CHECK(feedback::format_p_value(1e-4) == "p=0.0001");
  CHECK(feedback::format_p_value(1e-91) == "p<1e-90");
  CHECK(feedback::format_p_value(3e-7) == "p<1e-6");
  CHECK(feedback::format_p_value(9.9e-5) == "p<1e-4");
  CHECK(feedback::format_p_value(0.0) == "p<1e-300");
}

TEST_CASE("hints") {
  Rng rng(3);
  const std::size_t n = 300;
  cevae::LatentPosterior post;
  post.mu = testing::random_matrix(rng, n, 3);
  post.log_var = nn::Matrix(n, 3);
  nn::Matrix cov(n, 4);
  for (std::size_t i = 0; i < n; ++i) {
    cov(i, 0) = post.mu(i, 1) + 0.1 * rng.normal(); // strongly tied to dim 1
    cov(i, 1) = rng.normal();                       // unrelated
    cov(i, 2) = post.mu(i, 0) + 0.1 * rng.normal(); // tied to dim 0
    cov(i, 3) = -post.mu(i, 1) + 0.5 * rng.normal();
  }
  const std::vector<std::string> names{"age", "noise", "parity", "weight"};

  SUBCASE("redundant directions follow the best dimension") {
    const auto h = feedback::derive_hints(post, cov, names, 1, {});
    CHECK(h.redundant_covariates == std::vector<std::string>{"age", "weight"});
    CHECK(h.suggested_domains == std::vector<std::string>{"factors related to noise"});
    const auto h0 = feedback::derive_hints(post, cov, names, 0, {});
    CHECK(h0.redundant_covariates == std::vector<std::string>{"parity"});
  }
  SUBCASE("bottom fraction rounds up") {
    feedback::FeedbackConfig cfg;
    cfg.hint_bottom_fraction = 0.3; // ceil(1.2) = 2
    const auto h = feedback::derive_hints(post, cov, names, 1, cfg);
    REQUIRE(h.suggested_domains.size() == 2);
    CHECK(h.suggested_domains[0] == "factors related to noise");
  }
  SUBCASE("threshold is strict") {
    // oracle: the exact |Spearman| of one covariate used as the threshold excludes it
    const double rho = std::abs(validation::spearman(cov.column_copy(3), post.mu.column_copy(1)).r);
    feedback::FeedbackConfig cfg;
    cfg.hint_correlation_threshold = rho;
    CHECK(feedback::derive_hints(post, cov, names, 1, cfg).redundant_covariates == std::vector<std::string>{"age"});
  }
  SUBCASE("constant covariate counts as uncorrelated") {
    nn::Matrix with_const = cov;
    for (std::size_t i = 0; i < n; ++i) with_const(i, 0) = 1.0;
    const auto h = feedback::derive_hints(post, with_const, names, 1, {});
    CHECK(h.redundant_covariates == std::vector<std::string>{"weight"});
    CHECK(h.suggested_domains == std::vector<std::string>{"factors related to age"});
  }
  SUBCASE("shape errors") {
    CHECK_THROWS_AS(feedback::derive_hints(post, cov, std::vector<std::string>{"a"}, 1, {}), ShapeError);
    CHECK_THROWS_AS(feedback::derive_hints(post, cov, names, 3, {}), ShapeError);
  }
}

TEST_CASE("rendered message matches the golden file") {
  const auto in = golden_inputs();
  const std::vector<std::string> history{"Placental Function Efficiency"};
  const auto msg = feedback::render(in, history);
  CHECK(msg.rendered_text == testing::slurp(std::filesystem::path(VIGOR_TEST_SOURCE_DIR) / "golden/feedback_round1.txt"));
  CHECK(msg.round == 1);
  CHECK(msg.diagnosis_codes == std::vector<DiagnosisCode>{DiagnosisCode::Redundant});
  CHECK(msg.exclusion_list == history);
}

TEST_CASE("render lists exclusions once and marks empty lists") {
  auto in = golden_inputs();
  in.round = 3;
  in.hints = {};
  const std::vector<std::string> history{"A", "B", "A"};
  const auto msg = feedback::render(in, history);
  CHECK(msg.exclusion_list == std::vector<std::string>{"A", "B"});
  CHECK(msg.rendered_text.find("(Round 3)") != std::string::npos);
  CHECK(msg.rendered_text.find("similar to: A, B\n") != std::string::npos);
  CHECK(msg.rendered_text.find("orthogonal to: none\n") != std::string::npos);
}

TEST_CASE("render reports every missing field") {
  feedback::FeedbackInputs in;
  try {
    feedback::render(in, {});
    FAIL("expected RenderError");
  } catch (const feedback::RenderError& e) {
    const std::string msg = e.what();
    for (const char* field : {"round", "U_name", "signal", "diagnosis_text"}) CHECK(msg.find(field) != std::string::npos);
  }
  auto partial = golden_inputs();
  partial.diagnosis.reset();
  CHECK_THROWS_WITH_AS(feedback::render(partial, {}), doctest::Contains("diagnosis_text"), feedback::RenderError);
}

TEST_CASE("render is pure") {
  const auto in = golden_inputs();
  const std::vector<std::string> history{"X"};
  CHECK(feedback::render(in, history).rendered_text == feedback::render(in, history).rendered_text);
}

TEST_CASE("config validation and JSON") {
  feedback::FeedbackConfig cfg;
  cfg.hint_bottom_fraction = 0.0;
  CHECK_THROWS_AS(cfg.validate(), ValidationError);
  cfg = {};
  nlohmann::ordered_json j = cfg;
  j["hint_correlation_threshold"] = 0.4;
  CHECK(j.get<feedback::FeedbackConfig>().hint_correlation_threshold == 0.4);
  j["bogus"] = 1;
  CHECK_THROWS(j.get<feedback::FeedbackConfig>());
}

} // TEST_SUITE
