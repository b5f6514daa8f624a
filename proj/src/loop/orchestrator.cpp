#include "vigor/loop/orchestrator.hpp"

#include "vigor/error.hpp"
#include "vigor/rng.hpp"

#include <cstdio>

namespace vigor::loop {

namespace {

constexpr std::uint64_t kSampleStream = 505;

std::string fixed(double v, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  return buf;
}

std::string pad(std::string s, std::size_t width) {
  if (s.size() < width) s.append(width - s.size(), ' ');
  return s;
}

std::vector<RoundSignal> signals_of(const std::vector<GenerationRecord>& history) {
  std::vector<RoundSignal> out;
  for (const auto& r : history) {
    if (r.failed())
      out.push_back({true, 0.0, 0.0});
    else
      out.push_back({false, r.validation->summary.delta_elbo, r.validation->summary.rho_max});
  }
  return out;
}

// Names proposed so far, oldest first.
std::vector<std::string> proposed_names(const std::vector<GenerationRecord>& history) {
  std::vector<std::string> names;
  for (const auto& r : history)
    if (r.proposal) names.push_back(r.proposal->name);
  return names;
}

std::string last_feedback(const std::vector<GenerationRecord>& history) {
  for (auto it = history.rbegin(); it != history.rend(); ++it)
    if (it->feedback) return it->feedback->rendered_text;
  return {};
}

} // namespace

std::string to_string(RoundStatus status) {
  switch (status) {
  case RoundStatus::Success:
    return "SUCCESS";
  case RoundStatus::Fail:
    return "FAIL";
  case RoundStatus::Stopped:
    return "STOPPED";
  }
  return "UNKNOWN";
}

int exit_code(Decision termination) {
  switch (termination) {
  case Decision::Success:
    return 0;
  case Decision::MaxIters:
    return 3;
  case Decision::Diminishing:
    return 4;
  case Decision::Continue:
    break;
  }
  return 1;
}

const GenerationRecord& run_round(LoopState& state) {
  if (!state.data || !state.generator || !state.validator || !state.config)
    throw StateError("run_round: loop state is incomplete");
  const LoopConfig& config = *state.config;
  if (!state.history.empty() && state.history.back().decision != Decision::Continue)
    throw StateError("run_round: loop already terminated");

  GenerationRecord record;
  record.round = state.history.size() + 1;

  generator::GeneratorRequest request;
  request.data = state.data;
  request.round = record.round;
  request.exclusion_list = proposed_names(state.history);
  if (record.round > 1) request.feedback = last_feedback(state.history);
  request.sample_seed = derive_seed(config.seeds.front(), kSampleStream + record.round);

  try {
    record.proposal = generator::generate_checked(*state.generator, request);
  } catch (const generator::TransportError& e) {
    record.error_kind = "transport";
    record.error = e.what();
  } catch (const generator::FormatError& e) {
    record.error_kind = "format";
    record.error = e.what();
  } catch (const generator::RejectionError& e) {
    record.error_kind = "rejection";
    record.error = e.what();
  } catch (const generator::GeneratorError& e) {
    record.error_kind = "generator";
    record.error = e.what();
  }

  if (record.proposal) {
    record.validation = state.validator->validate(record.proposal->values);
    feedback::FeedbackInputs inputs;
    inputs.round = record.round;
    inputs.confounder_name = record.proposal->name;
    inputs.signal = record.validation->summary;
    inputs.diagnosis = feedback::diagnose(record.validation->summary, config.feedback);
    inputs.hints = record.validation->hints;
    auto names = proposed_names(state.history);
    names.push_back(record.proposal->name);
    record.feedback = feedback::render(inputs, names);
  }

  auto signals = signals_of(state.history);
  signals.push_back(record.failed() ? RoundSignal{true, 0.0, 0.0}
                                    : RoundSignal{false, record.validation->summary.delta_elbo,
                                                  record.validation->summary.rho_max});
  record.decision = check_convergence(signals, config);
  switch (record.decision) {
  case Decision::Success:
    record.status = RoundStatus::Success;
    break;
  case Decision::Continue:
    record.status = RoundStatus::Fail;
    break;
  default:
    record.status = record.failed() ? RoundStatus::Fail : RoundStatus::Stopped;
  }
  state.history.push_back(std::move(record));
  return state.history.back();
}

RunLog run_loop(const data::Dataset& dataset, generator::Generator& generator, Validator& validator,
                const LoopConfig& config) {
  config.validate();
  const generator::ObservedData observed = generator::observe(dataset, config.data_description);

  RunLog log;
  nlohmann::ordered_json snapshot = config;
  log.config = snapshot;
  data::Dataset clean = dataset;
  clean.u_star.reset();
  clean.true_ate.reset();
  clean.u_hat.reset();
  log.dataset_fingerprint = data::fingerprint(clean);
  log.generator_backend = generator.backend_name();

  // baselines are trained once, before round 1
  const auto baselines = validator.baselines();
  log.baselines.assign(baselines.begin(), baselines.end());

  LoopState state;
  state.data = &observed;
  state.generator = &generator;
  state.validator = &validator;
  state.config = &config;
  while (state.history.empty() || state.history.back().decision == Decision::Continue) run_round(state);

  log.records = std::move(state.history);
  log.termination = log.records.back().decision;

  double best = 0.0;
  for (const auto& r : log.records) {
    if (r.failed()) continue;
    if (!log.best_round || r.validation->summary.delta_elbo > best) {
      best = r.validation->summary.delta_elbo;
      log.best_round = r.round;
    }
  }

  log.ate_table.push_back({"Naive Difference (Unadjusted)", data::naive_ate(clean)});
  if (auto b = validator.baseline_ate_mean()) log.ate_table.push_back({"CEVAE Baseline (No U)", *b});
  for (const auto& r : log.records)
    if (!r.failed() && r.validation->ate_mean)
      log.ate_table.push_back({"CEVAE + Round " + std::to_string(r.round) + " (" + r.proposal->name + ")",
                               *r.validation->ate_mean});
  // the reported final model: the successful round, otherwise the highest-gain one
  std::optional<std::size_t> final_round;
  if (log.termination == Decision::Success)
    final_round = log.records.back().round;
  else
    final_round = log.best_round;
  if (final_round) {
    const auto& r = log.records[*final_round - 1];
    if (r.validation->ate_mean)
      log.ate_table.push_back({"CEVAE + Round " + std::to_string(r.round) + " (Final)", *r.validation->ate_mean});
  }
  return log;
}

nlohmann::ordered_json RunLog::to_json() const {
  nlohmann::ordered_json records_json = nlohmann::ordered_json::array();
  for (const auto& r : records) {
    nlohmann::ordered_json j{{"round", r.round}, {"status", to_string(r.status)}, {"decision", to_string(r.decision)}};
    if (r.proposal) j["proposal"] = *r.proposal;
    if (r.validation) j["validation"] = *r.validation;
    if (r.feedback) j["feedback"] = *r.feedback;
    if (!r.error.empty()) j["error"] = {{"kind", r.error_kind}, {"message", r.error}};
    records_json.push_back(std::move(j));
  }
  nlohmann::ordered_json ate = nlohmann::ordered_json::array();
  for (const auto& row : ate_table) ate.push_back({{"method", row.method}, {"ate", row.ate}});
  return nlohmann::ordered_json{{"format", "vigor-run-log"},
                                {"version", 1},
                                {"config", config},
                                {"dataset_fingerprint", dataset_fingerprint},
                                {"generator_backend", generator_backend},
                                {"baselines", baselines},
                                {"records", records_json},
                                {"termination", loop::to_string(termination)},
                                {"best_round", best_round ? nlohmann::ordered_json(*best_round) : nlohmann::ordered_json()},
                                {"ate_table", ate}};
}

namespace {

Decision decision_from_string(const std::string& text) {
  for (auto d : {Decision::Success, Decision::MaxIters, Decision::Diminishing, Decision::Continue})
    if (to_string(d) == text) return d;
  throw ParseError("run log: unknown decision '" + text + "'");
}

RoundStatus status_from_string(const std::string& text) {
  for (auto s : {RoundStatus::Success, RoundStatus::Fail, RoundStatus::Stopped})
    if (to_string(s) == text) return s;
  throw ParseError("run log: unknown status '" + text + "'");
}

} // namespace

RunLog RunLog::from_json(const nlohmann::ordered_json& j) {
  if (j.value("format", std::string{}) != "vigor-run-log") throw ParseError("not a run log");
  RunLog log;
  try {
    log.config = j.at("config");
    log.dataset_fingerprint = j.at("dataset_fingerprint").get<std::string>();
    log.generator_backend = j.at("generator_backend").get<std::string>();
    for (const auto& b : j.at("baselines")) {
      SeedBaseline sb;
      sb.seed = b.at("seed").get<std::uint64_t>();
      sb.report.elbo = b.at("elbo").get<double>();
      sb.report.recon_t = b.at("recon_t").get<double>();
      sb.report.recon_y = b.at("recon_y").get<double>();
      sb.report.kl = b.at("kl").get<double>();
      sb.ate = b.at("ate").get<double>();
      log.baselines.push_back(sb);
    }
    for (const auto& rj : j.at("records")) {
      GenerationRecord r;
      r.round = rj.at("round").get<std::size_t>();
      r.status = status_from_string(rj.at("status").get<std::string>());
      r.decision = decision_from_string(rj.at("decision").get<std::string>());
      if (rj.contains("proposal")) {
        generator::ConfounderProposal p;
        p.name = rj["proposal"].at("name").get<std::string>();
        p.explanation = rj["proposal"].value("explanation", std::string{});
        r.proposal = std::move(p);
      }
      if (rj.contains("validation")) {
        const auto& s = rj["validation"].at("summary");
        RoundValidation v;
        v.summary.delta_elbo = s.at("delta_elbo").get<double>();
        if (s.contains("delta_elbo_std") && !s["delta_elbo_std"].is_null())
          v.summary.delta_elbo_std = s["delta_elbo_std"].get<double>();
        v.summary.rho_max = s.at("rho_max").get<double>();
        v.summary.p_value = s.at("p_value").get<double>();
        v.summary.i_avg = s.at("i_avg").get<double>();
        v.summary.r_squared = s.at("r_squared").get<double>();
        const auto& ate = rj["validation"].at("ate_mean");
        if (!ate.is_null()) v.ate_mean = ate.get<double>();
        r.validation = std::move(v);
      }
      if (rj.contains("feedback")) {
        feedback::FeedbackMessage m;
        m.round = rj["feedback"].at("round").get<std::size_t>();
        m.rendered_text = rj["feedback"].at("rendered_text").get<std::string>();
        r.feedback = std::move(m);
      }
      if (rj.contains("error")) {
        r.error_kind = rj["error"].at("kind").get<std::string>();
        r.error = rj["error"].at("message").get<std::string>();
      }
      log.records.push_back(std::move(r));
    }
    log.termination = decision_from_string(j.at("termination").get<std::string>());
    if (!j.at("best_round").is_null()) log.best_round = j["best_round"].get<std::size_t>();
    for (const auto& row : j.at("ate_table")) log.ate_table.push_back({row.at("method").get<std::string>(), row.at("ate").get<double>()});
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("run log: ") + e.what());
  }
  return log;
}

std::string render_round_table(const RunLog& log) {
  std::size_t name_width = 10;
  for (const auto& r : log.records)
    if (r.proposal) name_width = std::max(name_width, r.proposal->name.size());
  std::string out = pad("Round", 6) + "  " + pad("Confounder", name_width) + "  " + pad("Delta_ELBO", 10) + "  " +
                    pad("rho_max", 7) + "  Status\n";
  for (const auto& r : log.records) {
    const std::string name = r.proposal ? r.proposal->name : "(generation failed: " + r.error_kind + ")";
    const std::string delta = r.failed() ? "-" : fixed(r.validation->summary.delta_elbo, 4);
    const std::string rho = r.failed() ? "-" : fixed(r.validation->summary.rho_max, 3);
    out += pad(std::to_string(r.round), 6) + "  " + pad(name, name_width) + "  " + pad(delta, 10) + "  " +
           pad(rho, 7) + "  " + to_string(r.status) + "\n";
  }
  return out;
}

std::string render_ate_table(const RunLog& log) {
  std::size_t width = 6;
  for (const auto& row : log.ate_table) width = std::max(width, row.method.size());
  std::string out = pad("Method", width) + "  ATE Estimate\n";
  for (const auto& row : log.ate_table) out += pad(row.method, width) + "  " + fixed(row.ate, 4) + "\n";
  return out;
}

std::string render_report(const RunLog& log) {
  std::string out = "Dataset fingerprint: " + log.dataset_fingerprint + "\n";
  out += "Generator: " + log.generator_backend + "\n";
  out += "Termination: " + to_string(log.termination) + " after " + std::to_string(log.records.size()) +
         (log.records.size() == 1 ? " round" : " rounds") + "\n";
  if (log.best_round) out += "Highest-gain round: " + std::to_string(*log.best_round) + "\n";
  out += "\n" + render_round_table(log) + "\n" + render_ate_table(log);
  for (auto it = log.records.rbegin(); it != log.records.rend(); ++it) {
    if (it->feedback) {
      out += "\n" + it->feedback->rendered_text;
      break;
    }
  }
  return out;
}

} // namespace vigor::loop
