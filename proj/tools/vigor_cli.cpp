// vigor: command-line entry point (synth, train-baseline, validate, loop, report).

#include "vigor/cevae/checkpoint.hpp"
#include "vigor/data/dataset.hpp"
#include "vigor/data/synthetic.hpp"
#include "vigor/error.hpp"
#include "vigor/generator/generator.hpp"
#include "vigor/loop/orchestrator.hpp"
#include "vigor/loop/validator.hpp"
#include "vigor/validation/signal.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

namespace fs = std::filesystem;
using nlohmann::ordered_json;
using namespace vigor;

namespace {

class UsageError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UsageError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

ordered_json read_json(const fs::path& path) {
  try {
    return ordered_json::parse(read_text(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw UsageError(path.string() + ": " + e.what());
  }
}

std::string fixed(double v, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  return buf;
}

struct Options {
  std::string config_path;
  std::string out_dir;
  std::string data_path;

  // synthetic
  std::optional<std::size_t> n, d;
  std::optional<double> a_t, a_y, tau, leakage, outcome_bias;
  std::optional<std::uint64_t> synth_seed;

  // training
  std::vector<std::uint64_t> seeds;
  std::optional<std::size_t> epochs, hidden, latent, batch_size;
  std::optional<double> learning_rate, holdout;
  std::string routing;

  // validate
  std::string u_column;
  std::string u_file;
  std::string u_file_column;

  // loop
  std::string backend;
  std::string script;
  std::string ground_truth;
  std::vector<double> oracle_noise;
  std::optional<std::size_t> k_max, m;
  std::optional<double> tau_elbo, tau_rho, epsilon;
  std::string description_file;

  // report
  std::string run_log;
};

struct Merged {
  ordered_json file;
  data::SyntheticSpec synthetic;
  loop::LoopConfig loop;
  fs::path base_dir; ///< directory relative script paths in the config file resolve against
};

Merged merge(const Options& o) {
  Merged m;
  if (!o.config_path.empty()) {
    m.file = read_json(o.config_path);
    m.base_dir = fs::path(o.config_path).parent_path();
    ordered_json loop_part = m.file;
    if (loop_part.contains("synthetic")) {
      data::from_json(loop_part["synthetic"], m.synthetic);
      loop_part.erase("synthetic");
    }
    loop::from_json(loop_part, m.loop);
  }
  auto set = [](auto& field, const auto& value) {
    if (value) field = *value;
  };
  set(m.synthetic.n, o.n);
  set(m.synthetic.d, o.d);
  set(m.synthetic.a_t, o.a_t);
  set(m.synthetic.a_y, o.a_y);
  set(m.synthetic.tau, o.tau);
  set(m.synthetic.leakage, o.leakage);
  set(m.synthetic.outcome_bias, o.outcome_bias);
  set(m.synthetic.seed, o.synth_seed);

  auto& c = m.loop;
  if (!o.seeds.empty()) c.seeds = o.seeds;
  set(c.cevae.epochs, o.epochs);
  set(c.cevae.hidden_dim, o.hidden);
  set(c.cevae.latent_dim, o.latent);
  set(c.cevae.batch_size, o.batch_size);
  set(c.cevae.learning_rate, o.learning_rate);
  set(c.cevae.holdout_fraction, o.holdout);
  if (!o.routing.empty()) c.cevae.routing = cevae::routing_from_string(o.routing);
  if (!o.backend.empty()) c.generator.backend = generator::backend_from_string(o.backend);
  if (!o.script.empty()) {
    c.generator.script_path = fs::absolute(o.script).lexically_normal().string();
    if (c.generator.backend != generator::Backend::Scripted && o.backend.empty())
      c.generator.backend = generator::Backend::Scripted;
  }
  if (!o.oracle_noise.empty()) c.generator.oracle_noise = o.oracle_noise;
  set(c.k_max, o.k_max);
  set(c.m, o.m);
  set(c.tau_elbo, o.tau_elbo);
  set(c.tau_rho, o.tau_rho);
  set(c.epsilon, o.epsilon);
  if (!o.description_file.empty()) c.data_description = read_text(o.description_file);
  return m;
}

fs::path prepare_out(const Options& o) {
  if (o.out_dir.empty()) throw UsageError("--out is required");
  fs::create_directories(o.out_dir);
  return o.out_dir;
}

void snapshot(const fs::path& out, const ordered_json& config) { write_text(out / "config.json", config.dump(2) + "\n"); }

data::Dataset load_data(const Options& o) {
  if (o.data_path.empty()) throw UsageError("--data is required");
  if (!fs::exists(o.data_path)) throw UsageError("no such dataset: " + o.data_path);
  return data::load_csv(o.data_path);
}

// --- synth ------------------------------------------------------------------

int cmd_synth(const Options& o) {
  Merged m = merge(o);
  m.synthetic.validate();
  const fs::path out = prepare_out(o);
  const auto result = data::generate_synthetic(m.synthetic);
  data::save_csv(result.dataset, out / "dataset.csv");
  data::save_ground_truth(data::ground_truth_of(result, m.synthetic), out / "ground_truth.json");
  snapshot(out, ordered_json{{"synthetic", m.synthetic}});
  std::cout << "wrote " << result.dataset.size() << " rows x " << result.dataset.covariate_count()
            << " covariates to " << (out / "dataset.csv").string() << "\n"
            << "naive ATE " << fixed(data::naive_ate(result.dataset), 4) << "\n";
  return 0;
}

// --- train-baseline -----------------------------------------------------------

int cmd_train_baseline(const Options& o) {
  Merged m = merge(o);
  m.loop.cevae.validate();
  if (m.loop.seeds.empty()) throw UsageError("no seeds");
  const data::Dataset dataset = load_data(o);
  const fs::path out = prepare_out(o);
  loop::CevaeValidator validator(dataset, m.loop);
  ordered_json report = ordered_json::array();
  std::cout << "Seed  Held-out ELBO   recon_t   recon_y      KL     ATE\n";
  for (const auto& b : validator.baselines()) {
    auto model = validator.baseline_model(b.seed);
    cevae::save_checkpoint(model, out / ("baseline_seed" + std::to_string(b.seed) + ".json"));
    report.push_back(b);
    std::printf("%-4llu  %13s  %8s  %8s  %6s  %6s\n", static_cast<unsigned long long>(b.seed),
                fixed(b.report.elbo, 4).c_str(), fixed(b.report.recon_t, 4).c_str(), fixed(b.report.recon_y, 4).c_str(),
                fixed(b.report.kl, 4).c_str(), fixed(b.ate, 4).c_str());
  }
  write_text(out / "baseline.json", ordered_json{{"dataset_fingerprint", data::fingerprint(dataset)}, {"seeds", report}}.dump(2) + "\n");
  snapshot(out, ordered_json(m.loop));
  return 0;
}

// --- validate -----------------------------------------------------------------

std::vector<double> load_u_file(const Options& o, std::size_t n) {
  std::vector<double> u;
  if (fs::path(o.u_file).extension() == ".json") {
    u = data::load_ground_truth(o.u_file).u_star;
  } else {
    // a CSV with a header; the named column or the first one
    std::istringstream in(read_text(o.u_file));
    std::string line;
    std::getline(in, line);
    std::vector<std::string> header;
    {
      std::stringstream ss(line);
      std::string cell;
      while (std::getline(ss, cell, ',')) header.push_back(cell);
    }
    std::size_t col = 0;
    if (!o.u_file_column.empty()) {
      auto it = std::find(header.begin(), header.end(), o.u_file_column);
      if (it == header.end()) throw UsageError(o.u_file + ": no column '" + o.u_file_column + "'");
      col = static_cast<std::size_t>(it - header.begin());
    }
    while (std::getline(in, line)) {
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty()) continue;
      std::stringstream ss(line);
      std::string cell;
      for (std::size_t c = 0; c <= col; ++c)
        if (!std::getline(ss, cell, ',')) throw UsageError(o.u_file + ": short row");
      u.push_back(std::stod(cell));
    }
  }
  if (u.size() != n)
    throw UsageError("candidate has " + std::to_string(u.size()) + " values, dataset has " + std::to_string(n) + " rows");
  return u;
}

int cmd_validate(const Options& o) {
  Merged m = merge(o);
  m.loop.cevae.validate();
  if (o.u_column.empty() == o.u_file.empty()) throw UsageError("exactly one of --u-column or --u-file is required");
  data::Dataset dataset = load_data(o);
  std::vector<double> u;
  std::string label;
  if (!o.u_column.empty()) {
    const auto& names = dataset.column_names;
    if (std::find(names.begin(), names.end(), o.u_column) == names.end())
      throw UsageError("dataset has no column '" + o.u_column + "'");
    u = dataset.take_column(o.u_column);
    label = o.u_column;
  } else {
    u = load_u_file(o, dataset.size());
    label = fs::path(o.u_file).filename().string();
  }
  const fs::path out = prepare_out(o);

  loop::CevaeValidator validator(dataset, m.loop);
  const auto baselines = validator.baselines();
  const auto result = validator.validate(u);

  auto mean_std = [](const std::vector<double>& v) {
    double mean = 0.0;
    for (double x : v) mean += x;
    mean /= static_cast<double>(v.size());
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    return std::pair{mean, v.size() > 1 ? std::sqrt(ss / static_cast<double>(v.size() - 1)) : 0.0};
  };
  std::vector<double> base_elbo, aug_elbo, gains, best_pearson, pearson_p;
  for (const auto& b : baselines) base_elbo.push_back(b.report.elbo);
  for (const auto& s : result.per_seed) {
    aug_elbo.push_back(s.signal.augmented_elbo);
    gains.push_back(s.signal.delta_elbo);
    double best = 0.0, p = 1.0;
    for (const auto& d : s.signal.per_dim)
      if (std::abs(d.pearson) > best) {
        best = std::abs(d.pearson);
        p = d.pearson_p;
      }
    best_pearson.push_back(best);
    pearson_p.push_back(p);
  }
  const auto [bm, bs] = mean_std(base_elbo);
  const auto [am, as] = mean_std(aug_elbo);
  const auto [gm, gs] = mean_std(gains);
  const auto [pm, ps] = mean_std(best_pearson);
  (void)ps;
  std::sort(pearson_p.begin(), pearson_p.end());
  const double pearson_p_median = pearson_p[pearson_p.size() / 2];
  const auto& s = result.summary;

  std::cout << "Candidate: " << label << " (" << baselines.size() << (baselines.size() == 1 ? " seed" : " seeds") << ")\n\n";
  std::printf("%-28s %10s %10s\n", "Model", "ELBO", "Std");
  std::printf("%-28s %10s %10s\n", "Baseline (without U)", fixed(bm, 4).c_str(), ("+-" + fixed(bs, 4)).c_str());
  std::printf("%-28s %10s %10s\n", "Augmented (with U)", fixed(am, 4).c_str(), ("+-" + fixed(as, 4)).c_str());
  std::printf("%-28s %10s %10s\n\n", "Information Gain", fixed(gm, 4).c_str(), ("+-" + fixed(gs, 4)).c_str());
  std::printf("%-32s %8s %12s\n", "Metric", "Value", "p-value");
  std::printf("%-32s %8s %12s\n", "Best Pearson Correlation", fixed(pm, 3).c_str(),
              feedback::format_p_value(pearson_p_median).c_str());
  std::printf("%-32s %8s %12s\n", "Best Spearman Correlation", fixed(s.rho_max, 3).c_str(),
              feedback::format_p_value(s.p_value).c_str());
  std::printf("%-32s %8s %12s\n", "Average Mutual Information", fixed(s.i_avg, 3).c_str(), "--");
  std::printf("%-32s %8s %12s\n", "Predictive R-squared", fixed(s.r_squared, 3).c_str(), "--");

  ordered_json j{{"dataset_fingerprint", data::fingerprint(dataset)},
                 {"candidate", label},
                 {"baselines", ordered_json(std::vector<loop::SeedBaseline>(baselines.begin(), baselines.end()))},
                 {"validation", result}};
  write_text(out / "validation.json", j.dump(2) + "\n");
  snapshot(out, ordered_json(m.loop));
  return 0;
}

// --- loop -----------------------------------------------------------------------

int cmd_loop(const Options& o) {
  Merged m = merge(o);
  m.loop.validate();
  const data::Dataset dataset = load_data(o);
  const fs::path out = prepare_out(o);

  std::optional<std::vector<double>> u_star;
  if (!o.ground_truth.empty()) {
    u_star = data::load_ground_truth(o.ground_truth).u_star;
    if (u_star->size() != dataset.size()) throw UsageError("ground truth does not match the dataset size");
  }
  if (m.loop.generator.backend == generator::Backend::Oracle && !u_star)
    throw UsageError("the oracle backend needs --ground-truth");

  auto gen = generator::make_generator(m.loop.generator, u_star, m.base_dir);
  loop::CevaeValidator validator(dataset, m.loop);
  const loop::RunLog log = loop::run_loop(dataset, *gen, validator, m.loop);

  write_text(out / "run_log.json", log.to_json().dump(2) + "\n");
  const std::string report = loop::render_report(log);
  write_text(out / "report.txt", report);
  snapshot(out, ordered_json(m.loop));
  std::cout << report;
  return loop::exit_code(log.termination);
}

// --- report -----------------------------------------------------------------------

int cmd_report(const Options& o) {
  if (o.run_log.empty()) throw UsageError("--run-log is required");
  const auto log = loop::RunLog::from_json(read_json(o.run_log));
  const std::string report = loop::render_report(log);
  std::cout << report;
  if (!o.out_dir.empty()) {
    const fs::path out = prepare_out(o);
    write_text(out / "report.txt", report);
    snapshot(out, log.config);
  }
  return 0;
}

void add_training_flags(CLI::App* cmd, Options& o) {
  cmd->add_option("--seeds", o.seeds, "Training seeds (overrides config)")->delimiter(',');
  cmd->add_option("--epochs", o.epochs, "Training epochs");
  cmd->add_option("--hidden", o.hidden, "First hidden layer width");
  cmd->add_option("--latent", o.latent, "Latent dimension");
  cmd->add_option("--batch-size", o.batch_size, "Mini-batch size");
  cmd->add_option("--lr", o.learning_rate, "Adam learning rate");
  cmd->add_option("--holdout", o.holdout, "Held-out fraction for ELBO evaluation");
  cmd->add_option("--routing", o.routing, "Candidate routing: encoder_only or encoder_and_decoders");
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"VIGOR+ confounder generation and validation loop"};
  app.require_subcommand(1);
  Options o;

  auto* synth = app.add_subcommand("synth", "Generate a planted-confounder benchmark dataset");
  synth->add_option("--config", o.config_path, "JSON config (\"synthetic\" block)");
  synth->add_option("--out", o.out_dir, "Output directory")->required();
  synth->add_option("--n", o.n, "Rows");
  synth->add_option("--d", o.d, "Covariates");
  synth->add_option("--a-t", o.a_t, "Confounder log-odds effect on treatment");
  synth->add_option("--a-y", o.a_y, "Confounder log-odds effect on outcome");
  synth->add_option("--tau", o.tau, "Treatment log-odds effect on outcome");
  synth->add_option("--leakage", o.leakage, "Share of the confounder mixed into covariates");
  synth->add_option("--outcome-bias", o.outcome_bias, "Outcome intercept");
  synth->add_option("--seed", o.synth_seed, "Generation seed");

  auto* train = app.add_subcommand("train-baseline", "Train baseline models (no candidate) per seed");
  train->add_option("--config", o.config_path, "JSON config");
  train->add_option("--data", o.data_path, "Dataset CSV")->required();
  train->add_option("--out", o.out_dir, "Output directory")->required();
  add_training_flags(train, o);

  auto* validate = app.add_subcommand("validate", "Score one candidate confounder column");
  validate->add_option("--config", o.config_path, "JSON config");
  validate->add_option("--data", o.data_path, "Dataset CSV")->required();
  validate->add_option("--out", o.out_dir, "Output directory")->required();
  validate->add_option("--u-column", o.u_column, "Dataset column to use as the candidate (removed from covariates)");
  validate->add_option("--u-file", o.u_file, "Candidate values: CSV, or a ground-truth JSON sidecar");
  validate->add_option("--u-file-column", o.u_file_column, "Column of --u-file to read (default: first)");
  add_training_flags(validate, o);

  auto* loop_cmd = app.add_subcommand("loop", "Run the generate-validate-feedback loop");
  loop_cmd->add_option("--config", o.config_path, "JSON config");
  loop_cmd->add_option("--data", o.data_path, "Dataset CSV")->required();
  loop_cmd->add_option("--out", o.out_dir, "Output directory")->required();
  loop_cmd->add_option("--backend", o.backend, "Generator backend: llm_http, scripted or oracle");
  loop_cmd->add_option("--script", o.script, "Proposal script for the scripted backend");
  loop_cmd->add_option("--ground-truth", o.ground_truth, "Ground-truth sidecar (oracle backend)");
  loop_cmd->add_option("--oracle-noise", o.oracle_noise, "Oracle noise per round")->delimiter(',');
  loop_cmd->add_option("--k-max", o.k_max, "Maximum rounds");
  loop_cmd->add_option("--m", o.m, "Consecutive small changes for diminishing returns");
  loop_cmd->add_option("--tau-elbo", o.tau_elbo, "Information-gain success threshold");
  loop_cmd->add_option("--tau-rho", o.tau_rho, "Latent-correlation success threshold");
  loop_cmd->add_option("--epsilon", o.epsilon, "Diminishing-returns tolerance");
  loop_cmd->add_option("--description-file", o.description_file, "Text describing the variables, sent to the generator");
  add_training_flags(loop_cmd, o);

  auto* report = app.add_subcommand("report", "Render the tables of a saved run log");
  report->add_option("--run-log", o.run_log, "run_log.json")->required();
  report->add_option("--out", o.out_dir, "Also write report.txt and a config snapshot here");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*synth) return cmd_synth(o);
    if (*train) return cmd_train_baseline(o);
    if (*validate) return cmd_validate(o);
    if (*loop_cmd) return cmd_loop(o);
    if (*report) return cmd_report(o);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 2;
  } catch (const ValidationError& e) {
    std::cerr << "invalid configuration or input: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
