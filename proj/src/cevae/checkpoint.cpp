#include "vigor/cevae/checkpoint.hpp"

#include "vigor/error.hpp"

#include <fstream>

namespace vigor::cevae {

namespace {
constexpr const char* kFormat = "vigor-cevae-checkpoint";
constexpr int kVersion = 1;
} // namespace

nlohmann::ordered_json checkpoint_to_json(CevaeModel& model) {
  nlohmann::ordered_json j;
  j["format"] = kFormat;
  j["version"] = kVersion;
  j["config"] = model.config();
  j["covariate_dim"] = model.covariate_dim();
  j["scaling"] = {{"x_mean", model.scaling().x.mean},
                  {"x_scale", model.scaling().x.scale},
                  {"u_min", model.scaling().u_min},
                  {"u_max", model.scaling().u_max}};
  nlohmann::ordered_json params = nlohmann::ordered_json::object();
  for (const auto& p : model.parameters()) params[p.name] = std::vector<double>(p.value.begin(), p.value.end());
  j["parameters"] = std::move(params);
  auto& norm = model.encoder().norm;
  j["batch_norm"] = {{"running_mean", norm.running_mean()}, {"running_var", norm.running_var()}};
  const auto& opt = model.optimizer();
  j["adam"] = {{"steps", opt.steps()}, {"first_moments", opt.first_moments()}, {"second_moments", opt.second_moments()}};
  return j;
}

CevaeModel checkpoint_from_json(const nlohmann::ordered_json& j) {
  if (!j.contains("format") || j.at("format") != kFormat) throw ParseError("checkpoint: not a CEVAE checkpoint");
  if (j.at("version").get<int>() != kVersion) throw ParseError("checkpoint: unsupported version");
  const auto config = j.at("config").get<CevaeConfig>();
  InputScaling scaling;
  const auto& s = j.at("scaling");
  s.at("x_mean").get_to(scaling.x.mean);
  s.at("x_scale").get_to(scaling.x.scale);
  s.at("u_min").get_to(scaling.u_min);
  s.at("u_max").get_to(scaling.u_max);
  CevaeModel model(config, j.at("covariate_dim").get<std::size_t>(), std::move(scaling));

  const auto& params = j.at("parameters");
  for (const auto& p : model.parameters()) {
    if (!params.contains(p.name)) throw ParseError("checkpoint: missing parameter block '" + p.name + "'");
    const auto values = params.at(p.name).get<std::vector<double>>();
    if (values.size() != p.value.size())
      throw ParseError("checkpoint: parameter block '" + p.name + "' has " + std::to_string(values.size()) +
                       " values, expected " + std::to_string(p.value.size()));
    std::copy(values.begin(), values.end(), p.value.begin());
  }
  auto& norm = model.encoder().norm;
  const auto mean = j.at("batch_norm").at("running_mean").get<std::vector<double>>();
  const auto var = j.at("batch_norm").at("running_var").get<std::vector<double>>();
  if (mean.size() != norm.dim() || var.size() != norm.dim()) throw ParseError("checkpoint: batch-norm statistics size mismatch");
  norm.running_mean() = mean;
  norm.running_var() = var;

  const auto& adam = j.at("adam");
  model.optimizer().restore(adam.at("steps").get<std::uint64_t>(),
                            adam.at("first_moments").get<std::vector<std::vector<double>>>(),
                            adam.at("second_moments").get<std::vector<std::vector<double>>>());
  return model;
}

void save_checkpoint(CevaeModel& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ParseError("cannot write checkpoint " + path.string());
  out << checkpoint_to_json(model).dump(1) << '\n';
}

CevaeModel load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open checkpoint " + path.string());
  return checkpoint_from_json(nlohmann::ordered_json::parse(in));
}

} // namespace vigor::cevae
