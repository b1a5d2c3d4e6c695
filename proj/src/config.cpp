#include "krd/config.hpp"

#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "krd/error.hpp"
#include "krd/report.hpp"

namespace krd {
namespace {

using json = nlohmann::ordered_json;

std::string mode_name(SplitMode m) { return m == SplitMode::transductive ? "transductive" : "inductive"; }

SplitMode parse_mode(const std::string& s) {
  if (s == "transductive") return SplitMode::transductive;
  if (s == "inductive") return SplitMode::inductive;
  throw ParameterError("unknown mode '" + s + "'");
}

void reject_unknown(const json& j, const std::set<std::string>& allowed, const std::string& where) {
  if (!j.is_object()) throw ParameterError(where + ": expected an object");
  for (const auto& [k, v] : j.items())
    if (!allowed.count(k)) throw ParameterError("unknown config key '" + where + k + "'");
}

template <typename T>
void read(const json& j, const char* key, T& out, const std::string& where) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ParameterError("config key '" + where + key + "' has the wrong type");
  }
}

json train_to_json(const TrainConfig& c) {
  return {{"epochs", c.epochs},   {"learning_rate", c.learning_rate}, {"weight_decay", c.weight_decay},
          {"dropout", c.dropout}, {"hidden", c.hidden},               {"layers", c.layers},
          {"patience", c.patience}, {"bias", c.bias}};
}

TrainConfig train_from_json(const json& j, TrainConfig c, const std::string& where) {
  reject_unknown(j, {"epochs", "learning_rate", "weight_decay", "dropout", "hidden", "layers", "patience", "bias"},
                 where);
  read(j, "epochs", c.epochs, where);
  read(j, "learning_rate", c.learning_rate, where);
  read(j, "weight_decay", c.weight_decay, where);
  read(j, "dropout", c.dropout, where);
  read(j, "hidden", c.hidden, where);
  read(j, "layers", c.layers, where);
  read(j, "patience", c.patience, where);
  read(j, "bias", c.bias, where);
  return c;
}

std::string prob_model_name(const ProbabilityModel& m) {
  if (m.kind != ProbabilityKind::power_fixed) return to_string(m.kind);
  char buf[64];
  std::snprintf(buf, sizeof buf, "power-fixed:%.17g", m.alpha);
  return buf;
}

}  // namespace

std::string config_to_json(const RunConfig& c) {
  const DistillConfig& d = c.distill;
  json j;
  j["bundle"] = c.bundle;
  j["out"] = c.out;
  j["mode"] = mode_name(c.mode);
  j["seeds"] = c.seeds;
  j["use_bundle_split"] = c.use_bundle_split;
  j["row_normalize"] = c.row_normalize;
  j["split"] = {{"kind", c.split.kind == SplitParams::Kind::per_class ? "per_class" : "ratio"},
                {"train_per_class", c.split.train_per_class},
                {"num_val", c.split.num_val},
                {"num_test", c.split.num_test},
                {"train_ratio", c.split.train_ratio},
                {"val_ratio", c.split.val_ratio},
                {"inductive_holdout", c.split.inductive_holdout}};
  j["teacher"] = train_to_json(c.teacher);
  j["student"] = train_to_json(d.student);
  j["distill"] = {{"method", to_string(d.method)},
                  {"lambda", d.lambda},
                  {"temperature", d.temperature},
                  {"delta", d.delta},
                  {"num_samples", d.num_samples},
                  {"strategy", to_string(d.sampler.strategy)},
                  {"prob_model", prob_model_name(d.probability)},
                  {"alpha0", d.probability.alpha},
                  {"eta", d.probability.eta},
                  {"fit_bins", d.probability.fit_bins},
                  {"direction", to_string(d.sampler.direction)},
                  {"conditioning", to_string(d.sampler.conditioning)},
                  {"kl_direction", to_string(d.kl_direction)}};
  j["sweep"] = {{"lambda", c.sweep_lambda}, {"eta", c.sweep_eta}};
  return j.dump(2) + "\n";
}

RunConfig config_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ParameterError(std::string("config is not valid JSON: ") + e.what());
  }
  RunConfig c;
  reject_unknown(j,
                 {"bundle", "out", "mode", "seeds", "use_bundle_split", "row_normalize", "split", "teacher", "student",
                  "distill", "sweep"},
                 "");
  read(j, "bundle", c.bundle, "");
  read(j, "out", c.out, "");
  std::string mode = mode_name(c.mode);
  read(j, "mode", mode, "");
  c.mode = parse_mode(mode);
  read(j, "seeds", c.seeds, "");
  read(j, "use_bundle_split", c.use_bundle_split, "");
  read(j, "row_normalize", c.row_normalize, "");

  if (j.contains("split")) {
    const json& s = j["split"];
    reject_unknown(s, {"kind", "train_per_class", "num_val", "num_test", "train_ratio", "val_ratio", "inductive_holdout"},
                   "split.");
    std::string kind = c.split.kind == SplitParams::Kind::per_class ? "per_class" : "ratio";
    read(s, "kind", kind, "split.");
    if (kind == "per_class") c.split.kind = SplitParams::Kind::per_class;
    else if (kind == "ratio") c.split.kind = SplitParams::Kind::ratio;
    else throw ParameterError("unknown split kind '" + kind + "'");
    read(s, "train_per_class", c.split.train_per_class, "split.");
    read(s, "num_val", c.split.num_val, "split.");
    read(s, "num_test", c.split.num_test, "split.");
    read(s, "train_ratio", c.split.train_ratio, "split.");
    read(s, "val_ratio", c.split.val_ratio, "split.");
    read(s, "inductive_holdout", c.split.inductive_holdout, "split.");
  }
  if (j.contains("teacher")) c.teacher = train_from_json(j["teacher"], c.teacher, "teacher.");
  if (j.contains("student")) c.distill.student = train_from_json(j["student"], c.distill.student, "student.");

  if (j.contains("distill")) {
    const json& d = j["distill"];
    const std::string w = "distill.";
    reject_unknown(d,
                   {"method", "lambda", "temperature", "delta", "num_samples", "strategy", "prob_model", "alpha0", "eta",
                    "fit_bins", "direction", "conditioning", "kl_direction"},
                   w);
    DistillConfig& dc = c.distill;
    std::string s;
    s = to_string(dc.method);
    read(d, "method", s, w);
    dc.method = parse_method(s);
    read(d, "lambda", dc.lambda, w);
    read(d, "temperature", dc.temperature, w);
    read(d, "delta", dc.delta, w);
    read(d, "num_samples", dc.num_samples, w);
    s = to_string(dc.sampler.strategy);
    read(d, "strategy", s, w);
    dc.sampler.strategy = parse_strategy(s);
    read(d, "alpha0", dc.probability.alpha, w);
    s = prob_model_name(dc.probability);
    read(d, "prob_model", s, w);
    dc.probability.kind = parse_probability_kind(s, &dc.probability.alpha);
    read(d, "eta", dc.probability.eta, w);
    read(d, "fit_bins", dc.probability.fit_bins, w);
    s = to_string(dc.sampler.direction);
    read(d, "direction", s, w);
    dc.sampler.direction = parse_direction(s);
    s = to_string(dc.sampler.conditioning);
    read(d, "conditioning", s, w);
    dc.sampler.conditioning = parse_conditioning(s);
    s = to_string(dc.kl_direction);
    read(d, "kl_direction", s, w);
    dc.kl_direction = parse_kl_direction(s);
  }
  if (j.contains("sweep")) {
    reject_unknown(j["sweep"], {"lambda", "eta"}, "sweep.");
    read(j["sweep"], "lambda", c.sweep_lambda, "sweep.");
    read(j["sweep"], "eta", c.sweep_eta, "sweep.");
  }
  validate_config(c);
  return c;
}

RunConfig load_config(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw LoadError("cannot open config " + file.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return config_from_json(ss.str());
}

std::string config_hash(const RunConfig& cfg) {
  RunConfig c = cfg;
  c.out.clear();
  return fnv1a_hex(config_to_json(c));
}

void validate_config(const RunConfig& c) {
  if (c.seeds.empty()) throw ParameterError("seed list is empty");
  validate_distill_config(c.distill);
  if (c.teacher.epochs == 0) throw ParameterError("teacher epochs must be positive");
  for (const TrainConfig* t : {&c.teacher, &c.distill.student}) {
    if (!(t->dropout >= 0.0 && t->dropout < 1.0)) throw ParameterError("dropout must lie in [0, 1)");
    if (!(t->learning_rate > 0.0)) throw ParameterError("learning rate must be positive");
    if (t->layers == 0) throw ParameterError("layers must be positive");
  }
  if (!(c.split.inductive_holdout >= 0.0 && c.split.inductive_holdout < 1.0))
    throw ParameterError("inductive_holdout must lie in [0, 1)");
  for (double l : c.sweep_lambda)
    if (!(l >= 0.0 && l <= 1.0)) throw ParameterError("sweep lambda must lie in [0, 1]");
  for (double e : c.sweep_eta)
    if (!(e >= 0.0 && e <= 1.0)) throw ParameterError("sweep eta must lie in [0, 1]");
}

}  // namespace krd
