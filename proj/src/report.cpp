#include "krd/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include <nlohmann/json.hpp>

#include "krd/error.hpp"
#include "krd/knowledge.hpp"
#include "krd/numerics.hpp"

namespace krd {

std::map<std::string, std::vector<NodeId>> evaluation_sets(const SplitSpec& split) {
  std::map<std::string, std::vector<NodeId>> sets;
  if (!split.train.empty()) sets["train"] = split.train;
  if (!split.val.empty()) sets["val"] = split.val;
  if (!split.test.empty()) sets["test"] = split.test;
  if (split.mode == SplitMode::inductive) {
    std::vector<NodeId> hidden;
    std::vector<NodeId> inductive = split.inductive;
    std::sort(inductive.begin(), inductive.end());
    for (NodeId t : split.test)
      if (std::binary_search(inductive.begin(), inductive.end(), t)) hidden.push_back(t);
    if (!hidden.empty()) sets["inductive"] = std::move(hidden);
  }
  return sets;
}

std::map<std::string, double> split_accuracy(const std::vector<int>& predicted, const std::vector<int>& labels,
                                             const SplitSpec& split) {
  std::map<std::string, double> acc;
  for (const auto& [name, ids] : evaluation_sets(split)) acc[name] = accuracy(predicted, labels, ids);
  return acc;
}

std::vector<double> correct_confidences(const Prediction& pred, const std::vector<int>& labels,
                                        std::span<const NodeId> ids) {
  std::vector<double> out;
  for (NodeId i : ids)
    if (pred.labels[i] == labels[i]) out.push_back(pred.probs(i, static_cast<std::size_t>(pred.labels[i])));
  return out;
}

RunMetrics evaluate(const Prediction& student, const Prediction& teacher, const GraphBundle& bundle,
                    const NormalizedAdjacency& full_adj, const SplitSpec& split) {
  RunMetrics m;
  m.split_accuracy = split_accuracy(student.labels, bundle.labels, split);
  const auto conf = correct_confidences(student, bundle.labels, split.test);
  m.mean_confidence_correct = mean(conf);
  m.std_confidence_correct = sample_std(conf);
  m.teacher_energy = dirichlet_energy(teacher.probs, full_adj);
  m.student_energy = dirichlet_energy(student.probs, full_adj);
  return m;
}

std::size_t Histogram::total() const noexcept { return std::accumulate(counts.begin(), counts.end(), std::size_t{0}); }

Histogram uniform_histogram(const std::vector<double>& values, std::size_t bins, double lo, double hi) {
  if (bins == 0) throw ParameterError("histogram: bins must be positive");
  if (!(hi > lo)) throw ParameterError("histogram: empty range");
  Histogram h;
  h.counts.assign(bins, 0);
  const double width = (hi - lo) / static_cast<double>(bins);
  for (std::size_t b = 0; b <= bins; ++b) h.edges.push_back(b == bins ? hi : lo + width * static_cast<double>(b));
  for (double v : values) {
    const double t = (v - lo) / (hi - lo) * static_cast<double>(bins);
    const auto b = t > 0.0 ? std::min(static_cast<std::size_t>(t), bins - 1) : std::size_t{0};
    ++h.counts[b];
  }
  return h;
}

Histogram confidence_histogram(const DenseMatrix& probs, const std::vector<bool>& correct, std::size_t bins) {
  if (bins < 2) throw ParameterError("confidence_histogram: need at least two bins");
  if (correct.size() != probs.rows()) throw ShapeError("confidence_histogram: mask length mismatch");
  std::vector<double> conf;
  for (std::size_t i = 0; i < probs.rows(); ++i)
    if (correct[i]) conf.push_back(probs(i, argmax(probs.row(i))));
  return uniform_histogram(conf, bins, 0.0, 1.0);
}

Histogram false_negative_entropy(const std::vector<int>& teacher_pred, const std::vector<int>& student_pred,
                                 const std::vector<int>& labels, const std::vector<double>& teacher_entropy,
                                 std::size_t num_classes, std::size_t bins) {
  if (teacher_pred.size() != student_pred.size() || teacher_pred.size() != labels.size() ||
      teacher_pred.size() != teacher_entropy.size())
    throw ShapeError("false_negative_entropy: vector lengths differ");
  if (num_classes < 2) throw ParameterError("false_negative_entropy: need at least two classes");
  std::vector<double> selected;
  for (std::size_t i = 0; i < labels.size(); ++i)
    if (labels[i] != kUnknownLabel && teacher_pred[i] == labels[i] && student_pred[i] != labels[i])
      selected.push_back(teacher_entropy[i]);
  return uniform_histogram(selected, bins, 0.0, std::log(static_cast<double>(num_classes)));
}

std::vector<double> reliability_stratum_curve(const std::vector<std::vector<int>>& epoch_predictions,
                                              const std::vector<int>& teacher_pred,
                                              const std::vector<double>& rho_normalized, double top, double pool) {
  if (epoch_predictions.empty()) throw StateError("reliability_stratum_curve: no epoch snapshots recorded");
  if (!(top > 0.0 && top <= pool && pool <= 1.0)) throw ParameterError("reliability_stratum_curve: need 0 < top <= pool <= 1");
  const std::size_t n = teacher_pred.size();
  if (rho_normalized.size() != n) throw ShapeError("reliability_stratum_curve: length mismatch");
  std::vector<NodeId> order(n);
  std::iota(order.begin(), order.end(), NodeId{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](NodeId a, NodeId b) { return rho_normalized[a] < rho_normalized[b]; });
  const auto pool_n = static_cast<std::size_t>(std::floor(pool * static_cast<double>(n)));
  const auto top_n = static_cast<std::size_t>(std::floor(top * static_cast<double>(n)));

  std::vector<double> curve;
  for (const auto& pred : epoch_predictions) {
    if (pred.size() != n) throw ShapeError("reliability_stratum_curve: snapshot length mismatch");
    std::size_t in_pool = 0, in_top = 0;
    for (std::size_t r = 0; r < pool_n; ++r) {
      const NodeId i = order[r];
      if (pred[i] != teacher_pred[i]) continue;
      ++in_pool;
      if (r < top_n) ++in_top;
    }
    curve.push_back(in_pool == 0 ? 0.0 : static_cast<double>(in_top) / static_cast<double>(in_pool));
  }
  return curve;
}

double mean(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double sample_std(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

std::string fnv1a_hex(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string metrics_to_json(const RunMetrics& m) {
  nlohmann::ordered_json j;
  j["split_accuracy"] = nlohmann::ordered_json::object();
  for (const auto& [k, v] : m.split_accuracy) j["split_accuracy"][k] = v;
  j["mean_confidence_correct"] = m.mean_confidence_correct;
  j["std_confidence_correct"] = m.std_confidence_correct;
  j["dirichlet_energy"] = {{"teacher", m.teacher_energy}, {"student", m.student_energy}};
  j["seed"] = m.seed;
  j["config_hash"] = m.config_hash;
  if (m.improvement_over_baseline) j["improvement_over_baseline"] = *m.improvement_over_baseline;
  return j.dump(2) + "\n";
}

RunMetrics metrics_from_json(const std::string& text) {
  RunMetrics m;
  try {
    const auto j = nlohmann::json::parse(text);
    for (const auto& [k, v] : j.at("split_accuracy").items()) m.split_accuracy[k] = v.get<double>();
    m.mean_confidence_correct = j.at("mean_confidence_correct").get<double>();
    m.std_confidence_correct = j.value("std_confidence_correct", 0.0);
    m.teacher_energy = j.at("dirichlet_energy").at("teacher").get<double>();
    m.student_energy = j.at("dirichlet_energy").at("student").get<double>();
    m.seed = j.at("seed").get<std::uint64_t>();
    m.config_hash = j.at("config_hash").get<std::string>();
    if (j.contains("improvement_over_baseline"))
      m.improvement_over_baseline = j["improvement_over_baseline"].get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("metrics.json: ") + e.what());
  }
  return m;
}

void write_metrics(const RunMetrics& m, const std::filesystem::path& file) {
  std::ofstream out(file);
  if (!out) throw LoadError("cannot write " + file.string());
  out << metrics_to_json(m);
}

RunMetrics read_metrics(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw LoadError("cannot open " + file.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return metrics_from_json(ss.str());
}

void write_histogram_csv(const Histogram& h, const std::filesystem::path& file) {
  std::ofstream out(file);
  if (!out) throw LoadError("cannot write " + file.string());
  out << "bin_lo,bin_hi,count\n";
  char buf[96];
  for (std::size_t b = 0; b < h.counts.size(); ++b) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%zu\n", h.edges[b], h.edges[b + 1], h.counts[b]);
    out << buf;
  }
}

}  // namespace krd
