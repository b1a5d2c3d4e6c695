#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "krd/graph.hpp"
#include "krd/models.hpp"

namespace krd {

struct RunMetrics {
  // Keys train, val, test and, in inductive mode, inductive (test nodes that
  // were hidden during training). Empty splits are absent.
  std::map<std::string, double> split_accuracy;
  // Max-softmax probability over correctly predicted test nodes.
  double mean_confidence_correct = 0.0;
  double std_confidence_correct = 0.0;
  double teacher_energy = 0.0;
  double student_energy = 0.0;
  std::uint64_t seed = 0;
  std::string config_hash;
  std::optional<double> improvement_over_baseline;

  bool operator==(const RunMetrics&) const = default;
};

// Evaluation sets for a split; mode inductive adds the inductive test subset.
std::map<std::string, std::vector<NodeId>> evaluation_sets(const SplitSpec& split);

std::map<std::string, double> split_accuracy(const std::vector<int>& predicted, const std::vector<int>& labels,
                                             const SplitSpec& split);

// Student metrics; Dirichlet energies use the full graph.
RunMetrics evaluate(const Prediction& student, const Prediction& teacher, const GraphBundle& bundle,
                    const NormalizedAdjacency& full_adj, const SplitSpec& split);

struct Histogram {
  std::vector<double> edges;  // bins + 1 ascending values
  std::vector<std::size_t> counts;

  std::size_t total() const noexcept;
};

// B uniform bins on [lo, hi]; the top value falls in the last bin.
Histogram uniform_histogram(const std::vector<double>& values, std::size_t bins, double lo, double hi);

// Max-softmax values of rows flagged correct, on [0, 1]. bins >= 2.
Histogram confidence_histogram(const DenseMatrix& probs, const std::vector<bool>& correct, std::size_t bins);

// Max-softmax values of correctly predicted nodes among ids.
std::vector<double> correct_confidences(const Prediction& pred, const std::vector<int>& labels,
                                        std::span<const NodeId> ids);

// Teacher entropy of nodes the teacher gets right and the student gets wrong,
// over [0, ln C].
Histogram false_negative_entropy(const std::vector<int>& teacher_pred, const std::vector<int>& student_pred,
                                 const std::vector<int>& labels, const std::vector<double>& teacher_entropy,
                                 std::size_t num_classes, std::size_t bins = 20);

// Per epoch: among nodes in the most reliable `pool` fraction (smallest
// rho_normalized) on which the student matches the teacher, the fraction also
// in the most reliable `top` fraction. Zero when no pool node matches.
std::vector<double> reliability_stratum_curve(const std::vector<std::vector<int>>& epoch_predictions,
                                              const std::vector<int>& teacher_pred,
                                              const std::vector<double>& rho_normalized, double top = 0.2,
                                              double pool = 0.5);

double mean(const std::vector<double>& v);
// Sample standard deviation (n - 1); zero for fewer than two values.
double sample_std(const std::vector<double>& v);

// FNV-1a 64-bit, lowercase hex.
std::string fnv1a_hex(const std::string& text);

std::string metrics_to_json(const RunMetrics& m);
RunMetrics metrics_from_json(const std::string& text);
void write_metrics(const RunMetrics& m, const std::filesystem::path& file);
RunMetrics read_metrics(const std::filesystem::path& file);

// bin_lo,bin_hi,count
void write_histogram_csv(const Histogram& h, const std::filesystem::path& file);

}  // namespace krd
