#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "krd/graph.hpp"
#include "krd/knowledge.hpp"
#include "krd/rng.hpp"

namespace krd {

enum class ProbabilityKind { power_learnable, power_fixed, exponential_learnable, gaussian_learnable };

// Maps normalized reliability to a sampling probability.
struct ProbabilityModel {
  ProbabilityKind kind = ProbabilityKind::power_learnable;
  double alpha = 1.0;
  double eta = 0.99;
  std::size_t fit_bins = 20;

  bool learnable() const noexcept { return kind != ProbabilityKind::power_fixed; }
};

// power:       1 - r^alpha
// exponential: clamp(alpha * exp(-alpha r), 0, 1)
// gaussian:    exp(-r^2 / (2 alpha^2))
double eval_probability(ProbabilityKind kind, double alpha, double rho_normalized);
inline double eval_probability(const ProbabilityModel& m, double rho_normalized) {
  return eval_probability(m.kind, m.alpha, rho_normalized);
}

// Agreement nodes bucketed by normalized reliability over B uniform bins on
// [0, 1]; density is the min/max normalized count.
struct AgreementHistogram {
  std::vector<std::size_t> counts;
  std::vector<double> density;
  bool empty = true;

  std::size_t bins() const noexcept { return counts.size(); }
  double center(std::size_t b) const noexcept {
    return (static_cast<double>(b) + 0.5) / static_cast<double>(counts.size());
  }
  std::size_t total() const noexcept;
};

std::size_t reliability_bin(double rho_normalized, std::size_t bins) noexcept;

AgreementHistogram build_agreement_histogram(const std::vector<int>& teacher_pred,
                                             const std::vector<int>& student_pred,
                                             const std::vector<double>& rho_normalized, std::size_t bins,
                                             const std::vector<bool>* hidden = nullptr);

// Histogram with the given per-bin densities and counts (unit counts when
// counts is empty). Used for synthetic fits.
AgreementHistogram histogram_from_density(std::vector<double> density, std::vector<std::size_t> counts = {});

struct AlphaFit {
  double alpha = 1.0;
  double residual = 0.0;
  bool at_bound = false;
};

inline constexpr double kAlphaMin = 0.05;
inline constexpr double kAlphaMax = 20.0;

// Least squares over bins with nonzero count: 200-point log grid on
// [0.05, 20] refined by golden-section search to |d alpha| < 1e-3.
// Throws FitError for an empty histogram or a fixed-power model.
AlphaFit fit_alpha(const AgreementHistogram& hist, ProbabilityKind kind);

// eta * previous + (1 - eta) * fitted.
double momentum_update(double previous, double fitted, double eta);

enum class SamplingStrategy { knowledge, entropy, random, all };

// Which end of a sampled neighbor pair provides the teacher distribution.
enum class KrdDirection {
  teacher_at_sampled,  // neighbor j teaches center i
  teacher_at_center,   // center i teaches neighbor j
};

// Which node's reliability sets the probability of a pair.
enum class ProbabilityConditioning { teacher_side, center_node };

struct SupervisionPair {
  NodeId teacher = 0;
  NodeId student = 0;
  auto operator<=>(const SupervisionPair&) const = default;
};

struct SampledSupervision {
  std::vector<SupervisionPair> pairs;
  SamplingStrategy strategy = SamplingStrategy::knowledge;
  std::size_t epoch = 0;
};

struct SamplerOptions {
  SamplingStrategy strategy = SamplingStrategy::knowledge;
  KrdDirection direction = KrdDirection::teacher_at_sampled;
  ProbabilityConditioning conditioning = ProbabilityConditioning::teacher_side;
};

// Inclusion probability of every directed (center, neighbor) pair, in the
// CSR order used by sample_supervision. Pairs touching hidden nodes are
// omitted.
struct PairProbabilities {
  std::vector<SupervisionPair> pairs;
  std::vector<double> probability;
};

PairProbabilities pair_probabilities(const NormalizedAdjacency& adj, const ReliabilityProfile& profile,
                                     const ProbabilityModel& model, const SamplerOptions& options,
                                     const std::vector<bool>* hidden = nullptr);

// One Bernoulli draw per candidate pair, in deterministic order.
SampledSupervision sample_supervision(const NormalizedAdjacency& adj, const ReliabilityProfile& profile,
                                      const ProbabilityModel& model, const SamplerOptions& options, Rng& rng,
                                      std::size_t epoch, const std::vector<bool>* hidden = nullptr);

std::string to_string(ProbabilityKind k);
std::string to_string(SamplingStrategy s);
std::string to_string(KrdDirection d);
std::string to_string(ProbabilityConditioning c);
ProbabilityKind parse_probability_kind(const std::string& s, double* fixed_alpha = nullptr);
SamplingStrategy parse_strategy(const std::string& s);
KrdDirection parse_direction(const std::string& s);
ProbabilityConditioning parse_conditioning(const std::string& s);

}  // namespace krd
