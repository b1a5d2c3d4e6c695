#include "krd/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "krd/error.hpp"

namespace krd {

double eval_probability(ProbabilityKind kind, double alpha, double r) {
  if (!(alpha > 0.0)) throw ParameterError("eval_probability: alpha must be positive");
  r = std::clamp(r, 0.0, 1.0);
  double p = 0.0;
  switch (kind) {
    case ProbabilityKind::power_learnable:
    case ProbabilityKind::power_fixed:
      p = 1.0 - std::pow(r, alpha);
      break;
    case ProbabilityKind::exponential_learnable:
      p = alpha * std::exp(-alpha * r);
      break;
    case ProbabilityKind::gaussian_learnable:
      p = std::exp(-(r * r) / (2.0 * alpha * alpha));
      break;
  }
  return std::clamp(p, 0.0, 1.0);
}

std::size_t AgreementHistogram::total() const noexcept {
  std::size_t t = 0;
  for (auto c : counts) t += c;
  return t;
}

std::size_t reliability_bin(double r, std::size_t bins) noexcept {
  if (!(r > 0.0)) return 0;
  const auto b = static_cast<std::size_t>(r * static_cast<double>(bins));
  return std::min(b, bins - 1);
}

namespace {

void normalize_density(AgreementHistogram& h) {
  h.density.assign(h.counts.size(), 0.0);
  const auto [lo, hi] = std::minmax_element(h.counts.begin(), h.counts.end());
  h.empty = *hi == 0;
  if (h.empty) return;
  if (*hi == *lo) {
    std::fill(h.density.begin(), h.density.end(), 1.0);
    return;
  }
  const double span = static_cast<double>(*hi - *lo);
  for (std::size_t b = 0; b < h.counts.size(); ++b)
    h.density[b] = static_cast<double>(h.counts[b] - *lo) / span;
}

}  // namespace

AgreementHistogram build_agreement_histogram(const std::vector<int>& teacher_pred,
                                             const std::vector<int>& student_pred,
                                             const std::vector<double>& rho_normalized, std::size_t bins,
                                             const std::vector<bool>* hidden) {
  if (bins == 0) throw ParameterError("agreement histogram: bins must be positive");
  if (teacher_pred.size() != student_pred.size() || teacher_pred.size() != rho_normalized.size())
    throw ShapeError("agreement histogram: vector lengths differ");
  AgreementHistogram h;
  h.counts.assign(bins, 0);
  for (std::size_t i = 0; i < teacher_pred.size(); ++i) {
    if (hidden && (*hidden)[i]) continue;
    if (teacher_pred[i] == student_pred[i]) ++h.counts[reliability_bin(rho_normalized[i], bins)];
  }
  normalize_density(h);
  return h;
}

AgreementHistogram histogram_from_density(std::vector<double> density, std::vector<std::size_t> counts) {
  if (counts.empty()) counts.assign(density.size(), 1);
  if (counts.size() != density.size()) throw ShapeError("histogram_from_density: length mismatch");
  AgreementHistogram h;
  h.counts = std::move(counts);
  h.density = std::move(density);
  h.empty = h.total() == 0;
  return h;
}

AlphaFit fit_alpha(const AgreementHistogram& hist, ProbabilityKind kind) {
  if (kind == ProbabilityKind::power_fixed) throw FitError("fit_alpha: fixed-power model has nothing to fit");
  if (hist.empty || hist.bins() == 0) throw FitError("fit_alpha: empty agreement histogram");

  std::vector<double> centers, target;
  for (std::size_t b = 0; b < hist.bins(); ++b) {
    if (hist.counts[b] == 0) continue;
    centers.push_back(hist.center(b));
    target.push_back(hist.density[b]);
  }
  auto objective = [&](double alpha) {
    double s = 0.0;
    for (std::size_t k = 0; k < centers.size(); ++k) {
      const double d = eval_probability(kind, alpha, centers[k]) - target[k];
      s += d * d;
    }
    return s;
  };

  constexpr std::size_t kGrid = 200;
  const double ratio = kAlphaMax / kAlphaMin;
  auto grid = [&](std::size_t k) {
    return kAlphaMin * std::pow(ratio, static_cast<double>(k) / static_cast<double>(kGrid - 1));
  };
  std::size_t best = 0;
  double best_value = objective(grid(0));
  for (std::size_t k = 1; k < kGrid; ++k) {
    const double v = objective(grid(k));
    if (v < best_value) {
      best_value = v;
      best = k;
    }
  }

  double a = grid(best == 0 ? 0 : best - 1);
  double b = grid(best + 1 == kGrid ? kGrid - 1 : best + 1);
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double c = b - inv_phi * (b - a);
  double d = a + inv_phi * (b - a);
  double fc = objective(c), fd = objective(d);
  while (b - a >= 1e-3) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - inv_phi * (b - a);
      fc = objective(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + inv_phi * (b - a);
      fd = objective(d);
    }
  }
  AlphaFit fit;
  fit.alpha = 0.5 * (a + b);
  fit.residual = objective(fit.alpha);
  if (best_value < fit.residual) {
    fit.alpha = grid(best);
    fit.residual = best_value;
  }
  fit.at_bound = best == 0 || best + 1 == kGrid;
  return fit;
}

double momentum_update(double previous, double fitted, double eta) {
  if (!(eta >= 0.0 && eta <= 1.0)) throw ParameterError("momentum_update: eta must lie in [0, 1]");
  return eta * previous + (1.0 - eta) * fitted;
}

PairProbabilities pair_probabilities(const NormalizedAdjacency& adj, const ReliabilityProfile& profile,
                                     const ProbabilityModel& model, const SamplerOptions& opt,
                                     const std::vector<bool>* hidden) {
  const std::size_t n = adj.num_nodes();
  if (profile.rho_normalized.size() != n || profile.base_entropy.size() != n)
    throw ShapeError("sampler: reliability profile does not cover the adjacency");

  std::vector<double> entropy_prob;
  if (opt.strategy == SamplingStrategy::entropy) {
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (std::size_t i = 0; i < n; ++i) {
      if (hidden && (*hidden)[i]) continue;
      lo = std::min(lo, profile.base_entropy[i]);
      hi = std::max(hi, profile.base_entropy[i]);
    }
    entropy_prob.assign(n, 1.0);
    if (hi > lo)
      for (std::size_t i = 0; i < n; ++i)
        entropy_prob[i] = std::clamp((profile.base_entropy[i] - lo) / (hi - lo), 0.0, 1.0);
  }

  PairProbabilities out;
  const CsrMatrix& m = adj.matrix;
  for (std::size_t i = 0; i < n; ++i) {
    if (hidden && (*hidden)[i]) continue;
    for (std::size_t e = m.row_offsets[i]; e < m.row_offsets[i + 1]; ++e) {
      const NodeId j = m.col_indices[e];
      if (j == i || (hidden && (*hidden)[j])) continue;
      const auto center = static_cast<NodeId>(i);
      const SupervisionPair pair = opt.direction == KrdDirection::teacher_at_sampled
                                       ? SupervisionPair{j, center}
                                       : SupervisionPair{center, j};
      const NodeId scored = opt.conditioning == ProbabilityConditioning::teacher_side ? pair.teacher : center;
      double p = 1.0;
      switch (opt.strategy) {
        case SamplingStrategy::knowledge:
          p = profile.degenerate ? 1.0 : eval_probability(model, profile.rho_normalized[scored]);
          break;
        case SamplingStrategy::entropy:
          p = entropy_prob[scored];
          break;
        case SamplingStrategy::random:
          p = 0.5;
          break;
        case SamplingStrategy::all:
          p = 1.0;
          break;
      }
      out.pairs.push_back(pair);
      out.probability.push_back(p);
    }
  }
  return out;
}

SampledSupervision sample_supervision(const NormalizedAdjacency& adj, const ReliabilityProfile& profile,
                                      const ProbabilityModel& model, const SamplerOptions& opt, Rng& rng,
                                      std::size_t epoch, const std::vector<bool>* hidden) {
  const PairProbabilities cand = pair_probabilities(adj, profile, model, opt, hidden);
  SampledSupervision s;
  s.strategy = opt.strategy;
  s.epoch = epoch;
  for (std::size_t k = 0; k < cand.pairs.size(); ++k)
    if (rng.uniform() < cand.probability[k]) s.pairs.push_back(cand.pairs[k]);
  return s;
}

std::string to_string(ProbabilityKind k) {
  switch (k) {
    case ProbabilityKind::power_learnable: return "power-learnable";
    case ProbabilityKind::power_fixed: return "power-fixed";
    case ProbabilityKind::exponential_learnable: return "exponential";
    case ProbabilityKind::gaussian_learnable: return "gaussian";
  }
  return "?";
}

std::string to_string(SamplingStrategy s) {
  switch (s) {
    case SamplingStrategy::knowledge: return "knowledge";
    case SamplingStrategy::entropy: return "entropy";
    case SamplingStrategy::random: return "random";
    case SamplingStrategy::all: return "all";
  }
  return "?";
}

std::string to_string(KrdDirection d) {
  return d == KrdDirection::teacher_at_sampled ? "teacher_at_sampled" : "teacher_at_center";
}

std::string to_string(ProbabilityConditioning c) {
  return c == ProbabilityConditioning::teacher_side ? "teacher_side" : "center_node";
}

ProbabilityKind parse_probability_kind(const std::string& s, double* fixed_alpha) {
  if (s == "power-learnable") return ProbabilityKind::power_learnable;
  if (s == "exponential") return ProbabilityKind::exponential_learnable;
  if (s == "gaussian") return ProbabilityKind::gaussian_learnable;
  if (s.rfind("power-fixed", 0) == 0) {
    if (fixed_alpha && s.size() > 12 && s[11] == ':') {
      try {
        *fixed_alpha = std::stod(s.substr(12));
      } catch (const std::exception&) {
        throw ParameterError("bad fixed power in '" + s + "'");
      }
      if (!(*fixed_alpha > 0.0)) throw ParameterError("fixed power must be positive");
    }
    return ProbabilityKind::power_fixed;
  }
  throw ParameterError("unknown probability model '" + s + "'");
}

SamplingStrategy parse_strategy(const std::string& s) {
  if (s == "knowledge") return SamplingStrategy::knowledge;
  if (s == "entropy") return SamplingStrategy::entropy;
  if (s == "random") return SamplingStrategy::random;
  if (s == "all") return SamplingStrategy::all;
  throw ParameterError("unknown sampling strategy '" + s + "'");
}

KrdDirection parse_direction(const std::string& s) {
  if (s == "teacher_at_sampled") return KrdDirection::teacher_at_sampled;
  if (s == "teacher_at_center") return KrdDirection::teacher_at_center;
  throw ParameterError("unknown krd direction '" + s + "'");
}

ProbabilityConditioning parse_conditioning(const std::string& s) {
  if (s == "teacher_side") return ProbabilityConditioning::teacher_side;
  if (s == "center_node") return ProbabilityConditioning::center_node;
  throw ParameterError("unknown probability conditioning '" + s + "'");
}

}  // namespace krd
