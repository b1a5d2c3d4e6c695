#include "krd/knowledge.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "krd/error.hpp"
#include "krd/numerics.hpp"

namespace krd {

void ReliabilityProfile::normalize() {
  rho_max = 0.0;
  for (double r : rho) rho_max = std::max(rho_max, r);
  degenerate = !(rho_max > 0.0);
  rho_normalized.assign(rho.size(), 0.0);
  if (degenerate) return;
  for (std::size_t i = 0; i < rho.size(); ++i) rho_normalized[i] = std::clamp(rho[i] / rho_max, 0.0, 1.0);
}

std::vector<double> entropy_profile(const DenseMatrix& probs) {
  std::vector<double> h(probs.rows());
  for (std::size_t i = 0; i < probs.rows(); ++i) h[i] = entropy_row(probs.row(i));
  return h;
}

ReliabilityProfile quantify_reliability(const TeacherModel& teacher, const NormalizedAdjacency& adj,
                                        const DenseMatrix& x, double delta, std::size_t num_samples,
                                        const Rng& rng) {
  if (!(delta > 0.0)) throw ParameterError("quantify_reliability: delta must be positive");
  if (num_samples == 0) throw ParameterError("quantify_reliability: need at least one sample");

  ReliabilityProfile prof;
  prof.delta = delta;
  prof.num_samples = num_samples;
  prof.base_entropy = entropy_profile(softmax_rows(gcn_forward(teacher, adj, x, false).logits));

  const std::size_t n = x.rows();
  prof.rho.assign(n, 0.0);
  for (std::size_t k = 0; k < num_samples; ++k) {
    Rng sample_rng = rng.fork(k);
    const DenseMatrix noisy = gaussian_perturb(x, delta, sample_rng);
    const auto h = entropy_profile(softmax_rows(gcn_forward(teacher, adj, noisy, false).logits));
    for (std::size_t i = 0; i < n; ++i) {
      const double d = h[i] - prof.base_entropy[i];
      prof.rho[i] += d * d;
    }
  }
  const double scale = 1.0 / (static_cast<double>(num_samples) * delta * delta);
  for (double& r : prof.rho) r *= scale;
  prof.normalize();
  return prof;
}

ReliabilityProfile restrict_profile(ReliabilityProfile p, const std::vector<bool>& hidden) {
  if (hidden.size() != p.rho.size()) throw ShapeError("restrict_profile: mask length mismatch");
  for (std::size_t i = 0; i < hidden.size(); ++i)
    if (hidden[i]) p.rho[i] = 0.0;
  p.normalize();
  return p;
}

double dirichlet_energy(const DenseMatrix& y, const NormalizedAdjacency& adj) {
  if (y.rows() != adj.num_nodes()) throw ShapeError("dirichlet_energy: row count differs from node count");
  const CsrMatrix& m = adj.matrix;
  double total = 0.0;
  for (std::size_t i = 0; i < m.rows; ++i) {
    const double si = 1.0 / std::sqrt(adj.degrees[i]);
    for (std::size_t e = m.row_offsets[i]; e < m.row_offsets[i + 1]; ++e) {
      const std::size_t j = m.col_indices[e];
      if (j == i) continue;
      const double sj = 1.0 / std::sqrt(adj.degrees[j]);
      for (std::size_t c = 0; c < y.cols(); ++c) {
        const double d = y(i, c) * si - y(j, c) * sj;
        total += d * d;
      }
    }
  }
  return total;
}

void write_reliability_csv(const ReliabilityProfile& p, const std::filesystem::path& file) {
  std::ofstream out(file);
  if (!out) throw LoadError("cannot write " + file.string());
  out << "node_id,rho,rho_normalized,entropy\n";
  char buf[128];
  for (std::size_t i = 0; i < p.rho.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g,%.17g\n", i, p.rho[i], p.rho_normalized[i], p.base_entropy[i]);
    out << buf;
  }
}

}  // namespace krd
