#pragma once

#include <filesystem>
#include <vector>

#include "krd/graph.hpp"
#include "krd/models.hpp"
#include "krd/rng.hpp"

namespace krd {

// Per-node reliability of the teacher's outputs. Smaller rho means the
// node's prediction entropy is more stable under feature noise.
struct ReliabilityProfile {
  std::vector<double> rho;
  double rho_max = 0.0;
  std::vector<double> rho_normalized;  // rho / rho_max, all zero when degenerate
  std::vector<double> base_entropy;    // entropy of the unperturbed teacher output
  std::size_t num_samples = 0;
  double delta = 0.0;
  // rho_max == 0: the teacher output does not depend on the features.
  bool degenerate = false;

  // Rebuild rho_normalized, rho_max and degenerate from rho.
  void normalize();
};

// rho_i = mean_k (H(Y'_k,i) - H(Y_i))^2 / delta^2 where Y'_k is the eval-mode
// teacher output on X + delta Z_k. Sample k draws from rng.fork(k), so the
// result does not depend on evaluation order.
ReliabilityProfile quantify_reliability(const TeacherModel& teacher, const NormalizedAdjacency& adj,
                                        const DenseMatrix& x, double delta, std::size_t num_samples,
                                        const Rng& rng);

// sum_i sum_{j in N(i)} || Y_i / sqrt(d_i) - Y_j / sqrt(d_j) ||^2 with the
// degrees of A + I. Self-loop terms vanish, so iterating the stored pattern
// of the normalized adjacency is exact.
// Hidden nodes get rho = 0 before renormalizing, so rho_max comes from the
// visible nodes only.
ReliabilityProfile restrict_profile(ReliabilityProfile profile, const std::vector<bool>& hidden);

double dirichlet_energy(const DenseMatrix& y, const NormalizedAdjacency& adj);

std::vector<double> entropy_profile(const DenseMatrix& probs);

// node_id,rho,rho_normalized,entropy with 17 significant digits.
void write_reliability_csv(const ReliabilityProfile& profile, const std::filesystem::path& file);

}  // namespace krd
