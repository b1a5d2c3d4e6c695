#pragma once

#include <span>

#include "krd/matrix.hpp"
#include "krd/rng.hpp"

namespace krd {

// Floor applied to the second argument of KL and to CE probabilities.
inline constexpr double kProbabilityFloor = 1e-12;

// Row-wise softmax of logits / temperature, max-subtracted.
DenseMatrix softmax_rows(const DenseMatrix& logits, double temperature = 1.0);
void softmax_row(std::span<const double> logits, std::span<double> out, double temperature = 1.0);

// Natural-log entropy, with 0 ln 0 = 0.
double entropy_row(std::span<const double> p);

// sum p ln(p / max(q, floor)); terms with p = 0 contribute nothing.
double kl_row(std::span<const double> p, std::span<const double> q);

// -ln max(probs[label], floor).
double cross_entropy(std::span<const double> probs, int label);

// x + delta * Z with Z i.i.d. standard normal, row-major draw order.
DenseMatrix gaussian_perturb(const DenseMatrix& x, double delta, Rng& rng);

// Index of the row maximum; ties resolve to the lowest index.
std::size_t argmax(std::span<const double> row);

}  // namespace krd
