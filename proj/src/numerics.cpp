#include "krd/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "krd/error.hpp"

namespace krd {

void softmax_row(std::span<const double> logits, std::span<double> out, double temperature) {
  if (!(temperature > 0.0)) throw ParameterError("softmax: temperature must be positive");
  if (logits.size() != out.size()) throw ShapeError("softmax: output length mismatch");
  if (logits.empty()) return;
  double mx = -std::numeric_limits<double>::infinity();
  for (double v : logits) mx = std::max(mx, v / temperature);
  double sum = 0.0;
  for (std::size_t c = 0; c < logits.size(); ++c) {
    out[c] = std::exp(logits[c] / temperature - mx);
    sum += out[c];
  }
  for (double& v : out) v /= sum;
}

DenseMatrix softmax_rows(const DenseMatrix& logits, double temperature) {
  if (!(temperature > 0.0)) throw ParameterError("softmax: temperature must be positive");
  DenseMatrix out(logits.rows(), logits.cols());
  for (std::size_t i = 0; i < logits.rows(); ++i) softmax_row(logits.row(i), out.row(i), temperature);
  return out;
}

double entropy_row(std::span<const double> p) {
  double h = 0.0;
  for (double v : p) {
    if (v < 0.0) throw ParameterError("entropy: negative probability");
    if (v > 0.0) h -= v * std::log(v);
  }
  return h;
}

double kl_row(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size()) throw ShapeError("kl_row: length mismatch");
  double d = 0.0;
  for (std::size_t c = 0; c < p.size(); ++c) {
    if (p[c] > 0.0) d += p[c] * (std::log(p[c]) - std::log(std::max(q[c], kProbabilityFloor)));
  }
  return d;
}

double cross_entropy(std::span<const double> probs, int label) {
  if (label < 0 || static_cast<std::size_t>(label) >= probs.size())
    throw ParameterError("cross_entropy: label out of range");
  return -std::log(std::max(probs[static_cast<std::size_t>(label)], kProbabilityFloor));
}

DenseMatrix gaussian_perturb(const DenseMatrix& x, double delta, Rng& rng) {
  if (!(delta > 0.0)) throw ParameterError("gaussian_perturb: delta must be positive");
  DenseMatrix out = x;
  for (double& v : out.values()) v += delta * rng.normal();
  return out;
}

std::size_t argmax(std::span<const double> row) {
  std::size_t best = 0;
  for (std::size_t c = 1; c < row.size(); ++c)
    if (row[c] > row[best]) best = c;
  return best;
}

}  // namespace krd
