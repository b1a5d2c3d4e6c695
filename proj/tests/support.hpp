#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <unistd.h>

#include "krd/graph.hpp"
#include "krd/matrix.hpp"
#include "krd/rng.hpp"

namespace krd::testing {

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("krd-test-" + tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

inline DenseMatrix random_matrix(std::size_t r, std::size_t c, Rng& rng, double scale = 1.0) {
  DenseMatrix m(r, c);
  for (double& v : m.values()) v = scale * (2.0 * rng.uniform() - 1.0);
  return m;
}

inline std::vector<Edge> random_edges(std::size_t n, double p, Rng& rng) {
  std::vector<Edge> e;
  for (std::size_t u = 0; u < n; ++u)
    for (std::size_t v = u + 1; v < n; ++v)
      if (rng.uniform() < p) e.push_back({static_cast<NodeId>(u), static_cast<NodeId>(v)});
  return e;
}

// Brute-force D^-1/2 (A + I) D^-1/2.
inline DenseMatrix dense_normalized(std::size_t n, const std::vector<Edge>& edges) {
  DenseMatrix a = DenseMatrix::identity(n);
  for (const auto& e : edges) a(e.u, e.v) = a(e.v, e.u) = 1.0;
  std::vector<double> deg(n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) deg[i] += a(i, j);
  DenseMatrix out(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) out(i, j) = a(i, j) / std::sqrt(deg[i] * deg[j]);
  return out;
}

inline DenseMatrix naive_matmul(const DenseMatrix& a, const DenseMatrix& b) {
  DenseMatrix c(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < b.cols(); ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < a.cols(); ++k) s += a(i, k) * b(k, j);
      c(i, j) = s;
    }
  return c;
}

inline std::vector<double> naive_softmax(const std::vector<double>& z, double tau = 1.0) {
  std::vector<double> e(z.size());
  double s = 0.0;
  for (std::size_t k = 0; k < z.size(); ++k) s += e[k] = std::exp(z[k] / tau);
  for (double& v : e) v /= s;
  return e;
}

inline double naive_entropy(const std::vector<double>& p) {
  double h = 0.0;
  for (double v : p)
    if (v > 0.0) h -= v * std::log(v);
  return h;
}

inline double naive_kl(const std::vector<double>& p, const std::vector<double>& q) {
  double s = 0.0;
  for (std::size_t k = 0; k < p.size(); ++k)
    if (p[k] > 0.0) s += p[k] * std::log(p[k] / std::max(q[k], 1e-12));
  return s;
}

// Second route to the Dirichlet energy: 2 tr(Y^T (I - A~) Y).
inline double energy_by_trace(const DenseMatrix& y, std::size_t n, const std::vector<Edge>& edges) {
  const DenseMatrix a = dense_normalized(n, edges);
  double t = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      const double l = (i == j ? 1.0 : 0.0) - a(i, j);
      for (std::size_t c = 0; c < y.cols(); ++c) t += y(i, c) * l * y(j, c);
    }
  return 2.0 * t;
}

inline DenseMatrix random_simplex_rows(std::size_t r, std::size_t c, Rng& rng) {
  DenseMatrix p(r, c);
  for (std::size_t i = 0; i < r; ++i) {
    double s = 0.0;
    for (std::size_t k = 0; k < c; ++k) s += p(i, k) = -std::log(1.0 - rng.uniform());
    for (std::size_t k = 0; k < c; ++k) p(i, k) /= s;
  }
  return p;
}

inline std::vector<double> to_vec(std::span<const double> s) { return {s.begin(), s.end()}; }

// |a - n| / max(|a|, |n|, 1e-6).
inline double relative_error(double analytic, double numeric) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), 1e-6});
}

// Largest relative error between the analytic gradient of every parameter
// entry and a central difference of f with step h.
inline double max_fd_error(std::vector<DenseMatrix>& params, const std::vector<DenseMatrix>& analytic,
                           const std::function<double()>& f, double h = 1e-5) {
  double worst = 0.0;
  for (std::size_t p = 0; p < params.size(); ++p) {
    auto vals = params[p].values();
    for (std::size_t k = 0; k < vals.size(); ++k) {
      const double orig = vals[k];
      vals[k] = orig + h;
      const double up = f();
      vals[k] = orig - h;
      const double down = f();
      vals[k] = orig;
      worst = std::max(worst, relative_error(analytic[p].values()[k], (up - down) / (2.0 * h)));
    }
  }
  return worst;
}

}  // namespace krd::testing
