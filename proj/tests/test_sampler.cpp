#include <doctest.h>

#include <map>
#include <set>

#include "krd/error.hpp"
#include "krd/sampler.hpp"
#include "support.hpp"

using namespace krd;

namespace {

std::vector<double> bin_centers(std::size_t bins) {
  std::vector<double> c(bins);
  for (std::size_t b = 0; b < bins; ++b) c[b] = (static_cast<double>(b) + 0.5) / static_cast<double>(bins);
  return c;
}

AgreementHistogram model_histogram(ProbabilityKind kind, double alpha, std::size_t bins, double noise = 0.0,
                                   std::uint64_t seed = 0) {
  Rng rng(seed);
  std::vector<double> d;
  for (double c : bin_centers(bins)) d.push_back(eval_probability(kind, alpha, c) + noise * (2.0 * rng.uniform() - 1.0));
  return histogram_from_density(d);
}

ReliabilityProfile profile_from(std::vector<double> rho) {
  ReliabilityProfile p;
  p.rho = std::move(rho);
  p.base_entropy.assign(p.rho.size(), 0.0);
  for (std::size_t i = 0; i < p.rho.size(); ++i) p.base_entropy[i] = 0.1 * static_cast<double>(i % 7);
  p.normalize();
  return p;
}

}  // namespace

TEST_CASE("eval_probability examples") {
  for (double a : {0.3, 1.0, 4.0}) {
    CHECK(eval_probability(ProbabilityKind::power_learnable, a, 0.0) == 1.0);
    CHECK(eval_probability(ProbabilityKind::power_learnable, a, 1.0) == 0.0);
  }
  CHECK(eval_probability(ProbabilityKind::power_learnable, 1.0, 0.25) == 0.75);
  CHECK(eval_probability(ProbabilityKind::power_fixed, 3.0, 0.5) == 0.875);
  CHECK(eval_probability(ProbabilityKind::exponential_learnable, 3.0, 0.0) == 1.0);
  CHECK(eval_probability(ProbabilityKind::exponential_learnable, 0.5, 0.0) == 0.5);
  CHECK(eval_probability(ProbabilityKind::gaussian_learnable, 1.0, 1.0) == doctest::Approx(std::exp(-0.5)));
  CHECK_THROWS_AS(eval_probability(ProbabilityKind::power_learnable, 0.0, 0.5), ParameterError);
  CHECK_THROWS_AS(eval_probability(ProbabilityKind::gaussian_learnable, -1.0, 0.5), ParameterError);
}

TEST_CASE("eval_probability is clamped and nonincreasing in rho") {
  const ProbabilityKind kinds[] = {ProbabilityKind::power_learnable, ProbabilityKind::power_fixed,
                                   ProbabilityKind::exponential_learnable, ProbabilityKind::gaussian_learnable};
  for (auto kind : kinds)
    for (double a = 0.05; a <= 20.0; a *= 1.37) {
      double prev = 2.0;
      for (int k = 0; k <= 200; ++k) {
        const double p = eval_probability(kind, a, k / 200.0);
        REQUIRE(p >= 0.0);
        REQUIRE(p <= 1.0);
        REQUIRE(p <= prev);
        prev = p;
      }
    }
}

TEST_CASE("power probability grows with alpha") {
  for (int k = 1; k < 100; ++k) {
    const double r = k / 100.0;
    for (double a = 0.1; a < 10.0; a *= 1.5)
      REQUIRE(eval_probability(ProbabilityKind::power_learnable, a * 1.5, r) >=
              eval_probability(ProbabilityKind::power_learnable, a, r));
  }
}

TEST_CASE("agreement histogram construction") {
  const std::size_t n = 1000;
  std::vector<int> t(n, 1), s(n, 1);
  std::vector<double> rho(n);
  for (std::size_t i = 0; i < n; ++i) rho[i] = (static_cast<double>(i) + 0.5) / static_cast<double>(n);
  const auto h = build_agreement_histogram(t, s, rho, 10, nullptr);
  CHECK(!h.empty);
  CHECK(h.total() == n);
  for (auto c : h.counts) CHECK(c == 100);
  CHECK(*std::max_element(h.density.begin(), h.density.end()) == 1.0);

  std::vector<int> other(n, 0);
  const auto none = build_agreement_histogram(t, other, rho, 10, nullptr);
  CHECK(none.empty);
  CHECK(none.total() == 0);
  CHECK_THROWS_AS(build_agreement_histogram(t, s, rho, 0, nullptr), ParameterError);
}

TEST_CASE("agreement histogram counts agreements only and skips hidden nodes") {
  Rng rng(3);
  const std::size_t n = 500;
  std::vector<int> t(n), s(n);
  std::vector<double> rho(n);
  std::vector<bool> hidden(n);
  std::size_t expected = 0;
  for (std::size_t i = 0; i < n; ++i) {
    t[i] = static_cast<int>(rng.uniform_index(3));
    s[i] = static_cast<int>(rng.uniform_index(3));
    rho[i] = rng.uniform();
    hidden[i] = rng.uniform() < 0.2;
    expected += (t[i] == s[i] && !hidden[i]) ? 1 : 0;
  }
  const auto h = build_agreement_histogram(t, s, rho, 20, &hidden);
  CHECK(h.total() == expected);
  const auto [lo, hi] = std::minmax_element(h.counts.begin(), h.counts.end());
  for (std::size_t b = 0; b < h.bins(); ++b) {
    CHECK(h.density[b] >= 0.0);
    CHECK(h.density[b] <= 1.0);
    CHECK(h.density[b] == doctest::Approx(static_cast<double>(h.counts[b] - *lo) / static_cast<double>(*hi - *lo)));
  }
}

TEST_CASE("reliability bins are uniform on [0, 1]") {
  CHECK(reliability_bin(0.0, 20) == 0);
  CHECK(reliability_bin(1.0, 20) == 19);
  CHECK(reliability_bin(0.05, 20) == 1);
  CHECK(reliability_bin(0.0499, 20) == 0);
}

TEST_CASE("fit recovers the generating alpha") {
  for (double a : {0.5, 1.0, 2.0, 3.0, 5.0}) {
    CAPTURE(a);
    for (auto kind : {ProbabilityKind::power_learnable, ProbabilityKind::exponential_learnable,
                      ProbabilityKind::gaussian_learnable}) {
      const auto fit = fit_alpha(model_histogram(kind, a, 20), kind);
      CHECK(std::abs(fit.alpha - a) <= 0.01);
      CHECK(!fit.at_bound);
    }
  }
}

TEST_CASE("fit examples") {
  CHECK(std::abs(fit_alpha(model_histogram(ProbabilityKind::power_learnable, 2.0, 20), ProbabilityKind::power_learnable)
                     .alpha -
                 2.0) <= 0.01);
  const auto flat = fit_alpha(histogram_from_density(std::vector<double>(20, 1.0)), ProbabilityKind::power_learnable);
  CHECK(flat.at_bound);
  CHECK(flat.alpha >= kAlphaMax - 0.01);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto noisy = fit_alpha(model_histogram(ProbabilityKind::power_learnable, 1.5, 20, 0.02, seed),
                                 ProbabilityKind::power_learnable);
    CHECK(noisy.alpha >= 1.3);
    CHECK(noisy.alpha <= 1.7);
  }
}

TEST_CASE("fit ignores bins with zero count") {
  std::vector<double> d;
  std::vector<std::size_t> counts;
  for (double c : bin_centers(20)) {
    d.push_back(1.0 - c * c);
    counts.push_back(1);
  }
  d[3] = 0.0;
  counts[3] = 0;
  CHECK(std::abs(fit_alpha(histogram_from_density(d, counts), ProbabilityKind::power_learnable).alpha - 2.0) <= 0.01);
}

TEST_CASE("fit errors") {
  AgreementHistogram empty = histogram_from_density(std::vector<double>(5, 0.0), std::vector<std::size_t>(5, 0));
  CHECK(empty.empty);
  CHECK_THROWS_AS(fit_alpha(empty, ProbabilityKind::power_learnable), FitError);
  CHECK_THROWS_AS(fit_alpha(model_histogram(ProbabilityKind::power_learnable, 2.0, 20), ProbabilityKind::power_fixed),
                  FitError);
}

TEST_CASE("momentum update") {
  CHECK(momentum_update(1.3, 7.0, 1.0) == 1.3);
  CHECK(momentum_update(1.3, 7.0, 0.0) == 7.0);
  CHECK(momentum_update(1.0, 2.0, 0.99) == doctest::Approx(1.01).epsilon(1e-15));
  CHECK_THROWS_AS(momentum_update(1.0, 2.0, 1.5), ParameterError);
  CHECK_THROWS_AS(momentum_update(1.0, 2.0, -0.1), ParameterError);
  Rng rng(2);
  for (int k = 0; k < 200; ++k) {
    const double prev = 20.0 * rng.uniform(), fitted = 20.0 * rng.uniform(), eta = rng.uniform();
    REQUIRE(std::abs(momentum_update(prev, fitted, eta) - fitted) ==
            doctest::Approx(eta * std::abs(prev - fitted)).epsilon(1e-12));
  }
}

TEST_CASE("strategy all yields every directed neighbor pair") {
  const GraphBundle g = synth_graph(40, 2, 0.2, 0.05, 0.1, 3);
  const auto adj = normalize_adjacency(g);
  const auto prof = profile_from(std::vector<double>(40, 0.3));
  Rng rng(1);
  SamplerOptions opt;
  opt.strategy = SamplingStrategy::all;
  const auto s = sample_supervision(adj, prof, {}, opt, rng, 1);
  CHECK(s.pairs.size() == 2 * g.edges.size());
  std::set<std::pair<NodeId, NodeId>> seen;
  std::set<Edge> edges(g.edges.begin(), g.edges.end());
  for (const auto& p : s.pairs) {
    CHECK(seen.insert({p.teacher, p.student}).second);
    CHECK(edges.count({std::min(p.teacher, p.student), std::max(p.teacher, p.student)}));
  }
}

TEST_CASE("knowledge strategy with a degenerate profile equals strategy all") {
  const GraphBundle g = synth_graph(40, 2, 0.2, 0.05, 0.1, 3);
  const auto adj = normalize_adjacency(g);
  const auto prof = profile_from(std::vector<double>(40, 0.0));
  REQUIRE(prof.degenerate);
  Rng r1(5), r2(5);
  SamplerOptions all;
  all.strategy = SamplingStrategy::all;
  CHECK(sample_supervision(adj, prof, {}, {}, r1, 1).pairs == sample_supervision(adj, prof, {}, all, r2, 1).pairs);
}

TEST_CASE("pair probabilities follow strategy, direction and conditioning") {
  // Path 0 - 1 - 2.
  const auto adj = normalize_adjacency(3, std::vector<Edge>{{0, 1}, {1, 2}});
  ReliabilityProfile prof;
  prof.rho = {0.0, 0.5, 1.0};
  prof.base_entropy = {0.2, 0.4, 1.0};
  prof.normalize();
  ProbabilityModel m;
  m.alpha = 1.0;

  const auto pp = pair_probabilities(adj, prof, m, {});
  REQUIRE(pp.pairs.size() == 4);
  // CSR order of centers with teacher at the sampled neighbor.
  CHECK(pp.pairs[0] == SupervisionPair{1, 0});
  CHECK(pp.pairs[1] == SupervisionPair{0, 1});
  CHECK(pp.pairs[2] == SupervisionPair{2, 1});
  CHECK(pp.pairs[3] == SupervisionPair{1, 2});
  CHECK(pp.probability == std::vector<double>{0.5, 1.0, 0.0, 0.5});

  SamplerOptions center;
  center.conditioning = ProbabilityConditioning::center_node;
  CHECK(pair_probabilities(adj, prof, m, center).probability == std::vector<double>{1.0, 0.5, 0.5, 0.0});

  SamplerOptions at_center;
  at_center.direction = KrdDirection::teacher_at_center;
  const auto pc = pair_probabilities(adj, prof, m, at_center);
  CHECK(pc.pairs[0] == SupervisionPair{0, 1});
  CHECK(pc.probability == std::vector<double>{1.0, 0.5, 0.5, 0.0});

  SamplerOptions ent;
  ent.strategy = SamplingStrategy::entropy;
  const auto pe = pair_probabilities(adj, prof, m, ent);
  CHECK(pe.probability[0] == doctest::Approx(0.25));
  CHECK(pe.probability[1] == 0.0);
  CHECK(pe.probability[2] == 1.0);

  SamplerOptions rnd;
  rnd.strategy = SamplingStrategy::random;
  CHECK(pair_probabilities(adj, prof, m, rnd).probability == std::vector<double>(4, 0.5));

  const std::vector<bool> hidden{false, false, true};
  CHECK(pair_probabilities(adj, prof, m, {}, &hidden).pairs.size() == 2);
}

TEST_CASE("random strategy inclusion frequency is 0.5 within 3 sigma") {
  Rng g(12);
  std::vector<Edge> edges;
  while (edges.size() < 100) {
    const auto u = static_cast<NodeId>(g.uniform_index(60)), v = static_cast<NodeId>(g.uniform_index(60));
    if (u == v) continue;
    const Edge e{std::min(u, v), std::max(u, v)};
    if (std::find(edges.begin(), edges.end(), e) == edges.end()) edges.push_back(e);
  }
  std::sort(edges.begin(), edges.end());
  const auto adj = normalize_adjacency(60, edges);
  const auto prof = profile_from(std::vector<double>(60, 0.5));
  SamplerOptions opt;
  opt.strategy = SamplingStrategy::random;
  Rng rng(2024);
  std::map<std::pair<NodeId, NodeId>, int> hits;
  const int epochs = 10000;
  for (int e = 0; e < epochs; ++e)
    for (const auto& p : sample_supervision(adj, prof, {}, opt, rng, static_cast<std::size_t>(e)).pairs)
      ++hits[{p.teacher, p.student}];
  // sigma = sqrt(0.25 / 10^4) = 0.005. About 0.54 of 200 pairs are expected
  // beyond 3 sigma, so bound the count and put a hard cap at 4.5 sigma.
  int beyond = 0;
  for (const auto& [pair, h] : hits) {
    const double dev = std::abs(h / double(epochs) - 0.5);
    beyond += dev > 0.015 ? 1 : 0;
    CHECK(dev <= 0.0225);
  }
  CHECK(hits.size() == 200);
  CHECK(beyond <= 4);
}

TEST_CASE("string round-trips") {
  double a = 0.0;
  CHECK(parse_probability_kind("power-fixed:3", &a) == ProbabilityKind::power_fixed);
  CHECK(a == 3.0);
  CHECK(parse_probability_kind("gaussian") == ProbabilityKind::gaussian_learnable);
  CHECK_THROWS_AS(parse_probability_kind("power-fixed:-1", &a), ParameterError);
  CHECK_THROWS_AS(parse_probability_kind("cubic"), ParameterError);
  for (auto s : {SamplingStrategy::knowledge, SamplingStrategy::entropy, SamplingStrategy::random, SamplingStrategy::all})
    CHECK(parse_strategy(to_string(s)) == s);
  CHECK(parse_direction(to_string(KrdDirection::teacher_at_center)) == KrdDirection::teacher_at_center);
  CHECK(parse_conditioning(to_string(ProbabilityConditioning::center_node)) == ProbabilityConditioning::center_node);
}
