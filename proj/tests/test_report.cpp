#include <doctest.h>

#include <algorithm>
#include <fstream>
#include <numeric>

#include "krd/numerics.hpp"
#include "krd/report.hpp"
#include "support.hpp"

using namespace krd;

namespace {

Prediction one_hot_prediction(const std::vector<int>& labels, std::size_t classes) {
  DenseMatrix z(labels.size(), classes, -50.0);
  for (std::size_t i = 0; i < labels.size(); ++i) z(i, static_cast<std::size_t>(std::max(labels[i], 0))) = 50.0;
  return prediction_from_logits(z);
}

}  // namespace

TEST_CASE("perfect predictor scores 1 on every split") {
  const GraphBundle g = synth_graph(60, 3, 0.3, 0.02, 0.1, 1);
  const auto adj = normalize_adjacency(g);
  const SplitSpec s = make_split(g, SplitMode::inductive, 2, {SplitParams::Kind::per_class, 5, 10, 20});
  const Prediction p = one_hot_prediction(g.labels, 3);
  const RunMetrics m = evaluate(p, p, g, adj, s);
  for (const auto& [k, v] : m.split_accuracy) CHECK_MESSAGE(v == 1.0, k);
  CHECK(m.split_accuracy.count("inductive") == (evaluation_sets(s).count("inductive")));
  CHECK(m.mean_confidence_correct == doctest::Approx(1.0));
  CHECK(m.teacher_energy == m.student_energy);
}

TEST_CASE("re-evaluation is bit-identical") {
  const GraphBundle g = synth_graph(60, 3, 0.3, 0.02, 0.5, 4);
  const auto adj = normalize_adjacency(g);
  const SplitSpec s = make_split(g, SplitMode::transductive, 4, {SplitParams::Kind::per_class, 5, 10, 20});
  Rng rng(8);
  const Prediction sp = prediction_from_logits(testing::random_matrix(60, 3, rng));
  const Prediction tp = prediction_from_logits(testing::random_matrix(60, 3, rng));
  const RunMetrics a = evaluate(sp, tp, g, adj, s);
  const RunMetrics b = evaluate(sp, tp, g, adj, s);
  CHECK(a == b);
  CHECK(metrics_to_json(a) == metrics_to_json(b));
  CHECK(a.teacher_energy != a.student_energy);
}

TEST_CASE("uniform predictor on balanced labels scores about 1/C") {
  const std::size_t n = 700;
  std::vector<int> labels(n);
  for (std::size_t i = 0; i < n; ++i) labels[i] = static_cast<int>((i * 3) % 7);
  const Prediction p = prediction_from_logits(DenseMatrix(n, 7));
  std::vector<NodeId> ids(n);
  for (std::size_t i = 0; i < n; ++i) ids[i] = static_cast<NodeId>(i);
  CHECK(accuracy(p.labels, labels, ids) == doctest::Approx(1.0 / 7.0));
}

TEST_CASE("empty splits are absent from the metrics") {
  SplitSpec s;
  s.train = {0};
  const auto acc = split_accuracy({0, 1}, {0, 1}, s);
  CHECK(acc.size() == 1);
  CHECK(acc.count("train") == 1);
}

TEST_CASE("confidence histogram conserves counts and puts one-hot mass in the last bin") {
  const std::vector<int> labels{0, 1, 2, 1};
  const Prediction p = one_hot_prediction(labels, 3);
  const auto h = confidence_histogram(p.probs, std::vector<bool>(4, true), 10);
  CHECK(h.total() == 4);
  CHECK(h.counts.back() == 4);
  CHECK(h.edges.front() == 0.0);
  CHECK(h.edges.back() == 1.0);
  CHECK_THROWS(confidence_histogram(p.probs, std::vector<bool>(4, true), 1));

  Rng rng(3);
  const auto q = testing::random_simplex_rows(100, 4, rng);
  std::vector<bool> mask(100);
  std::size_t marked = 0;
  for (std::size_t i = 0; i < 100; ++i) marked += (mask[i] = rng.uniform() < 0.6) ? 1 : 0;
  CHECK(confidence_histogram(q, mask, 20).total() == marked);
}

TEST_CASE("false negative entropy histogram") {
  const std::vector<int> labels{0, 1, 2, 0, 1};
  const std::vector<double> ent{0.1, 0.2, 0.3, 1.0, 1.09};
  CHECK(false_negative_entropy(labels, labels, labels, ent, 3).total() == 0);
  const std::vector<int> wrong{1, 2, 0, 1, 2};
  const auto h = false_negative_entropy(labels, wrong, labels, ent, 3, 5);
  CHECK(h.total() == 5);
  CHECK(h.edges.back() == doctest::Approx(std::log(3.0)));
  CHECK(h.counts.back() == 2);
  CHECK(h.counts.front() == 2);
}

TEST_CASE("reliability stratum curve") {
  const std::size_t n = 1000;
  Rng rng(5);
  std::vector<double> rho(n);
  std::vector<int> teacher(n);
  for (std::size_t i = 0; i < n; ++i) {
    rho[i] = rng.uniform();
    teacher[i] = static_cast<int>(rng.uniform_index(4));
  }
  std::vector<std::vector<int>> preds;
  for (int e = 0; e < 5; ++e) {
    std::vector<int> p(n);
    for (auto& v : p) v = static_cast<int>(rng.uniform_index(4));
    preds.push_back(p);
  }
  const auto curve = reliability_stratum_curve(preds, teacher, rho);
  REQUIRE(curve.size() == 5);
  for (double c : curve) {
    CHECK(c >= 0.0);
    CHECK(c <= 1.0);
    // About 125 matching pool nodes: binomial sd of the fraction is about 0.044.
    CHECK(std::abs(c - 0.4) <= 0.15);
  }
  // A student that only matches the most reliable fifth scores 1.
  std::vector<int> fast(n, -1);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return rho[a] < rho[b]; });
  for (std::size_t r = 0; r < n / 5; ++r) fast[order[r]] = teacher[order[r]];
  CHECK(reliability_stratum_curve({fast}, teacher, rho)[0] == 1.0);
  CHECK_THROWS(reliability_stratum_curve({}, teacher, rho));
}

TEST_CASE("mean and sample standard deviation") {
  CHECK(mean({1, 2, 3, 4}) == 2.5);
  CHECK(sample_std({1, 2, 3, 4}) == doctest::Approx(std::sqrt(5.0 / 3.0)));
  CHECK(sample_std({3}) == 0.0);
}

TEST_CASE("fnv1a reference values") {
  CHECK(fnv1a_hex("") == "cbf29ce484222325");
  CHECK(fnv1a_hex("a") == "af63dc4c8601ec8c");
}

TEST_CASE("metrics json round trip is exact") {
  RunMetrics m;
  m.split_accuracy = {{"train", 1.0}, {"val", 0.7133333333333334}, {"test", 0.1 + 0.2}};
  m.mean_confidence_correct = 0.912345678901234567;
  m.std_confidence_correct = 1.0 / 3.0;
  m.teacher_energy = 12.5e-3;
  m.student_energy = 3.0e10 / 7.0;
  m.seed = 18446744073709551615ull;
  m.config_hash = "0123456789abcdef";
  const std::string text = metrics_to_json(m);
  CHECK(metrics_from_json(text) == m);
  CHECK(metrics_to_json(metrics_from_json(text)) == text);
  m.improvement_over_baseline = 0.0222;
  CHECK(metrics_from_json(metrics_to_json(m)) == m);
  CHECK_THROWS(metrics_from_json("{\"split_accuracy\": 3}"));
}

TEST_CASE("histogram csv layout") {
  testing::TempDir dir("hist");
  const Histogram h = uniform_histogram({0.1, 0.6, 0.9}, 2, 0.0, 1.0);
  write_histogram_csv(h, dir.path() / "h.csv");
  std::ifstream in(dir.path() / "h.csv");
  std::string all((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  CHECK(all == "bin_lo,bin_hi,count\n0,0.5,1\n0.5,1,2\n");
}
