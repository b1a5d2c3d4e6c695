#include <doctest.h>

#include "krd/adam.hpp"
#include "krd/distiller.hpp"
#include "krd/error.hpp"
#include "krd/numerics.hpp"
#include "support.hpp"

using namespace krd;

namespace {

std::vector<NodeId> iota_ids(std::size_t n) {
  std::vector<NodeId> ids(n);
  for (std::size_t i = 0; i < n; ++i) ids[i] = static_cast<NodeId>(i);
  return ids;
}

// Largest relative error between a logit gradient and central differences.
template <typename F>
double logit_fd_error(DenseMatrix z, const DenseMatrix& grad, F loss) {
  double worst = 0.0;
  const double h = 1e-5;
  for (std::size_t k = 0; k < z.size(); ++k) {
    const double orig = z.values()[k];
    z.values()[k] = orig + h;
    const double up = loss(z);
    z.values()[k] = orig - h;
    const double down = loss(z);
    z.values()[k] = orig;
    worst = std::max(worst, testing::relative_error(grad.values()[k], (up - down) / (2 * h)));
  }
  return worst;
}

struct Fixture {
  GraphBundle bundle;
  NormalizedAdjacency adj;
  SplitSpec split;
  TeacherModel teacher;
  ReliabilityProfile profile;
};

Fixture make_fixture(std::uint64_t seed, std::size_t n = 80) {
  Fixture f;
  f.bundle = synth_graph({n, 3, 0.2, 0.02, 0.8, seed, 0});
  f.adj = normalize_adjacency(f.bundle);
  f.split = make_split(f.bundle, SplitMode::transductive, seed, {SplitParams::Kind::per_class, 4, 12, 30});
  TrainConfig tc;
  tc.epochs = 40;
  tc.hidden = 16;
  tc.seed = seed;
  f.teacher = train_teacher(f.bundle, f.adj, f.split, tc).model;
  f.teacher.freeze(f.adj, f.bundle.features);
  f.profile = quantify_reliability(f.teacher, f.adj, f.bundle.features, 1.0, 5, Rng(seed, 1));
  return f;
}

DistillConfig small_config(std::uint64_t seed) {
  DistillConfig c;
  c.student.epochs = 30;
  c.student.hidden = 16;
  c.student.seed = seed;
  return c;
}

}  // namespace

TEST_CASE("kd loss is zero for identical logits and handles empty sets") {
  Rng rng(1);
  const auto z = testing::random_matrix(6, 4, rng, 3.0);
  for (auto dir : {KlDirection::student_teacher, KlDirection::teacher_student}) {
    const auto l = loss_kd(z, z, iota_ids(6), dir);
    CHECK(std::abs(l.value) <= 1e-15);
    for (double g : l.grad.values()) CHECK(std::abs(g) <= 1e-15);
  }
  const auto e = loss_kd(z, testing::random_matrix(6, 4, rng), std::vector<NodeId>{});
  CHECK(e.value == 0.0);
  for (double g : e.grad.values()) CHECK(g == 0.0);
  CHECK_THROWS_AS(loss_kd(z, DenseMatrix(6, 3), iota_ids(6)), ShapeError);
}

TEST_CASE("kd loss equals the per-node oracle mean") {
  Rng rng(2);
  const auto z = testing::random_matrix(50, 7, rng, 2.0), h = testing::random_matrix(50, 7, rng, 2.0);
  double ref = 0.0;
  for (std::size_t i = 0; i < 50; ++i)
    ref += testing::naive_kl(testing::naive_softmax(testing::to_vec(z.row(i))),
                             testing::naive_softmax(testing::to_vec(h.row(i))));
  ref /= 50.0;
  CHECK(std::abs(loss_kd(z, h, iota_ids(50)).value - ref) <= 1e-12);
}

TEST_CASE("kd gradient matches finite differences in both directions") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    Rng rng(seed);
    const auto z = testing::random_matrix(5, 3, rng, 2.0), h = testing::random_matrix(5, 3, rng, 2.0);
    const auto ids = iota_ids(5);
    for (auto dir : {KlDirection::student_teacher, KlDirection::teacher_student}) {
      const auto l = loss_kd(z, h, ids, dir);
      CHECK(logit_fd_error(z, l.grad, [&](const DenseMatrix& zz) { return loss_kd(zz, h, ids, dir).value; }) <= 1e-6);
    }
  }
}

TEST_CASE("krd loss: zero pairs, identical logits, single-pair oracle") {
  Rng rng(3);
  const auto z = testing::random_matrix(2, 3, rng, 2.0), h = testing::random_matrix(2, 3, rng, 2.0);
  const auto none = loss_krd(z, h, {}, 1.0);
  CHECK(none.value == 0.0);
  for (double g : none.grad.values()) CHECK(g == 0.0);

  const std::vector<SupervisionPair> both{{0, 1}, {1, 0}};
  DenseMatrix same = z;
  for (std::size_t c = 0; c < 3; ++c) same(1, c) = same(0, c);
  for (auto dir : {KlDirection::student_teacher, KlDirection::teacher_student})
    CHECK(std::abs(loss_krd(same, same, both, 1.0, dir).value) <= 1e-15);

  // Teacher row 1 supervises student row 0.
  const double expected = testing::naive_kl(testing::naive_softmax(testing::to_vec(z.row(0))),
                                            testing::naive_softmax(testing::to_vec(h.row(1))));
  CHECK(std::abs(loss_krd(z, h, {{1, 0}}, 1.0).value - expected) <= 1e-12);
  const double reversed = testing::naive_kl(testing::naive_softmax(testing::to_vec(h.row(1))),
                                            testing::naive_softmax(testing::to_vec(z.row(0))));
  CHECK(std::abs(loss_krd(z, h, {{1, 0}}, 1.0, KlDirection::teacher_student).value - reversed) <= 1e-12);
  CHECK_THROWS_AS(loss_krd(z, h, {{2, 0}}, 1.0), ShapeError);
  CHECK_THROWS_AS(loss_krd(z, h, both, 0.0), ParameterError);
}

TEST_CASE("krd gradient matches finite differences with temperature") {
  Rng rng(4);
  const auto z = testing::random_matrix(6, 4, rng, 2.0), h = testing::random_matrix(6, 4, rng, 2.0);
  const std::vector<SupervisionPair> pairs{{1, 0}, {0, 1}, {2, 1}, {5, 3}, {3, 5}};
  for (double tau : {0.8, 1.0, 1.2})
    for (auto dir : {KlDirection::student_teacher, KlDirection::teacher_student}) {
      const auto l = loss_krd(z, h, pairs, tau, dir);
      CHECK(logit_fd_error(z, l.grad, [&](const DenseMatrix& zz) { return loss_krd(zz, h, pairs, tau, dir).value; }) <=
            1e-6);
    }
}

TEST_CASE("total loss arithmetic") {
  CHECK(loss_total(1.0, 0.7, 5.0, 3.0) == 0.7);
  CHECK(loss_total(0.0, 0.7, 0.5, 0.25) == 0.75);
  CHECK(loss_total(0.3, 1.0, 0.5, 0.25) == doctest::Approx(0.825).epsilon(1e-15));
  CHECK_THROWS_AS(loss_total(1.5, 0, 0, 0), ParameterError);
}

TEST_CASE("total objective gradient through student weights matches finite differences") {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    CAPTURE(seed);
    const GraphBundle g = synth_graph({12, 3, 0.4, 0.1, 0.3, seed, 0});
    const auto adj = normalize_adjacency(g);
    const SplitSpec split = make_split(g, SplitMode::transductive, seed, {SplitParams::Kind::per_class, 2, 2, 2});
    const TeacherModel teacher(Network({ModelKind::gcn, {12, 8, 3}, 0.0, false}, seed));
    const DenseMatrix h = gcn_forward(teacher, adj, g.features, false).logits;
    ReliabilityProfile prof = quantify_reliability(teacher, adj, g.features, 1.0, 3, Rng(seed));
    SamplerOptions opt;
    opt.strategy = SamplingStrategy::random;
    Rng srng(seed);
    const auto pairs = sample_supervision(adj, prof, {}, opt, srng, 1).pairs;
    REQUIRE(!pairs.empty());
    DistillConfig cfg;
    cfg.temperature = 1.1;
    const auto kd_nodes = iota_ids(12);
    const Architecture arch{ModelKind::mlp, {12, 8, 3}, 0.0, false};
    std::vector<DenseMatrix> params = Network(arch, seed + 7).parameters();
    auto loss_at = [&](const std::vector<DenseMatrix>& p) {
      const StudentModel s(Network(arch, p, {}));
      return distillation_objective(mlp_forward(s, g.features, false).logits, h, g.labels, split.train, kd_nodes,
                                    pairs, cfg);
    };
    const StudentModel s(Network(arch, params, {}));
    const auto trace = mlp_forward(s, g.features, false);
    const auto terms = distillation_objective(trace.logits, h, g.labels, split.train, kd_nodes, pairs, cfg);
    CHECK(terms.krd > 0.0);
    const auto grads = backward(s.network(), trace, terms.grad).flat();
    CHECK(testing::max_fd_error(params, grads, [&] { return loss_at(params).total; }) <= 1e-4);
  }
}

TEST_CASE("distillation run bookkeeping and teacher immutability") {
  const Fixture f = make_fixture(3);
  const Network before = f.teacher.network();
  DistillConfig cfg = small_config(3);
  cfg.record_predictions = true;
  const DistillRun run = run_distillation(f.bundle, f.adj, f.split, f.teacher, f.profile, cfg);
  CHECK(f.teacher.network().same_parameters(before));
  CHECK(run.teacher.network().same_parameters(before));
  CHECK(run.history.size() == 30);
  CHECK(run.epoch_predictions.size() == 30);
  double best = 0.0;
  for (const auto& h : run.history) best = std::max(best, h.val_acc);
  CHECK(run.best_val_acc == best);
  CHECK(run.history[run.best_epoch - 1].val_acc == best);
  CHECK(accuracy(predict(run.best_student, f.bundle.features).labels, f.bundle.labels, f.split.val) == best);
  CHECK(run.history.front().alpha == 1.0);
  bool sampled = false;
  for (const auto& h : run.history) sampled = sampled || h.pairs > 0;
  CHECK(sampled);

  const DistillRun again = run_distillation(f.bundle, f.adj, f.split, f.teacher, f.profile, cfg);
  CHECK(again.best_student.network().same_parameters(run.best_student.network()));
  CHECK(again.final_student.network().same_parameters(run.final_student.network()));
}

TEST_CASE("fixed power skips fitting and learnable power moves alpha") {
  const Fixture f = make_fixture(4);
  DistillConfig cfg = small_config(4);
  cfg.probability.eta = 0.5;
  const DistillRun learn = run_distillation(f.bundle, f.adj, f.split, f.teacher, f.profile, cfg);
  CHECK(learn.history.back().alpha != 1.0);
  cfg.probability.kind = ProbabilityKind::power_fixed;
  cfg.probability.alpha = 3.0;
  const DistillRun fixed = run_distillation(f.bundle, f.adj, f.split, f.teacher, f.profile, cfg);
  for (const auto& h : fixed.history) CHECK(h.alpha == 3.0);
}

TEST_CASE("GLNN equals a KRD run that samples no pairs") {
  const Fixture f = make_fixture(5);
  ReliabilityProfile flat;
  flat.rho.assign(f.bundle.num_nodes, 0.4);
  flat.base_entropy.assign(f.bundle.num_nodes, 0.0);
  flat.normalize();
  const DistillConfig cfg = small_config(5);
  const DistillRun krd = run_distillation(f.bundle, f.adj, f.split, f.teacher, flat, cfg);
  for (const auto& h : krd.history) REQUIRE(h.pairs == 0);
  const DistillRun glnn = glnn_baseline(f.bundle, f.adj, f.split, f.teacher, cfg);
  CHECK(glnn.final_student.network().same_parameters(krd.final_student.network()));
  CHECK(glnn.best_student.network().same_parameters(krd.best_student.network()));
}

TEST_CASE("lambda = 1 reduces to the supervised-only student") {
  const Fixture f = make_fixture(6);
  DistillConfig cfg = small_config(6);
  cfg.lambda = 1.0;
  const DistillRun krd = run_distillation(f.bundle, f.adj, f.split, f.teacher, f.profile, cfg);
  const DistillRun glnn = glnn_baseline(f.bundle, f.adj, f.split, f.teacher, cfg);
  CHECK(krd.final_student.network().same_parameters(glnn.final_student.network()));

  // Hand-rolled CE-only loop with the same seeds.
  StudentModel s(Network(make_architecture(ModelKind::mlp, f.bundle.num_features, f.bundle.num_classes, cfg.student),
                         cfg.student.seed));
  AdamState adam = make_adam_state(s.network().parameters(),
                                   {cfg.student.learning_rate, 0.9, 0.999, 1e-8, cfg.student.weight_decay});
  Rng drop(cfg.student.seed, 0xD809);
  for (std::size_t e = 0; e < cfg.student.epochs; ++e) {
    const auto t = mlp_forward(s, f.bundle.features, true, &drop);
    const auto ce = loss_label(t.logits, f.bundle.labels, f.split.train);
    auto params = s.network().parameters();
    adam_step(params, backward(s.network(), t, ce.grad).flat(), adam);
    s.mutable_network().set_parameters(std::move(params));
  }
  CHECK(s.network().same_parameters(glnn.final_student.network()));
}

TEST_CASE("inductive training never reads held-out features") {
  Fixture f = make_fixture(7);
  SplitParams sp{SplitParams::Kind::per_class, 4, 12, 30};
  sp.inductive_holdout = 0.3;
  f.split = make_split(f.bundle, SplitMode::inductive, 7, sp);
  const auto hidden = f.split.inductive_mask(f.bundle.num_nodes);
  const auto train_adj = normalize_adjacency(f.bundle.num_nodes, edges_within(f.bundle.edges, hidden));
  TeacherModel teacher(f.teacher.network());
  DistillConfig cfg = small_config(7);

  auto run_with = [&](const GraphBundle& b) {
    TeacherModel t = teacher;
    t.freeze(train_adj, b.features);
    const auto prof =
        restrict_profile(quantify_reliability(t, train_adj, b.features, 1.0, 4, Rng(7)), hidden);
    return run_distillation(b, train_adj, f.split, t, prof, cfg);
  };
  const DistillRun base = run_with(f.bundle);
  GraphBundle changed = f.bundle;
  for (std::size_t i = 0; i < changed.num_nodes; ++i)
    if (hidden[i])
      for (double& v : changed.features.row(i)) v = 5.0 - v;
  const DistillRun other = run_with(changed);
  CHECK(base.final_student.network().same_parameters(other.final_student.network()));
}

TEST_CASE("distill config validation") {
  DistillConfig c;
  c.lambda = 1.2;
  CHECK_THROWS_AS(validate_distill_config(c), ParameterError);
  c = {};
  c.temperature = 0.0;
  CHECK_THROWS_AS(validate_distill_config(c), ParameterError);
  c = {};
  c.probability.eta = 2.0;
  CHECK_THROWS_AS(validate_distill_config(c), ParameterError);
  CHECK_NOTHROW(validate_distill_config(DistillConfig{}));
}
