#include "krd/distiller.hpp"

#include <cmath>
#include <string>

#include "krd/adam.hpp"
#include "krd/error.hpp"
#include "krd/numerics.hpp"

namespace krd {
namespace {

// d/dz of KL(s || t) with s = softmax(z / tau), added to g with weight w.
void accumulate_kl_grad(std::span<const double> s, std::span<const double> t, double w, double inv_tau,
                        KlDirection direction, std::span<double> g) {
  const std::size_t c = s.size();
  if (direction == KlDirection::teacher_student) {
    for (std::size_t k = 0; k < c; ++k) g[k] += w * inv_tau * (s[k] - t[k]);
    return;
  }
  double mean_log_ratio = 0.0;
  for (std::size_t k = 0; k < c; ++k)
    if (s[k] > 0.0) mean_log_ratio += s[k] * (std::log(s[k]) - std::log(std::max(t[k], kProbabilityFloor)));
  for (std::size_t k = 0; k < c; ++k) {
    if (s[k] <= 0.0) continue;
    const double log_ratio = std::log(s[k]) - std::log(std::max(t[k], kProbabilityFloor));
    g[k] += w * inv_tau * s[k] * (log_ratio - mean_log_ratio);
  }
}

double kl_value(std::span<const double> s, std::span<const double> t, KlDirection direction) {
  return direction == KlDirection::student_teacher ? kl_row(s, t) : kl_row(t, s);
}

void check_logits(const DenseMatrix& student, const DenseMatrix& teacher) {
  if (!student.same_shape(teacher)) throw ShapeError("distillation: student and teacher logits differ in shape");
}

}  // namespace

void validate_distill_config(const DistillConfig& cfg) {
  if (!(cfg.lambda >= 0.0 && cfg.lambda <= 1.0)) throw ParameterError("lambda must lie in [0, 1]");
  if (!(cfg.temperature > 0.0)) throw ParameterError("temperature must be positive");
  if (!(cfg.delta > 0.0)) throw ParameterError("delta must be positive");
  if (cfg.num_samples == 0) throw ParameterError("num_samples must be positive");
  if (!(cfg.probability.alpha > 0.0)) throw ParameterError("alpha must be positive");
  if (!(cfg.probability.eta >= 0.0 && cfg.probability.eta <= 1.0)) throw ParameterError("eta must lie in [0, 1]");
  if (cfg.probability.fit_bins == 0) throw ParameterError("fit_bins must be positive");
  if (cfg.student.epochs == 0) throw ParameterError("student epochs must be positive");
}

LossAndGrad loss_kd(const DenseMatrix& student_logits, const DenseMatrix& teacher_logits,
                    std::span<const NodeId> nodes, KlDirection direction) {
  check_logits(student_logits, teacher_logits);
  LossAndGrad out{0.0, DenseMatrix(student_logits.rows(), student_logits.cols())};
  if (nodes.empty()) return out;
  const double w = 1.0 / static_cast<double>(nodes.size());
  std::vector<double> s(student_logits.cols()), t(student_logits.cols());
  for (NodeId i : nodes) {
    softmax_row(student_logits.row(i), s);
    softmax_row(teacher_logits.row(i), t);
    out.value += w * kl_value(s, t, direction);
    accumulate_kl_grad(s, t, w, 1.0, direction, out.grad.row(i));
  }
  return out;
}

LossAndGrad loss_krd(const DenseMatrix& student_logits, const DenseMatrix& teacher_logits,
                     const std::vector<SupervisionPair>& pairs, double temperature, KlDirection direction) {
  check_logits(student_logits, teacher_logits);
  if (!(temperature > 0.0)) throw ParameterError("loss_krd: temperature must be positive");
  LossAndGrad out{0.0, DenseMatrix(student_logits.rows(), student_logits.cols())};
  if (pairs.empty()) return out;
  const std::size_t n = student_logits.rows();
  const DenseMatrix teacher_probs = softmax_rows(teacher_logits, temperature);
  const double w = 1.0 / static_cast<double>(pairs.size());
  const double inv_tau = 1.0 / temperature;
  std::vector<double> s(student_logits.cols());
  for (const auto& p : pairs) {
    if (p.teacher >= n || p.student >= n) throw ShapeError("loss_krd: pair references an unknown node");
    softmax_row(student_logits.row(p.student), s, temperature);
    const auto t = teacher_probs.row(p.teacher);
    out.value += w * kl_value(s, t, direction);
    accumulate_kl_grad(s, t, w, inv_tau, direction, out.grad.row(p.student));
  }
  return out;
}

double loss_total(double lambda, double ce, double kd, double krd) {
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw ParameterError("loss_total: lambda must lie in [0, 1]");
  return lambda * ce + (1.0 - lambda) * (kd + krd);
}

LossTerms distillation_objective(const DenseMatrix& student_logits, const DenseMatrix& teacher_logits,
                                 const std::vector<int>& labels, std::span<const NodeId> train,
                                 std::span<const NodeId> kd_nodes, const std::vector<SupervisionPair>& pairs,
                                 const DistillConfig& cfg) {
  const LossAndGrad ce = loss_label(student_logits, labels, train);
  const LossAndGrad kd = loss_kd(student_logits, teacher_logits, kd_nodes, cfg.kl_direction);
  const LossAndGrad krd = loss_krd(student_logits, teacher_logits, pairs, cfg.temperature, cfg.kl_direction);
  LossTerms t;
  t.label = ce.value;
  t.kd = kd.value;
  t.krd = krd.value;
  t.total = loss_total(cfg.lambda, ce.value, kd.value, krd.value);
  t.grad = DenseMatrix(student_logits.rows(), student_logits.cols());
  auto g = t.grad.values();
  auto gc = ce.grad.values(), gk = kd.grad.values(), gr = krd.grad.values();
  for (std::size_t k = 0; k < g.size(); ++k) g[k] = cfg.lambda * gc[k] + (1.0 - cfg.lambda) * (gk[k] + gr[k]);
  return t;
}

DistillRun run_distillation(const GraphBundle& bundle, const NormalizedAdjacency& adj, const SplitSpec& split,
                            const TeacherModel& teacher, const ReliabilityProfile& profile,
                            const DistillConfig& cfg) {
  validate_distill_config(cfg);
  const std::size_t n = bundle.num_nodes;
  if (adj.num_nodes() != n) throw ShapeError("run_distillation: adjacency does not cover the bundle");
  if (split.train.empty()) throw ParameterError("run_distillation: empty training set");
  const bool krd = cfg.method == DistillMethod::krd;
  if (krd && profile.rho_normalized.size() != n)
    throw ShapeError("run_distillation: reliability profile does not cover the bundle");

  const DenseMatrix& x = bundle.features;
  DistillRun run;
  run.teacher = teacher;
  const DenseMatrix teacher_logits =
      teacher.cached_logits() ? *teacher.cached_logits() : gcn_forward(teacher, adj, x, false).logits;
  run.teacher_labels = prediction_from_logits(teacher_logits).labels;

  const std::vector<bool> hidden = split.inductive_mask(n);
  const bool inductive = split.mode == SplitMode::inductive;
  std::vector<NodeId> kd_nodes;
  for (std::size_t i = 0; i < n; ++i)
    if (!hidden[i]) kd_nodes.push_back(static_cast<NodeId>(i));

  StudentModel student(
      Network(make_architecture(ModelKind::mlp, bundle.num_features, bundle.num_classes, cfg.student),
              cfg.student.seed));
  AdamState adam = make_adam_state(student.network().parameters(),
                                   {cfg.student.learning_rate, 0.9, 0.999, 1e-8, cfg.student.weight_decay});
  Rng dropout_rng(cfg.student.seed, 0xD809);
  Rng sample_rng(cfg.student.seed, 0x5A3F);
  ProbabilityModel model = cfg.probability;
  const bool refit = krd && model.learnable() && cfg.sampler.strategy == SamplingStrategy::knowledge;

  run.best_student = student;
  std::size_t since_best = 0;
  const std::vector<SupervisionPair> no_pairs;
  for (std::size_t epoch = 1; epoch <= cfg.student.epochs; ++epoch) {
    DistillEpoch rec;
    rec.epoch = epoch;
    rec.alpha = model.alpha;
    try {
      const ForwardTrace trace = mlp_forward(student, x, true, &dropout_rng);
      SampledSupervision sup;
      if (krd)
        sup = sample_supervision(adj, profile, model, cfg.sampler, sample_rng, epoch, inductive ? &hidden : nullptr);
      const LossTerms terms = distillation_objective(trace.logits, teacher_logits, bundle.labels, split.train,
                                                     kd_nodes, krd ? sup.pairs : no_pairs, cfg);
      if (!std::isfinite(terms.total)) throw DivergenceError("non-finite loss");
      rec.loss_label = terms.label;
      rec.loss_kd = terms.kd;
      rec.loss_krd = terms.krd;
      rec.pairs = sup.pairs.size();
      const Gradients grads = backward(student.network(), trace, terms.grad);
      auto params = student.network().parameters();
      adam_step(params, grads.flat(), adam);
      student.mutable_network().set_parameters(std::move(params));
    } catch (const DivergenceError& e) {
      throw DivergenceError("distillation diverged at epoch " + std::to_string(epoch) + ": " + e.what(),
                            static_cast<long>(epoch));
    }

    const Prediction pred = predict(student, x);
    rec.val_acc = accuracy(pred.labels, bundle.labels, split.val);
    if (refit) {
      const AgreementHistogram hist = build_agreement_histogram(run.teacher_labels, pred.labels,
                                                                profile.rho_normalized, model.fit_bins, &hidden);
      try {
        model.alpha = momentum_update(model.alpha, fit_alpha(hist, model.kind).alpha, model.eta);
      } catch (const FitError&) {
        rec.fit_failed = true;
      }
    }
    if (cfg.record_predictions) run.epoch_predictions.push_back(pred.labels);
    run.history.push_back(rec);

    if (epoch == 1 || rec.val_acc > run.best_val_acc) {
      run.best_val_acc = rec.val_acc;
      run.best_epoch = epoch;
      run.best_student = student;
      since_best = 0;
    } else if (cfg.student.patience > 0 && ++since_best >= cfg.student.patience) {
      break;
    }
  }
  run.final_student = student;
  return run;
}

DistillRun glnn_baseline(const GraphBundle& bundle, const NormalizedAdjacency& adj, const SplitSpec& split,
                         const TeacherModel& teacher, const DistillConfig& cfg) {
  DistillConfig c = cfg;
  c.method = DistillMethod::glnn;
  return run_distillation(bundle, adj, split, teacher, ReliabilityProfile{}, c);
}

std::string to_string(KlDirection d) {
  return d == KlDirection::student_teacher ? "student_teacher" : "teacher_student";
}

std::string to_string(DistillMethod m) { return m == DistillMethod::krd ? "krd" : "glnn"; }

KlDirection parse_kl_direction(const std::string& s) {
  if (s == "student_teacher") return KlDirection::student_teacher;
  if (s == "teacher_student") return KlDirection::teacher_student;
  throw ParameterError("unknown kl direction '" + s + "'");
}

DistillMethod parse_method(const std::string& s) {
  if (s == "krd") return DistillMethod::krd;
  if (s == "glnn") return DistillMethod::glnn;
  throw ParameterError("unknown method '" + s + "'");
}

}  // namespace krd
