#include "krd/pipeline.hpp"

#include <cstdio>
#include <fstream>

#include "krd/checkpoint.hpp"
#include "krd/error.hpp"

namespace krd {

Dataset make_dataset(GraphBundle bundle, std::optional<SplitSpec> split, bool row_normalize) {
  Dataset d;
  d.bundle = row_normalize ? row_normalized(bundle) : std::move(bundle);
  d.bundle_split = std::move(split);
  d.full_adj = normalize_adjacency(d.bundle);
  return d;
}

Dataset load_dataset(const RunConfig& cfg) {
  if (cfg.bundle.empty()) throw ParameterError("no bundle path given");
  GraphBundle b = load_bundle(cfg.bundle);
  auto split = load_split(cfg.bundle, b.num_nodes);
  return make_dataset(std::move(b), std::move(split), cfg.row_normalize);
}

SplitSpec resolve_split(const Dataset& data, const RunConfig& cfg, std::uint64_t seed) {
  const std::size_t n = data.bundle.num_nodes;
  if (cfg.use_bundle_split && data.bundle_split) {
    SplitSpec s = *data.bundle_split;
    if (cfg.mode == SplitMode::transductive) {
      s.mode = SplitMode::transductive;
      s.inductive.clear();
      s.observed_unlabeled.clear();
      return s;
    }
    if (s.mode == SplitMode::inductive) return s;
    return make_inductive(std::move(s), n, cfg.split.inductive_holdout, seed);
  }
  return make_split(data.bundle, cfg.mode, seed, cfg.split);
}

NormalizedAdjacency training_adjacency(const Dataset& data, const SplitSpec& split) {
  if (split.mode != SplitMode::inductive) return data.full_adj;
  const auto hidden = split.inductive_mask(data.bundle.num_nodes);
  return normalize_adjacency(data.bundle.num_nodes, edges_within(data.bundle.edges, hidden));
}

PreparedSeed prepare_seed(const Dataset& data, const RunConfig& cfg, std::uint64_t seed,
                          const Network* pretrained_teacher) {
  PreparedSeed p;
  p.seed = seed;
  p.split = resolve_split(data, cfg, seed);
  p.train_adj = training_adjacency(data, p.split);
  if (pretrained_teacher) {
    p.teacher.model = TeacherModel(*pretrained_teacher);
  } else {
    TrainConfig tc = cfg.teacher;
    tc.seed = seed;
    p.teacher = train_teacher(data.bundle, p.train_adj, p.split, tc);
  }
  p.teacher.model.freeze(p.train_adj, data.bundle.features);
  p.profile = quantify_reliability(p.teacher.model, p.train_adj, data.bundle.features, cfg.distill.delta,
                                   cfg.distill.num_samples, Rng(seed, 0xE7A1));
  if (p.split.mode == SplitMode::inductive)
    p.profile = restrict_profile(std::move(p.profile), p.split.inductive_mask(data.bundle.num_nodes));
  p.teacher_full = predict(p.teacher.model, data.full_adj, data.bundle.features);
  return p;
}

VariantOutcome distill_variant(const Dataset& data, const PreparedSeed& prep, const RunConfig& cfg) {
  DistillConfig dc = cfg.distill;
  dc.student.seed = prep.seed;
  VariantOutcome o;
  o.run = run_distillation(data.bundle, prep.train_adj, prep.split, prep.teacher.model, prep.profile, dc);
  o.student = predict(o.run.best_student, data.bundle.features);
  o.metrics = evaluate(o.student, prep.teacher_full, data.bundle, data.full_adj, prep.split);
  o.metrics.seed = prep.seed;
  o.metrics.config_hash = config_hash(cfg);
  return o;
}

void write_text(const std::filesystem::path& file, const std::string& text) {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw LoadError("cannot write " + file.string());
  out << text;
}

void write_distill_outputs(const std::filesystem::path& dir, const Dataset& data, const PreparedSeed& prep,
                           const VariantOutcome& o, const RunConfig& cfg) {
  std::filesystem::create_directories(dir);
  write_text(dir / "config.json", config_to_json(cfg));

  std::string history = "epoch,loss_label,loss_kd,loss_krd,alpha,pairs,val_acc\n";
  std::string sampler = "epoch,alpha,num_sampled_pairs,strategy\n";
  const std::string strategy =
      cfg.distill.method == DistillMethod::glnn ? "none" : to_string(cfg.distill.sampler.strategy);
  char buf[256];
  for (const auto& h : o.run.history) {
    std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g,%.17g,%.17g,%zu,%.17g\n", h.epoch, h.loss_label, h.loss_kd,
                  h.loss_krd, h.alpha, h.pairs, h.val_acc);
    history += buf;
    std::snprintf(buf, sizeof buf, "%zu,%.17g,%zu,", h.epoch, h.alpha, h.pairs);
    sampler += buf + strategy + "\n";
  }
  write_text(dir / "history.csv", history);
  write_text(dir / "sampler.csv", sampler);
  save_checkpoint(o.run.best_student.network(), {prep.seed, o.run.best_epoch}, dir / "student");
  write_metrics(o.metrics, dir / "metrics.json");

  const auto& labels = data.bundle.labels;
  std::vector<bool> correct(labels.size(), false);
  for (NodeId i : prep.split.test) correct[i] = o.student.labels[i] == labels[i];
  write_histogram_csv(confidence_histogram(o.student.probs, correct, 20), dir / "confidence_hist.csv");
  write_histogram_csv(false_negative_entropy(prep.teacher_full.labels, o.student.labels, labels,
                                             entropy_profile(prep.teacher_full.probs), data.bundle.num_classes),
                      dir / "false_negative_entropy.csv");
  if (!o.run.epoch_predictions.empty()) {
    const auto curve =
        reliability_stratum_curve(o.run.epoch_predictions, o.run.teacher_labels, prep.profile.rho_normalized);
    std::string s = "epoch,fraction\n";
    for (std::size_t e = 0; e < curve.size(); ++e) {
      std::snprintf(buf, sizeof buf, "%zu,%.17g\n", e + 1, curve[e]);
      s += buf;
    }
    write_text(dir / "stratum_curve.csv", s);
  }
}

}  // namespace krd
