// krd: graph-to-MLP distillation runs from the command line.
//
// Exit codes: 0 success, 1 usage or parameter error, 2 data or format error,
// 3 numerical divergence.

#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "krd/checkpoint.hpp"
#include "krd/config.hpp"
#include "krd/error.hpp"
#include "krd/pipeline.hpp"

namespace fs = std::filesystem;
using namespace krd;

namespace {

fs::path run_directory(const std::string& requested, const std::string& command) {
  if (!requested.empty()) {
    fs::create_directories(requested);
    return requested;
  }
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  char stamp[32];
  std::strftime(stamp, sizeof stamp, "%Y%m%d-%H%M%S", std::localtime(&now));
  fs::path base = fs::path("runs") / (command + "-" + stamp);
  fs::path dir = base;
  for (int k = 1; fs::exists(dir); ++k) dir = base.string() + "-" + std::to_string(k);
  fs::create_directories(dir);
  return dir;
}

std::string format_number(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// Flags shared by every command that trains something. Values left unset
// keep whatever the config file (or the defaults) say.
struct CommonFlags {
  std::string config;
  std::string bundle;
  std::string out;
  std::string mode;
  std::optional<std::uint64_t> seed;
  std::vector<std::uint64_t> seeds;
  std::optional<std::size_t> teacher_epochs;
  std::optional<std::size_t> student_epochs;
  std::optional<std::size_t> hidden;

  void attach(CLI::App* app) {
    app->add_option("--config", config, "JSON run config");
    app->add_option("--bundle", bundle, "Dataset bundle directory");
    app->add_option("--out", out, "Run directory (default: timestamped under runs/)");
    app->add_option("--mode", mode, "transductive or inductive")
        ->check(CLI::IsMember({"transductive", "inductive"}));
    app->add_option("--seed", seed, "Single seed");
    app->add_option("--seeds", seeds, "Comma-separated seed list")->delimiter(',');
    app->add_option("--teacher-epochs", teacher_epochs);
    app->add_option("--epochs", student_epochs, "Student epochs");
    app->add_option("--hidden", hidden, "Hidden width of teacher and student");
  }

  RunConfig resolve(const fs::path& out_dir) const {
    RunConfig cfg = config.empty() ? RunConfig{} : load_config(config);
    if (!bundle.empty()) cfg.bundle = bundle;
    if (!mode.empty()) cfg.mode = mode == "inductive" ? SplitMode::inductive : SplitMode::transductive;
    if (seed && !seeds.empty()) throw ParameterError("use either --seed or --seeds");
    if (seed) cfg.seeds = {*seed};
    if (!seeds.empty()) cfg.seeds = seeds;
    if (teacher_epochs) cfg.teacher.epochs = *teacher_epochs;
    if (student_epochs) cfg.distill.student.epochs = *student_epochs;
    if (hidden) cfg.teacher.hidden = cfg.distill.student.hidden = *hidden;
    cfg.out = out_dir.string();
    return cfg;
  }
};

struct DistillFlags {
  std::string method;
  std::string strategy;
  std::string prob_model;
  std::optional<double> lambda;
  std::optional<double> eta;
  std::optional<double> temperature;
  bool record_predictions = false;

  void attach(CLI::App* app, bool with_grid_params) {
    app->add_option("--method", method, "krd, glnn or mlp (supervised only)")
        ->check(CLI::IsMember({"krd", "glnn", "mlp"}));
    app->add_option("--strategy", strategy, "knowledge, entropy, random or all");
    app->add_option("--prob-model", prob_model, "power-learnable, power-fixed:A, exponential or gaussian");
    app->add_option("--temperature", temperature);
    if (with_grid_params) {
      app->add_option("--lambda", lambda);
      app->add_option("--eta", eta);
      app->add_flag("--record-predictions", record_predictions, "Keep per-epoch predictions for the stratum curve");
    }
  }

  void apply(RunConfig& cfg) const {
    DistillConfig& d = cfg.distill;
    if (method == "mlp") {
      d.method = DistillMethod::glnn;
      d.lambda = 1.0;
    } else if (!method.empty()) {
      d.method = parse_method(method);
    }
    if (!strategy.empty()) d.sampler.strategy = parse_strategy(strategy);
    if (!prob_model.empty()) d.probability.kind = parse_probability_kind(prob_model, &d.probability.alpha);
    if (lambda) d.lambda = *lambda;
    if (eta) d.probability.eta = *eta;
    if (temperature) d.temperature = *temperature;
    if (record_predictions) d.record_predictions = true;
    if (method == "mlp" && lambda && *lambda != 1.0) throw ParameterError("--method mlp fixes lambda to 1");
  }
};

std::string variant_name(const RunConfig& cfg) {
  const DistillConfig& d = cfg.distill;
  if (d.method == DistillMethod::glnn) return d.lambda == 1.0 ? "mlp" : "glnn";
  std::string name = "krd-" + to_string(d.sampler.strategy);
  if (d.sampler.strategy == SamplingStrategy::knowledge) {
    name += "-" + to_string(d.probability.kind);
    if (d.probability.kind == ProbabilityKind::power_fixed) name += ":" + format_number(d.probability.alpha);
  }
  return name;
}

// Grid labels use the shortest form; the exact values live in config.json.
std::string grid_param(const RunConfig& cfg) {
  char buf[80];
  std::snprintf(buf, sizeof buf, "lambda=%g;eta=%g", cfg.distill.lambda, cfg.distill.probability.eta);
  return buf;
}

std::string aggregate_row(const std::string& variant, const std::string& param, const std::vector<double>& acc) {
  return variant + "," + param + "," + std::to_string(acc.size()) + "," + format_number(mean(acc)) + "," +
         format_number(sample_std(acc)) + "\n";
}

const char* kAggregateHeader = "variant,param,seed_count,mean_acc,std_acc\n";

fs::path seed_dir(const fs::path& root, std::uint64_t seed) { return root / ("seed-" + std::to_string(seed)); }

int cmd_synth(const SynthParams& p, const std::string& out, const std::string& split_mode, const SplitParams& sp,
              std::uint64_t split_seed) {
  GraphBundle b = synth_graph(p);
  const fs::path dir = run_directory(out, "synth");
  std::optional<SplitSpec> split;
  if (split_mode != "none")
    split = make_split(b, split_mode == "inductive" ? SplitMode::inductive : SplitMode::transductive, split_seed, sp);
  save_bundle(b, dir, split ? &*split : nullptr);
  std::cout << "wrote " << b.name << " (" << b.num_nodes << " nodes, " << b.edges.size() << " edges) to "
            << dir.string() << "\n";
  return 0;
}

int cmd_validate(const std::string& bundle_dir, const std::string& out) {
  EdgeCleanup cleanup;
  const GraphBundle b = load_bundle(bundle_dir, &cleanup);
  const auto split = load_split(bundle_dir, b.num_nodes);
  const fs::path dir = run_directory(out, "validate");
  nlohmann::ordered_json j;
  j["bundle"] = bundle_dir;
  j["name"] = b.name;
  j["num_nodes"] = b.num_nodes;
  j["num_edges"] = b.edges.size();
  j["num_features"] = b.num_features;
  j["num_classes"] = b.num_classes;
  j["self_loops_dropped"] = cleanup.self_loops_dropped;
  j["duplicates_dropped"] = cleanup.duplicates_dropped;
  j["has_split"] = split.has_value();
  write_text(dir / "validation.json", j.dump(2) + "\n");
  std::cout << "ok " << b.name << ": " << b.num_nodes << " nodes, " << b.edges.size() << " edges, "
            << b.num_features << " features, " << b.num_classes << " classes"
            << (split ? ", split present" : "") << "\n";
  return 0;
}

int cmd_train_teacher(const CommonFlags& common) {
  const fs::path root = run_directory(common.out, "train-teacher");
  const RunConfig cfg = common.resolve(root);
  const Dataset data = load_dataset(cfg);
  write_text(root / "config.json", config_to_json(cfg));
  for (auto seed : cfg.seeds) {
    const fs::path dir = seed_dir(root, seed);
    fs::create_directories(dir);
    const SplitSpec split = resolve_split(data, cfg, seed);
    TrainConfig tc = cfg.teacher;
    tc.seed = seed;
    const TeacherTraining t = train_teacher(data.bundle, training_adjacency(data, split), split, tc);
    save_checkpoint(t.model.network(), {seed, t.best_epoch}, dir / "teacher");
    save_split(split, dir / "splits.json");
    std::string hist = "epoch,loss,train_acc,val_acc\n";
    for (const auto& e : t.history)
      hist += std::to_string(e.epoch) + "," + format_number(e.loss) + "," + format_number(e.train_acc) + "," +
              format_number(e.val_acc) + "\n";
    write_text(dir / "teacher_history.csv", hist);
    const Prediction pred = predict(t.model, data.full_adj, data.bundle.features);
    RunMetrics m = evaluate(pred, pred, data.bundle, data.full_adj, split);
    m.seed = seed;
    m.config_hash = config_hash(cfg);
    write_metrics(m, dir / "metrics.json");
    std::cout << "seed " << seed << ": teacher best epoch " << t.best_epoch << ", test acc "
              << format_number(m.split_accuracy["test"]) << "\n";
  }
  return 0;
}

int cmd_quantify(const CommonFlags& common, const std::string& teacher_dir) {
  const fs::path root = run_directory(common.out, "quantify");
  const RunConfig cfg = common.resolve(root);
  const Dataset data = load_dataset(cfg);
  write_text(root / "config.json", config_to_json(cfg));
  std::optional<Network> teacher;
  if (!teacher_dir.empty()) teacher = load_checkpoint(teacher_dir);
  for (auto seed : cfg.seeds) {
    const fs::path dir = seed_dir(root, seed);
    fs::create_directories(dir);
    const PreparedSeed prep = prepare_seed(data, cfg, seed, teacher ? &*teacher : nullptr);
    write_reliability_csv(prep.profile, dir / "reliability.csv");
    if (!teacher) save_checkpoint(prep.teacher.model.network(), {seed, prep.teacher.best_epoch}, dir / "teacher");
    std::cout << "seed " << seed << ": rho_max " << format_number(prep.profile.rho_max)
              << (prep.profile.degenerate ? " (degenerate)" : "") << "\n";
  }
  return 0;
}

int cmd_distill(const CommonFlags& common, const DistillFlags& flags) {
  const fs::path root = run_directory(common.out, "distill");
  RunConfig cfg = common.resolve(root);
  flags.apply(cfg);
  validate_config(cfg);
  const Dataset data = load_dataset(cfg);
  write_text(root / "config.json", config_to_json(cfg));
  std::vector<double> acc;
  for (auto seed : cfg.seeds) {
    RunConfig seed_cfg = cfg;
    seed_cfg.seeds = {seed};
    seed_cfg.out = seed_dir(root, seed).string();
    const PreparedSeed prep = prepare_seed(data, seed_cfg, seed);
    const VariantOutcome o = distill_variant(data, prep, seed_cfg);
    write_distill_outputs(seed_dir(root, seed), data, prep, o, seed_cfg);
    const double test = o.metrics.split_accuracy.count("test") ? o.metrics.split_accuracy.at("test") : 0.0;
    acc.push_back(test);
    std::cout << "seed " << seed << ": " << variant_name(cfg) << " test acc " << format_number(test) << "\n";
  }
  write_text(root / "aggregate.csv", kAggregateHeader + aggregate_row(variant_name(cfg), grid_param(cfg), acc));
  return 0;
}

int cmd_eval(const CommonFlags& common, const std::string& student_dir, const std::string& teacher_dir) {
  const fs::path root = run_directory(common.out, "eval");
  const RunConfig cfg = common.resolve(root);
  const Dataset data = load_dataset(cfg);
  write_text(root / "config.json", config_to_json(cfg));
  CheckpointMeta meta;
  const StudentModel student(load_checkpoint(student_dir, &meta));
  const std::uint64_t seed = common.seed ? *common.seed : meta.seed;
  const SplitSpec split = resolve_split(data, cfg, seed);
  const Prediction sp = predict(student, data.bundle.features);
  const Prediction tp =
      teacher_dir.empty() ? sp : predict(TeacherModel(load_checkpoint(teacher_dir)), data.full_adj, data.bundle.features);
  RunMetrics m = evaluate(sp, tp, data.bundle, data.full_adj, split);
  m.seed = seed;
  m.config_hash = config_hash(cfg);
  write_metrics(m, root / "metrics.json");
  std::cout << metrics_to_json(m);
  return 0;
}

int cmd_sweep(const CommonFlags& common, const DistillFlags& flags, std::vector<double> lambdas,
              std::vector<double> etas) {
  const fs::path root = run_directory(common.out, "sweep");
  RunConfig cfg = common.resolve(root);
  flags.apply(cfg);
  if (!lambdas.empty()) cfg.sweep_lambda = lambdas;
  if (!etas.empty()) cfg.sweep_eta = etas;
  if (cfg.sweep_lambda.empty()) cfg.sweep_lambda = {cfg.distill.lambda};
  if (cfg.sweep_eta.empty()) cfg.sweep_eta = {cfg.distill.probability.eta};
  validate_config(cfg);
  const Dataset data = load_dataset(cfg);
  write_text(root / "config.json", config_to_json(cfg));

  struct Point {
    RunConfig cfg;
    std::vector<double> acc;
  };
  std::vector<Point> grid;
  for (double l : cfg.sweep_lambda)
    for (double e : cfg.sweep_eta) {
      Point p{cfg, {}};
      p.cfg.distill.lambda = l;
      p.cfg.distill.probability.eta = e;
      p.cfg.sweep_lambda.clear();
      p.cfg.sweep_eta.clear();
      grid.push_back(std::move(p));
    }
  for (auto seed : cfg.seeds) {
    const PreparedSeed prep = prepare_seed(data, cfg, seed);
    for (std::size_t k = 0; k < grid.size(); ++k) {
      RunConfig pc = grid[k].cfg;
      pc.seeds = {seed};
      const fs::path dir = root / ("point-" + std::to_string(k)) / ("seed-" + std::to_string(seed));
      pc.out = dir.string();
      const VariantOutcome o = distill_variant(data, prep, pc);
      write_distill_outputs(dir, data, prep, o, pc);
      const double test = o.metrics.split_accuracy.count("test") ? o.metrics.split_accuracy.at("test") : 0.0;
      grid[k].acc.push_back(test);
      std::cout << "seed " << seed << " " << grid_param(pc) << ": test acc " << format_number(test) << "\n";
    }
  }
  std::string csv = kAggregateHeader;
  for (const auto& p : grid) csv += aggregate_row(variant_name(p.cfg), grid_param(p.cfg), p.acc);
  write_text(root / "sweep.csv", csv);
  std::cout << csv;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Reliability-guided distillation of GCN teachers into MLP students"};
  app.require_subcommand(1);

  SynthParams synth;
  std::string synth_out, synth_split = "transductive";
  SplitParams synth_split_params;
  std::uint64_t split_seed = 0;
  auto* s = app.add_subcommand("synth", "Write a stochastic block model bundle");
  s->add_option("--out", synth_out, "Bundle directory");
  s->add_option("--nodes", synth.num_nodes);
  s->add_option("--classes", synth.num_classes);
  s->add_option("--features", synth.num_features, "0 selects 4 x classes");
  s->add_option("--intra", synth.intra_p, "Edge probability within a class");
  s->add_option("--inter", synth.inter_p, "Edge probability across classes");
  s->add_option("--noise", synth.feature_noise);
  s->add_option("--seed", synth.seed);
  s->add_option("--split", synth_split, "none, transductive or inductive")
      ->check(CLI::IsMember({"none", "transductive", "inductive"}));
  s->add_option("--split-seed", split_seed);
  s->add_option("--train-per-class", synth_split_params.train_per_class);
  s->add_option("--num-val", synth_split_params.num_val);
  s->add_option("--num-test", synth_split_params.num_test);

  std::string validate_bundle, validate_out;
  auto* v = app.add_subcommand("validate", "Check a bundle against the format rules");
  v->add_option("bundle", validate_bundle)->required();
  v->add_option("--out", validate_out);

  CommonFlags teacher_flags;
  auto* tt = app.add_subcommand("train-teacher", "Pretrain GCN teachers");
  teacher_flags.attach(tt);

  CommonFlags quantify_flags;
  std::string quantify_teacher;
  auto* q = app.add_subcommand("quantify", "Score knowledge reliability of a teacher");
  quantify_flags.attach(q);
  q->add_option("--teacher", quantify_teacher, "Teacher checkpoint (trained when omitted)");

  CommonFlags distill_common;
  DistillFlags distill_flags;
  auto* d = app.add_subcommand("distill", "Distill a teacher into an MLP student per seed");
  distill_common.attach(d);
  distill_flags.attach(d, true);

  CommonFlags eval_flags;
  std::string eval_student, eval_teacher;
  auto* e = app.add_subcommand("eval", "Evaluate a student checkpoint");
  eval_flags.attach(e);
  e->add_option("--student", eval_student, "Student checkpoint")->required();
  e->add_option("--teacher", eval_teacher, "Teacher checkpoint for the energy diagnostic");

  CommonFlags sweep_common;
  DistillFlags sweep_flags;
  std::vector<double> sweep_lambda, sweep_eta;
  auto* w = app.add_subcommand("sweep", "Grid over lambda and eta across seeds");
  sweep_common.attach(w);
  sweep_flags.attach(w, false);
  w->add_option("--lambda", sweep_lambda, "Comma-separated lambda values")->delimiter(',');
  w->add_option("--eta", sweep_eta, "Comma-separated eta values")->delimiter(',');

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int code = app.exit(err);
    return code == 0 ? 0 : 1;
  }

  try {
    if (s->parsed()) return cmd_synth(synth, synth_out, synth_split, synth_split_params, split_seed);
    if (v->parsed()) return cmd_validate(validate_bundle, validate_out);
    if (tt->parsed()) return cmd_train_teacher(teacher_flags);
    if (q->parsed()) return cmd_quantify(quantify_flags, quantify_teacher);
    if (d->parsed()) return cmd_distill(distill_common, distill_flags);
    if (e->parsed()) return cmd_eval(eval_flags, eval_student, eval_teacher);
    if (w->parsed()) return cmd_sweep(sweep_common, sweep_flags, sweep_lambda, sweep_eta);
  } catch (const ParameterError& err) {
    std::cerr << "error: " << err.what() << "\n";
    return 1;
  } catch (const LoadError& err) {
    std::cerr << "error: " << err.what() << "\n";
    return 2;
  } catch (const FormatError& err) {
    std::cerr << "error: " << err.what() << "\n";
    return 2;
  } catch (const DivergenceError& err) {
    std::cerr << "error: " << err.what() << "\n";
    return 3;
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << "\n";
    return 1;
  }
  return 1;
}
