#include "krd/models.hpp"

#include <cmath>

#include "krd/adam.hpp"
#include "krd/error.hpp"
#include "krd/kernels.hpp"
#include "krd/numerics.hpp"

namespace krd {
namespace {

void add_bias(DenseMatrix& z, const DenseMatrix& bias) {
  for (std::size_t i = 0; i < z.rows(); ++i) {
    auto row = z.row(i);
    for (std::size_t j = 0; j < row.size(); ++j) row[j] += bias(0, j);
  }
}

DenseMatrix column_sums(const DenseMatrix& g) {
  DenseMatrix s(1, g.cols());
  for (std::size_t i = 0; i < g.rows(); ++i)
    for (std::size_t j = 0; j < g.cols(); ++j) s(0, j) += g(i, j);
  return s;
}

ForwardTrace forward_impl(const Network& net, const NormalizedAdjacency* adj, const DenseMatrix& x,
                          bool train_mode, Rng* rng) {
  const Architecture& arch = net.architecture();
  const std::size_t layers = arch.num_layers();
  if (layers == 0) throw ShapeError("forward: network has no layers");
  if (x.cols() != arch.dims.front()) throw ShapeError("forward: feature width does not match model input");
  if (arch.kind == ModelKind::gcn && (adj == nullptr || adj->num_nodes() != x.rows()))
    throw ShapeError("forward: GCN needs an adjacency matching the feature rows");
  const bool dropout = train_mode && arch.dropout > 0.0;
  if (dropout && rng == nullptr) throw ParameterError("forward: dropout in train mode needs an rng");
  const double keep = 1.0 - arch.dropout;

  ForwardTrace trace;
  trace.kind = arch.kind;
  trace.network_version = net.version();
  trace.features = &x;
  const DenseMatrix* h = &x;
  for (std::size_t l = 0; l < layers; ++l) {
    DenseMatrix z = matmul(*h, net.weights()[l]);
    if (arch.kind == ModelKind::gcn) z = spmm(adj->matrix, z);
    if (arch.bias) add_bias(z, net.biases()[l]);
    if (l + 1 == layers) {
      if (!z.all_finite()) throw DivergenceError("forward: non-finite logits");
      trace.logits = std::move(z);
      break;
    }
    DenseMatrix mask(z.rows(), z.cols(), 1.0);
    auto zv = z.values();
    auto mv = mask.values();
    for (std::size_t k = 0; k < zv.size(); ++k) {
      double m = 1.0;
      if (dropout) m = rng->bernoulli(keep) ? 1.0 / keep : 0.0;
      if (!(zv[k] > 0.0)) m = 0.0;
      mv[k] = m;
      zv[k] *= m;
    }
    if (!z.all_finite()) throw DivergenceError("forward: non-finite activation");
    trace.masks.push_back(std::move(mask));
    trace.inputs.push_back(std::move(z));
    h = &trace.inputs.back();
  }
  return trace;
}

}  // namespace

Network::Network(Architecture arch, std::uint64_t seed) : arch_(std::move(arch)) {
  Rng rng(seed, 0x61A5);
  for (std::size_t l = 0; l < arch_.num_layers(); ++l) {
    const std::size_t fan_in = arch_.dims[l], fan_out = arch_.dims[l + 1];
    const double r = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    DenseMatrix w(fan_in, fan_out);
    for (double& v : w.values()) v = (2.0 * rng.uniform() - 1.0) * r;
    weights_.push_back(std::move(w));
    if (arch_.bias) biases_.emplace_back(1, fan_out);
  }
  check_shapes();
}

Network::Network(Architecture arch, std::vector<DenseMatrix> weights, std::vector<DenseMatrix> biases)
    : arch_(std::move(arch)), weights_(std::move(weights)), biases_(std::move(biases)) {
  check_shapes();
}

void Network::check_shapes() const {
  if (arch_.dims.size() < 2) throw ShapeError("network: need at least input and output widths");
  if (!(arch_.dropout >= 0.0 && arch_.dropout < 1.0)) throw ParameterError("network: dropout must lie in [0, 1)");
  if (weights_.size() != arch_.num_layers()) throw ShapeError("network: weight count mismatch");
  if (biases_.size() != (arch_.bias ? arch_.num_layers() : 0)) throw ShapeError("network: bias count mismatch");
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    if (weights_[l].rows() != arch_.dims[l] || weights_[l].cols() != arch_.dims[l + 1])
      throw ShapeError("network: weight shape does not chain");
    if (arch_.bias && (biases_[l].rows() != 1 || biases_[l].cols() != arch_.dims[l + 1]))
      throw ShapeError("network: bias shape mismatch");
  }
}

std::vector<DenseMatrix> Network::parameters() const {
  std::vector<DenseMatrix> p = weights_;
  p.insert(p.end(), biases_.begin(), biases_.end());
  return p;
}

void Network::set_parameters(std::vector<DenseMatrix> params) {
  const std::size_t l = weights_.size();
  if (params.size() != l + biases_.size()) throw ShapeError("set_parameters: count mismatch");
  for (std::size_t k = 0; k < params.size(); ++k) {
    const DenseMatrix& cur = k < l ? weights_[k] : biases_[k - l];
    if (!cur.same_shape(params[k])) throw ShapeError("set_parameters: shape mismatch");
  }
  for (std::size_t k = 0; k < l; ++k) weights_[k] = std::move(params[k]);
  for (std::size_t k = l; k < params.size(); ++k) biases_[k - l] = std::move(params[k]);
  ++version_;
}

const DenseMatrix& TeacherModel::freeze(const NormalizedAdjacency& adj, const DenseMatrix& x) {
  cached_logits_ = gcn_forward(*this, adj, x, false).logits;
  return *cached_logits_;
}

ForwardTrace gcn_forward(const TeacherModel& model, const NormalizedAdjacency& adj, const DenseMatrix& x,
                         bool train_mode, Rng* rng) {
  if (model.network().architecture().kind != ModelKind::gcn)
    throw ParameterError("gcn_forward: teacher network is not a GCN");
  return forward_impl(model.network(), &adj, x, train_mode, rng);
}

ForwardTrace mlp_forward(const StudentModel& model, const DenseMatrix& x, bool train_mode, Rng* rng) {
  if (model.network().architecture().kind != ModelKind::mlp)
    throw ParameterError("mlp_forward: student network is not an MLP");
  return forward_impl(model.network(), nullptr, x, train_mode, rng);
}

std::vector<DenseMatrix> Gradients::flat() const {
  std::vector<DenseMatrix> p = weights;
  p.insert(p.end(), biases.begin(), biases.end());
  return p;
}

Gradients backward(const Network& net, const ForwardTrace& trace, const DenseMatrix& grad_logits,
                   const NormalizedAdjacency* adj) {
  if (trace.network_version != net.version() || trace.kind != net.architecture().kind)
    throw StateError("backward: activation trace is stale for this network");
  if (!grad_logits.same_shape(trace.logits)) throw ShapeError("backward: logit gradient shape mismatch");
  const bool gcn = trace.kind == ModelKind::gcn;
  if (gcn && adj == nullptr) throw ParameterError("backward: GCN needs the adjacency");
  const std::size_t layers = net.architecture().num_layers();
  if (trace.inputs.size() + 1 != layers || trace.features == nullptr)
    throw StateError("backward: trace depth mismatch");

  Gradients out;
  out.weights.resize(layers);
  if (net.architecture().bias) out.biases.resize(layers);
  DenseMatrix g = grad_logits;
  for (std::size_t l = layers; l-- > 0;) {
    const DenseMatrix& h = l == 0 ? *trace.features : trace.inputs[l - 1];
    // A is symmetric, so A^T g = A g.
    DenseMatrix s = gcn ? spmm(adj->matrix, g) : std::move(g);
    out.weights[l] = matmul_tn(h, s);
    if (net.architecture().bias) out.biases[l] = column_sums(gcn ? g : s);
    if (l == 0) break;
    g = matmul_nt(s, net.weights()[l]);
    auto gv = g.values();
    auto mv = trace.masks[l - 1].values();
    for (std::size_t k = 0; k < gv.size(); ++k) gv[k] *= mv[k];
  }
  return out;
}

Architecture make_architecture(ModelKind kind, std::size_t in_dim, std::size_t num_classes,
                               const TrainConfig& cfg) {
  if (cfg.layers == 0) throw ParameterError("architecture: layers must be positive");
  if (cfg.layers > 1 && cfg.hidden == 0) throw ParameterError("architecture: hidden width must be positive");
  Architecture arch;
  arch.kind = kind;
  arch.dropout = cfg.dropout;
  arch.bias = cfg.bias;
  arch.dims.push_back(in_dim);
  for (std::size_t l = 1; l < cfg.layers; ++l) arch.dims.push_back(cfg.hidden);
  arch.dims.push_back(num_classes);
  return arch;
}

Prediction prediction_from_logits(DenseMatrix logits) {
  Prediction p;
  p.probs = softmax_rows(logits);
  p.labels.resize(logits.rows());
  for (std::size_t i = 0; i < logits.rows(); ++i) p.labels[i] = static_cast<int>(argmax(p.probs.row(i)));
  p.logits = std::move(logits);
  return p;
}

Prediction predict(const TeacherModel& model, const NormalizedAdjacency& adj, const DenseMatrix& x) {
  return prediction_from_logits(gcn_forward(model, adj, x, false).logits);
}

Prediction predict(const StudentModel& model, const DenseMatrix& x) {
  return prediction_from_logits(mlp_forward(model, x, false).logits);
}

double accuracy(const std::vector<int>& predicted, const std::vector<int>& labels,
                std::span<const NodeId> ids) {
  if (ids.empty()) return 0.0;
  std::size_t hits = 0;
  for (auto id : ids) hits += predicted[id] == labels[id] ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(ids.size());
}

LossAndGrad loss_label(const DenseMatrix& logits, const std::vector<int>& labels, std::span<const NodeId> ids) {
  LossAndGrad out{0.0, DenseMatrix(logits.rows(), logits.cols())};
  if (ids.empty()) return out;
  const double inv = 1.0 / static_cast<double>(ids.size());
  std::vector<double> probs(logits.cols());
  for (auto id : ids) {
    const int y = labels[id];
    if (y < 0 || static_cast<std::size_t>(y) >= logits.cols())
      throw ParameterError("loss_label: node " + std::to_string(id) + " has no valid label");
    softmax_row(logits.row(id), probs);
    out.value += cross_entropy(probs, y) * inv;
    auto g = out.grad.row(id);
    for (std::size_t c = 0; c < probs.size(); ++c) g[c] += probs[c] * inv;
    g[static_cast<std::size_t>(y)] -= inv;
  }
  return out;
}

TeacherTraining train_teacher(const GraphBundle& bundle, const NormalizedAdjacency& adj, const SplitSpec& split,
                              const TrainConfig& cfg) {
  if (split.train.empty()) throw ParameterError("train_teacher: empty training set");
  if (cfg.epochs == 0) throw ParameterError("train_teacher: epochs must be positive");
  const DenseMatrix& x = bundle.features;
  TeacherModel model(Network(make_architecture(ModelKind::gcn, bundle.num_features, bundle.num_classes, cfg), cfg.seed));
  AdamState adam = make_adam_state(model.network().parameters(), {cfg.learning_rate, 0.9, 0.999, 1e-8, cfg.weight_decay});
  Rng dropout_rng(cfg.seed, 0xD809);

  TeacherTraining result;
  result.model = model;
  std::size_t since_best = 0;
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    ForwardTrace trace;
    Gradients grads;
    double loss = 0.0;
    try {
      trace = gcn_forward(model, adj, x, true, &dropout_rng);
      auto lg = loss_label(trace.logits, bundle.labels, split.train);
      loss = lg.value;
      if (!std::isfinite(loss)) throw DivergenceError("non-finite loss");
      grads = backward(model.network(), trace, lg.grad, &adj);
      auto params = model.network().parameters();
      adam_step(params, grads.flat(), adam);
      model.mutable_network().set_parameters(std::move(params));
    } catch (const DivergenceError& e) {
      throw DivergenceError(std::string("teacher training diverged at epoch ") + std::to_string(epoch) + ": " +
                                e.what(),
                            static_cast<long>(epoch));
    }

    const Prediction pred = predict(model, adj, x);
    TeacherEpoch rec{epoch, loss, accuracy(pred.labels, bundle.labels, split.train),
                     accuracy(pred.labels, bundle.labels, split.val)};
    result.history.push_back(rec);
    if (epoch == 1 || rec.val_acc > result.best_val_acc || split.val.empty()) {
      result.best_val_acc = rec.val_acc;
      result.best_epoch = epoch;
      result.model = model;
      since_best = 0;
    } else if (cfg.patience > 0 && ++since_best >= cfg.patience) {
      break;
    }
  }
  return result;
}

}  // namespace krd
