#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "krd/graph.hpp"
#include "krd/matrix.hpp"
#include "krd/rng.hpp"

namespace krd {

enum class ModelKind { gcn, mlp };

// Layer widths d -> F -> ... -> C plus regularization settings.
struct Architecture {
  ModelKind kind = ModelKind::mlp;
  std::vector<std::size_t> dims;
  double dropout = 0.0;
  bool bias = false;

  std::size_t num_layers() const noexcept { return dims.empty() ? 0 : dims.size() - 1; }
  bool operator==(const Architecture&) const = default;
};

// Weights, optional 1 x out biases, and a version counter bumped on every
// mutation so stale forward traces can be rejected.
class Network {
 public:
  Network() = default;
  // Glorot-uniform weights, zero biases.
  Network(Architecture arch, std::uint64_t seed);
  Network(Architecture arch, std::vector<DenseMatrix> weights, std::vector<DenseMatrix> biases);

  const Architecture& architecture() const noexcept { return arch_; }
  const std::vector<DenseMatrix>& weights() const noexcept { return weights_; }
  const std::vector<DenseMatrix>& biases() const noexcept { return biases_; }
  std::uint64_t version() const noexcept { return version_; }

  // Flat parameter list: weights followed by biases (if enabled).
  std::vector<DenseMatrix> parameters() const;
  void set_parameters(std::vector<DenseMatrix> params);
  std::vector<DenseMatrix>& mutable_weights() noexcept {
    ++version_;
    return weights_;
  }

  bool same_parameters(const Network& o) const {
    return arch_ == o.arch_ && weights_ == o.weights_ && biases_ == o.biases_;
  }

 private:
  void check_shapes() const;

  Architecture arch_;
  std::vector<DenseMatrix> weights_;
  std::vector<DenseMatrix> biases_;
  std::uint64_t version_ = 0;
};

// GCN teacher: H(l) = Dropout(ReLU(A H(l-1) W(l-1))), linear last layer.
class TeacherModel {
 public:
  TeacherModel() = default;
  explicit TeacherModel(Network net) : net_(std::move(net)) {}

  const Network& network() const noexcept { return net_; }
  Network& mutable_network() noexcept {
    cached_logits_.reset();
    return net_;
  }

  // Eval-mode logits memoized after freeze(); cleared by mutable_network().
  const std::optional<DenseMatrix>& cached_logits() const noexcept { return cached_logits_; }
  const DenseMatrix& freeze(const NormalizedAdjacency& adj, const DenseMatrix& x);

 private:
  Network net_;
  std::optional<DenseMatrix> cached_logits_;
};

// MLP student with the teacher's layer count and widths; never sees edges.
class StudentModel {
 public:
  StudentModel() = default;
  explicit StudentModel(Network net) : net_(std::move(net)) {}

  const Network& network() const noexcept { return net_; }
  Network& mutable_network() noexcept { return net_; }

 private:
  Network net_;
};

// Everything backward() needs from one forward pass. The layer-0 input is
// referenced, not copied: the feature matrix must outlive the trace.
struct ForwardTrace {
  ModelKind kind = ModelKind::mlp;
  std::uint64_t network_version = 0;
  const DenseMatrix* features = nullptr;
  std::vector<DenseMatrix> inputs;  // input to layers 1..L-1, after dropout
  std::vector<DenseMatrix> masks;   // per hidden layer: 0 or 1/keep (1 in eval)
  DenseMatrix logits;
};

ForwardTrace gcn_forward(const TeacherModel& model, const NormalizedAdjacency& adj,
                         const DenseMatrix& x, bool train_mode, Rng* rng = nullptr);
ForwardTrace mlp_forward(const StudentModel& model, const DenseMatrix& x, bool train_mode,
                         Rng* rng = nullptr);

struct Gradients {
  std::vector<DenseMatrix> weights;
  std::vector<DenseMatrix> biases;

  // Same ordering as Network::parameters().
  std::vector<DenseMatrix> flat() const;
};

// Exact parameter gradients of the scalar loss whose logit gradient is
// supplied. adj is required for GCN traces and ignored for MLP traces.
Gradients backward(const Network& net, const ForwardTrace& trace, const DenseMatrix& grad_logits,
                   const NormalizedAdjacency* adj = nullptr);

struct TrainConfig {
  std::size_t epochs = 500;
  double learning_rate = 0.01;
  double weight_decay = 5e-4;
  double dropout = 0.5;
  std::size_t hidden = 128;
  std::size_t layers = 2;
  std::uint64_t seed = 0;
  // Stop after this many epochs without a validation improvement; 0 disables.
  std::size_t patience = 0;
  bool bias = false;
};

Architecture make_architecture(ModelKind kind, std::size_t in_dim, std::size_t num_classes,
                               const TrainConfig& cfg);

struct TeacherEpoch {
  std::size_t epoch = 0;
  double loss = 0.0;
  double train_acc = 0.0;
  double val_acc = 0.0;
};

struct TeacherTraining {
  TeacherModel model;  // best-validation snapshot
  std::vector<TeacherEpoch> history;
  std::size_t best_epoch = 0;
  double best_val_acc = 0.0;
};

// Minimizes mean cross-entropy over split.train with Adam.
TeacherTraining train_teacher(const GraphBundle& bundle, const NormalizedAdjacency& adj,
                              const SplitSpec& split, const TrainConfig& cfg);

struct Prediction {
  DenseMatrix logits;
  DenseMatrix probs;
  std::vector<int> labels;  // argmax, lowest index on ties
};

Prediction predict(const TeacherModel& model, const NormalizedAdjacency& adj, const DenseMatrix& x);
Prediction predict(const StudentModel& model, const DenseMatrix& x);
Prediction prediction_from_logits(DenseMatrix logits);

// Fraction of ids whose predicted label equals the true label.
double accuracy(const std::vector<int>& predicted, const std::vector<int>& labels,
                std::span<const NodeId> ids);

// Mean cross-entropy over ids and its gradient with respect to the logits.
struct LossAndGrad {
  double value = 0.0;
  DenseMatrix grad;  // same shape as the logits
};
LossAndGrad loss_label(const DenseMatrix& logits, const std::vector<int>& labels,
                       std::span<const NodeId> ids);

}  // namespace krd
