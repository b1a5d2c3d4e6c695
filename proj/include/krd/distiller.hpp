#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "krd/graph.hpp"
#include "krd/knowledge.hpp"
#include "krd/models.hpp"
#include "krd/sampler.hpp"

namespace krd {

// student_teacher is KL(softmax(student) || softmax(teacher)), the order the
// losses are defined in; teacher_student is the conventional KD direction.
enum class KlDirection { student_teacher, teacher_student };

enum class DistillMethod { krd, glnn };

struct DistillConfig {
  DistillMethod method = DistillMethod::krd;
  double lambda = 0.3;
  double temperature = 1.0;
  double delta = 1.0;
  std::size_t num_samples = 10;
  ProbabilityModel probability;
  SamplerOptions sampler;
  KlDirection kl_direction = KlDirection::student_teacher;
  TrainConfig student;
  // Keep every epoch's eval-mode student argmax in DistillRun.
  bool record_predictions = false;
};

void validate_distill_config(const DistillConfig& cfg);

// Mean over nodes of KL between the student and teacher rows, no temperature.
// An empty node set gives zero loss and gradient.
LossAndGrad loss_kd(const DenseMatrix& student_logits, const DenseMatrix& teacher_logits,
                    std::span<const NodeId> nodes, KlDirection direction = KlDirection::student_teacher);

// Mean over sampled pairs of KL between softmax(z_student / tau) and
// softmax(h_teacher / tau).
LossAndGrad loss_krd(const DenseMatrix& student_logits, const DenseMatrix& teacher_logits,
                     const std::vector<SupervisionPair>& pairs, double temperature,
                     KlDirection direction = KlDirection::student_teacher);

// lambda * ce + (1 - lambda) * (kd + krd).
double loss_total(double lambda, double ce, double kd, double krd);

struct LossTerms {
  double label = 0.0;
  double kd = 0.0;
  double krd = 0.0;
  double total = 0.0;
  DenseMatrix grad;
};

// All three terms and the combined logit gradient.
LossTerms distillation_objective(const DenseMatrix& student_logits, const DenseMatrix& teacher_logits,
                                 const std::vector<int>& labels, std::span<const NodeId> train,
                                 std::span<const NodeId> kd_nodes, const std::vector<SupervisionPair>& pairs,
                                 const DistillConfig& cfg);

struct DistillEpoch {
  std::size_t epoch = 0;
  double loss_label = 0.0;
  double loss_kd = 0.0;
  double loss_krd = 0.0;
  double alpha = 0.0;  // value used for this epoch's sampling
  std::size_t pairs = 0;
  double val_acc = 0.0;
  bool fit_failed = false;
};

struct DistillRun {
  TeacherModel teacher;
  std::vector<int> teacher_labels;  // eval-mode argmax on the training graph
  StudentModel final_student;
  StudentModel best_student;
  std::size_t best_epoch = 0;
  double best_val_acc = 0.0;
  std::vector<DistillEpoch> history;
  std::vector<std::vector<int>> epoch_predictions;
};

// adj is the graph visible during training: in inductive mode the inductive
// nodes must already be isolated. KD, KRD and the agreement histogram skip
// inductive nodes.
DistillRun run_distillation(const GraphBundle& bundle, const NormalizedAdjacency& adj, const SplitSpec& split,
                            const TeacherModel& teacher, const ReliabilityProfile& profile,
                            const DistillConfig& cfg);

// run_distillation with the KRD term disabled and sampling skipped.
DistillRun glnn_baseline(const GraphBundle& bundle, const NormalizedAdjacency& adj, const SplitSpec& split,
                         const TeacherModel& teacher, const DistillConfig& cfg);

std::string to_string(KlDirection d);
std::string to_string(DistillMethod m);
KlDirection parse_kl_direction(const std::string& s);
DistillMethod parse_method(const std::string& s);

}  // namespace krd
