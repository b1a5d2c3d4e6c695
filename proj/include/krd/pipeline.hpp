#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>

#include "krd/config.hpp"
#include "krd/distiller.hpp"
#include "krd/graph.hpp"
#include "krd/knowledge.hpp"
#include "krd/models.hpp"
#include "krd/report.hpp"

namespace krd {

struct Dataset {
  GraphBundle bundle;
  std::optional<SplitSpec> bundle_split;
  NormalizedAdjacency full_adj;
};

Dataset make_dataset(GraphBundle bundle, std::optional<SplitSpec> split, bool row_normalize);
Dataset load_dataset(const RunConfig& cfg);

// Bundle split when configured and present, otherwise a seeded split.
SplitSpec resolve_split(const Dataset& data, const RunConfig& cfg, std::uint64_t seed);

// Graph seen during training: inductive nodes keep only their self-loop.
NormalizedAdjacency training_adjacency(const Dataset& data, const SplitSpec& split);

struct PreparedSeed {
  std::uint64_t seed = 0;
  SplitSpec split;
  NormalizedAdjacency train_adj;
  TeacherTraining teacher;
  ReliabilityProfile profile;
  Prediction teacher_full;  // eval-mode teacher output on the full graph
};

// Split, teacher pretraining (or the given teacher) and reliability scores.
PreparedSeed prepare_seed(const Dataset& data, const RunConfig& cfg, std::uint64_t seed,
                          const Network* pretrained_teacher = nullptr);

struct VariantOutcome {
  DistillRun run;
  Prediction student;  // best-validation student on all nodes
  RunMetrics metrics;
};

VariantOutcome distill_variant(const Dataset& data, const PreparedSeed& prep, const RunConfig& cfg);

// config.json, history.csv, sampler.csv, student/, metrics.json and the
// diagnostic histograms.
void write_distill_outputs(const std::filesystem::path& dir, const Dataset& data, const PreparedSeed& prep,
                           const VariantOutcome& outcome, const RunConfig& cfg);

void write_text(const std::filesystem::path& file, const std::string& text);

}  // namespace krd
