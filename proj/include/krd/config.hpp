#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "krd/distiller.hpp"
#include "krd/graph.hpp"
#include "krd/models.hpp"

namespace krd {

// Everything a run needs, serialized as one JSON document.
struct RunConfig {
  std::string bundle;
  std::string out;
  SplitMode mode = SplitMode::transductive;
  std::vector<std::uint64_t> seeds = {0};
  // Use splits.json from the bundle when present (same split for every seed).
  bool use_bundle_split = true;
  SplitParams split;
  bool row_normalize = false;
  TrainConfig teacher;
  DistillConfig distill;
  std::vector<double> sweep_lambda;
  std::vector<double> sweep_eta;
};

// Unknown keys and ill-typed values raise ParameterError; missing keys keep
// their defaults.
RunConfig config_from_json(const std::string& text);
RunConfig load_config(const std::filesystem::path& file);

// Fully resolved document with every default filled in.
std::string config_to_json(const RunConfig& cfg);

// Hash of the resolved config without the output path.
std::string config_hash(const RunConfig& cfg);

// Throws ParameterError on out-of-range values.
void validate_config(const RunConfig& cfg);

}  // namespace krd
