#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "krd/matrix.hpp"
#include "krd/sparse.hpp"

namespace krd {

using NodeId = std::uint32_t;
inline constexpr int kUnknownLabel = -1;

// Undirected edge stored once with u < v.
struct Edge {
  NodeId u = 0;
  NodeId v = 0;
  auto operator<=>(const Edge&) const = default;
};

// Immutable dataset: features, labels and deduplicated undirected edges.
struct GraphBundle {
  std::string name;
  std::size_t num_nodes = 0;
  std::size_t num_features = 0;
  std::size_t num_classes = 0;
  DenseMatrix features;     // num_nodes x num_features
  std::vector<int> labels;  // class index or kUnknownLabel
  std::vector<Edge> edges;  // sorted, u < v, unique
};

struct EdgeCleanup {
  std::size_t self_loops_dropped = 0;
  std::size_t duplicates_dropped = 0;
};

// Symmetrizes, deduplicates and sorts raw (src, dst) pairs.
std::vector<Edge> canonical_edges(std::span<const std::pair<NodeId, NodeId>> raw,
                                  EdgeCleanup* cleanup = nullptr);

// Throws FormatError when any bundle invariant is violated.
void validate_bundle(const GraphBundle& bundle);

// Reads meta.json, edges.csv, features.bin and labels.csv from dir.
// Missing files raise LoadError; malformed content raises FormatError.
GraphBundle load_bundle(const std::filesystem::path& dir, EdgeCleanup* cleanup = nullptr);

enum class SplitMode { transductive, inductive };

struct SplitSpec {
  SplitMode mode = SplitMode::transductive;
  std::vector<NodeId> train;
  std::vector<NodeId> val;
  std::vector<NodeId> test;
  // Inductive mode only: partition of the nodes outside train.
  std::vector<NodeId> observed_unlabeled;
  std::vector<NodeId> inductive;

  // Per-node flag: true when the node must be hidden during training.
  std::vector<bool> inductive_mask(std::size_t num_nodes) const;
};

void validate_split(const SplitSpec& split, std::size_t num_nodes);

// splits.json next to the payload files, if present.
std::optional<SplitSpec> load_split(const std::filesystem::path& dir, std::size_t num_nodes);

void save_bundle(const GraphBundle& bundle, const std::filesystem::path& dir,
                 const SplitSpec* split = nullptr);
void save_split(const SplitSpec& split, const std::filesystem::path& file);

struct SplitParams {
  enum class Kind { per_class, ratio };
  Kind kind = Kind::per_class;
  // Planetoid-style counts.
  std::size_t train_per_class = 20;
  std::size_t num_val = 500;
  std::size_t num_test = 1000;
  // Ratio split; the test set takes every remaining labeled node.
  double train_ratio = 0.1;
  double val_ratio = 0.1;
  // Fraction of the non-train pool held out as inductive nodes.
  double inductive_holdout = 0.2;
};

// Deterministic for a fixed seed. Throws ParameterError when the requested
// sizes exceed the labeled nodes available.
SplitSpec make_split(const GraphBundle& bundle, SplitMode mode, std::uint64_t seed,
                     const SplitParams& params = {});

// Copy of a split with the given fraction of non-train, non-val nodes held
// out as inductive nodes.
SplitSpec make_inductive(SplitSpec base, std::size_t num_nodes, double holdout, std::uint64_t seed);

// D^-1/2 (A + I) D^-1/2 in CSR form, with the degrees of A + I.
struct NormalizedAdjacency {
  CsrMatrix matrix;
  std::vector<double> degrees;

  std::size_t num_nodes() const noexcept { return matrix.rows; }
};

NormalizedAdjacency normalize_adjacency(const GraphBundle& bundle);
NormalizedAdjacency normalize_adjacency(std::size_t num_nodes, std::span<const Edge> edges);

// Edges whose endpoints are both kept.
std::vector<Edge> edges_within(std::span<const Edge> edges, const std::vector<bool>& hidden);

struct SynthParams {
  std::size_t num_nodes = 60;
  std::size_t num_classes = 3;
  double intra_p = 0.3;
  double inter_p = 0.02;
  double feature_noise = 0.1;
  std::uint64_t seed = 0;
  // 0 selects 4 * num_classes.
  std::size_t num_features = 0;
};

// Stochastic block model with class-prototype features plus Gaussian noise.
// Feature values are rounded to float so the bundle survives a save/load
// round trip unchanged.
GraphBundle synth_graph(const SynthParams& params);
GraphBundle synth_graph(std::size_t num_nodes, std::size_t num_classes, double intra_p,
                        double inter_p, double feature_noise, std::uint64_t seed);

// Copy with every feature row scaled to unit L1 norm (zero rows untouched).
GraphBundle row_normalized(const GraphBundle& bundle);

}  // namespace krd
