#include "krd/graph.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

#include <nlohmann/json.hpp>

#include "krd/error.hpp"
#include "krd/rng.hpp"

namespace krd {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(first, last - first + 1));
}

template <typename T>
bool parse_number(std::string_view s, T& out) {
  const auto* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, out);
  return ec == std::errc{} && ptr == end;
}

std::ifstream open_required(const fs::path& file, std::ios::openmode mode = std::ios::in) {
  std::ifstream in(file, mode);
  if (!in) throw LoadError("cannot open required file: " + file.string());
  return in;
}

std::vector<NodeId> json_ids(const json& j, const char* key) {
  std::vector<NodeId> ids;
  if (!j.contains(key)) return ids;
  for (const auto& v : j.at(key)) ids.push_back(v.get<NodeId>());
  std::sort(ids.begin(), ids.end());
  return ids;
}

void check_ids(const std::vector<NodeId>& ids, std::size_t n, const char* what) {
  for (auto id : ids)
    if (id >= n) throw FormatError(std::string("split ") + what + " references node out of range");
}

}  // namespace

std::vector<Edge> canonical_edges(std::span<const std::pair<NodeId, NodeId>> raw,
                                  EdgeCleanup* cleanup) {
  EdgeCleanup local;
  std::vector<Edge> edges;
  edges.reserve(raw.size());
  for (const auto& [a, b] : raw) {
    if (a == b) {
      ++local.self_loops_dropped;
      continue;
    }
    edges.push_back(Edge{std::min(a, b), std::max(a, b)});
  }
  std::sort(edges.begin(), edges.end());
  const auto kept = std::unique(edges.begin(), edges.end());
  local.duplicates_dropped = static_cast<std::size_t>(edges.end() - kept);
  edges.erase(kept, edges.end());
  if (cleanup) *cleanup = local;
  return edges;
}

void validate_bundle(const GraphBundle& b) {
  if (b.features.rows() != b.num_nodes || b.features.cols() != b.num_features)
    throw FormatError("feature matrix shape does not match meta counts");
  if (b.labels.size() != b.num_nodes) throw FormatError("label count does not match num_nodes");
  for (std::size_t i = 0; i < b.num_nodes; ++i) {
    for (double v : b.features.row(i))
      if (!std::isfinite(v)) throw FormatError("non-finite feature in row " + std::to_string(i));
    const int y = b.labels[i];
    if (y != kUnknownLabel && (y < 0 || static_cast<std::size_t>(y) >= b.num_classes))
      throw FormatError("label out of range at node " + std::to_string(i));
  }
  for (std::size_t e = 0; e < b.edges.size(); ++e) {
    const Edge& ed = b.edges[e];
    if (ed.u >= b.num_nodes || ed.v >= b.num_nodes) throw FormatError("edge endpoint out of range");
    if (ed.u >= ed.v) throw FormatError("edge not canonical (self-loop or u > v)");
    if (e > 0 && !(b.edges[e - 1] < ed)) throw FormatError("edges unsorted or duplicated");
  }
}

GraphBundle load_bundle(const fs::path& dir, EdgeCleanup* cleanup) {
  GraphBundle b;
  {
    auto in = open_required(dir / "meta.json");
    json meta;
    try {
      in >> meta;
      b.name = meta.at("name").get<std::string>();
      b.num_nodes = meta.at("num_nodes").get<std::size_t>();
      b.num_features = meta.at("num_features").get<std::size_t>();
      b.num_classes = meta.at("num_classes").get<std::size_t>();
    } catch (const json::exception& e) {
      throw FormatError("meta.json: " + std::string(e.what()));
    }
  }

  {
    const fs::path file = dir / "features.bin";
    auto in = open_required(file, std::ios::binary);
    std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    const std::size_t expected = 4 * b.num_nodes * b.num_features;
    if (bytes.size() != expected)
      throw FormatError(file.string() + ": expected " + std::to_string(expected) + " bytes, found " +
                        std::to_string(bytes.size()));
    b.features = DenseMatrix(b.num_nodes, b.num_features);
    auto vals = b.features.values();
    for (std::size_t k = 0; k < vals.size(); ++k) {
      std::uint32_t word = 0;
      for (int byte = 3; byte >= 0; --byte)
        word = (word << 8) | static_cast<unsigned char>(bytes[4 * k + static_cast<std::size_t>(byte)]);
      const float f = std::bit_cast<float>(word);
      if (!std::isfinite(f))
        throw FormatError(file.string() + ": non-finite feature in row " +
                          std::to_string(k / b.num_features));
      vals[k] = static_cast<double>(f);
    }
  }

  {
    const fs::path file = dir / "labels.csv";
    auto in = open_required(file);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      const std::string t = trim(line);
      if (t.empty()) continue;
      int y = 0;
      if (!parse_number(t, y))
        throw FormatError(file.string() + ": bad label on line " + std::to_string(lineno));
      b.labels.push_back(y);
    }
    if (b.labels.size() != b.num_nodes)
      throw FormatError(file.string() + ": expected " + std::to_string(b.num_nodes) +
                        " labels, found " + std::to_string(b.labels.size()));
  }

  {
    const fs::path file = dir / "edges.csv";
    auto in = open_required(file);
    std::vector<std::pair<NodeId, NodeId>> raw;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      const std::string t = trim(line);
      if (t.empty()) continue;
      const auto comma = t.find(',');
      NodeId a = 0, c = 0;
      if (comma == std::string::npos || !parse_number(std::string_view(trim(t.substr(0, comma))), a) ||
          !parse_number(std::string_view(trim(t.substr(comma + 1))), c))
        throw FormatError(file.string() + ": bad edge on line " + std::to_string(lineno));
      if (a >= b.num_nodes || c >= b.num_nodes)
        throw FormatError(file.string() + ": endpoint out of range on line " + std::to_string(lineno));
      raw.emplace_back(a, c);
    }
    b.edges = canonical_edges(raw, cleanup);
  }

  validate_bundle(b);
  return b;
}

std::vector<bool> SplitSpec::inductive_mask(std::size_t num_nodes) const {
  std::vector<bool> mask(num_nodes, false);
  if (mode == SplitMode::inductive)
    for (auto id : inductive) mask[id] = true;
  return mask;
}

void validate_split(const SplitSpec& s, std::size_t n) {
  std::vector<int> owner(n, 0);
  auto mark = [&](const std::vector<NodeId>& ids, int bit, const char* what) {
    for (auto id : ids) {
      if (id >= n) throw FormatError(std::string("split ") + what + " id out of range");
      if (owner[id] & bit) throw FormatError(std::string("split ") + what + " has duplicate ids");
      owner[id] |= bit;
    }
  };
  mark(s.train, 1, "train");
  mark(s.val, 2, "val");
  mark(s.test, 4, "test");
  for (std::size_t i = 0; i < n; ++i) {
    const int o = owner[i] & 7;
    if (o != 0 && (o & (o - 1)) != 0) throw FormatError("train/val/test sets overlap");
  }
  if (s.mode == SplitMode::inductive) {
    mark(s.observed_unlabeled, 8, "observed_unlabeled");
    mark(s.inductive, 16, "inductive");
    for (std::size_t i = 0; i < n; ++i) {
      const bool in_pool = (owner[i] & 1) == 0;
      const int part = owner[i] & 24;
      if (in_pool && part != 8 && part != 16)
        throw FormatError("inductive split: unlabeled pool not partitioned at node " + std::to_string(i));
      if (!in_pool && part != 0) throw FormatError("inductive split: train node in unlabeled pool");
    }
  }
}

std::optional<SplitSpec> load_split(const fs::path& dir, std::size_t num_nodes) {
  const fs::path file = dir / "splits.json";
  if (!fs::exists(file)) return std::nullopt;
  auto in = open_required(file);
  SplitSpec s;
  try {
    json j;
    in >> j;
    s.train = json_ids(j, "train");
    s.val = json_ids(j, "val");
    s.test = json_ids(j, "test");
    s.observed_unlabeled = json_ids(j, "observed_unlabeled");
    s.inductive = json_ids(j, "inductive");
  } catch (const json::exception& e) {
    throw FormatError(file.string() + ": " + e.what());
  }
  check_ids(s.train, num_nodes, "train");
  s.mode = s.inductive.empty() ? SplitMode::transductive : SplitMode::inductive;
  validate_split(s, num_nodes);
  return s;
}

void save_split(const SplitSpec& s, const fs::path& file) {
  json j;
  j["train"] = s.train;
  j["val"] = s.val;
  j["test"] = s.test;
  j["observed_unlabeled"] = s.observed_unlabeled;
  j["inductive"] = s.inductive;
  std::ofstream out(file);
  if (!out) throw LoadError("cannot write " + file.string());
  out << j.dump() << '\n';
}

void save_bundle(const GraphBundle& b, const fs::path& dir, const SplitSpec* split) {
  validate_bundle(b);
  fs::create_directories(dir);
  {
    json meta = {{"name", b.name},
                 {"num_nodes", b.num_nodes},
                 {"num_features", b.num_features},
                 {"num_classes", b.num_classes}};
    std::ofstream out(dir / "meta.json");
    out << meta.dump(2) << '\n';
  }
  {
    std::ofstream out(dir / "edges.csv");
    for (const auto& e : b.edges) out << e.u << ',' << e.v << '\n';
  }
  {
    std::ofstream out(dir / "labels.csv");
    for (int y : b.labels) out << y << '\n';
  }
  {
    std::ofstream out(dir / "features.bin", std::ios::binary);
    std::vector<char> bytes(4 * b.features.size());
    auto vals = b.features.values();
    for (std::size_t k = 0; k < vals.size(); ++k) {
      const auto word = std::bit_cast<std::uint32_t>(static_cast<float>(vals[k]));
      for (int byte = 0; byte < 4; ++byte)
        bytes[4 * k + static_cast<std::size_t>(byte)] = static_cast<char>((word >> (8 * byte)) & 0xFF);
    }
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  }
  if (split) save_split(*split, dir / "splits.json");
  if (!fs::exists(dir / "features.bin")) throw LoadError("failed to write bundle to " + dir.string());
}

namespace {

void hold_out(SplitSpec& s, std::size_t num_nodes, double holdout, Rng& rng) {
  if (holdout < 0.0 || holdout >= 1.0) throw ParameterError("inductive_holdout must lie in [0, 1)");
  s.mode = SplitMode::inductive;
  s.inductive.clear();
  s.observed_unlabeled.clear();
  std::vector<bool> is_train(num_nodes, false), is_val(num_nodes, false);
  for (auto id : s.train) is_train[id] = true;
  for (auto id : s.val) is_val[id] = true;
  // Validation nodes stay observed so model selection never sees held-out features.
  std::vector<NodeId> candidates;
  for (NodeId i = 0; i < num_nodes; ++i)
    if (!is_train[i] && !is_val[i]) candidates.push_back(i);
  const auto n_ind = static_cast<std::size_t>(std::llround(holdout * static_cast<double>(candidates.size())));
  shuffle(candidates.begin(), candidates.end(), rng);
  std::vector<bool> is_ind(num_nodes, false);
  for (std::size_t k = 0; k < n_ind; ++k) is_ind[candidates[k]] = true;
  for (NodeId i = 0; i < num_nodes; ++i) {
    if (is_train[i]) continue;
    (is_ind[i] ? s.inductive : s.observed_unlabeled).push_back(i);
  }
}

}  // namespace

SplitSpec make_inductive(SplitSpec base, std::size_t num_nodes, double holdout, std::uint64_t seed) {
  Rng rng(seed, 0x1D0C);
  hold_out(base, num_nodes, holdout, rng);
  validate_split(base, num_nodes);
  return base;
}

SplitSpec make_split(const GraphBundle& bundle, SplitMode mode, std::uint64_t seed,
                     const SplitParams& params) {
  Rng rng(seed, 0x5B1D);
  SplitSpec s;
  s.mode = mode;

  std::vector<NodeId> labeled;
  for (NodeId i = 0; i < bundle.num_nodes; ++i)
    if (bundle.labels[i] != kUnknownLabel) labeled.push_back(i);

  std::vector<NodeId> rest;
  if (params.kind == SplitParams::Kind::per_class) {
    std::vector<std::vector<NodeId>> by_class(bundle.num_classes);
    for (auto id : labeled) by_class[static_cast<std::size_t>(bundle.labels[id])].push_back(id);
    for (std::size_t c = 0; c < by_class.size(); ++c) {
      auto& members = by_class[c];
      if (members.size() < params.train_per_class)
        throw ParameterError("make_split: class " + std::to_string(c) + " has only " +
                             std::to_string(members.size()) + " labeled nodes");
      shuffle(members.begin(), members.end(), rng);
      s.train.insert(s.train.end(), members.begin(),
                     members.begin() + static_cast<std::ptrdiff_t>(params.train_per_class));
      rest.insert(rest.end(), members.begin() + static_cast<std::ptrdiff_t>(params.train_per_class),
                  members.end());
    }
    std::sort(rest.begin(), rest.end());
    if (rest.size() < params.num_val + params.num_test)
      throw ParameterError("make_split: not enough labeled nodes for val/test sizes");
    shuffle(rest.begin(), rest.end(), rng);
    s.val.assign(rest.begin(), rest.begin() + static_cast<std::ptrdiff_t>(params.num_val));
    s.test.assign(rest.begin() + static_cast<std::ptrdiff_t>(params.num_val),
                  rest.begin() + static_cast<std::ptrdiff_t>(params.num_val + params.num_test));
  } else {
    if (params.train_ratio <= 0.0 || params.val_ratio < 0.0 || params.train_ratio + params.val_ratio >= 1.0)
      throw ParameterError("make_split: ratios must satisfy 0 < train, 0 <= val, train + val < 1");
    shuffle(labeled.begin(), labeled.end(), rng);
    const auto n = static_cast<double>(labeled.size());
    const auto n_train = static_cast<std::size_t>(std::llround(params.train_ratio * n));
    const auto n_val = static_cast<std::size_t>(std::llround(params.val_ratio * n));
    if (n_train == 0 || n_train + n_val >= labeled.size())
      throw ParameterError("make_split: ratio split leaves an empty set");
    s.train.assign(labeled.begin(), labeled.begin() + static_cast<std::ptrdiff_t>(n_train));
    s.val.assign(labeled.begin() + static_cast<std::ptrdiff_t>(n_train),
                 labeled.begin() + static_cast<std::ptrdiff_t>(n_train + n_val));
    s.test.assign(labeled.begin() + static_cast<std::ptrdiff_t>(n_train + n_val), labeled.end());
  }
  std::sort(s.train.begin(), s.train.end());
  std::sort(s.val.begin(), s.val.end());
  std::sort(s.test.begin(), s.test.end());

  if (mode == SplitMode::inductive) hold_out(s, bundle.num_nodes, params.inductive_holdout, rng);
  validate_split(s, bundle.num_nodes);
  return s;
}

NormalizedAdjacency normalize_adjacency(std::size_t n, std::span<const Edge> edges) {
  std::vector<std::vector<NodeId>> nbrs(n);
  for (const auto& e : edges) {
    if (e.u >= n || e.v >= n) throw FormatError("normalize_adjacency: edge endpoint out of range");
    nbrs[e.u].push_back(e.v);
    nbrs[e.v].push_back(e.u);
  }
  NormalizedAdjacency adj;
  adj.degrees.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    nbrs[i].push_back(static_cast<NodeId>(i));
    std::sort(nbrs[i].begin(), nbrs[i].end());
    adj.degrees[i] = static_cast<double>(nbrs[i].size());
  }
  CsrMatrix& m = adj.matrix;
  m.rows = m.cols = n;
  m.row_offsets.assign(n + 1, 0);
  for (std::size_t i = 0; i < n; ++i) m.row_offsets[i + 1] = m.row_offsets[i] + nbrs[i].size();
  m.col_indices.reserve(m.row_offsets[n]);
  m.values.reserve(m.row_offsets[n]);
  for (std::size_t i = 0; i < n; ++i) {
    for (NodeId j : nbrs[i]) {
      m.col_indices.push_back(j);
      m.values.push_back(1.0 / std::sqrt(adj.degrees[i] * adj.degrees[j]));
    }
  }
  return adj;
}

NormalizedAdjacency normalize_adjacency(const GraphBundle& bundle) {
  return normalize_adjacency(bundle.num_nodes, bundle.edges);
}

std::vector<Edge> edges_within(std::span<const Edge> edges, const std::vector<bool>& hidden) {
  std::vector<Edge> kept;
  for (const auto& e : edges)
    if (!hidden[e.u] && !hidden[e.v]) kept.push_back(e);
  return kept;
}

GraphBundle synth_graph(const SynthParams& p) {
  if (p.num_classes == 0 || p.num_classes > p.num_nodes)
    throw ParameterError("synth_graph: need 0 < num_classes <= num_nodes");
  for (double prob : {p.intra_p, p.inter_p})
    if (!(prob >= 0.0 && prob <= 1.0)) throw ParameterError("synth_graph: probabilities must lie in [0, 1]");
  if (p.feature_noise < 0.0) throw ParameterError("synth_graph: feature_noise must be nonnegative");

  Rng rng(p.seed, 0x53B3);
  GraphBundle b;
  b.name = "sbm-" + std::to_string(p.num_nodes) + "-" + std::to_string(p.num_classes) + "-s" +
           std::to_string(p.seed);
  b.num_nodes = p.num_nodes;
  b.num_classes = p.num_classes;
  b.num_features = p.num_features == 0 ? 4 * p.num_classes : p.num_features;

  b.labels.resize(p.num_nodes);
  for (std::size_t i = 0; i < p.num_nodes; ++i) b.labels[i] = static_cast<int>(i % p.num_classes);
  shuffle(b.labels.begin(), b.labels.end(), rng);

  std::vector<std::pair<NodeId, NodeId>> raw;
  for (NodeId u = 0; u < p.num_nodes; ++u)
    for (NodeId v = u + 1; v < p.num_nodes; ++v) {
      const double prob = b.labels[u] == b.labels[v] ? p.intra_p : p.inter_p;
      if (rng.bernoulli(prob)) raw.emplace_back(u, v);
    }
  b.edges = canonical_edges(raw);

  b.features = DenseMatrix(p.num_nodes, b.num_features);
  for (std::size_t i = 0; i < p.num_nodes; ++i)
    for (std::size_t k = 0; k < b.num_features; ++k) {
      const double proto = (k % p.num_classes) == static_cast<std::size_t>(b.labels[i]) ? 1.0 : 0.0;
      const double noise = p.feature_noise > 0.0 ? p.feature_noise * rng.normal() : 0.0;
      b.features(i, k) = static_cast<double>(static_cast<float>(proto + noise));
    }
  validate_bundle(b);
  return b;
}

GraphBundle synth_graph(std::size_t num_nodes, std::size_t num_classes, double intra_p, double inter_p,
                        double feature_noise, std::uint64_t seed) {
  return synth_graph(SynthParams{num_nodes, num_classes, intra_p, inter_p, feature_noise, seed, 0});
}

GraphBundle row_normalized(const GraphBundle& bundle) {
  GraphBundle out = bundle;
  for (std::size_t i = 0; i < out.num_nodes; ++i) {
    auto row = out.features.row(i);
    double s = 0.0;
    for (double v : row) s += std::abs(v);
    if (s > 0.0)
      for (double& v : row) v /= s;
  }
  return out;
}

}  // namespace krd
