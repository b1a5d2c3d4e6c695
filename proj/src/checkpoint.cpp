#include "krd/checkpoint.hpp"

#include <bit>
#include <fstream>
#include <iterator>

#include <nlohmann/json.hpp>

#include "krd/error.hpp"

namespace krd {
namespace fs = std::filesystem;
using nlohmann::json;

void save_checkpoint(const Network& net, const CheckpointMeta& meta, const fs::path& dir) {
  fs::create_directories(dir);
  const Architecture& a = net.architecture();
  json j = {{"kind", a.kind == ModelKind::gcn ? "gcn" : "mlp"},
            {"dims", a.dims},
            {"dropout", a.dropout},
            {"bias", a.bias},
            {"seed", meta.seed},
            {"epoch", meta.epoch}};
  {
    std::ofstream out(dir / "meta.json");
    if (!out) throw LoadError("cannot write " + (dir / "meta.json").string());
    out << j.dump(2) << '\n';
  }
  std::vector<char> bytes;
  for (const auto& p : net.parameters())
    for (double v : p.values()) {
      const auto word = std::bit_cast<std::uint64_t>(v);
      for (int b = 0; b < 8; ++b) bytes.push_back(static_cast<char>((word >> (8 * b)) & 0xFF));
    }
  std::ofstream out(dir / "weights.bin", std::ios::binary);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

Network load_checkpoint(const fs::path& dir, CheckpointMeta* meta) {
  std::ifstream min(dir / "meta.json");
  if (!min) throw LoadError("cannot open required file: " + (dir / "meta.json").string());
  Architecture a;
  try {
    json j;
    min >> j;
    const auto kind = j.at("kind").get<std::string>();
    if (kind != "gcn" && kind != "mlp") throw FormatError("checkpoint: unknown model kind " + kind);
    a.kind = kind == "gcn" ? ModelKind::gcn : ModelKind::mlp;
    a.dims = j.at("dims").get<std::vector<std::size_t>>();
    a.dropout = j.at("dropout").get<double>();
    a.bias = j.at("bias").get<bool>();
    if (meta) {
      meta->seed = j.at("seed").get<std::uint64_t>();
      meta->epoch = j.at("epoch").get<std::size_t>();
    }
  } catch (const json::exception& e) {
    throw FormatError("checkpoint meta.json: " + std::string(e.what()));
  }
  if (a.dims.size() < 2) throw FormatError("checkpoint: need at least two layer widths");

  std::ifstream win(dir / "weights.bin", std::ios::binary);
  if (!win) throw LoadError("cannot open required file: " + (dir / "weights.bin").string());
  std::vector<char> bytes((std::istreambuf_iterator<char>(win)), std::istreambuf_iterator<char>());

  std::size_t expected = 0;
  for (std::size_t l = 0; l + 1 < a.dims.size(); ++l)
    expected += a.dims[l] * a.dims[l + 1] + (a.bias ? a.dims[l + 1] : 0);
  if (bytes.size() != 8 * expected)
    throw FormatError("checkpoint weights.bin: expected " + std::to_string(8 * expected) + " bytes, found " +
                      std::to_string(bytes.size()));

  std::size_t pos = 0;
  auto read_matrix = [&](std::size_t r, std::size_t c) {
    DenseMatrix m(r, c);
    for (double& v : m.values()) {
      std::uint64_t word = 0;
      for (int b = 7; b >= 0; --b) word = (word << 8) | static_cast<unsigned char>(bytes[pos + static_cast<std::size_t>(b)]);
      v = std::bit_cast<double>(word);
      pos += 8;
    }
    return m;
  };
  std::vector<DenseMatrix> weights, biases;
  for (std::size_t l = 0; l + 1 < a.dims.size(); ++l) weights.push_back(read_matrix(a.dims[l], a.dims[l + 1]));
  if (a.bias)
    for (std::size_t l = 0; l + 1 < a.dims.size(); ++l) biases.push_back(read_matrix(1, a.dims[l + 1]));
  return Network(std::move(a), std::move(weights), std::move(biases));
}

}  // namespace krd
