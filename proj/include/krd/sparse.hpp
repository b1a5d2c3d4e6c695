#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

namespace krd {

// Compressed sparse row matrix; column indices are sorted within each row.
struct CsrMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<std::size_t> row_offsets;  // rows + 1 entries
  std::vector<std::uint32_t> col_indices;
  std::vector<double> values;

  std::size_t nnz() const noexcept { return values.size(); }
  // Stored value at (r, c), or 0 if absent. Binary search within the row.
  double at(std::size_t r, std::size_t c) const noexcept;
};

}  // namespace krd
