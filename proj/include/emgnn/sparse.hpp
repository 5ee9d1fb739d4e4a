#pragma once

#include <cstddef>
#include <utility>
#include <vector>

namespace emgnn {

/// Immutable CSR pattern with a transposed index over the same entries.
///
/// Row r owns entries [row_ptr[r], row_ptr[r+1]); entry k reads column col[k].
/// Entries keep the order they were given in, which fixes the summation order
/// of every kernel that reduces over a row. The transposed index lists, for
/// each column, the entries that read it in ascending entry order.
class SparseStructure {
public:
    SparseStructure() = default;

    /// `row_entries[r]` lists the columns read by row r, in summation order.
    SparseStructure(std::size_t cols, const std::vector<std::vector<std::size_t>>& row_entries);

    std::size_t rows() const noexcept { return row_ptr_.empty() ? 0 : row_ptr_.size() - 1; }
    std::size_t cols() const noexcept { return cols_; }
    std::size_t nnz() const noexcept { return col_.size(); }

    std::size_t row_begin(std::size_t r) const { return row_ptr_[r]; }
    std::size_t row_end(std::size_t r) const { return row_ptr_[r + 1]; }
    std::size_t col(std::size_t k) const { return col_[k]; }
    std::size_t row_of(std::size_t k) const { return row_of_[k]; }

    std::size_t col_begin(std::size_t c) const { return col_ptr_[c]; }
    std::size_t col_end(std::size_t c) const { return col_ptr_[c + 1]; }
    /// Entry index of the i-th position in the transposed index.
    std::size_t col_entry(std::size_t i) const { return col_entries_[i]; }

    const std::vector<std::size_t>& row_ptr() const noexcept { return row_ptr_; }
    const std::vector<std::size_t>& col_indices() const noexcept { return col_; }

private:
    std::size_t cols_ = 0;
    std::vector<std::size_t> row_ptr_;
    std::vector<std::size_t> col_;
    std::vector<std::size_t> row_of_;
    std::vector<std::size_t> col_ptr_;
    std::vector<std::size_t> col_entries_;
};

}  // namespace emgnn
