#include "emgnn/sparse.hpp"

#include <string>

#include "emgnn/error.hpp"

namespace emgnn {

SparseStructure::SparseStructure(std::size_t cols,
                                 const std::vector<std::vector<std::size_t>>& row_entries)
    : cols_(cols) {
    row_ptr_.reserve(row_entries.size() + 1);
    row_ptr_.push_back(0);
    for (std::size_t r = 0; r < row_entries.size(); ++r) {
        for (std::size_t c : row_entries[r]) {
            if (c >= cols) {
                throw ConfigError("sparse structure: column " + std::to_string(c) +
                                  " out of range for " + std::to_string(cols) + " columns");
            }
            col_.push_back(c);
            row_of_.push_back(r);
        }
        row_ptr_.push_back(col_.size());
    }

    col_ptr_.assign(cols + 1, 0);
    for (std::size_t c : col_) ++col_ptr_[c + 1];
    for (std::size_t c = 0; c < cols; ++c) col_ptr_[c + 1] += col_ptr_[c];
    col_entries_.resize(col_.size());
    std::vector<std::size_t> fill(col_ptr_.begin(), col_ptr_.end() - 1);
    for (std::size_t k = 0; k < col_.size(); ++k) col_entries_[fill[col_[k]]++] = k;
}

}  // namespace emgnn
