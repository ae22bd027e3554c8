#pragma once

#include "saten/tensor.hpp"

#include <cstdint>
#include <functional>
#include <vector>

namespace saten {

enum class SparseFormat { coordinate, two_four, row_list };

/// Sparse residual E and its frozen mask, in one of three storage formats.
/// Entries enumerate in a deterministic order per format:
///   coordinate - ascending (row, col)
///   two_four   - column-major by (col, group), ascending row within a group
///   row_list   - ascending row, then col
class SparseResidual {
public:
    struct CooEntry {
        std::int64_t row;
        std::int64_t col;
        double value;
    };

    static SparseResidual coordinate(std::int64_t n_rows, std::int64_t n_cols,
                                     std::vector<CooEntry> entries);
    /// values/group_indices run column-major: for each column, for each group
    /// of 4 consecutive rows, the kept entries in ascending in-group order.
    static SparseResidual two_four(std::int64_t n_rows, std::int64_t n_cols,
                                   std::vector<double> values,
                                   std::vector<std::uint8_t> group_indices);
    /// rows ascending; row_values holds the dense rows concatenated.
    static SparseResidual row_list(std::int64_t n_rows, std::int64_t n_cols,
                                   std::vector<std::int64_t> rows,
                                   std::vector<double> row_values);

    SparseFormat format() const { return format_; }
    std::int64_t n_rows() const { return n_rows_; }
    std::int64_t n_cols() const { return n_cols_; }

    /// Count of stored (kept-by-the-mask) entries.
    std::int64_t nonzero_count() const;
    double density() const;

    /// Visit every stored entry in the format's canonical order; `slot` is
    /// the entry's position in that order (the payload value index).
    void for_each_entry(
        const std::function<void(std::int64_t row, std::int64_t col, double value,
                                 std::int64_t slot)>& fn) const;

    /// Copy with the payload values replaced (same support, same order).
    SparseResidual with_values(const std::vector<double>& values) const;
    std::vector<double> values() const;

    DenseTensor densify() const;

    /// Bytes of index metadata on disk: 32-bit row/col indices, 2-bit
    /// in-group indices packed four per byte.
    std::int64_t index_storage_bytes() const;

    // format-specific payload accessors (serialization)
    const std::vector<CooEntry>& coo_entries() const { return coo_; }
    const std::vector<double>& tf_values() const { return tf_values_; }
    const std::vector<std::uint8_t>& tf_group_indices() const { return tf_indices_; }
    const std::vector<std::int64_t>& row_indices() const { return rows_; }
    const std::vector<double>& row_values() const { return row_values_; }

private:
    SparseResidual(SparseFormat f, std::int64_t n_rows, std::int64_t n_cols)
        : format_(f), n_rows_(n_rows), n_cols_(n_cols) {}

    SparseFormat format_;
    std::int64_t n_rows_;
    std::int64_t n_cols_;
    std::vector<CooEntry> coo_;
    std::vector<double> tf_values_;
    std::vector<std::uint8_t> tf_indices_;
    std::vector<std::int64_t> rows_;
    std::vector<double> row_values_;
};

/// Token occurrence histogram for row-sparse embedding residuals.
struct TokenFrequencyTable {
    std::vector<std::int64_t> counts; // indexed by token id
    std::int64_t vocab_size() const { return static_cast<std::int64_t>(counts.size()); }
};

/// Keep the floor(density * N * M) largest-magnitude entries, ties by
/// smaller (row, col). Explicit zeros are never stored.
SparseResidual mask_unstructured(const DenseTensor& residual, double density);

/// Keep the 2 largest-magnitude of every 4 consecutive rows per column,
/// ties by smaller row. A trailing group of g < 4 rows keeps ceil(g/2).
SparseResidual mask_two_four(const DenseTensor& residual);

/// Keep the full rows of the top_t most frequent tokens, frequency ties by
/// smaller token id.
SparseResidual mask_rows(const DenseTensor& residual, const TokenFrequencyTable& freq,
                         std::int64_t top_t);

TokenFrequencyTable count_token_frequencies(const std::vector<std::int64_t>& token_stream,
                                            std::int64_t vocab_size);

/// y = E^T x, touching only stored entries; the counter advances by
/// nonzero_count.
DenseTensor sparse_matvec_t(const SparseResidual& e, const DenseTensor& x,
                            MultiplyCounter* counter = nullptr);

/// Stored value count, the rho*N*M term of the parameter formula.
std::int64_t sparse_param_count(const SparseResidual& e);

} // namespace saten
