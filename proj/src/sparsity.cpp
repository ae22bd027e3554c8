#include "saten/sparsity.hpp"

#include "saten/errors.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <string>

namespace saten {

namespace {

std::int64_t groups_per_column(std::int64_t n_rows) {
    return (n_rows + 3) / 4;
}

std::int64_t kept_in_group(std::int64_t n_rows, std::int64_t group) {
    const std::int64_t g = std::min<std::int64_t>(4, n_rows - group * 4);
    return (g + 1) / 2; // 2 for complete groups, ceil(g/2) for the remainder
}

} // namespace

SparseResidual SparseResidual::coordinate(std::int64_t n_rows, std::int64_t n_cols,
                                          std::vector<CooEntry> entries) {
    SparseResidual out(SparseFormat::coordinate, n_rows, n_cols);
    for (std::size_t i = 0; i < entries.size(); ++i) {
        const CooEntry& e = entries[i];
        if (e.row < 0 || e.row >= n_rows || e.col < 0 || e.col >= n_cols)
            throw ShapeError("coordinate entry out of range");
        if (i > 0) {
            const CooEntry& p = entries[i - 1];
            if (std::pair(e.row, e.col) <= std::pair(p.row, p.col))
                throw ShapeError("coordinate entries must be strictly increasing in (row, col)");
        }
        if (e.value == 0.0) throw ShapeError("coordinate format stores no explicit zeros");
    }
    out.coo_ = std::move(entries);
    return out;
}

SparseResidual SparseResidual::two_four(std::int64_t n_rows, std::int64_t n_cols,
                                        std::vector<double> values,
                                        std::vector<std::uint8_t> group_indices) {
    SparseResidual out(SparseFormat::two_four, n_rows, n_cols);
    if (values.size() != group_indices.size())
        throw ShapeError("two_four values and indices must have equal length");
    std::int64_t expected = 0;
    for (std::int64_t g = 0; g < groups_per_column(n_rows); ++g)
        expected += kept_in_group(n_rows, g);
    expected *= n_cols;
    if (static_cast<std::int64_t>(values.size()) != expected)
        throw ShapeError("two_four payload holds " + std::to_string(values.size()) +
                         " entries, expected " + std::to_string(expected));
    std::size_t pos = 0;
    for (std::int64_t c = 0; c < n_cols; ++c) {
        for (std::int64_t g = 0; g < groups_per_column(n_rows); ++g) {
            const std::int64_t keep = kept_in_group(n_rows, g);
            const std::int64_t gsize = std::min<std::int64_t>(4, n_rows - g * 4);
            for (std::int64_t i = 0; i < keep; ++i, ++pos) {
                const std::uint8_t idx = group_indices[pos];
                if (idx >= gsize)
                    throw ShapeError("two_four in-group index out of range");
                if (i > 0 && group_indices[pos - 1] >= idx)
                    throw ShapeError("two_four in-group indices must be distinct ascending");
            }
        }
    }
    out.tf_values_ = std::move(values);
    out.tf_indices_ = std::move(group_indices);
    return out;
}

SparseResidual SparseResidual::row_list(std::int64_t n_rows, std::int64_t n_cols,
                                        std::vector<std::int64_t> rows,
                                        std::vector<double> row_values) {
    SparseResidual out(SparseFormat::row_list, n_rows, n_cols);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i] < 0 || rows[i] >= n_rows)
            throw ShapeError("row_list row index out of range: " + std::to_string(rows[i]));
        if (i > 0 && rows[i - 1] >= rows[i])
            throw ShapeError("row_list rows must be strictly increasing");
    }
    if (row_values.size() != rows.size() * static_cast<std::size_t>(n_cols))
        throw ShapeError("row_list value payload length mismatch");
    out.rows_ = std::move(rows);
    out.row_values_ = std::move(row_values);
    return out;
}

std::int64_t SparseResidual::nonzero_count() const {
    switch (format_) {
        case SparseFormat::coordinate: return static_cast<std::int64_t>(coo_.size());
        case SparseFormat::two_four: return static_cast<std::int64_t>(tf_values_.size());
        case SparseFormat::row_list: return static_cast<std::int64_t>(rows_.size()) * n_cols_;
    }
    return 0;
}

double SparseResidual::density() const {
    return static_cast<double>(nonzero_count()) /
           (static_cast<double>(n_rows_) * static_cast<double>(n_cols_));
}

void SparseResidual::for_each_entry(
    const std::function<void(std::int64_t, std::int64_t, double, std::int64_t)>& fn) const {
    switch (format_) {
        case SparseFormat::coordinate: {
            for (std::size_t i = 0; i < coo_.size(); ++i)
                fn(coo_[i].row, coo_[i].col, coo_[i].value, static_cast<std::int64_t>(i));
            break;
        }
        case SparseFormat::two_four: {
            std::int64_t pos = 0;
            for (std::int64_t c = 0; c < n_cols_; ++c) {
                for (std::int64_t g = 0; g < groups_per_column(n_rows_); ++g) {
                    const std::int64_t keep = kept_in_group(n_rows_, g);
                    for (std::int64_t i = 0; i < keep; ++i, ++pos) {
                        const std::int64_t row = g * 4 + tf_indices_[static_cast<std::size_t>(pos)];
                        fn(row, c, tf_values_[static_cast<std::size_t>(pos)], pos);
                    }
                }
            }
            break;
        }
        case SparseFormat::row_list: {
            std::int64_t pos = 0;
            for (std::size_t r = 0; r < rows_.size(); ++r)
                for (std::int64_t c = 0; c < n_cols_; ++c, ++pos)
                    fn(rows_[r], c, row_values_[static_cast<std::size_t>(pos)], pos);
            break;
        }
    }
}

SparseResidual SparseResidual::with_values(const std::vector<double>& values) const {
    if (static_cast<std::int64_t>(values.size()) != nonzero_count())
        throw ShapeError("replacement values must match the stored entry count");
    SparseResidual out = *this;
    switch (format_) {
        case SparseFormat::coordinate:
            for (std::size_t i = 0; i < coo_.size(); ++i) out.coo_[i].value = values[i];
            break;
        case SparseFormat::two_four:
            out.tf_values_ = values;
            break;
        case SparseFormat::row_list:
            out.row_values_ = values;
            break;
    }
    return out;
}

std::vector<double> SparseResidual::values() const {
    std::vector<double> out(static_cast<std::size_t>(nonzero_count()));
    for_each_entry([&](std::int64_t, std::int64_t, double v, std::int64_t slot) {
        out[static_cast<std::size_t>(slot)] = v;
    });
    return out;
}

DenseTensor SparseResidual::densify() const {
    DenseTensor out = DenseTensor::zeros({n_rows_, n_cols_});
    for_each_entry([&](std::int64_t r, std::int64_t c, double v, std::int64_t) {
        out[r * n_cols_ + c] = v;
    });
    return out;
}

std::int64_t SparseResidual::index_storage_bytes() const {
    switch (format_) {
        case SparseFormat::coordinate:
            return static_cast<std::int64_t>(coo_.size()) * 8; // 32-bit row + col
        case SparseFormat::two_four:
            return (static_cast<std::int64_t>(tf_indices_.size()) + 3) / 4; // 2-bit packed
        case SparseFormat::row_list:
            return static_cast<std::int64_t>(rows_.size()) * 4;
    }
    return 0;
}

SparseResidual mask_unstructured(const DenseTensor& residual, double density) {
    if (residual.order() != 2) throw ShapeError("mask_unstructured expects a matrix");
    if (density < 0.0 || density > 1.0)
        throw ParameterError("density must lie in [0, 1]");
    const std::int64_t n = residual.dim(0);
    const std::int64_t m = residual.dim(1);
    const auto total = n * m;
    const auto keep = static_cast<std::int64_t>(std::floor(density * static_cast<double>(total)));

    std::vector<std::int64_t> order(static_cast<std::size_t>(total));
    std::iota(order.begin(), order.end(), 0);
    // larger magnitude first, ties by smaller linear index
    std::nth_element(order.begin(), order.begin() + keep, order.end(),
                     [&](std::int64_t a, std::int64_t b) {
                         const double ma = std::abs(residual[a]);
                         const double mb = std::abs(residual[b]);
                         if (ma != mb) return ma > mb;
                         return a < b;
                     });
    order.resize(static_cast<std::size_t>(keep));
    std::sort(order.begin(), order.end());

    std::vector<SparseResidual::CooEntry> entries;
    entries.reserve(order.size());
    for (std::int64_t flat : order) {
        const double v = residual[flat];
        if (v == 0.0) continue;
        entries.push_back({flat / m, flat % m, v});
    }
    return SparseResidual::coordinate(n, m, std::move(entries));
}

SparseResidual mask_two_four(const DenseTensor& residual) {
    if (residual.order() != 2) throw ShapeError("mask_two_four expects a matrix");
    const std::int64_t n = residual.dim(0);
    const std::int64_t m = residual.dim(1);

    std::vector<double> values;
    std::vector<std::uint8_t> indices;
    for (std::int64_t c = 0; c < m; ++c) {
        for (std::int64_t g = 0; g < groups_per_column(n); ++g) {
            const std::int64_t gsize = std::min<std::int64_t>(4, n - g * 4);
            const std::int64_t keep = kept_in_group(n, g);
            std::array<std::uint8_t, 4> in_group{0, 1, 2, 3};
            std::sort(in_group.begin(), in_group.begin() + gsize,
                      [&](std::uint8_t a, std::uint8_t b) {
                          const double ma = std::abs(residual[(g * 4 + a) * m + c]);
                          const double mb = std::abs(residual[(g * 4 + b) * m + c]);
                          if (ma != mb) return ma > mb;
                          return a < b;
                      });
            std::sort(in_group.begin(), in_group.begin() + keep);
            for (std::int64_t i = 0; i < keep; ++i) {
                indices.push_back(in_group[static_cast<std::size_t>(i)]);
                values.push_back(residual[(g * 4 + in_group[static_cast<std::size_t>(i)]) * m + c]);
            }
        }
    }
    return SparseResidual::two_four(n, m, std::move(values), std::move(indices));
}

SparseResidual mask_rows(const DenseTensor& residual, const TokenFrequencyTable& freq,
                         std::int64_t top_t) {
    if (residual.order() != 2) throw ShapeError("mask_rows expects a matrix");
    const std::int64_t n = residual.dim(0);
    const std::int64_t m = residual.dim(1);
    if (freq.vocab_size() != n)
        throw ParameterError("frequency table vocab size " + std::to_string(freq.vocab_size()) +
                             " does not match row count " + std::to_string(n));
    if (top_t < 0 || top_t > n)
        throw ParameterError("top_t must lie in [0, n_rows]");

    std::vector<std::int64_t> ids(static_cast<std::size_t>(n));
    std::iota(ids.begin(), ids.end(), 0);
    std::nth_element(ids.begin(), ids.begin() + top_t, ids.end(),
                     [&](std::int64_t a, std::int64_t b) {
                         if (freq.counts[static_cast<std::size_t>(a)] !=
                             freq.counts[static_cast<std::size_t>(b)])
                             return freq.counts[static_cast<std::size_t>(a)] >
                                    freq.counts[static_cast<std::size_t>(b)];
                         return a < b;
                     });
    ids.resize(static_cast<std::size_t>(top_t));
    std::sort(ids.begin(), ids.end());

    std::vector<double> values;
    values.reserve(ids.size() * static_cast<std::size_t>(m));
    for (std::int64_t r : ids)
        for (std::int64_t c = 0; c < m; ++c) values.push_back(residual[r * m + c]);
    return SparseResidual::row_list(n, m, std::move(ids), std::move(values));
}

TokenFrequencyTable count_token_frequencies(const std::vector<std::int64_t>& token_stream,
                                            std::int64_t vocab_size) {
    TokenFrequencyTable table;
    table.counts.assign(static_cast<std::size_t>(vocab_size), 0);
    for (std::size_t i = 0; i < token_stream.size(); ++i) {
        const std::int64_t id = token_stream[i];
        if (id < 0 || id >= vocab_size)
            throw DataError("token id " + std::to_string(id) + " at position " +
                            std::to_string(i) + " is outside vocab of size " +
                            std::to_string(vocab_size));
        ++table.counts[static_cast<std::size_t>(id)];
    }
    return table;
}

DenseTensor sparse_matvec_t(const SparseResidual& e, const DenseTensor& x,
                            MultiplyCounter* counter) {
    if (x.numel() != e.n_rows())
        throw ShapeError("input length " + std::to_string(x.numel()) +
                         " does not match residual row count " + std::to_string(e.n_rows()));
    DenseTensor y = DenseTensor::zeros({e.n_cols()});
    e.for_each_entry([&](std::int64_t r, std::int64_t c, double v, std::int64_t) {
        y[c] += v * x[r];
    });
    if (counter) counter->count += e.nonzero_count();
    return y;
}

std::int64_t sparse_param_count(const SparseResidual& e) {
    return e.nonzero_count();
}

} // namespace saten
