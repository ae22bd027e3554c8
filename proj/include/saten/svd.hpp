#pragma once

#include <cstdint>
#include <vector>

namespace saten {

/// Thin SVD A = U * diag(sigma) * V^T with r = min(rows, cols).
/// U is rows x r, V is cols x r, both row-major; sigma is descending.
/// Sign convention: the largest-magnitude entry of each U column is positive.
struct SvdResult {
    std::int64_t rows = 0;
    std::int64_t cols = 0;
    std::int64_t rank = 0; // min(rows, cols), not the numerical rank
    std::vector<double> u;
    std::vector<double> sigma;
    std::vector<double> v;
};

/// One-sided Jacobi SVD of a row-major rows x cols matrix.
/// Converges when every column pair's inner product falls below 1e-12
/// relative to the column norms.
SvdResult jacobi_svd(const double* a, std::int64_t rows, std::int64_t cols);

} // namespace saten
