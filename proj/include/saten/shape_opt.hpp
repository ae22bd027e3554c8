#pragma once

#include "saten/tensor.hpp"

#include <cstdint>
#include <vector>

namespace saten {

/// Folding geometry of an N x M matrix into TT modes.
struct FoldPlan {
    std::vector<std::int64_t> input_factors;  // n_1..n_k, product N
    std::vector<std::int64_t> output_factors; // m_1..m_d, product M

    std::int64_t n_rows() const;
    std::int64_t n_cols() const;
    Shape mode_sizes() const;

    bool operator==(const FoldPlan&) const = default;
};

/// Min-sum factorization of n into exactly num_factors integers >= 2,
/// ties broken by the lexicographically smallest non-decreasing list.
/// Throws InfeasibleError when no such factorization exists.
std::vector<std::int64_t> balanced_factorization(std::int64_t n, std::int64_t num_factors);

/// Balanced factorization of each side independently.
FoldPlan plan_fold(std::int64_t n_rows, std::int64_t n_cols, std::int64_t k, std::int64_t d);

/// plan_fold with the factor count lowered side-by-side until feasible
/// (primes and near-primes fall back toward the unfolded matrix).
/// On return k and d hold the factor counts actually used.
FoldPlan plan_fold_with_fallback(std::int64_t n_rows, std::int64_t n_cols,
                                 std::int64_t& k, std::int64_t& d);

/// Default factor count per side: 3 for dimensions >= 512, else 2.
std::int64_t default_num_factors(std::int64_t dim);

/// Test oracle: enumerate every ordered fold plan, run tt_svd at epsilon on
/// each, and return the plan with the smallest actual tt_param_count.
/// Guarded to matrices of at most 64 x 64.
FoldPlan exact_storage_optimum(const DenseTensor& w, std::int64_t k, std::int64_t d,
                               double epsilon);

} // namespace saten
