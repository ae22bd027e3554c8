#include "saten/shape_opt.hpp"

#include "saten/errors.hpp"
#include "saten/tt.hpp"

#include <algorithm>
#include <string>

namespace saten {

std::int64_t FoldPlan::n_rows() const {
    std::int64_t n = 1;
    for (std::int64_t f : input_factors) n *= f;
    return n;
}

std::int64_t FoldPlan::n_cols() const {
    std::int64_t m = 1;
    for (std::int64_t f : output_factors) m *= f;
    return m;
}

Shape FoldPlan::mode_sizes() const {
    Shape s = input_factors;
    s.insert(s.end(), output_factors.begin(), output_factors.end());
    return s;
}

namespace {

// Min-sum over non-decreasing factor lists with every factor >= min_factor.
// Enumerating in non-decreasing order visits each multiset once and makes
// the first optimum found the lexicographically smallest.
bool best_factorization(std::int64_t n, std::int64_t count, std::int64_t min_factor,
                        std::vector<std::int64_t>& current,
                        std::vector<std::int64_t>& best, std::int64_t& best_sum,
                        std::int64_t current_sum) {
    if (count == 1) {
        if (n < min_factor) return false;
        const std::int64_t total = current_sum + n;
        if (best.empty() || total < best_sum) {
            current.push_back(n);
            best = current;
            current.pop_back();
            best_sum = total;
        }
        return true;
    }
    bool any = false;
    for (std::int64_t f = min_factor; f * f <= n; ++f) {
        // stop once f^count exceeds n: the remaining factors are all >= f
        std::int64_t p = f;
        bool fits = true;
        for (std::int64_t i = 1; i < count; ++i) {
            if (p > n / f) { fits = false; break; }
            p *= f;
        }
        if (!fits || p > n) break;
        if (n % f != 0) continue;
        current.push_back(f);
        any |= best_factorization(n / f, count - 1, f, current, best, best_sum,
                                  current_sum + f);
        current.pop_back();
    }
    return any || !best.empty();
}

} // namespace

std::vector<std::int64_t> balanced_factorization(std::int64_t n, std::int64_t num_factors) {
    if (n < 2) throw ParameterError("n must be >= 2, got " + std::to_string(n));
    if (num_factors < 1) throw ParameterError("num_factors must be >= 1");
    if (num_factors == 1) return {n};

    std::vector<std::int64_t> best;
    std::vector<std::int64_t> current;
    std::int64_t best_sum = 0;
    best_factorization(n, num_factors, 2, current, best, best_sum, 0);
    if (best.empty())
        throw InfeasibleError("no factorization of " + std::to_string(n) + " into " +
                              std::to_string(num_factors) + " factors >= 2");
    return best;
}

FoldPlan plan_fold(std::int64_t n_rows, std::int64_t n_cols, std::int64_t k, std::int64_t d) {
    FoldPlan plan;
    try {
        plan.input_factors = balanced_factorization(n_rows, k);
    } catch (const InfeasibleError& e) {
        throw InfeasibleError(std::string("input side: ") + e.what());
    }
    try {
        plan.output_factors = balanced_factorization(n_cols, d);
    } catch (const InfeasibleError& e) {
        throw InfeasibleError(std::string("output side: ") + e.what());
    }
    return plan;
}

FoldPlan plan_fold_with_fallback(std::int64_t n_rows, std::int64_t n_cols,
                                 std::int64_t& k, std::int64_t& d) {
    FoldPlan plan;
    for (; k > 1; --k) {
        try {
            plan.input_factors = balanced_factorization(n_rows, k);
            break;
        } catch (const InfeasibleError&) {}
    }
    if (k == 1) plan.input_factors = {n_rows};
    for (; d > 1; --d) {
        try {
            plan.output_factors = balanced_factorization(n_cols, d);
            break;
        } catch (const InfeasibleError&) {}
    }
    if (d == 1) plan.output_factors = {n_cols};
    return plan;
}

std::int64_t default_num_factors(std::int64_t dim) {
    return dim >= 512 ? 3 : 2;
}

namespace {

// all ordered factorizations of n into exactly count factors >= 2
void ordered_factorizations(std::int64_t n, std::int64_t count,
                            std::vector<std::int64_t>& current,
                            std::vector<std::vector<std::int64_t>>& out) {
    if (count == 1) {
        if (n >= 2) {
            current.push_back(n);
            out.push_back(current);
            current.pop_back();
        }
        return;
    }
    for (std::int64_t f = 2; f <= n / 2; ++f) {
        if (n % f != 0) continue;
        current.push_back(f);
        ordered_factorizations(n / f, count - 1, current, out);
        current.pop_back();
    }
}

} // namespace

FoldPlan exact_storage_optimum(const DenseTensor& w, std::int64_t k, std::int64_t d,
                               double epsilon) {
    if (w.order() != 2) throw ParameterError("exact_storage_optimum expects a matrix");
    const std::int64_t n = w.dim(0);
    const std::int64_t m = w.dim(1);
    if (n > 64 || m > 64)
        throw ParameterError("exact_storage_optimum is an enumeration oracle, capped at 64x64");

    std::vector<std::vector<std::int64_t>> rows_opts, cols_opts;
    {
        std::vector<std::int64_t> cur;
        ordered_factorizations(n, k, cur, rows_opts);
        ordered_factorizations(m, d, cur, cols_opts);
    }
    if (rows_opts.empty() || cols_opts.empty())
        throw InfeasibleError("no fold of " + std::to_string(n) + "x" + std::to_string(m) +
                              " with k=" + std::to_string(k) + ", d=" + std::to_string(d));

    FoldPlan best;
    std::int64_t best_params = -1;
    for (const auto& rf : rows_opts) {
        for (const auto& cf : cols_opts) {
            FoldPlan plan{rf, cf};
            TTRepresentation tt = tt_svd(fold(w, plan.mode_sizes()), epsilon);
            const std::int64_t p = tt_param_count(tt);
            if (best_params < 0 || p < best_params ||
                (p == best_params && plan.mode_sizes() < best.mode_sizes())) {
                best = plan;
                best_params = p;
            }
        }
    }
    return best;
}

} // namespace saten
