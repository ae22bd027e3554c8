#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "saten/errors.hpp"
#include "saten/shape_opt.hpp"
#include "saten/synth.hpp"
#include "saten/tt.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <vector>

using namespace saten;

namespace {

// exhaustive min-sum factorization oracle, recursion over non-decreasing factors
std::optional<std::vector<std::int64_t>> best_factorization(std::int64_t n, std::int64_t count,
                                                            std::int64_t min_factor = 2) {
    if (count == 1) {
        if (n >= min_factor) return std::vector<std::int64_t>{n};
        return std::nullopt;
    }
    std::optional<std::vector<std::int64_t>> best;
    std::int64_t best_sum = 0;
    for (std::int64_t f = min_factor; f * f <= n || f <= n; ++f) {
        if (f > n) break;
        if (n % f != 0) continue;
        auto rest = best_factorization(n / f, count - 1, f);
        if (!rest) continue;
        std::vector<std::int64_t> cand{f};
        cand.insert(cand.end(), rest->begin(), rest->end());
        std::int64_t sum = 0;
        for (std::int64_t v : cand) sum += v;
        if (!best || sum < best_sum || (sum == best_sum && cand < *best)) {
            best = cand;
            best_sum = sum;
        }
    }
    return best;
}

} // namespace

TEST_CASE("balanced_factorization: pinned values") {
    CHECK(balanced_factorization(512, 3) == std::vector<std::int64_t>{8, 8, 8});
    CHECK(balanced_factorization(768, 3) == std::vector<std::int64_t>{8, 8, 12});
    CHECK(balanced_factorization(6, 1) == std::vector<std::int64_t>{6});
    CHECK(balanced_factorization(3072, 3) == std::vector<std::int64_t>{12, 16, 16});
    CHECK_THROWS_AS(balanced_factorization(13, 2), InfeasibleError);
    CHECK_THROWS_AS(balanced_factorization(8, 4), InfeasibleError);
}

TEST_CASE("balanced_factorization equals exhaustive oracle up to 4096") {
    for (std::int64_t n = 2; n <= 4096; ++n) {
        for (std::int64_t count = 1; count <= 4; ++count) {
            auto oracle = best_factorization(n, count);
            if (!oracle) {
                CHECK_THROWS_AS(balanced_factorization(n, count), InfeasibleError);
                continue;
            }
            auto got = balanced_factorization(n, count);
            CHECK(got == *oracle);
            std::int64_t prod = 1;
            for (std::int64_t f : got) {
                CHECK(f >= 2);
                prod *= f;
            }
            CHECK(prod == n);
            CHECK(std::is_sorted(got.begin(), got.end()));
        }
    }
}

TEST_CASE("plan_fold: both sides independent") {
    FoldPlan plan = plan_fold(768, 768, 3, 3);
    CHECK(plan.input_factors == std::vector<std::int64_t>{8, 8, 12});
    CHECK(plan.output_factors == std::vector<std::int64_t>{8, 8, 12});
    CHECK(plan.n_rows() == 768);
    CHECK(plan.n_cols() == 768);

    FoldPlan unfolded = plan_fold(20, 30, 1, 1);
    CHECK(unfolded.input_factors == std::vector<std::int64_t>{20});
    CHECK(unfolded.output_factors == std::vector<std::int64_t>{30});

    // 30522 = 2 * 3 * 5087
    FoldPlan vocab = plan_fold(30522, 768, 3, 3);
    CHECK(vocab.input_factors == *best_factorization(30522, 3));

    CHECK_THROWS_AS(plan_fold(13, 768, 2, 3), InfeasibleError);
}

TEST_CASE("plan_fold_with_fallback lowers factor counts on primes") {
    std::int64_t k = 3, d = 3;
    FoldPlan plan = plan_fold_with_fallback(13, 768, k, d);
    CHECK(k == 1);
    CHECK(d == 3);
    CHECK(plan.input_factors == std::vector<std::int64_t>{13});

    k = 3;
    d = 3;
    // 26 = 2*13 has a 2-way split but no 3-way
    FoldPlan plan2 = plan_fold_with_fallback(26, 26, k, d);
    CHECK(k == 2);
    CHECK(d == 2);
    CHECK(plan2.input_factors == std::vector<std::int64_t>{2, 13});
}

TEST_CASE("default_num_factors") {
    CHECK(default_num_factors(768) == 3);
    CHECK(default_num_factors(512) == 3);
    CHECK(default_num_factors(511) == 2);
    CHECK(default_num_factors(16) == 2);
}

TEST_CASE("exact_storage_optimum: rank-1 input picks the balanced plan") {
    // geometric u, v are separable under every row-major fold, so every plan
    // yields an all-rank-1 TT and the objective degenerates to sum of modes
    DenseTensor w = DenseTensor::zeros({16, 16});
    for (std::int64_t i = 0; i < 16; ++i)
        for (std::int64_t j = 0; j < 16; ++j)
            w[i * 16 + j] = std::pow(1.13, static_cast<double>(i)) *
                            std::pow(0.91, static_cast<double>(j));

    FoldPlan best = exact_storage_optimum(w, 2, 2, 0.5);
    // rank-1 input: objective degenerates to sum of mode sizes -> (4,4 | 4,4)
    CHECK(best == plan_fold(16, 16, 2, 2));
    CHECK(best.input_factors == std::vector<std::int64_t>{4, 4});
}

TEST_CASE("exact_storage_optimum: surrogate never beaten by much on low-rank synth") {
    SynthOptions opts;
    opts.rows = 16;
    opts.cols = 16;
    opts.rank = 2;
    opts.seed = 5;
    DenseTensor w = synth_matrix(opts);
    FoldPlan exact = exact_storage_optimum(w, 2, 2, 0.5);
    FoldPlan surrogate = plan_fold(16, 16, 2, 2);
    const std::int64_t p_exact =
        tt_param_count(tt_svd(fold(w, exact.mode_sizes()), 0.5));
    const std::int64_t p_surrogate =
        tt_param_count(tt_svd(fold(w, surrogate.mode_sizes()), 0.5));
    CHECK(p_exact <= p_surrogate);
    CHECK(p_exact >= 1);
}

TEST_CASE("exact_storage_optimum: 8x8 identity pinned regression") {
    DenseTensor eye = DenseTensor::zeros({8, 8});
    for (std::int64_t i = 0; i < 8; ++i) eye[i * 8 + i] = 1.0;
    FoldPlan plan = exact_storage_optimum(eye, 2, 2, 0.0);
    // pinned regression value: the diagonal structure favors mirrored factors
    CHECK(plan.input_factors == std::vector<std::int64_t>{2, 4});
    CHECK(plan.output_factors == std::vector<std::int64_t>{4, 2});

    CHECK_THROWS_AS(exact_storage_optimum(DenseTensor::zeros({128, 128}), 2, 2, 0.5),
                    ParameterError);
}
