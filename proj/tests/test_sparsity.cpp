#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "saten/errors.hpp"
#include "saten/sparsity.hpp"
#include "saten/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <string>
#include <vector>

using namespace saten;

namespace {

DenseTensor random_matrix(std::int64_t rows, std::int64_t cols, std::uint64_t seed) {
    SynthRng rng(seed);
    DenseTensor t = DenseTensor::zeros({rows, cols});
    for (std::int64_t i = 0; i < t.numel(); ++i) t[i] = rng.uniform_sym();
    return t;
}

double masked_error(const DenseTensor& residual, const SparseResidual& e) {
    DenseTensor dense = e.densify();
    double acc = 0.0;
    for (std::int64_t i = 0; i < residual.numel(); ++i) {
        const double d = residual[i] - dense[i];
        acc += d * d;
    }
    return std::sqrt(acc);
}

} // namespace

TEST_CASE("mask_unstructured: boundary densities") {
    DenseTensor r = random_matrix(6, 5, 1);
    SparseResidual empty = mask_unstructured(r, 0.0);
    CHECK(empty.nonzero_count() == 0);
    CHECK(frobenius_norm(empty.densify()) == 0.0);

    SparseResidual full = mask_unstructured(r, 1.0);
    CHECK(full.nonzero_count() == 30);
    DenseTensor back = full.densify();
    for (std::int64_t i = 0; i < r.numel(); ++i) CHECK(back[i] == r[i]);
}

TEST_CASE("mask_unstructured: two largest of four") {
    DenseTensor r({2, 2}, {3, -1, 0.5, -2});
    SparseResidual e = mask_unstructured(r, 0.5);
    REQUIRE(e.nonzero_count() == 2);
    DenseTensor d = e.densify();
    CHECK(d[0] == 3.0);
    CHECK(d[1] == 0.0);
    CHECK(d[2] == 0.0);
    CHECK(d[3] == -2.0);
}

TEST_CASE("mask_unstructured: kept min magnitude >= dropped max, full-sort oracle") {
    DenseTensor r = random_matrix(20, 20, 2);
    SparseResidual e = mask_unstructured(r, 0.1);
    CHECK(e.nonzero_count() == 40);
    DenseTensor kept = e.densify();
    double kept_min = 1e9, dropped_max = 0.0;
    for (std::int64_t i = 0; i < r.numel(); ++i) {
        if (kept[i] != 0.0)
            kept_min = std::min(kept_min, std::abs(r[i]));
        else
            dropped_max = std::max(dropped_max, std::abs(r[i]));
    }
    CHECK(kept_min >= dropped_max);
}

TEST_CASE("mask_unstructured: error non-increasing in density") {
    DenseTensor r = random_matrix(15, 15, 3);
    double prev = masked_error(r, mask_unstructured(r, 0.0));
    for (double rho : {0.1, 0.3, 0.5, 0.8, 1.0}) {
        const double err = masked_error(r, mask_unstructured(r, rho));
        CHECK(err <= prev + 1e-12);
        prev = err;
    }
}

TEST_CASE("mask_unstructured: optimal among same-cardinality masks on 4x4") {
    SynthRng seed_rng(4);
    for (int trial = 0; trial < 10; ++trial) {
        DenseTensor r = random_matrix(4, 4, seed_rng.next_u64());
        for (std::int64_t k = 0; k <= 16; ++k) {
            SparseResidual e = mask_unstructured(r, static_cast<double>(k) / 16.0);
            const double got = masked_error(r, e);
            // best possible: drop the 16-k smallest magnitudes
            std::vector<double> mags;
            for (std::int64_t i = 0; i < 16; ++i) mags.push_back(std::abs(r[i]));
            std::sort(mags.begin(), mags.end());
            double best = 0.0;
            for (std::int64_t i = 0; i < 16 - k; ++i) best += mags[static_cast<std::size_t>(i)] * mags[static_cast<std::size_t>(i)];
            CHECK(got == doctest::Approx(std::sqrt(best)).epsilon(1e-12));
        }
    }
}

TEST_CASE("mask_two_four: top-2 per group and tie rule") {
    DenseTensor col({4, 1}, {1, -5, 2, 0.1});
    SparseResidual e = mask_two_four(col);
    DenseTensor d = e.densify();
    CHECK(d[0] == 0.0);
    CHECK(d[1] == -5.0);
    CHECK(d[2] == 2.0);
    CHECK(d[3] == 0.0);
    CHECK(e.density() == 0.5);

    DenseTensor ties({4, 1}, {3, 3, 3, 3});
    DenseTensor dt = mask_two_four(ties).densify();
    CHECK(dt[0] == 3.0);
    CHECK(dt[1] == 3.0);
    CHECK(dt[2] == 0.0);
    CHECK(dt[3] == 0.0);
}

TEST_CASE("mask_two_four: per-group sort oracle on 16x8") {
    DenseTensor r = random_matrix(16, 8, 5);
    SparseResidual e = mask_two_four(r);
    CHECK(e.nonzero_count() == 16 * 8 / 2);
    DenseTensor kept = e.densify();
    for (std::int64_t j = 0; j < 8; ++j)
        for (std::int64_t g = 0; g < 4; ++g) {
            std::int64_t count = 0;
            double kept_min = 1e9, dropped_max = 0.0;
            for (std::int64_t i = 4 * g; i < 4 * g + 4; ++i) {
                if (kept[i * 8 + j] != 0.0) {
                    ++count;
                    kept_min = std::min(kept_min, std::abs(r[i * 8 + j]));
                } else {
                    dropped_max = std::max(dropped_max, std::abs(r[i * 8 + j]));
                }
            }
            CHECK(count == 2);
            CHECK(kept_min >= dropped_max);
        }
}

TEST_CASE("mask_two_four: trailing remainder keeps ceil(g/2)") {
    DenseTensor r = random_matrix(7, 3, 6); // groups of 4 and 3
    SparseResidual e = mask_two_four(r);
    // per column: 2 from the full group + ceil(3/2)=2 from the remainder
    CHECK(e.nonzero_count() == 3 * (2 + 2));
}

TEST_CASE("mask_rows: density and selection") {
    DenseTensor r = random_matrix(10, 4, 7);
    TokenFrequencyTable freq;
    freq.counts = {5, 1, 9, 9, 0, 2, 7, 0, 3, 1};
    SparseResidual e = mask_rows(r, freq, 3);
    // counts 9 (ids 2, 3 tie -> both), then 7 (id 6)
    CHECK(e.row_indices() == std::vector<std::int64_t>{2, 3, 6});
    CHECK(e.density() == doctest::Approx(3.0 / 10.0));
    DenseTensor d = e.densify();
    for (std::int64_t j = 0; j < 4; ++j) {
        CHECK(d[2 * 4 + j] == r[2 * 4 + j]);
        CHECK(d[0 * 4 + j] == 0.0);
    }

    SparseResidual all = mask_rows(r, freq, 10);
    for (std::int64_t i = 0; i < r.numel(); ++i) CHECK(all.densify()[i] == r[i]);

    TokenFrequencyTable bad;
    bad.counts = {1, 2};
    CHECK_THROWS_AS(mask_rows(r, bad, 1), ParameterError);
}

TEST_CASE("mask_rows: 50-of-30522 density rounds to 0.0016") {
    // top 50 rows of a 30522-vocab embedding -> rho = 0.0016 at 4 sig figs
    TokenFrequencyTable freq;
    freq.counts.assign(30522, 1);
    DenseTensor r = DenseTensor::zeros({30522, 2});
    SparseResidual e = mask_rows(r, freq, 50);
    const double rho = e.density();
    CHECK(std::abs(rho - 0.0016) < 5e-5); // 50/30522 = 0.001638...
    char buf[16];
    std::snprintf(buf, sizeof buf, "%.4f", rho);
    CHECK(std::string(buf) == "0.0016");
}

TEST_CASE("mask_rows: Zipf stream histogram oracle") {
    SynthRng rng(8);
    const std::int64_t vocab = 100;
    std::vector<std::int64_t> stream;
    for (int i = 0; i < 20000; ++i) {
        // crude Zipf via inverse power
        const double u = rng.uniform();
        const std::int64_t id = static_cast<std::int64_t>(vocab * std::pow(u, 3.0));
        stream.push_back(std::min<std::int64_t>(id, vocab - 1));
    }
    TokenFrequencyTable freq = count_token_frequencies(stream, vocab);

    std::map<std::int64_t, std::int64_t> hist;
    for (std::int64_t id : stream) ++hist[id];
    std::vector<std::pair<std::int64_t, std::int64_t>> order;
    for (std::int64_t id = 0; id < vocab; ++id) order.push_back({-hist[id], id});
    std::sort(order.begin(), order.end());

    DenseTensor r = random_matrix(vocab, 3, 9);
    const std::int64_t top_t = 10;
    SparseResidual e = mask_rows(r, freq, top_t);
    std::vector<std::int64_t> expect;
    for (std::int64_t i = 0; i < top_t; ++i) expect.push_back(order[static_cast<std::size_t>(i)].second);
    std::sort(expect.begin(), expect.end());
    CHECK(e.row_indices() == expect);
}

TEST_CASE("count_token_frequencies") {
    TokenFrequencyTable t = count_token_frequencies({1, 1, 2}, 4);
    CHECK(t.counts == std::vector<std::int64_t>{0, 2, 1, 0});
    TokenFrequencyTable empty = count_token_frequencies({}, 3);
    CHECK(empty.counts == std::vector<std::int64_t>{0, 0, 0});
    CHECK_THROWS_AS(count_token_frequencies({0, 1, 7}, 4), DataError);

    // big stream vs reference counter
    SynthRng rng(10);
    std::vector<std::int64_t> stream(1000000);
    std::vector<std::int64_t> ref(256, 0);
    for (auto& id : stream) {
        id = static_cast<std::int64_t>(rng.next_u64() % 256);
        ++ref[static_cast<std::size_t>(id)];
    }
    CHECK(count_token_frequencies(stream, 256).counts == ref);
}

TEST_CASE("sparse_matvec_t: all formats vs densified oracle") {
    DenseTensor r = random_matrix(12, 5, 11);
    SynthRng rng(12);
    DenseTensor x = DenseTensor::zeros({12});
    for (std::int64_t i = 0; i < 12; ++i) x[i] = rng.uniform_sym();

    TokenFrequencyTable freq;
    freq.counts.assign(12, 0);
    for (std::int64_t i = 0; i < 12; ++i) freq.counts[static_cast<std::size_t>(i)] = (i * 7) % 12;

    const SparseResidual residuals[] = {mask_unstructured(r, 0.2), mask_two_four(r),
                                        mask_rows(r, freq, 4)};
    for (const SparseResidual& e : residuals) {
        MultiplyCounter counter;
        DenseTensor y = sparse_matvec_t(e, x, &counter);
        REQUIRE(y.shape() == Shape{5});
        DenseTensor dense = e.densify();
        for (std::int64_t j = 0; j < 5; ++j) {
            double ref = 0.0;
            for (std::int64_t i = 0; i < 12; ++i) ref += dense[i * 5 + j] * x[i];
            CHECK(y[j] == doctest::Approx(ref).epsilon(1e-12));
        }
        CHECK(counter.count == e.nonzero_count());
    }

    SparseResidual empty = mask_unstructured(r, 0.0);
    DenseTensor zero = sparse_matvec_t(empty, x);
    CHECK(frobenius_norm(zero) == 0.0);

    DenseTensor short_x = DenseTensor::zeros({5});
    CHECK_THROWS_AS(sparse_matvec_t(residuals[0], short_x), ShapeError);
}

TEST_CASE("sparse_param_count") {
    DenseTensor r = random_matrix(8, 8, 13);
    CHECK(sparse_param_count(mask_unstructured(r, 0.5)) == 32);
    TokenFrequencyTable freq;
    freq.counts.assign(8, 1);
    CHECK(sparse_param_count(mask_rows(r, freq, 3)) == 3 * 8);
    // densify-and-count oracle
    for (const SparseResidual& e : {mask_unstructured(r, 0.13), mask_two_four(r)}) {
        std::int64_t nnz = 0;
        DenseTensor d = e.densify();
        for (std::int64_t i = 0; i < d.numel(); ++i)
            if (d[i] != 0.0) ++nnz;
        CHECK(sparse_param_count(e) >= nnz); // kept slots may hold exact zeros only for 2:4
    }
}

TEST_CASE("with_values round trip preserves support and order") {
    DenseTensor r = random_matrix(8, 6, 14);
    for (const SparseResidual& e : {mask_unstructured(r, 0.25), mask_two_four(r)}) {
        std::vector<double> vals = e.values();
        for (double& v : vals) v *= 2.0;
        SparseResidual doubled = e.with_values(vals);
        DenseTensor d0 = e.densify();
        DenseTensor d1 = doubled.densify();
        for (std::int64_t i = 0; i < d0.numel(); ++i)
            CHECK(d1[i] == doctest::Approx(2.0 * d0[i]));
    }
}
