#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "saten/errors.hpp"
#include "saten/synth.hpp"
#include "saten/tensor.hpp"

#include <cmath>
#include <vector>

using namespace saten;

namespace {

DenseTensor random_tensor(Shape shape, SynthRng& rng) {
    DenseTensor t = DenseTensor::zeros(std::move(shape));
    for (std::int64_t i = 0; i < t.numel(); ++i) t[i] = rng.uniform_sym();
    return t;
}

} // namespace

TEST_CASE("contract: 2x3 * 3x4 equals ordinary matrix product") {
    SynthRng rng(1);
    DenseTensor a = random_tensor({2, 3}, rng);
    DenseTensor b = random_tensor({3, 4}, rng);
    MultiplyCounter counter;
    DenseTensor c = contract(a, b, {{{1, 0}}}, &counter);
    REQUIRE(c.shape() == Shape{2, 4});
    for (std::int64_t i = 0; i < 2; ++i)
        for (std::int64_t j = 0; j < 4; ++j) {
            double ref = 0.0;
            for (std::int64_t k = 0; k < 3; ++k) ref += a[i * 3 + k] * b[k * 4 + j];
            CHECK(c[i * 4 + j] == doctest::Approx(ref).epsilon(1e-12));
        }
    CHECK(counter.count == 2 * 4 * 3);
}

TEST_CASE("contract: empty pattern is an outer product") {
    SynthRng rng(2);
    DenseTensor a = random_tensor({2, 3}, rng);
    DenseTensor b = DenseTensor({1}, {2.5});
    DenseTensor c = contract(a, b, {{}});
    REQUIRE(c.shape() == Shape{2, 3, 1});
    for (std::int64_t i = 0; i < 6; ++i) CHECK(c[i] == doctest::Approx(a[i] * 2.5));
}

TEST_CASE("contract: double contraction vs triple-loop oracle") {
    SynthRng rng(3);
    DenseTensor a = random_tensor({2, 3, 4}, rng);
    DenseTensor b = random_tensor({4, 3, 5}, rng);
    MultiplyCounter counter;
    DenseTensor c = contract(a, b, {{{2, 0}, {1, 1}}}, &counter);
    REQUIRE(c.shape() == Shape{2, 5});
    for (std::int64_t i = 0; i < 2; ++i)
        for (std::int64_t l = 0; l < 5; ++l) {
            double ref = 0.0;
            for (std::int64_t k = 0; k < 4; ++k)
                for (std::int64_t j = 0; j < 3; ++j)
                    ref += a.at({i, j, k}) * b.at({k, j, l});
            CHECK(c[i * 5 + l] == doctest::Approx(ref).epsilon(1e-12));
        }
    // output dims 2*5 times contracted dims 4*3
    CHECK(counter.count == 2 * 5 * 4 * 3);
}

TEST_CASE("contract: mismatched pair dimension names both axes") {
    DenseTensor a = DenseTensor::zeros({2, 3});
    DenseTensor b = DenseTensor::zeros({4, 5});
    CHECK_THROWS_AS(contract(a, b, {{{1, 0}}}), ShapeError);
}

TEST_CASE("contract: repeated axis in pattern rejected") {
    DenseTensor a = DenseTensor::zeros({3, 3});
    DenseTensor b = DenseTensor::zeros({3, 3});
    CHECK_THROWS_AS(contract(a, b, {{{0, 0}, {0, 1}}}), ShapeError);
}

TEST_CASE("fold: reshape preserves data and round trips") {
    SynthRng rng(4);
    DenseTensor w = random_tensor({6, 4}, rng);
    DenseTensor f = fold(w, {2, 3, 2, 2});
    REQUIRE(f.shape() == Shape{2, 3, 2, 2});
    CHECK(f.data() == w.data());
    DenseTensor back = fold(f, {6, 4});
    CHECK(back.data() == w.data());
    CHECK_THROWS_AS(fold(w, {5, 5}), ShapeError);
}

TEST_CASE("fold: vector (i,j) maps to i*n2+j") {
    std::vector<double> data(12);
    for (int i = 0; i < 12; ++i) data[static_cast<std::size_t>(i)] = i;
    DenseTensor v({12}, data);
    DenseTensor m = fold(v, {3, 4});
    for (std::int64_t i = 0; i < 3; ++i)
        for (std::int64_t j = 0; j < 4; ++j) CHECK(m.at({i, j}) == double(i * 4 + j));
}

TEST_CASE("frobenius_norm basics") {
    CHECK(frobenius_norm(DenseTensor::zeros({3, 3})) == 0.0);
    DenseTensor eye({2, 2}, {1, 0, 0, 1});
    CHECK(frobenius_norm(eye) == doctest::Approx(std::sqrt(2.0)));

    SynthRng rng(5);
    DenseTensor w = random_tensor({5, 7}, rng);
    double acc = 0.0;
    for (std::int64_t i = 0; i < w.numel(); ++i) acc += w[i] * w[i];
    CHECK(frobenius_norm(w) == doctest::Approx(std::sqrt(acc)).epsilon(1e-14));
    // fold invariance
    CHECK(frobenius_norm(fold(w, {7, 5})) == frobenius_norm(w));
}

TEST_CASE("permute: transpose copy") {
    SynthRng rng(6);
    DenseTensor a = random_tensor({2, 3, 4}, rng);
    DenseTensor p = permute(a, {2, 0, 1});
    REQUIRE(p.shape() == Shape{4, 2, 3});
    for (std::int64_t i = 0; i < 2; ++i)
        for (std::int64_t j = 0; j < 3; ++j)
            for (std::int64_t k = 0; k < 4; ++k)
                CHECK(p.at({k, i, j}) == a.at({i, j, k}));
}

TEST_CASE("contract_vjp matches finite differences") {
    SynthRng rng(7);
    DenseTensor a = random_tensor({2, 3, 4}, rng);
    DenseTensor b = random_tensor({4, 3, 5}, rng);
    ContractionPattern pattern{{{2, 0}, {1, 1}}};
    DenseTensor g = random_tensor({2, 5}, rng);

    auto loss = [&](const DenseTensor& aa, const DenseTensor& bb) {
        DenseTensor c = contract(aa, bb, pattern);
        double s = 0.0;
        for (std::int64_t i = 0; i < c.numel(); ++i) s += g[i] * c[i];
        return s;
    };

    auto [da, db] = contract_vjp(a, b, pattern, g);
    REQUIRE(da.shape() == a.shape());
    REQUIRE(db.shape() == b.shape());

    const double h = 1e-5;
    for (std::int64_t i = 0; i < a.numel(); ++i) {
        DenseTensor ap = a, am = a;
        ap[i] += h;
        am[i] -= h;
        const double fd = (loss(ap, b) - loss(am, b)) / (2 * h);
        CHECK(da[i] == doctest::Approx(fd).epsilon(1e-6));
    }
    for (std::int64_t i = 0; i < b.numel(); ++i) {
        DenseTensor bp = b, bm = b;
        bp[i] += h;
        bm[i] -= h;
        const double fd = (loss(a, bp) - loss(a, bm)) / (2 * h);
        CHECK(db[i] == doctest::Approx(fd).epsilon(1e-6));
    }
}
