#include "saten/tt.hpp"

#include "saten/errors.hpp"
#include "saten/svd.hpp"

#include <cmath>
#include <string>
#include <utility>

namespace saten {

TTRepresentation::TTRepresentation(std::vector<DenseTensor> cores) : cores_(std::move(cores)) {
    if (cores_.empty()) throw ShapeError("TT chain must hold at least one core");
    const auto t = static_cast<std::int64_t>(cores_.size());
    ranks_.resize(static_cast<std::size_t>(t) + 1);
    mode_sizes_.resize(static_cast<std::size_t>(t));
    for (std::int64_t j = 0; j < t; ++j) {
        const DenseTensor& g = cores_[static_cast<std::size_t>(j)];
        if (g.order() != 3)
            throw ShapeError("TT core " + std::to_string(j) + " must be order 3");
        if (j == 0) ranks_[0] = g.dim(0);
        else if (g.dim(0) != ranks_[static_cast<std::size_t>(j)])
            throw ShapeError("TT rank mismatch between cores " + std::to_string(j - 1) +
                             " and " + std::to_string(j));
        ranks_[static_cast<std::size_t>(j) + 1] = g.dim(2);
        mode_sizes_[static_cast<std::size_t>(j)] = g.dim(1);
    }
    if (ranks_.front() != 1 || ranks_.back() != 1)
        throw ShapeError("boundary TT ranks must be 1");
    std::int64_t left = 1;
    std::int64_t right = shape_numel(mode_sizes_);
    for (std::int64_t j = 1; j < t; ++j) {
        left *= mode_sizes_[static_cast<std::size_t>(j) - 1];
        right /= mode_sizes_[static_cast<std::size_t>(j) - 1];
        const std::int64_t r = ranks_[static_cast<std::size_t>(j)];
        if (r < 1 || r > std::min(left, right))
            throw ShapeError("TT rank r_" + std::to_string(j) + "=" + std::to_string(r) +
                             " exceeds unfolding bound " + std::to_string(std::min(left, right)));
    }
}

TTRepresentation TTRepresentation::with_cores(std::vector<DenseTensor> cores) const {
    TTRepresentation out(std::move(cores));
    if (out.ranks_ != ranks_ || out.mode_sizes_ != mode_sizes_)
        throw ShapeError("replacement cores change the TT structure");
    return out;
}

TTRepresentation tt_svd(const DenseTensor& w, double epsilon) {
    if (epsilon < 0.0) throw ParameterError("epsilon must be non-negative");
    if (w.order() < 2) throw ParameterError("tt_svd needs an input of order >= 2");

    const std::int64_t t = w.order();
    const Shape& s = w.shape();
    std::vector<DenseTensor> cores;
    cores.reserve(static_cast<std::size_t>(t));

    const double norm = frobenius_norm(w);
    if (norm == 0.0) {
        for (std::int64_t j = 0; j < t; ++j)
            cores.push_back(DenseTensor::zeros({1, s[static_cast<std::size_t>(j)], 1}));
        return TTRepresentation(std::move(cores));
    }

    // per-step truncation budget; the 1-1e-9 shave keeps the overall bound
    // safe against rounding when a tail lands exactly on the budget
    const double budget = (epsilon * norm) * (epsilon * norm) / static_cast<double>(t - 1) *
                          (1.0 - 1e-9);

    std::vector<double> c = w.data();
    std::int64_t r_prev = 1;
    std::int64_t rest = w.numel();
    for (std::int64_t j = 0; j < t - 1; ++j) {
        const std::int64_t sj = s[static_cast<std::size_t>(j)];
        const std::int64_t rows = r_prev * sj;
        rest /= sj;
        const std::int64_t cols = rest;

        SvdResult svd = jacobi_svd(c.data(), rows, cols);
        const std::int64_t n = svd.rank;

        // smallest rank whose discarded tail energy fits the step budget
        std::vector<double> tail(static_cast<std::size_t>(n) + 1, 0.0);
        for (std::int64_t i = n - 1; i >= 0; --i) {
            const double sv = svd.sigma[static_cast<std::size_t>(i)];
            tail[static_cast<std::size_t>(i)] = tail[static_cast<std::size_t>(i) + 1] + sv * sv;
        }
        std::int64_t r = n;
        for (std::int64_t i = 1; i <= n; ++i) {
            if (tail[static_cast<std::size_t>(i)] <= budget) {
                r = i;
                break;
            }
        }
        if (r < 1) r = 1;

        std::vector<double> g(static_cast<std::size_t>(rows * r));
        for (std::int64_t i = 0; i < rows; ++i)
            for (std::int64_t a = 0; a < r; ++a)
                g[static_cast<std::size_t>(i * r + a)] = svd.u[static_cast<std::size_t>(i * n + a)];
        cores.emplace_back(Shape{r_prev, sj, r}, std::move(g));

        std::vector<double> next(static_cast<std::size_t>(r * cols));
        for (std::int64_t a = 0; a < r; ++a) {
            const double sv = svd.sigma[static_cast<std::size_t>(a)];
            for (std::int64_t i = 0; i < cols; ++i)
                next[static_cast<std::size_t>(a * cols + i)] =
                    sv * svd.v[static_cast<std::size_t>(i * n + a)];
        }
        c = std::move(next);
        r_prev = r;
    }
    cores.emplace_back(Shape{r_prev, s[static_cast<std::size_t>(t) - 1], 1}, std::move(c));
    return TTRepresentation(std::move(cores));
}

DenseTensor reconstruct(const TTRepresentation& tt) {
    DenseTensor y = tt.cores().front();
    for (std::size_t j = 1; j < tt.cores().size(); ++j) {
        ContractionPattern link{{{y.order() - 1, 0}}};
        y = contract(y, tt.cores()[j], link);
    }
    return fold(y, tt.mode_sizes()); // squeeze the boundary singleton ranks
}

DenseTensor tt_matvec(const DenseTensor& x, const TTRepresentation& tt,
                      MultiplyCounter* counter, MatvecTape* tape) {
    const std::int64_t t = tt.order();
    const std::int64_t k = x.order();
    if (k < 1 || k >= t)
        throw ShapeError("input order " + std::to_string(k) + " must lie in [1, " +
                         std::to_string(t - 1) + ")");
    for (std::int64_t i = 0; i < k; ++i) {
        if (x.dim(i) != tt.mode_sizes()[static_cast<std::size_t>(i)])
            throw ShapeError("input mode " + std::to_string(i) + " has size " +
                             std::to_string(x.dim(i)) + ", TT expects " +
                             std::to_string(tt.mode_sizes()[static_cast<std::size_t>(i)]));
    }

    auto step = [&](const DenseTensor& y, std::int64_t core, const ContractionPattern& pat) {
        if (tape) {
            tape->inputs.push_back(y);
            tape->patterns.push_back(pat);
        }
        return contract(y, tt.cores()[static_cast<std::size_t>(core)], pat, counter);
    };

    DenseTensor y = step(x, 0, ContractionPattern{{{0, 1}}});
    for (std::int64_t c = 1; c < k; ++c)
        y = step(y, c, ContractionPattern{{{0, 1}, {y.order() - 1, 0}}});
    for (std::int64_t c = k; c < t; ++c)
        y = step(y, c, ContractionPattern{{{y.order() - 1, 0}}});

    std::int64_t m = 1;
    for (std::int64_t i = k; i < t; ++i) m *= tt.mode_sizes()[static_cast<std::size_t>(i)];
    return fold(y, {m});
}

TTMatvecGrads tt_matvec_backward(const TTRepresentation& tt, const MatvecTape& tape,
                                 const DenseTensor& upstream) {
    const std::size_t steps = tape.inputs.size();
    if (steps != tt.cores().size())
        throw ShapeError("tape does not match the TT chain");

    TTMatvecGrads grads;
    grads.core_grads.resize(steps, DenseTensor{});

    // grad of the final reshape is a reshape back to (1, m_1..m_d, 1)
    DenseTensor dy = [&] {
        const std::int64_t k = tape.inputs.front().order();
        Shape last{1};
        for (std::int64_t i = k; i < tt.order(); ++i)
            last.push_back(tt.mode_sizes()[static_cast<std::size_t>(i)]);
        last.push_back(1);
        return fold(upstream, last);
    }();

    for (std::size_t i = steps; i-- > 0;) {
        auto [dprev, dcore] =
            contract_vjp(tape.inputs[i], tt.cores()[i], tape.patterns[i], dy);
        grads.core_grads[i] = std::move(dcore);
        dy = std::move(dprev);
    }
    grads.input_grad = std::move(dy);
    return grads;
}

std::int64_t tt_param_count(const TTRepresentation& tt) {
    std::int64_t total = 0;
    for (const DenseTensor& g : tt.cores()) total += g.numel();
    return total;
}

std::int64_t tt_mac_count(const TTRepresentation& tt, std::int64_t k) {
    const std::int64_t t = tt.order();
    if (k < 1 || k >= t)
        throw ParameterError("k=" + std::to_string(k) + " out of range [1, " +
                             std::to_string(t - 1) + ")");
    const auto& s = tt.mode_sizes();
    const auto& r = tt.ranks();

    std::int64_t n_total = 1;
    for (std::int64_t i = 0; i < k; ++i) n_total *= s[static_cast<std::size_t>(i)];

    std::int64_t macs = 0;
    std::int64_t prefix = 1;
    for (std::int64_t i = 1; i <= k; ++i) {
        macs += (n_total / prefix) * r[static_cast<std::size_t>(i) - 1] * r[static_cast<std::size_t>(i)];
        prefix *= s[static_cast<std::size_t>(i) - 1];
    }
    std::int64_t out_prefix = 1;
    for (std::int64_t i = k + 1; i <= t; ++i) {
        out_prefix *= s[static_cast<std::size_t>(i) - 1];
        macs += out_prefix * r[static_cast<std::size_t>(i) - 1] * r[static_cast<std::size_t>(i)];
    }
    return macs;
}

} // namespace saten
