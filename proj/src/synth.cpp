#include "saten/synth.hpp"

#include "saten/errors.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace saten {

std::uint64_t SynthRng::next_u64() {
    // splitmix64
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

double SynthRng::uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double SynthRng::uniform_sym() {
    return 2.0 * uniform() - 1.0;
}

double SynthRng::normal_clipped() {
    if (have_spare_) {
        have_spare_ = false;
        return std::clamp(spare_, -4.0, 4.0);
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return std::clamp(r * std::cos(a), -4.0, 4.0);
}

double synth_noise_scale(double noise) {
    return 1.0 + 4.0 * noise;
}

DenseTensor synth_matrix(const SynthOptions& opts) {
    if (opts.rows < 1 || opts.cols < 1 || opts.rank < 1)
        throw ParameterError("rows, cols, and rank must be positive");
    if (opts.spikes < 0 || opts.spikes > opts.rows * opts.cols)
        throw ParameterError("spike count out of range");
    if (opts.noise < 0.0) throw ParameterError("noise must be non-negative");

    SynthRng rng(opts.seed);
    const std::int64_t n = opts.rows, m = opts.cols, r = opts.rank;
    const double scale = 1.0 / std::sqrt(static_cast<double>(r));

    std::vector<double> a(static_cast<std::size_t>(n * r));
    std::vector<double> b(static_cast<std::size_t>(r * m));
    for (double& v : a) v = rng.uniform_sym() * scale;
    for (double& v : b) v = rng.uniform_sym() * scale;

    DenseTensor w = DenseTensor::zeros({n, m});
    for (std::int64_t i = 0; i < n; ++i)
        for (std::int64_t t = 0; t < r; ++t) {
            const double av = a[static_cast<std::size_t>(i * r + t)];
            for (std::int64_t j = 0; j < m; ++j)
                w[i * m + j] += av * b[static_cast<std::size_t>(t * m + j)];
        }
    if (opts.noise > 0.0)
        for (std::int64_t i = 0; i < n * m; ++i) w[i] += opts.noise * rng.normal_clipped();

    // distinct spike positions via Fisher-Yates over a shuffled prefix
    if (opts.spikes > 0) {
        std::vector<std::int64_t> positions(static_cast<std::size_t>(n * m));
        for (std::int64_t i = 0; i < n * m; ++i) positions[static_cast<std::size_t>(i)] = i;
        for (std::int64_t i = 0; i < opts.spikes; ++i) {
            const std::int64_t j =
                i + static_cast<std::int64_t>(rng.next_u64() % static_cast<std::uint64_t>(n * m - i));
            std::swap(positions[static_cast<std::size_t>(i)], positions[static_cast<std::size_t>(j)]);
        }
        const double nu = synth_noise_scale(opts.noise);
        for (std::int64_t i = 0; i < opts.spikes; ++i) {
            const double mag = (6.0 + 4.0 * rng.uniform()) * nu;
            const double sign = rng.uniform() < 0.5 ? -1.0 : 1.0;
            w[positions[static_cast<std::size_t>(i)]] = sign * mag;
        }
    }
    return w;
}

} // namespace saten
