#pragma once

#include "saten/tensor.hpp"

#include <cstdint>

namespace saten {

/// Deterministic synthetic weight generator: W = A*B + eta*Z with `spikes`
/// entries overwritten by large outliers.
///
/// A is rows x rank and B is rank x cols with entries uniform in
/// [-1,1]/sqrt(rank), so |(AB)_ij| <= 1. Z is standard normal clipped to
/// [-4, 4]. The base matrix is therefore bounded by the noise scale
/// nu = 1 + 4*eta; spike entries are set to +/- uniform[6,10] * nu, so
/// exactly `spikes` entries exceed 5*nu in magnitude.
struct SynthOptions {
    std::int64_t rows = 0;
    std::int64_t cols = 0;
    std::int64_t rank = 1;
    std::int64_t spikes = 0;
    double noise = 0.0; // eta
    std::uint64_t seed = 0;
};

DenseTensor synth_matrix(const SynthOptions& opts);

/// The nu = 1 + 4*eta bound on the spike-free entries.
double synth_noise_scale(double noise);

/// Self-contained RNG (xoshiro-style splitmix / Box-Muller) so generated
/// matrices are bit-identical across platforms and standard libraries.
class SynthRng {
public:
    explicit SynthRng(std::uint64_t seed) : state_(seed) {}
    std::uint64_t next_u64();
    double uniform();       // [0, 1)
    double uniform_sym();   // [-1, 1)
    double normal_clipped(); // N(0,1) clipped to [-4, 4]

private:
    std::uint64_t state_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

} // namespace saten
