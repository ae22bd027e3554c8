#pragma once

#include "saten/tensor.hpp"

#include <cstdint>
#include <vector>

namespace saten {

/// Tensor-train chain: core j is (r_{j-1}, s_j, r_j) with r_0 = r_t = 1.
class TTRepresentation {
public:
    TTRepresentation(std::vector<DenseTensor> cores);

    const std::vector<DenseTensor>& cores() const { return cores_; }
    const std::vector<std::int64_t>& ranks() const { return ranks_; }
    const Shape& mode_sizes() const { return mode_sizes_; }
    std::int64_t order() const { return static_cast<std::int64_t>(cores_.size()); }

    /// New chain with the same structure and replaced core data.
    TTRepresentation with_cores(std::vector<DenseTensor> cores) const;

private:
    std::vector<DenseTensor> cores_;
    std::vector<std::int64_t> ranks_;
    Shape mode_sizes_;
};

/// Error-based TT-SVD: smallest ranks such that each unfolding step stays
/// within its share of the budget, guaranteeing
/// ||w - reconstruct(result)||_F <= epsilon * ||w||_F.
TTRepresentation tt_svd(const DenseTensor& w, double epsilon);

/// Chain contraction of the cores back to a dense tensor of shape mode_sizes.
DenseTensor reconstruct(const TTRepresentation& tt);

/// Intermediates of tt_matvec, kept so gradients can be replayed backward.
struct MatvecTape {
    std::vector<DenseTensor> inputs;            // operand Y before each step
    std::vector<ContractionPattern> patterns;   // pattern used at each step
};

/// y = W_TT^T vec(x) via the sweeping contraction network: x is folded over
/// the first k modes, the remaining d modes produce the output vector.
DenseTensor tt_matvec(const DenseTensor& x, const TTRepresentation& tt,
                      MultiplyCounter* counter = nullptr, MatvecTape* tape = nullptr);

/// Gradients of <upstream, tt_matvec(x, tt)> w.r.t. every core and x.
struct TTMatvecGrads {
    std::vector<DenseTensor> core_grads;
    DenseTensor input_grad; // shaped like the folded x
};
TTMatvecGrads tt_matvec_backward(const TTRepresentation& tt, const MatvecTape& tape,
                                 const DenseTensor& upstream);

/// Total core element count: sum_j r_{j-1} * s_j * r_j.
std::int64_t tt_param_count(const TTRepresentation& tt);

/// MAC count of the contraction network with k input modes; matches the
/// instrumented multiply counter of tt_matvec exactly.
std::int64_t tt_mac_count(const TTRepresentation& tt, std::int64_t k);

} // namespace saten
