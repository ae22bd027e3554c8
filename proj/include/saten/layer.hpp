#pragma once

#include "saten/shape_opt.hpp"
#include "saten/sparsity.hpp"
#include "saten/tensor.hpp"
#include "saten/tt.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace saten {

enum class SparsityPattern { unstructured, two_four, row };

std::string pattern_name(SparsityPattern p);
SparsityPattern pattern_from_name(const std::string& name);

/// A linear (or embedding) layer compressed to W ~ W_TT + E.
class SatenLayer {
public:
    SatenLayer(FoldPlan fold_plan, TTRepresentation tt, SparseResidual residual,
               double epsilon, SparsityPattern pattern, std::string fold_fallback = {});

    const FoldPlan& fold_plan() const { return fold_plan_; }
    const TTRepresentation& tt() const { return tt_; }
    const SparseResidual& residual() const { return residual_; }
    double epsilon() const { return epsilon_; }
    SparsityPattern pattern() const { return pattern_; }
    const std::string& fold_fallback() const { return fold_fallback_; }

    std::int64_t n_rows() const { return fold_plan_.n_rows(); }
    std::int64_t n_cols() const { return fold_plan_.n_cols(); }

    /// Dense W_TT + E, the matrix the layer realizes.
    DenseTensor densify() const;

private:
    FoldPlan fold_plan_;
    TTRepresentation tt_;
    SparseResidual residual_;
    double epsilon_;
    SparsityPattern pattern_;
    std::string fold_fallback_;
};

/// Parameter and MAC accounting for one layer.
struct CostReport {
    std::int64_t params_tt = 0;
    std::int64_t params_sparse = 0;
    std::int64_t params_total = 0;   // P = params_tt + params_sparse
    double density = 0.0;            // rho, measured from the realized residual
    std::int64_t mac_tt = 0;         // C_TT
    std::int64_t mac_saten = 0;      // C_Saten = C_TT + nnz + M
    std::int64_t dense_params = 0;   // N * M
    std::int64_t dense_macs = 0;     // M * (N + 1)
    double compression_ratio = 0.0;  // dense_params / P
    std::int64_t storage_bytes = 0;  // fp32 values + index metadata
    std::string fold_fallback;       // non-empty when a factor count was lowered
};

struct LayerGradients {
    std::vector<DenseTensor> core_grads;
    std::vector<double> sparse_value_grads; // payload order of the residual
};

struct CompressOptions {
    double epsilon = 0.5;
    SparsityPattern pattern = SparsityPattern::unstructured;
    double density = 0.0;       // unstructured budget
    std::int64_t top_t = 0;     // row budget
    std::int64_t k = 0;         // 0 = default_num_factors(N)
    std::int64_t d = 0;         // 0 = default_num_factors(M)
    const TokenFrequencyTable* freq = nullptr; // required for the row pattern
};

/// End-to-end compression of one N x M weight matrix:
/// plan fold, fold, TT-SVD, residual mask per pattern.
SatenLayer compress(const DenseTensor& w, const CompressOptions& opts);

/// y = E^T x + f(X, G_1..G_{k+d})
DenseTensor forward(const SatenLayer& layer, const DenseTensor& x,
                    MultiplyCounter* counter = nullptr);

/// Gradients of <upstream_grad, forward(layer, x)> w.r.t. cores, stored
/// sparse values, and x.
struct BackwardResult {
    LayerGradients grads;
    DenseTensor input_grad; // length N
};
BackwardResult backward(const SatenLayer& layer, const DenseTensor& x,
                        const DenseTensor& upstream_grad);

/// One SGD update; the sparse support (mask) stays frozen.
SatenLayer sgd_step(const SatenLayer& layer, const LayerGradients& grads, double lr);

CostReport cost_report(const SatenLayer& layer);

/// Truncated-SVD baseline: smallest rank with relative error <= epsilon.
struct SvdBaseline {
    DenseTensor u_scaled; // N x r, U * Sigma
    DenseTensor v;        // M x r
    std::int64_t rank = 0;
    CostReport report;    // params_total = r * (N + M)
    DenseTensor densify() const;
};
SvdBaseline svd_baseline_compress(const DenseTensor& w, double epsilon);

} // namespace saten
