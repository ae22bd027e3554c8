#include "saten/layer.hpp"

#include "saten/errors.hpp"
#include "saten/svd.hpp"

#include <cmath>
#include <utility>

namespace saten {

std::string pattern_name(SparsityPattern p) {
    switch (p) {
        case SparsityPattern::unstructured: return "u";
        case SparsityPattern::two_four: return "2:4";
        case SparsityPattern::row: return "row";
    }
    return "?";
}

SparsityPattern pattern_from_name(const std::string& name) {
    if (name == "u" || name == "unstructured") return SparsityPattern::unstructured;
    if (name == "2:4" || name == "two_four") return SparsityPattern::two_four;
    if (name == "row") return SparsityPattern::row;
    throw ParameterError("unknown sparsity pattern '" + name + "'");
}

SatenLayer::SatenLayer(FoldPlan fold_plan, TTRepresentation tt, SparseResidual residual,
                       double epsilon, SparsityPattern pattern, std::string fold_fallback)
    : fold_plan_(std::move(fold_plan)),
      tt_(std::move(tt)),
      residual_(std::move(residual)),
      epsilon_(epsilon),
      pattern_(pattern),
      fold_fallback_(std::move(fold_fallback)) {
    if (tt_.mode_sizes() != fold_plan_.mode_sizes())
        throw ShapeError("TT mode sizes do not match the fold plan");
    if (residual_.n_rows() != fold_plan_.n_rows() || residual_.n_cols() != fold_plan_.n_cols())
        throw ShapeError("residual dims do not match the fold plan");
}

DenseTensor SatenLayer::densify() const {
    DenseTensor w_tt = fold(reconstruct(tt_), {n_rows(), n_cols()});
    DenseTensor e = residual_.densify();
    for (std::int64_t i = 0; i < w_tt.numel(); ++i) w_tt[i] += e[i];
    return w_tt;
}

SatenLayer compress(const DenseTensor& w, const CompressOptions& opts) {
    if (w.order() != 2) throw ShapeError("compress expects an N x M matrix");
    if (opts.pattern == SparsityPattern::row && opts.freq == nullptr)
        throw ParameterError("row sparsity needs a token frequency table");

    const std::int64_t n = w.dim(0);
    const std::int64_t m = w.dim(1);
    std::int64_t k = opts.k > 0 ? opts.k : default_num_factors(n);
    std::int64_t d = opts.d > 0 ? opts.d : default_num_factors(m);
    const std::int64_t k_req = k, d_req = d;
    FoldPlan plan = plan_fold_with_fallback(n, m, k, d);
    std::string fallback;
    if (k != k_req)
        fallback += "input side fell back to " + std::to_string(k) + " factors; ";
    if (d != d_req)
        fallback += "output side fell back to " + std::to_string(d) + " factors; ";

    TTRepresentation tt = tt_svd(fold(w, plan.mode_sizes()), opts.epsilon);

    // residual against the exact reconstruction of the truncated chain
    DenseTensor w_tt = fold(reconstruct(tt), {n, m});
    DenseTensor resid = DenseTensor::zeros({n, m});
    for (std::int64_t i = 0; i < resid.numel(); ++i) resid[i] = w[i] - w_tt[i];

    SparseResidual sparse = [&] {
        switch (opts.pattern) {
            case SparsityPattern::unstructured:
                return mask_unstructured(resid, opts.density);
            case SparsityPattern::two_four:
                return mask_two_four(resid);
            case SparsityPattern::row:
                return mask_rows(resid, *opts.freq, opts.top_t);
        }
        throw ParameterError("unreachable pattern");
    }();

    return SatenLayer(std::move(plan), std::move(tt), std::move(sparse), opts.epsilon,
                      opts.pattern, std::move(fallback));
}

DenseTensor forward(const SatenLayer& layer, const DenseTensor& x, MultiplyCounter* counter) {
    if (x.numel() != layer.n_rows())
        throw ShapeError("input length " + std::to_string(x.numel()) + " does not match N=" +
                         std::to_string(layer.n_rows()));
    DenseTensor x_folded = fold(x, layer.fold_plan().input_factors);
    DenseTensor y = tt_matvec(x_folded, layer.tt(), counter);
    DenseTensor ys = sparse_matvec_t(layer.residual(), x, counter);
    for (std::int64_t i = 0; i < y.numel(); ++i) y[i] += ys[i];
    return y;
}

BackwardResult backward(const SatenLayer& layer, const DenseTensor& x,
                        const DenseTensor& upstream_grad) {
    if (x.numel() != layer.n_rows())
        throw ShapeError("input length does not match N");
    if (upstream_grad.numel() != layer.n_cols())
        throw ShapeError("upstream gradient length does not match M");

    DenseTensor x_folded = fold(x, layer.fold_plan().input_factors);
    MatvecTape tape;
    (void)tt_matvec(x_folded, layer.tt(), nullptr, &tape);
    TTMatvecGrads tt_grads = tt_matvec_backward(layer.tt(), tape, upstream_grad);

    BackwardResult out;
    out.grads.core_grads = std::move(tt_grads.core_grads);
    out.input_grad = fold(tt_grads.input_grad, {layer.n_rows()});

    out.grads.sparse_value_grads.assign(
        static_cast<std::size_t>(layer.residual().nonzero_count()), 0.0);
    layer.residual().for_each_entry(
        [&](std::int64_t r, std::int64_t c, double v, std::int64_t slot) {
            out.grads.sparse_value_grads[static_cast<std::size_t>(slot)] =
                x[r] * upstream_grad[c];
            out.input_grad[r] += v * upstream_grad[c];
        });
    return out;
}

SatenLayer sgd_step(const SatenLayer& layer, const LayerGradients& grads, double lr) {
    if (grads.core_grads.size() != layer.tt().cores().size())
        throw ShapeError("core gradient count mismatch");
    std::vector<DenseTensor> cores = layer.tt().cores();
    for (std::size_t j = 0; j < cores.size(); ++j) {
        const DenseTensor& g = grads.core_grads[j];
        if (g.shape() != cores[j].shape())
            throw ShapeError("core gradient shape mismatch at core " + std::to_string(j));
        for (std::int64_t i = 0; i < cores[j].numel(); ++i) cores[j][i] -= lr * g[i];
    }
    std::vector<double> values = layer.residual().values();
    if (grads.sparse_value_grads.size() != values.size())
        throw ShapeError("sparse gradient count mismatch");
    for (std::size_t i = 0; i < values.size(); ++i)
        values[i] -= lr * grads.sparse_value_grads[i];

    return SatenLayer(layer.fold_plan(), layer.tt().with_cores(std::move(cores)),
                      layer.residual().with_values(values), layer.epsilon(), layer.pattern(),
                      layer.fold_fallback());
}

CostReport cost_report(const SatenLayer& layer) {
    const std::int64_t n = layer.n_rows();
    const std::int64_t m = layer.n_cols();
    CostReport r;
    r.params_tt = tt_param_count(layer.tt());
    r.params_sparse = sparse_param_count(layer.residual());
    r.params_total = r.params_tt + r.params_sparse;
    r.density = layer.residual().density();
    r.mac_tt = tt_mac_count(layer.tt(),
                            static_cast<std::int64_t>(layer.fold_plan().input_factors.size()));
    // (rho N + 1) M = nnz + M: the stored multiplies plus one bias slot per output
    r.mac_saten = r.mac_tt + layer.residual().nonzero_count() + m;
    r.dense_params = n * m;
    r.dense_macs = m * (n + 1);
    r.compression_ratio =
        static_cast<double>(r.dense_params) / static_cast<double>(r.params_total);
    r.storage_bytes = 4 * (r.params_tt + r.params_sparse) + layer.residual().index_storage_bytes();
    r.fold_fallback = layer.fold_fallback();
    return r;
}

DenseTensor SvdBaseline::densify() const {
    // u_scaled (N x r) times v^T (r x M)
    return contract(u_scaled, v, ContractionPattern{{{1, 1}}});
}

SvdBaseline svd_baseline_compress(const DenseTensor& w, double epsilon) {
    if (w.order() != 2) throw ShapeError("svd_baseline_compress expects a matrix");
    if (epsilon < 0.0) throw ParameterError("epsilon must be non-negative");
    const std::int64_t n = w.dim(0);
    const std::int64_t m = w.dim(1);

    SvdResult svd = jacobi_svd(w.data().data(), n, m);
    double total = 0.0;
    for (double s : svd.sigma) total += s * s;

    std::int64_t rank = svd.rank;
    if (total > 0.0) {
        const double budget = epsilon * epsilon * total * (1.0 - 1e-9);
        double tail = 0.0;
        rank = svd.rank;
        for (std::int64_t i = svd.rank; i-- > 0;) {
            tail += svd.sigma[static_cast<std::size_t>(i)] *
                    svd.sigma[static_cast<std::size_t>(i)];
            if (tail > budget) break;
            rank = i;
        }
        if (rank < 1) rank = 1;
    } else {
        rank = 1;
    }

    SvdBaseline out;
    out.rank = rank;
    out.u_scaled = DenseTensor::zeros({n, rank});
    out.v = DenseTensor::zeros({m, rank});
    for (std::int64_t i = 0; i < n; ++i)
        for (std::int64_t a = 0; a < rank; ++a)
            out.u_scaled[i * rank + a] = svd.u[static_cast<std::size_t>(i * svd.rank + a)] *
                                         svd.sigma[static_cast<std::size_t>(a)];
    for (std::int64_t i = 0; i < m; ++i)
        for (std::int64_t a = 0; a < rank; ++a)
            out.v[i * rank + a] = svd.v[static_cast<std::size_t>(i * svd.rank + a)];

    out.report.params_tt = 0;
    out.report.params_sparse = 0;
    out.report.params_total = rank * (n + m);
    out.report.dense_params = n * m;
    out.report.dense_macs = m * (n + 1);
    out.report.mac_tt = rank * (n + m); // rank-r factorization matvec
    out.report.mac_saten = out.report.mac_tt;
    out.report.compression_ratio =
        static_cast<double>(out.report.dense_params) /
        static_cast<double>(out.report.params_total);
    out.report.storage_bytes = 4 * out.report.params_total;
    return out;
}

} // namespace saten
