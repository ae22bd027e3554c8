#include "saten/tensor.hpp"

#include "saten/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace saten {

std::int64_t shape_numel(const Shape& shape) {
    std::int64_t n = 1;
    for (std::int64_t s : shape) n *= s;
    return n;
}

DenseTensor::DenseTensor(Shape shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
    for (std::int64_t s : shape_) {
        if (s < 1) throw ShapeError("dimension size must be >= 1, got " + std::to_string(s));
    }
    if (shape_numel(shape_) != static_cast<std::int64_t>(data_.size())) {
        throw ShapeError("shape/data mismatch: shape holds " +
                         std::to_string(shape_numel(shape_)) + " elements, data holds " +
                         std::to_string(data_.size()));
    }
}

DenseTensor DenseTensor::zeros(Shape shape) {
    std::int64_t n = shape_numel(shape);
    return DenseTensor(std::move(shape), std::vector<double>(static_cast<std::size_t>(n), 0.0));
}

double DenseTensor::at(const std::vector<std::int64_t>& index) const {
    std::int64_t flat = 0;
    for (std::size_t i = 0; i < shape_.size(); ++i) flat = flat * shape_[i] + index[i];
    return data_[static_cast<std::size_t>(flat)];
}

DenseTensor permute(const DenseTensor& x, const std::vector<std::int64_t>& perm) {
    const std::int64_t t = x.order();
    Shape out_shape(static_cast<std::size_t>(t));
    for (std::int64_t i = 0; i < t; ++i) out_shape[static_cast<std::size_t>(i)] = x.dim(perm[static_cast<std::size_t>(i)]);

    // in_strides[axis] in the input layout, gathered per output axis
    std::vector<std::int64_t> in_strides(static_cast<std::size_t>(t), 1);
    for (std::int64_t i = t - 2; i >= 0; --i)
        in_strides[static_cast<std::size_t>(i)] = in_strides[static_cast<std::size_t>(i + 1)] * x.dim(i + 1);
    std::vector<std::int64_t> gather(static_cast<std::size_t>(t));
    for (std::int64_t i = 0; i < t; ++i)
        gather[static_cast<std::size_t>(i)] = in_strides[static_cast<std::size_t>(perm[static_cast<std::size_t>(i)])];

    DenseTensor out = DenseTensor::zeros(out_shape);
    std::vector<std::int64_t> idx(static_cast<std::size_t>(t), 0);
    const std::int64_t n = x.numel();
    std::int64_t src = 0;
    for (std::int64_t flat = 0; flat < n; ++flat) {
        out[flat] = x[src];
        for (std::int64_t ax = t - 1; ax >= 0; --ax) {
            auto a = static_cast<std::size_t>(ax);
            src += gather[a];
            if (++idx[a] < out_shape[a]) break;
            src -= gather[a] * out_shape[a];
            idx[a] = 0;
        }
    }
    return out;
}

namespace {

void validate_pattern(const DenseTensor& a, const DenseTensor& b, const ContractionPattern& pattern) {
    std::vector<bool> used_a(static_cast<std::size_t>(a.order()), false);
    std::vector<bool> used_b(static_cast<std::size_t>(b.order()), false);
    for (auto [la, lb] : pattern.pairs) {
        if (la < 0 || la >= a.order() || lb < 0 || lb >= b.order())
            throw ShapeError("contraction axis out of range: (" + std::to_string(la) + "," +
                             std::to_string(lb) + ")");
        if (used_a[static_cast<std::size_t>(la)] || used_b[static_cast<std::size_t>(lb)])
            throw ShapeError("contraction axis repeated: (" + std::to_string(la) + "," +
                             std::to_string(lb) + ")");
        used_a[static_cast<std::size_t>(la)] = true;
        used_b[static_cast<std::size_t>(lb)] = true;
        if (a.dim(la) != b.dim(lb))
            throw ShapeError("contraction dim mismatch: left axis " + std::to_string(la) +
                             " has size " + std::to_string(a.dim(la)) + ", right axis " +
                             std::to_string(lb) + " has size " + std::to_string(b.dim(lb)));
    }
}

std::vector<std::int64_t> free_axes(std::int64_t order,
                                    const std::vector<std::int64_t>& contracted) {
    std::vector<bool> used(static_cast<std::size_t>(order), false);
    for (std::int64_t ax : contracted) used[static_cast<std::size_t>(ax)] = true;
    std::vector<std::int64_t> out;
    for (std::int64_t i = 0; i < order; ++i)
        if (!used[static_cast<std::size_t>(i)]) out.push_back(i);
    return out;
}

} // namespace

DenseTensor contract(const DenseTensor& a, const DenseTensor& b,
                     const ContractionPattern& pattern, MultiplyCounter* counter) {
    validate_pattern(a, b, pattern);

    std::vector<std::int64_t> ca, cb;
    for (auto [la, lb] : pattern.pairs) {
        ca.push_back(la);
        cb.push_back(lb);
    }
    const std::vector<std::int64_t> fa = free_axes(a.order(), ca);
    const std::vector<std::int64_t> fb = free_axes(b.order(), cb);

    // permute-to-matrix: a -> (free, contracted), b -> (contracted, free)
    std::vector<std::int64_t> pa = fa;
    pa.insert(pa.end(), ca.begin(), ca.end());
    std::vector<std::int64_t> pb = cb;
    pb.insert(pb.end(), fb.begin(), fb.end());
    DenseTensor am = permute(a, pa);
    DenseTensor bm = permute(b, pb);

    std::int64_t rows = 1, inner = 1, cols = 1;
    for (std::int64_t ax : fa) rows *= a.dim(ax);
    for (std::int64_t ax : ca) inner *= a.dim(ax);
    for (std::int64_t ax : fb) cols *= b.dim(ax);

    Shape out_shape;
    for (std::int64_t ax : fa) out_shape.push_back(a.dim(ax));
    for (std::int64_t ax : fb) out_shape.push_back(b.dim(ax));
    DenseTensor out = DenseTensor::zeros(out_shape);

    const double* ap = am.data().data();
    const double* bp = bm.data().data();
    double* op = out.data().data();
    for (std::int64_t i = 0; i < rows; ++i) {
        const double* arow = ap + i * inner;
        double* orow = op + i * cols;
        for (std::int64_t t = 0; t < inner; ++t) {
            const double av = arow[t];
            const double* brow = bp + t * cols;
            for (std::int64_t j = 0; j < cols; ++j) orow[j] += av * brow[j];
        }
    }

    if (counter) counter->count += rows * cols * inner;
    return out;
}

DenseTensor fold(const DenseTensor& x, const Shape& new_shape) {
    if (shape_numel(new_shape) != x.numel())
        throw ShapeError("fold element count mismatch: have " + std::to_string(x.numel()) +
                         ", target shape holds " + std::to_string(shape_numel(new_shape)));
    return DenseTensor(new_shape, x.data());
}

double frobenius_norm(const DenseTensor& a) {
    double s = 0.0;
    for (double v : a.data()) s += v * v;
    return std::sqrt(s);
}

std::pair<DenseTensor, DenseTensor> contract_vjp(const DenseTensor& a, const DenseTensor& b,
                                                 const ContractionPattern& pattern,
                                                 const DenseTensor& grad_out) {
    validate_pattern(a, b, pattern);

    std::vector<std::int64_t> ca, cb;
    for (auto [la, lb] : pattern.pairs) {
        ca.push_back(la);
        cb.push_back(lb);
    }
    const std::vector<std::int64_t> fa = free_axes(a.order(), ca);
    const std::vector<std::int64_t> fb = free_axes(b.order(), cb);
    const auto nfa = static_cast<std::int64_t>(fa.size());
    const auto nfb = static_cast<std::int64_t>(fb.size());

    // dA = contract(dC, B) over B's free axes; result = (fa..., b-contracted
    // axes in b order), then permuted back to a's layout.
    ContractionPattern pat_da;
    for (std::int64_t i = 0; i < nfb; ++i)
        pat_da.pairs.emplace_back(nfa + i, fb[static_cast<std::size_t>(i)]);
    DenseTensor da_raw = contract(grad_out, b, pat_da);

    std::vector<std::int64_t> cb_sorted_pos(cb.size()); // a-axis partner of each b-contracted axis, in b order
    {
        std::vector<std::size_t> order(cb.size());
        std::iota(order.begin(), order.end(), 0);
        std::sort(order.begin(), order.end(),
                  [&](std::size_t l, std::size_t r) { return cb[l] < cb[r]; });
        for (std::size_t i = 0; i < order.size(); ++i) cb_sorted_pos[i] = ca[order[i]];
    }
    std::vector<std::int64_t> pos_in_raw(static_cast<std::size_t>(a.order()));
    for (std::int64_t i = 0; i < nfa; ++i)
        pos_in_raw[static_cast<std::size_t>(fa[static_cast<std::size_t>(i)])] = i;
    for (std::size_t i = 0; i < cb_sorted_pos.size(); ++i)
        pos_in_raw[static_cast<std::size_t>(cb_sorted_pos[i])] = nfa + static_cast<std::int64_t>(i);
    DenseTensor da = permute(da_raw, pos_in_raw);

    // dB = contract(A, dC) over A's free axes; result = (a-contracted axes in
    // a order, fb...), then permuted back to b's layout.
    ContractionPattern pat_db;
    for (std::int64_t i = 0; i < nfa; ++i)
        pat_db.pairs.emplace_back(fa[static_cast<std::size_t>(i)], i);
    DenseTensor db_raw = contract(a, grad_out, pat_db);

    std::vector<std::int64_t> ca_sorted_pos(ca.size()); // b-axis partner of each a-contracted axis, in a order
    {
        std::vector<std::size_t> order(ca.size());
        std::iota(order.begin(), order.end(), 0);
        std::sort(order.begin(), order.end(),
                  [&](std::size_t l, std::size_t r) { return ca[l] < ca[r]; });
        for (std::size_t i = 0; i < order.size(); ++i) ca_sorted_pos[i] = cb[order[i]];
    }
    std::vector<std::int64_t> pos_in_raw_b(static_cast<std::size_t>(b.order()));
    for (std::size_t i = 0; i < ca_sorted_pos.size(); ++i)
        pos_in_raw_b[static_cast<std::size_t>(ca_sorted_pos[i])] = static_cast<std::int64_t>(i);
    for (std::int64_t i = 0; i < nfb; ++i)
        pos_in_raw_b[static_cast<std::size_t>(fb[static_cast<std::size_t>(i)])] =
            static_cast<std::int64_t>(ca.size()) + i;
    DenseTensor db = permute(db_raw, pos_in_raw_b);

    return {std::move(da), std::move(db)};
}

} // namespace saten
