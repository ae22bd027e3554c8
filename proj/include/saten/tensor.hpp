#pragma once

#include <cstdint>
#include <utility>
#include <vector>

namespace saten {

using Shape = std::vector<std::int64_t>;

std::int64_t shape_numel(const Shape& shape);

/// Row-major (last index fastest) dense real tensor. All internal
/// arithmetic is double; fp32 appears only at the serialization boundary.
class DenseTensor {
public:
    DenseTensor() = default;
    DenseTensor(Shape shape, std::vector<double> data);

    /// Zero-filled tensor of the given shape.
    static DenseTensor zeros(Shape shape);

    const Shape& shape() const { return shape_; }
    std::int64_t order() const { return static_cast<std::int64_t>(shape_.size()); }
    std::int64_t numel() const { return static_cast<std::int64_t>(data_.size()); }
    std::int64_t dim(std::int64_t axis) const { return shape_[static_cast<std::size_t>(axis)]; }

    const std::vector<double>& data() const { return data_; }
    std::vector<double>& data() { return data_; }

    double operator[](std::int64_t flat) const { return data_[static_cast<std::size_t>(flat)]; }
    double& operator[](std::int64_t flat) { return data_[static_cast<std::size_t>(flat)]; }

    /// Element access by multi-index.
    double at(const std::vector<std::int64_t>& index) const;

private:
    Shape shape_;
    std::vector<double> data_;
};

/// Pairs of (axis in left operand, axis in right operand) to be summed over.
struct ContractionPattern {
    std::vector<std::pair<std::int64_t, std::int64_t>> pairs;
};

/// Call-local side channel recording the mathematical number of scalar
/// multiplications: product of output dims times product of contracted dims.
struct MultiplyCounter {
    std::int64_t count = 0;
};

/// General pairwise contraction. Output axes are the uncontracted axes of
/// `a` in order, followed by the uncontracted axes of `b` in order.
DenseTensor contract(const DenseTensor& a, const DenseTensor& b,
                     const ContractionPattern& pattern,
                     MultiplyCounter* counter = nullptr);

/// Row-major reinterpretation; data is untouched.
DenseTensor fold(const DenseTensor& x, const Shape& new_shape);

double frobenius_norm(const DenseTensor& a);

/// Transpose copy: out axis i takes input axis perm[i].
DenseTensor permute(const DenseTensor& x, const std::vector<std::int64_t>& perm);

/// Reverse-mode gradients through contract: given C = contract(A, B, pattern)
/// and dL/dC, returns (dL/dA, dL/dB) in the operands' own layouts.
std::pair<DenseTensor, DenseTensor> contract_vjp(const DenseTensor& a,
                                                 const DenseTensor& b,
                                                 const ContractionPattern& pattern,
                                                 const DenseTensor& grad_out);

} // namespace saten
