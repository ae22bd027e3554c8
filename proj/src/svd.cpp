#include "saten/svd.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace saten {

namespace {

constexpr double kOrthTol = 1e-12;
constexpr int kMaxSweeps = 64;

// Orthogonalizes the n columns (each of length m) of the column-major matrix
// `b` by cyclic Jacobi rotations, accumulating the rotations into the n x n
// column-major matrix `acc`. On exit b = Q * diag(norms) * acc^T.
void one_sided_jacobi(std::vector<double>& b, std::int64_t m, std::int64_t n,
                      std::vector<double>& acc) {
    std::vector<double> sq(static_cast<std::size_t>(n));
    for (int sweep = 0; sweep < kMaxSweeps; ++sweep) {
        // recompute column norms each sweep; the incremental updates drift
        for (std::int64_t j = 0; j < n; ++j) {
            const double* col = b.data() + j * m;
            double s = 0.0;
            for (std::int64_t i = 0; i < m; ++i) s += col[i] * col[i];
            sq[static_cast<std::size_t>(j)] = s;
        }
        bool rotated = false;
        for (std::int64_t p = 0; p < n - 1; ++p) {
            for (std::int64_t q = p + 1; q < n; ++q) {
                double alpha = sq[static_cast<std::size_t>(p)];
                double beta = sq[static_cast<std::size_t>(q)];
                if (alpha == 0.0 || beta == 0.0) continue;
                double* bp = b.data() + p * m;
                double* bq = b.data() + q * m;
                double gamma = 0.0;
                for (std::int64_t i = 0; i < m; ++i) gamma += bp[i] * bq[i];
                if (std::abs(gamma) <= kOrthTol * std::sqrt(alpha * beta)) continue;

                const double zeta = (beta - alpha) / (2.0 * gamma);
                const double t = std::copysign(1.0, zeta) /
                                 (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
                const double c = 1.0 / std::sqrt(1.0 + t * t);
                const double s = c * t;

                for (std::int64_t i = 0; i < m; ++i) {
                    const double xp = bp[i], xq = bq[i];
                    bp[i] = c * xp - s * xq;
                    bq[i] = s * xp + c * xq;
                }
                double* ap = acc.data() + p * n;
                double* aq = acc.data() + q * n;
                for (std::int64_t i = 0; i < n; ++i) {
                    const double xp = ap[i], xq = aq[i];
                    ap[i] = c * xp - s * xq;
                    aq[i] = s * xp + c * xq;
                }
                sq[static_cast<std::size_t>(p)] = alpha - t * gamma;
                sq[static_cast<std::size_t>(q)] = beta + t * gamma;
                rotated = true;
            }
        }
        if (!rotated) break;
    }
}

} // namespace

SvdResult jacobi_svd(const double* a, std::int64_t rows, std::int64_t cols) {
    const bool tall = rows >= cols;
    const std::int64_t m = tall ? rows : cols; // working matrix is m x n, m >= n
    const std::int64_t n = tall ? cols : rows;

    // column-major working copy; for the wide case we work on A^T
    std::vector<double> b(static_cast<std::size_t>(m * n));
    if (tall) {
        for (std::int64_t i = 0; i < rows; ++i)
            for (std::int64_t j = 0; j < cols; ++j)
                b[static_cast<std::size_t>(j * m + i)] = a[i * cols + j];
    } else {
        // A^T in column-major equals A in row-major
        std::copy(a, a + rows * cols, b.begin());
    }

    std::vector<double> acc(static_cast<std::size_t>(n * n), 0.0);
    for (std::int64_t j = 0; j < n; ++j) acc[static_cast<std::size_t>(j * n + j)] = 1.0;

    one_sided_jacobi(b, m, n, acc);

    std::vector<double> sigma(static_cast<std::size_t>(n));
    for (std::int64_t j = 0; j < n; ++j) {
        const double* col = b.data() + j * m;
        double s = 0.0;
        for (std::int64_t i = 0; i < m; ++i) s += col[i] * col[i];
        sigma[static_cast<std::size_t>(j)] = std::sqrt(s);
    }

    std::vector<std::int64_t> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::int64_t l, std::int64_t r) {
        return sigma[static_cast<std::size_t>(l)] > sigma[static_cast<std::size_t>(r)];
    });

    SvdResult out;
    out.rows = rows;
    out.cols = cols;
    out.rank = n;
    out.sigma.resize(static_cast<std::size_t>(n));
    out.u.assign(static_cast<std::size_t>(rows * n), 0.0);
    out.v.assign(static_cast<std::size_t>(cols * n), 0.0);

    // tall: A = Q Sigma acc^T  -> U = Q (rows x n), V = acc (cols x n)
    // wide: A^T = Q Sigma acc^T -> U = acc (rows x n), V = Q (cols x n)
    for (std::int64_t k = 0; k < n; ++k) {
        const std::int64_t j = order[static_cast<std::size_t>(k)];
        const double sv = sigma[static_cast<std::size_t>(j)];
        out.sigma[static_cast<std::size_t>(k)] = sv;
        const double inv = sv > 0.0 ? 1.0 / sv : 0.0;
        const double* bcol = b.data() + j * m;
        const double* acol = acc.data() + j * n;
        std::int64_t ulen, vlen;
        const double* usrc;
        const double* vsrc;
        double uscale, vscale;
        if (tall) {
            usrc = bcol; uscale = inv; ulen = rows;
            vsrc = acol; vscale = 1.0; vlen = cols;
        } else {
            usrc = acol; uscale = 1.0; ulen = rows;
            vsrc = bcol; vscale = inv; vlen = cols;
        }

        // deterministic sign: largest-magnitude U entry positive
        double best = 0.0;
        double sign = 1.0;
        for (std::int64_t i = 0; i < ulen; ++i) {
            const double val = usrc[i] * uscale;
            if (std::abs(val) > best) {
                best = std::abs(val);
                sign = val >= 0.0 ? 1.0 : -1.0;
            }
        }
        for (std::int64_t i = 0; i < ulen; ++i)
            out.u[static_cast<std::size_t>(i * n + k)] = sign * usrc[i] * uscale;
        for (std::int64_t i = 0; i < vlen; ++i)
            out.v[static_cast<std::size_t>(i * n + k)] = sign * vsrc[i] * vscale;
    }
    return out;
}

} // namespace saten
