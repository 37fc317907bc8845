#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <vector>

namespace ruleopt::detail {

/// Row-major dense symmetric matrix helpers sized for GP training sets
/// (a few hundred points at most).

/// Cholesky A = L L^T (L lower). Returns nullopt when A is not positive
/// definite to working precision.
inline std::optional<std::vector<double>> cholesky(const std::vector<double>& a,
                                                   std::size_t n) {
    std::vector<double> l(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j <= i; ++j) {
            double sum = a[i * n + j];
            for (std::size_t k = 0; k < j; ++k) sum -= l[i * n + k] * l[j * n + k];
            if (i == j) {
                if (!(sum > 0.0) || !std::isfinite(sum)) return std::nullopt;
                l[i * n + i] = std::sqrt(sum);
            } else {
                l[i * n + j] = sum / l[j * n + j];
            }
        }
    }
    return l;
}

/// Solves L z = b (forward substitution).
inline std::vector<double> forward_solve(const std::vector<double>& l, std::size_t n,
                                         const std::vector<double>& b) {
    std::vector<double> z(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        double sum = b[i];
        for (std::size_t k = 0; k < i; ++k) sum -= l[i * n + k] * z[k];
        z[i] = sum / l[i * n + i];
    }
    return z;
}

/// Solves L^T x = z (backward substitution).
inline std::vector<double> backward_solve(const std::vector<double>& l, std::size_t n,
                                          const std::vector<double>& z) {
    std::vector<double> x(n, 0.0);
    for (std::size_t i = n; i-- > 0;) {
        double sum = z[i];
        for (std::size_t k = i + 1; k < n; ++k) sum -= l[k * n + i] * x[k];
        x[i] = sum / l[i * n + i];
    }
    return x;
}

/// Solves (L L^T) x = b.
inline std::vector<double> cholesky_solve(const std::vector<double>& l, std::size_t n,
                                          const std::vector<double>& b) {
    return backward_solve(l, n, forward_solve(l, n, b));
}

inline double log_det_from_cholesky(const std::vector<double>& l, std::size_t n) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += std::log(l[i * n + i]);
    return 2.0 * s;
}

} // namespace ruleopt::detail
