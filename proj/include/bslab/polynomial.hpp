#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <vector>

namespace bslab {

/// p(z) for coefficients c[0] z^n + c[1] z^{n-1} + ... + c[n], and p'(z).
inline std::pair<std::complex<double>, std::complex<double>> horner(const std::vector<double>& c, std::complex<double> z) {
    std::complex<double> p = 0.0;
    std::complex<double> dp = 0.0;
    for (double ci : c) {
        dp = dp * z + p;
        p = p * z + ci;
    }
    return {p, dp};
}

/// Roots of c[0] z^n + ... + c[n] (c[0] != 0): eigenvalues of the scaled companion
/// matrix, each polished by Newton while the residual decreases.
inline std::vector<std::complex<double>> polynomial_roots(std::vector<double> c) {
    while (!c.empty() && c.front() == 0.0) c.erase(c.begin());
    const int n = int(c.size()) - 1;
    if (n < 1) return {};
    const double lead = c.front();
    for (double& ci : c) ci /= lead;

    // z = s w balances coefficient magnitudes
    double s = 0.0;
    for (int j = 1; j <= n; ++j) s = std::max(s, std::pow(std::abs(c[j]), 1.0 / j));
    if (s == 0.0) return std::vector<std::complex<double>>(std::size_t(n), 0.0);

    Eigen::MatrixXd comp = Eigen::MatrixXd::Zero(n, n);
    for (int j = 0; j < n; ++j) comp(0, j) = -c[j + 1] / std::pow(s, j + 1);
    for (int i = 1; i < n; ++i) comp(i, i - 1) = 1.0;
    Eigen::EigenSolver<Eigen::MatrixXd> es(comp, false);

    std::vector<std::complex<double>> roots(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        std::complex<double> z = es.eigenvalues()[i] * s;
        if (std::abs(z.imag()) <= 1e-14 * std::abs(z)) z = z.real();
        for (int it = 0; it < 3; ++it) {
            const auto [p, dp] = horner(c, z);
            if (dp == 0.0) break;
            const std::complex<double> zn = z - p / dp;
            if (std::abs(horner(c, zn).first) >= std::abs(p)) break;
            z = zn;
        }
        roots[std::size_t(i)] = z;
    }
    std::sort(roots.begin(), roots.end(), [](auto a, auto b) {
        return a.real() != b.real() ? a.real() > b.real() : a.imag() > b.imag();
    });
    return roots;
}

/// Roots of z^3 + a1 z^2 + a2 z + a3 sorted by decreasing real part.
inline std::array<std::complex<double>, 3> cubic_roots(double a1, double a2, double a3) {
    const auto r = polynomial_roots({1.0, a1, a2, a3});
    return {r[0], r[1], r[2]};
}

}  // namespace bslab
