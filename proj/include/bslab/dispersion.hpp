#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <string>
#include <thread>
#include <vector>

#include "core.hpp"
#include "polynomial.hpp"

namespace bslab {

/// b k^2 - d k^4
inline double backscatter_symbol(double k, double b, double d) {
    const double k2 = k * k;
    return b * k2 - d * k2 * k2;
}

// ---------------------------------------------------------------- 2D Euler

struct EulerEigen {
    std::array<cplx, 2> eigenvalues;
    // Columns are eigenvectors; the second column is zero when the operator is a Jordan block.
    Eigen::Matrix2d eigenvectors;
    int n_eigenvectors = 0;
};

/// Symbol of -(d Delta^2 + b Delta) - f P J at k, with P the Leray projector and J the rotation by +pi/2.
inline Eigen::Matrix2d euler_symbol(WaveVector k, double b, double d, double f) {
    const double K = k.norm2();
    if (K == 0.0) throw RangeError("euler_linear_eigs: zero wave vector");
    const double lam = b * K - d * K * K;
    Eigen::Matrix2d PJ;
    // P J = k_perp k^T / |k|^2
    PJ << -k.ky * k.kx, -k.ky * k.ky, k.kx * k.kx, k.kx * k.ky;
    PJ /= K;
    return lam * Eigen::Matrix2d::Identity() - f * PJ;
}

inline EulerEigen euler_linear_eigs(WaveVector k, double b, double d, double f) {
    if (k.is_zero()) throw RangeError("euler_linear_eigs: zero wave vector");
    const double lam = backscatter_symbol(k.norm(), b, d);
    EulerEigen out;
    out.eigenvalues = {cplx(lam, 0.0), cplx(lam, 0.0)};
    out.eigenvectors.setZero();
    const Eigen::Vector2d kp(-k.ky / k.norm(), k.kx / k.norm());
    out.eigenvectors.col(0) = kp;
    out.n_eigenvectors = 1;
    if (f == 0.0) {
        out.eigenvectors.col(1) = Eigen::Vector2d(k.kx, k.ky) / k.norm();
        out.n_eigenvectors = 2;
    }
    return out;
}

// ---------------------------------------------------------------- shallow water

struct DispersionCoeffs {
    double a1 = 0.0;
    double a2 = 0.0;
    double a3 = 0.0;
};

struct StabilityFlags {
    bool stable = false;
    bool zero_root = false;
    bool hopf = false;
    bool unstable = false;

    std::string str() const {
        if (stable) return "Stable";
        std::string s;
        auto add = [&](const char* t) { s += s.empty() ? t : std::string("+") + t; };
        if (unstable) add("Unstable");
        if (zero_root) add("ZeroRoot");
        if (hopf) add("Hopf");
        return s.empty() ? "Unstable" : s;
    }
};

struct DispersionResult {
    std::array<cplx, 3> roots;
    StabilityFlags flags;
    WaveVector k;
    DispersionCoeffs coeffs;

    double max_real() const {
        return std::max({roots[0].real(), roots[1].real(), roots[2].real()});
    }
};

/// Coefficients of det(lambda I - L(k)) = lambda^3 + a1 lambda^2 + a2 lambda + a3 for the linearized
/// rotating shallow water operator with backscatter and linear drag.
inline DispersionCoeffs sw_dispersion_coeffs(WaveVector k, const BackscatterParams& bp, const PhysicalParams& pp) {
    const double K = k.norm2();
    const double K2 = K * K;
    const double r = pp.C / pp.H0;
    DispersionCoeffs c;
    c.a1 = (bp.d1 + bp.d2) * K2 - (bp.b1 + bp.b2) * K + 2.0 * r;
    c.a2 = (bp.d1 * K2 - bp.b1 * K + r) * (bp.d2 * K2 - bp.b2 * K + r) + pp.g * pp.H0 * K + pp.f * pp.f;
    c.a3 = pp.g * pp.H0 * K *
           ((bp.d1 * K - bp.b1) * k.ky * k.ky + (bp.d2 * K - bp.b2) * k.kx * k.kx + r);
    return c;
}

/// Fourier symbol of the linear operator acting on (u, v, eta) e^{i k.x}.
inline Eigen::Matrix3cd sw_symbol(WaveVector k, const BackscatterParams& bp, const PhysicalParams& pp) {
    const double K = k.norm2();
    const double r = pp.C / pp.H0;
    const cplx I(0.0, 1.0);
    Eigen::Matrix3cd L;
    L << -(bp.d1 * K * K - bp.b1 * K) - r, pp.f, -I * pp.g * k.kx,
        -pp.f, -(bp.d2 * K * K - bp.b2 * K) - r, -I * pp.g * k.ky,
        -I * pp.H0 * k.kx, -I * pp.H0 * k.ky, 0.0;
    return L;
}

/// Routh-Hurwitz flags with the zero tests scaled by the coefficient magnitudes.
inline StabilityFlags classify(const DispersionCoeffs& c, const std::array<cplx, 3>& roots) {
    StabilityFlags fl;
    const double h = c.a1 * c.a2 - c.a3;
    const double tol3 = 1e-12 * std::max({1.0, std::abs(c.a1), std::abs(c.a2)});
    const double tolh = 1e-12 * std::max({1.0, std::abs(c.a1 * c.a2), std::abs(c.a3)});
    fl.stable = c.a1 > 0.0 && c.a3 > 0.0 && h > 0.0;
    fl.zero_root = std::abs(c.a3) <= tol3;
    fl.hopf = std::abs(h) <= tolh && c.a2 > 0.0;
    if (!fl.stable) {
        double mr = -INFINITY;
        double mag = 1.0;
        for (const auto& z : roots) {
            mr = std::max(mr, z.real());
            mag = std::max(mag, std::abs(z));
        }
        fl.unstable = mr > 1e-10 * mag || (!fl.zero_root && !fl.hopf);
    }
    if (fl.zero_root || fl.hopf) fl.stable = false;
    return fl;
}

inline DispersionResult sw_dispersion_roots(WaveVector k, const BackscatterParams& bp, const PhysicalParams& pp) {
    DispersionResult res;
    res.k = k;
    res.coeffs = sw_dispersion_coeffs(k, bp, pp);
    res.roots = cubic_roots(res.coeffs.a1, res.coeffs.a2, res.coeffs.a3);
    res.flags = classify(res.coeffs, res.roots);
    return res;
}

/// Roots in the frame moving with velocity c: stationary roots shifted by +i c.k.
inline DispersionResult comoving_roots(WaveVector k, Vec2 c, const BackscatterParams& bp, const PhysicalParams& pp) {
    DispersionResult res = sw_dispersion_roots(k, bp, pp);
    const cplx shift(0.0, c.x * k.kx + c.y * k.ky);
    for (auto& z : res.roots) z += shift;
    std::sort(res.roots.begin(), res.roots.end(), [](auto a, auto b) {
        return a.real() != b.real() ? a.real() > b.real() : a.imag() > b.imag();
    });
    return res;
}

/// Root of smallest magnitude; for hyperviscous models it tends to 0 from below as |k| grows.
inline cplx tail_root(WaveVector k, const BackscatterParams& bp, const PhysicalParams& pp) {
    const auto res = sw_dispersion_roots(k, bp, pp);
    return *std::min_element(res.roots.begin(), res.roots.end(),
                             [](cplx a, cplx b) { return std::abs(a) < std::abs(b); });
}

/// Evaluates sw_dispersion_roots over ks, split across threads; output order equals input order.
inline std::vector<DispersionResult> spectrum_sweep(const std::vector<WaveVector>& ks, const BackscatterParams& bp,
                                                    const PhysicalParams& pp, unsigned threads = 1) {
    std::vector<DispersionResult> out(ks.size());
    threads = std::max(1u, std::min<unsigned>(threads, unsigned(ks.size() / 1024 + 1)));
    auto work = [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) out[i] = sw_dispersion_roots(ks[i], bp, pp);
    };
    if (threads == 1) {
        work(0, ks.size());
        return out;
    }
    std::vector<std::thread> pool;
    const std::size_t chunk = (ks.size() + threads - 1) / threads;
    for (unsigned t = 0; t < threads; ++t) {
        const std::size_t b = std::min(ks.size(), t * chunk);
        const std::size_t e = std::min(ks.size(), b + chunk);
        pool.emplace_back(work, b, e);
    }
    for (auto& th : pool) th.join();
    return out;
}

// ---------------------------------------------------------------- criticality

struct CriticalPoint {
    double C_c = 0.0;
    double k_c = 0.0;
    double omega_c = 0.0;
};

inline CriticalPoint critical_point(const BackscatterParams& bp, const PhysicalParams& pp) {
    if (!bp.is_isotropic()) throw RangeError("critical_point: anisotropic backscatter has no closed-form threshold");
    const double b = bp.b1;
    const double d = bp.d1;
    if (!(b > 0.0 && d > 0.0)) throw RangeError("critical_point: requires b, d > 0");
    CriticalPoint cp;
    cp.C_c = b * b * pp.H0 / (4.0 * d);
    cp.k_c = std::sqrt(b / (2.0 * d));
    cp.omega_c = std::sqrt(pp.g * pp.H0 * cp.k_c * cp.k_c + pp.f * pp.f);
    return cp;
}

enum class KernelKind { Geostrophic, GravityWave, Mass };

struct KernelMode {
    Eigen::Vector3cd E;  // (u, v, eta) amplitude of E e^{i k.x}
    WaveVector k;        // Fourier wave vector of the mode (harmonic times the base direction)
    int harmonic = 0;
    double omega = 0.0;  // frame frequency; 0 for steady modes
    cplx lambda = 0.0;   // eigenvalue of the stationary-frame symbol at criticality
    KernelKind kind = KernelKind::Mass;
};

/// Kernel vectors at criticality. Geostrophic: harmonics j = +-1 of k_dir. Gravity: E_j for the frame
/// frequency omega = sign * omega_c (sign = -1 is the displayed family). Mass: (0, 0, 1) at k = 0.
inline std::vector<KernelMode> kernel_modes(KernelKind kind, WaveVector k_dir, const BackscatterParams& bp,
                                            const PhysicalParams& pp, int sign = -1) {
    const cplx I(0.0, 1.0);
    std::vector<KernelMode> out;
    if (kind == KernelKind::Mass) {
        KernelMode m;
        m.E << 0.0, 0.0, 1.0;
        m.kind = kind;
        out.push_back(m);
        return out;
    }
    const CriticalPoint cp = critical_point(bp, pp);
    const double kn = k_dir.norm();
    if (std::abs(kn - cp.k_c) > 1e-12 * cp.k_c) throw RangeError("kernel_modes: |k| must equal k_c");
    const double kx = k_dir.kx;
    const double ky = k_dir.ky;
    for (int j : {1, -1}) {
        KernelMode m;
        m.kind = kind;
        m.harmonic = j;
        m.k = {j * kx, j * ky};
        if (kind == KernelKind::Geostrophic) {
            m.E << -ky / cp.k_c, kx / cp.k_c, -I * double(j) * pp.f / (pp.g * cp.k_c);
        } else {
            const double s = sign < 0 ? -1.0 : 1.0;
            const double w = cp.omega_c;
            m.E << -s * w * kx + double(j) * I * pp.f * ky, -s * w * ky - double(j) * I * pp.f * kx,
                cp.k_c * cp.k_c * pp.H0;
            m.omega = s * w;
            m.lambda = I * double(j) * s * w;
        }
        out.push_back(m);
    }
    return out;
}

}  // namespace bslab
