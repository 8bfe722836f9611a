#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "core.hpp"
#include "fft.hpp"

namespace bslab {

/// Pairwise (tree) summation of f(0..n-1); fixed reduction order.
template <class F>
double tree_sum(std::size_t begin, std::size_t end, const F& f) {
    if (end - begin <= 16) {
        double s = 0.0;
        for (std::size_t i = begin; i < end; ++i) s += f(i);
        return s;
    }
    const std::size_t mid = begin + (end - begin) / 2;
    return tree_sum(begin, mid, f) + tree_sum(mid, end, f);
}

/// Signed wavenumber of FFT index i on an n-point axis: 0..n/2-1, -n/2..-1.
inline int wavenumber(int i, int n) { return i < n / 2 ? i : i - n; }
inline int fft_index(int k, int n) { return k >= 0 ? k : k + n; }

struct PhysicalField2D {
    int n = 0;
    std::vector<double> u;
    std::vector<double> v;

    PhysicalField2D() = default;
    explicit PhysicalField2D(int n_) : n(n_), u(std::size_t(n_) * n_, 0.0), v(std::size_t(n_) * n_, 0.0) {}

    double x(int ix) const { return 2.0 * pi * ix / n; }
    double y(int iy) const { return 2.0 * pi * iy / n; }
};

/// Truncated Fourier series of a velocity field on [0, 2pi]^2.
/// Coefficients are analytic: u(x) = sum uhat(k) e^{i k.x}.
/// Norms use the mean measure, ||u||^2 = mean |u|^2 = sum |uhat|^2.
class SpectralField2D {
public:
    SpectralField2D() = default;
    explicit SpectralField2D(int n, bool zero_mean = true)
        : n_(n), zero_mean_(zero_mean), uhat_(std::size_t(n) * n), vhat_(std::size_t(n) * n) {}

    int n() const { return n_; }
    std::size_t size() const { return uhat_.size(); }
    bool zero_mean() const { return zero_mean_; }
    void set_zero_mean(bool z) {
        zero_mean_ = z;
        if (z) {
            uhat_[0] = 0.0;
            vhat_[0] = 0.0;
        }
    }

    std::vector<cplx>& uhat() { return uhat_; }
    std::vector<cplx>& vhat() { return vhat_; }
    const std::vector<cplx>& uhat() const { return uhat_; }
    const std::vector<cplx>& vhat() const { return vhat_; }

    std::size_t index(int kx, int ky) const { return std::size_t(fft_index(ky, n_)) * n_ + fft_index(kx, n_); }
    int kx_of(std::size_t i) const { return wavenumber(int(i % n_), n_); }
    int ky_of(std::size_t i) const { return wavenumber(int(i / n_), n_); }

    cplx& u(int kx, int ky) { return uhat_[index(kx, ky)]; }
    cplx& v(int kx, int ky) { return vhat_[index(kx, ky)]; }
    cplx u(int kx, int ky) const { return uhat_[index(kx, ky)]; }
    cplx v(int kx, int ky) const { return vhat_[index(kx, ky)]; }

    /// max_k |kx uhat + ky vhat| relative to max coefficient magnitude.
    double divergence_residual() const {
        double num = 0.0;
        double den = 0.0;
        for (std::size_t i = 0; i < size(); ++i) {
            num = std::max(num, std::abs(double(kx_of(i)) * uhat_[i] + double(ky_of(i)) * vhat_[i]));
            den = std::max({den, std::abs(uhat_[i]), std::abs(vhat_[i])});
        }
        return den > 0.0 ? num / den : 0.0;
    }

    SpectralField2D& operator+=(const SpectralField2D& o) {
        check_same(o);
        for (std::size_t i = 0; i < size(); ++i) {
            uhat_[i] += o.uhat_[i];
            vhat_[i] += o.vhat_[i];
        }
        return *this;
    }

    SpectralField2D& operator*=(double s) {
        for (std::size_t i = 0; i < size(); ++i) {
            uhat_[i] *= s;
            vhat_[i] *= s;
        }
        return *this;
    }

    friend SpectralField2D operator+(SpectralField2D a, const SpectralField2D& b) { return a += b; }
    friend SpectralField2D operator*(double s, SpectralField2D a) { return a *= s; }

    void check_same(const SpectralField2D& o) const {
        if (o.n_ != n_) throw SizeMismatch("spectral fields of different resolution");
    }

private:
    int n_ = 0;
    bool zero_mean_ = true;
    std::vector<cplx> uhat_;
    std::vector<cplx> vhat_;
};

// ---------------------------------------------------------------- transforms

inline PhysicalField2D transform_to_physical(const SpectralField2D& field, Fft2D& fft) {
    if (fft.n() != field.n()) throw SizeMismatch("transform plan and field differ in n");
    PhysicalField2D out(field.n());
    fft.backward_real_pair(field.uhat().data(), field.vhat().data(), out.u.data(), out.v.data());
    return out;
}

inline PhysicalField2D transform_to_physical(const SpectralField2D& field) {
    Fft2D fft(field.n());
    return transform_to_physical(field, fft);
}

/// Raw transform; the result is divergence-free only if the samples are.
inline SpectralField2D transform_to_spectral(const PhysicalField2D& samples, Fft2D& fft, bool zero_mean = false) {
    if (fft.n() != samples.n) throw SizeMismatch("transform plan and samples differ in n");
    const std::size_t nn = std::size_t(samples.n) * samples.n;
    if (samples.u.size() != nn || samples.v.size() != nn) throw SizeMismatch("sample arrays do not match n*n");
    SpectralField2D out(samples.n, false);
    fft.forward_real_pair(samples.u.data(), samples.v.data(), out.uhat().data(), out.vhat().data());
    out.set_zero_mean(zero_mean);
    return out;
}

inline SpectralField2D transform_to_spectral(const PhysicalField2D& samples, bool zero_mean = false) {
    Fft2D fft(samples.n);
    return transform_to_spectral(samples, fft, zero_mean);
}

// ---------------------------------------------------------------- norms

/// <a, b> = mean of a.b over the torus.
inline double inner(const SpectralField2D& a, const SpectralField2D& b) {
    a.check_same(b);
    return tree_sum(0, a.size(), [&](std::size_t i) {
        return std::real(std::conj(a.uhat()[i]) * b.uhat()[i] + std::conj(a.vhat()[i]) * b.vhat()[i]);
    });
}

/// sum |k|^{2p} (|uhat|^2 + |vhat|^2)
inline double sobolev_seminorm_sq(const SpectralField2D& a, int p) {
    return tree_sum(0, a.size(), [&](std::size_t i) {
        const double k2 = double(a.kx_of(i)) * a.kx_of(i) + double(a.ky_of(i)) * a.ky_of(i);
        return std::pow(k2, p) * (std::norm(a.uhat()[i]) + std::norm(a.vhat()[i]));
    });
}

inline double l2_norm_sq(const SpectralField2D& a) { return sobolev_seminorm_sq(a, 0); }
inline double l2_norm(const SpectralField2D& a) { return std::sqrt(l2_norm_sq(a)); }
inline double energy(const SpectralField2D& a) { return 0.5 * l2_norm_sq(a); }
inline double grad_norm_sq(const SpectralField2D& a) { return sobolev_seminorm_sq(a, 1); }
inline double lap_norm_sq(const SpectralField2D& a) { return sobolev_seminorm_sq(a, 2); }
inline double h1_norm(const SpectralField2D& a) { return std::sqrt(l2_norm_sq(a) + grad_norm_sq(a)); }
inline double h2_norm(const SpectralField2D& a) {
    return std::sqrt(l2_norm_sq(a) + grad_norm_sq(a) + lap_norm_sq(a));
}

// ---------------------------------------------------------------- constructors

/// Mode-wise Leray projection uhat <- (I - k k^T/|k|^2) uhat; mean mode untouched.
inline SpectralField2D leray_project(SpectralField2D f) {
    for (std::size_t i = 0; i < f.size(); ++i) {
        const double kx = f.kx_of(i);
        const double ky = f.ky_of(i);
        const double k2 = kx * kx + ky * ky;
        if (k2 == 0.0) continue;
        const cplx dv = (kx * f.uhat()[i] + ky * f.vhat()[i]) / k2;
        f.uhat()[i] -= kx * dv;
        f.vhat()[i] -= ky * dv;
    }
    return f;
}

/// a1 e1 + a2 e2 + a3 e3 + a4 e4 with e1 = (cos y, 0), e2 = (sin y, 0), e3 = (0, cos x), e4 = (0, sin x).
inline SpectralField2D shear_modes(int n, const std::array<double, 4>& a) {
    SpectralField2D f(n);
    f.u(0, 1) = cplx(a[0], -a[1]) * 0.5;
    f.u(0, -1) = cplx(a[0], a[1]) * 0.5;
    f.v(1, 0) = cplx(a[2], -a[3]) * 0.5;
    f.v(-1, 0) = cplx(a[2], a[3]) * 0.5;
    return f;
}

inline SpectralField2D shear_mode(int n, int j) {
    std::array<double, 4> a{};
    a.at(std::size_t(j - 1)) = 1.0;
    return shear_modes(n, a);
}

/// Coefficients (a1..a4) of the projection onto span{e1..e4}.
inline std::array<double, 4> shear_amplitudes(const SpectralField2D& f) {
    const cplx u1 = f.u(0, 1);
    const cplx v1 = f.v(1, 0);
    return {2.0 * u1.real(), -2.0 * u1.imag(), 2.0 * v1.real(), -2.0 * v1.imag()};
}

namespace detail {

// Standard normal variates from the raw mt19937_64 stream (portable across libraries).
class NormalStream {
public:
    explicit NormalStream(std::uint64_t seed) : rng_(seed) {}

    double next() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = 0.0;
        do {
            u1 = uniform();
        } while (u1 <= 0.0);
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        spare_ = r * std::sin(2.0 * pi * u2);
        has_spare_ = true;
        return r * std::cos(2.0 * pi * u2);
    }

private:
    double uniform() { return double(rng_() >> 11) * 0x1.0p-53; }

    std::mt19937_64 rng_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace detail

/// Random zero-mean divergence-free field with modes 0 < |k| <= kmax and unit H2 norm.
/// kmax <= 0 selects n/8.
inline SpectralField2D random_field(int n, std::uint64_t seed, double kmax = 0.0) {
    if (kmax <= 0.0) kmax = n / 8.0;
    detail::NormalStream normal(seed);
    PhysicalField2D samples(n);
    for (auto& x : samples.u) x = normal.next();
    for (auto& x : samples.v) x = normal.next();
    SpectralField2D f = transform_to_spectral(samples, true);
    for (std::size_t i = 0; i < f.size(); ++i) {
        const double k2 = double(f.kx_of(i)) * f.kx_of(i) + double(f.ky_of(i)) * f.ky_of(i);
        if (k2 > kmax * kmax) {
            f.uhat()[i] = 0.0;
            f.vhat()[i] = 0.0;
        }
    }
    f = leray_project(std::move(f));
    const double h2 = h2_norm(f);
    if (h2 > 0.0) f *= 1.0 / h2;
    return f;
}

}  // namespace bslab
