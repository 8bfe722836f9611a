#pragma once

#include <array>
#include <cmath>
#include <complex>
#include <string>

#include "errors.hpp"

namespace bslab {

using cplx = std::complex<double>;

inline constexpr double pi = 3.14159265358979323846;

struct Vec2 {
    double x = 0.0;
    double y = 0.0;

    friend Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
    friend Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
    friend Vec2 operator*(double s, Vec2 a) { return {s * a.x, s * a.y}; }
    friend bool operator==(Vec2 a, Vec2 b) = default;
};

inline double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }

/// (a1, a2)^perp = (-a2, a1)
inline constexpr Vec2 perp(Vec2 a) { return {-a.y, a.x}; }

struct WaveVector {
    double kx = 0.0;
    double ky = 0.0;

    double norm2() const { return kx * kx + ky * ky; }
    double norm() const { return std::hypot(kx, ky); }
    Vec2 vec() const { return {kx, ky}; }
    Vec2 perp() const { return {-ky, kx}; }
    bool is_zero() const { return kx == 0.0 && ky == 0.0; }
};

/// Anisotropic backscatter coefficients: b_i negative viscosity, d_i hyperviscosity.
struct BackscatterParams {
    double b1 = 0.0;
    double b2 = 0.0;
    double d1 = 1.0;
    double d2 = 1.0;

    static BackscatterParams isotropic(double b, double d) { return {b, b, d, d}; }

    bool is_isotropic() const { return b1 == b2 && d1 == d2; }
    double b() const { return b1; }
    double d() const { return d1; }

    /// Throws RangeError unless d_i > 0 and b_i >= 0.
    void validate() const {
        if (!(d1 > 0.0 && d2 > 0.0)) throw RangeError("backscatter: d1, d2 must be positive");
        if (!(b1 >= 0.0 && b2 >= 0.0)) throw RangeError("backscatter: b1, b2 must be non-negative");
    }
};

struct PhysicalParams {
    double f = 0.0;
    double g = 9.8;
    double H0 = 0.1;
    double C = 0.0;
    double Q = 0.0;
    double nu_v = 0.0;
    double mu = 0.0;
    double N2 = 0.0;

    void validate() const {
        if (!(g > 0.0)) throw RangeError("physical: g must be positive");
        if (!(H0 > 0.0)) throw RangeError("physical: H0 must be positive");
        if (!(C >= 0.0)) throw RangeError("physical: C must be non-negative");
        if (!(Q >= 0.0)) throw RangeError("physical: Q must be non-negative");
        if (!(nu_v >= 0.0)) throw RangeError("physical: nu_v must be non-negative");
        if (!(mu >= 0.0)) throw RangeError("physical: mu must be non-negative");
    }
};

struct GridSpec {
    int n = 128;
    double dealias_fraction = 2.0 / 3.0;

    void validate() const {
        if (n < 16 || (n & (n - 1)) != 0) throw RangeError("grid: n must be a power of two >= 16");
        if (!(dealias_fraction > 0.0 && dealias_fraction <= 1.0))
            throw RangeError("grid: dealias_fraction must lie in (0, 1]");
    }
};

}  // namespace bslab
