#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "bslab/core.hpp"
#include "bslab/spectral_field.hpp"

using namespace bslab;

TEST(Perp, Examples) {
    EXPECT_EQ(perp({1.0, 0.0}), (Vec2{0.0, 1.0}));
    EXPECT_EQ(perp({0.0, 0.0}), (Vec2{0.0, 0.0}));
    EXPECT_EQ(perp({3.0, -2.0}), (Vec2{2.0, 3.0}));
}

TEST(Perp, TwiceIsMinusIdentity) {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> U(-10.0, 10.0);
    for (int i = 0; i < 200; ++i) {
        const Vec2 a{U(rng), U(rng)};
        const Vec2 b = perp(perp(a));
        EXPECT_EQ(b.x, -a.x);
        EXPECT_EQ(b.y, -a.y);
    }
}

TEST(WaveVector, NormAndPerp) {
    const WaveVector k{3.0, 4.0};
    EXPECT_DOUBLE_EQ(k.norm(), 5.0);
    EXPECT_DOUBLE_EQ(k.norm2(), 25.0);
    EXPECT_EQ(k.perp(), (Vec2{-4.0, 3.0}));
    EXPECT_TRUE(WaveVector{}.is_zero());
}

TEST(Params, BackscatterInvariants) {
    EXPECT_TRUE(BackscatterParams::isotropic(2.0, 1.0).is_isotropic());
    EXPECT_FALSE((BackscatterParams{1.5, 2.2, 1.0, 1.04}).is_isotropic());
    EXPECT_FALSE((BackscatterParams{2.0, 2.0, 1.0, 1.04}).is_isotropic());
    EXPECT_NO_THROW((BackscatterParams{0.0, 0.0, 1.0, 1.0}).validate());
    EXPECT_THROW((BackscatterParams{1.0, 1.0, 0.0, 1.0}).validate(), RangeError);
    EXPECT_THROW((BackscatterParams{1.0, 1.0, 1.0, -1.0}).validate(), RangeError);
    EXPECT_THROW((BackscatterParams{-1.0, 1.0, 1.0, 1.0}).validate(), RangeError);
}

TEST(Params, PhysicalInvariants) {
    PhysicalParams p;
    EXPECT_NO_THROW(p.validate());
    for (auto bad : {&PhysicalParams::g, &PhysicalParams::H0}) {
        PhysicalParams q;
        q.*bad = 0.0;
        EXPECT_THROW(q.validate(), RangeError);
    }
    for (auto bad : {&PhysicalParams::C, &PhysicalParams::Q, &PhysicalParams::nu_v, &PhysicalParams::mu}) {
        PhysicalParams q;
        q.*bad = -1e-3;
        EXPECT_THROW(q.validate(), RangeError);
    }
}

TEST(Params, GridSpec) {
    EXPECT_NO_THROW((GridSpec{16, 2.0 / 3.0}).validate());
    EXPECT_NO_THROW((GridSpec{128, 1.0}).validate());
    EXPECT_THROW((GridSpec{8, 2.0 / 3.0}).validate(), RangeError);
    EXPECT_THROW((GridSpec{48, 2.0 / 3.0}).validate(), RangeError);
    EXPECT_THROW((GridSpec{32, 0.0}).validate(), RangeError);
    EXPECT_THROW((GridSpec{32, 1.5}).validate(), RangeError);
}

namespace {

PhysicalField2D random_samples(int n, unsigned seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> N(0.0, 1.0);
    PhysicalField2D s(n);
    for (auto& x : s.u) x = N(rng);
    for (auto& x : s.v) x = N(rng);
    return s;
}

double max_abs(const std::vector<double>& a) {
    double m = 0.0;
    for (double x : a) m = std::max(m, std::abs(x));
    return m;
}

}  // namespace

TEST(Transform, SingleCosineMode) {
    const int n = 32;
    PhysicalField2D s(n);
    for (int iy = 0; iy < n; ++iy)
        for (int ix = 0; ix < n; ++ix) s.u[std::size_t(iy) * n + ix] = std::cos(s.y(iy));
    const SpectralField2D f = transform_to_spectral(s);
    for (std::size_t i = 0; i < f.size(); ++i) {
        const bool target = f.kx_of(i) == 0 && std::abs(f.ky_of(i)) == 1;
        EXPECT_NEAR(std::abs(f.uhat()[i] - (target ? 0.5 : 0.0)), 0.0, 1e-15);
        EXPECT_NEAR(std::abs(f.vhat()[i]), 0.0, 1e-15);
    }
}

TEST(Transform, RoundTrip) {
    for (int n : {16, 32, 64}) {
        const PhysicalField2D s = random_samples(n, unsigned(n));
        const PhysicalField2D r = transform_to_physical(transform_to_spectral(s));
        double err = 0.0;
        for (std::size_t i = 0; i < s.u.size(); ++i)
            err = std::max({err, std::abs(r.u[i] - s.u[i]), std::abs(r.v[i] - s.v[i])});
        EXPECT_LE(err, 1e-12 * std::max(max_abs(s.u), max_abs(s.v)));
    }
}

TEST(Transform, Parseval) {
    const int n = 64;
    const PhysicalField2D s = random_samples(n, 11);
    double mean = 0.0;
    for (std::size_t i = 0; i < s.u.size(); ++i) mean += s.u[i] * s.u[i] + s.v[i] * s.v[i];
    mean /= double(s.u.size());
    const double spec = l2_norm_sq(transform_to_spectral(s));
    EXPECT_NEAR(spec, mean, 1e-12 * mean);
}

TEST(Transform, SizeMismatch) {
    Fft2D fft(32);
    EXPECT_THROW(transform_to_physical(SpectralField2D(16), fft), SizeMismatch);
    PhysicalField2D s(32);
    s.u.resize(10);
    EXPECT_THROW(transform_to_spectral(s, fft), SizeMismatch);
}

TEST(SpectralField, ConjugateSymmetryOfRealData) {
    const int n = 32;
    const SpectralField2D f = transform_to_spectral(random_samples(n, 5));
    for (std::size_t i = 0; i < f.size(); ++i) {
        const int kx = f.kx_of(i);
        const int ky = f.ky_of(i);
        if (kx == -n / 2 || ky == -n / 2) continue;
        EXPECT_NEAR(std::abs(f.u(-kx, -ky) - std::conj(f.u(kx, ky))), 0.0, 1e-14);
        EXPECT_NEAR(std::abs(f.v(-kx, -ky) - std::conj(f.v(kx, ky))), 0.0, 1e-14);
    }
}

TEST(SpectralField, ZeroMeanFlag) {
    SpectralField2D f = transform_to_spectral(random_samples(16, 2));
    EXPECT_NE(std::abs(f.u(0, 0)), 0.0);
    f.set_zero_mean(true);
    EXPECT_EQ(f.u(0, 0), cplx(0.0));
    EXPECT_EQ(f.v(0, 0), cplx(0.0));
}

TEST(SpectralField, ConstructorsAreDivergenceFree) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const SpectralField2D f = random_field(32, seed);
        EXPECT_LE(f.divergence_residual(), 1e-12);
        EXPECT_EQ(f.u(0, 0), cplx(0.0));
        EXPECT_NEAR(h2_norm(f), 1.0, 1e-12);
    }
    EXPECT_LE(shear_modes(32, {0.3, -1.0, 2.0, 0.7}).divergence_residual(), 1e-12);
    const SpectralField2D p = leray_project(transform_to_spectral(random_samples(32, 9)));
    EXPECT_LE(p.divergence_residual(), 1e-12);
}

TEST(SpectralField, LerayRemovesGradients) {
    const int n = 32;
    PhysicalField2D s(n);
    // grad of sin(2x + y)
    for (int iy = 0; iy < n; ++iy)
        for (int ix = 0; ix < n; ++ix) {
            const double c = std::cos(2.0 * s.x(ix) + s.y(iy));
            s.u[std::size_t(iy) * n + ix] = 2.0 * c;
            s.v[std::size_t(iy) * n + ix] = c;
        }
    EXPECT_LE(l2_norm(leray_project(transform_to_spectral(s))), 1e-14);
}

TEST(SpectralField, ShearAmplitudesRoundTrip) {
    const std::array<double, 4> a{0.3, -1.0, 2.0, 0.7};
    const auto b = shear_amplitudes(shear_modes(16, a));
    for (int j = 0; j < 4; ++j) EXPECT_NEAR(b[std::size_t(j)], a[std::size_t(j)], 1e-15);
    // e1 = (cos y, 0) has mean square 1/2
    EXPECT_NEAR(l2_norm_sq(shear_mode(16, 1)), 0.5, 1e-15);
}

TEST(SpectralField, SobolevNorms) {
    const SpectralField2D f = shear_modes(32, {1.0, 0.0, 0.0, 0.0});
    EXPECT_NEAR(grad_norm_sq(f), 0.5, 1e-15);
    EXPECT_NEAR(lap_norm_sq(f), 0.5, 1e-15);
    SpectralField2D g(32);
    g.u(0, 2) = 0.5;
    g.u(0, -2) = 0.5;
    EXPECT_NEAR(grad_norm_sq(g), 4.0 * 0.5, 1e-15);
    EXPECT_NEAR(lap_norm_sq(g), 16.0 * 0.5, 1e-15);
}
