#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "bslab/explicit_solutions.hpp"

using namespace bslab;

namespace {

const BackscatterParams loci_mixed{1.5, 2.2, 1.0, 1.04};

PhysicalParams coriolis(double f) {
    PhysicalParams p;
    p.f = f;
    return p;
}

// plain bisection on omega tan(omega H) - beta over (0, pi/(2H))
double bisect_frequency(double beta, double H) {
    double lo = 0.0;
    double hi = pi / (2.0 * H) * (1.0 - 1e-15);
    for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (lo + hi);
        (mid * std::tan(mid * H) < beta ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

}  // namespace

TEST(EulerPlaneWave, RateExamples) {
    EXPECT_NEAR(euler_plane_wave(1.0, {0.0, 1.0}, 0.0015, 0.001, 0.0).lambda, 5e-4, 1e-18);
    EXPECT_EQ(euler_plane_wave(1.0, {0.0, 1.0}, 0.7, 0.7, 0.0).lambda, 0.0);
    const double b = 0.8, d = 0.3;
    EXPECT_NEAR(euler_plane_wave(1.0, {0.0, 2.0}, b, d, 0.0).lambda, 4.0 * b - 16.0 * d, 1e-15);
    EXPECT_THROW(euler_plane_wave(1.0, {0.0, 0.0}, b, d, 0.0), RangeError);
}

TEST(EulerPlaneWave, ResidualVanishesForAnyParameters) {
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> U(-2.0, 2.0);
    for (int i = 0; i < 20; ++i) {
        const WaveVector k{double(int(3 * U(rng))), double(int(3 * U(rng))) + 1.0};
        const auto w = euler_plane_wave(U(rng), k, std::abs(U(rng)), 0.1 + std::abs(U(rng)), U(rng), U(rng));
        EXPECT_LE(verify_residual(w, ResidualGrid::plane(32), 0.3), 1e-10);
    }
}

TEST(Primitive, FrequencyMatchesBisection) {
    EXPECT_NEAR(primitive_frequency(1.0, 1.0), 0.860333589019379762, 1e-15);
    for (double beta : {0.01, 0.5, 1.0, 4.0, 100.0})
        for (double H : {0.3, 1.0, 2.5}) EXPECT_NEAR(primitive_frequency(beta, H), bisect_frequency(beta, H), 1e-13);
    EXPECT_EQ(primitive_frequency(0.0, 1.0), 0.0);
    EXPECT_THROW(primitive_frequency(-1.0, 1.0), RangeError);
    EXPECT_THROW(primitive_frequency(1.0, 0.0), RangeError);
}

TEST(Primitive, RateAndResidual) {
    const auto m = primitive_mode(1.0, 1.0, 1.0, 1.0, 3.0, 1.0, 1.0);
    const double w = bisect_frequency(1.0, 1.0);
    EXPECT_NEAR(m.lambda, 3.0 - 1.0 - w * w, 1e-13);
    EXPECT_LE(verify_residual(m, m.grid(32, 9), 0.5), 1e-10);
}

TEST(SwMonochromatic, Rejections) {
    const PhysicalParams pp = coriolis(0.3);
    const auto loci = sw_steady_loci(loci_mixed, pp, -0.5);
    ASSERT_FALSE(loci.empty());
    EXPECT_NO_THROW(sw_monochromatic(loci.front(), 1.0, -0.5, 0.0, 0.0, loci_mixed, pp));
    // amplitude relation broken
    EXPECT_THROW(sw_monochromatic(loci.front(), 1.0, 0.5, 0.0, 0.0, loci_mixed, pp), ComplianceError);
    // relation holds off the marginal curve but alpha2 lambda != 0
    const WaveVector off{0.3 * loci.front().kx, 0.3 * loci.front().ky};
    const double a2 = 1.0 + off.kx * off.ky * ((loci_mixed.d1 - loci_mixed.d2) * off.norm2() + loci_mixed.b2 - loci_mixed.b1) / pp.f;
    EXPECT_NEAR(sw_amplitude_relation(off, 1.0, a2, loci_mixed, pp.f), 0.0, 1e-14);
    EXPECT_THROW(sw_monochromatic(off, 1.0, a2, 0.0, 0.0, loci_mixed, pp), ComplianceError);

    PhysicalParams q = pp;
    q.Q = 0.1;
    EXPECT_THROW(sw_monochromatic(loci.front(), 1.0, -0.5, 0.0, 0.0, loci_mixed, q), RangeError);
    PhysicalParams c = pp;
    c.C = 0.05;
    EXPECT_THROW(sw_monochromatic(loci.front(), 1.0, -0.5, 0.0, 0.0, loci_mixed, c), ComplianceError);
    EXPECT_THROW(sw_monochromatic(loci.front(), 1.0, -0.5, 0.0, -pp.H0, loci_mixed, pp), DepthViolation);
}

TEST(SwMonochromatic, IsotropicGeostrophicWithDrag) {
    // isotropic backscatter with alpha1 = alpha2, or f = 0 with alpha2 = 0
    const BackscatterParams iso = BackscatterParams::isotropic(2.0, 1.0);
    PhysicalParams pp = coriolis(0.3);
    const auto w = sw_monochromatic({1.0, 1.0}, 1.0, 1.0, 0.0, 0.0, iso, pp);
    EXPECT_EQ(w.lambda, 0.0);
    EXPECT_LE(verify_residual(w, ResidualGrid::plane(32), 0.0), 1e-12);
    pp.f = 0.0;
    pp.C = 0.02;
    const auto dr = sw_monochromatic({1.0, 0.0}, 0.4, 0.0, 0.0, 0.05, iso, pp);
    EXPECT_NEAR(dr.lambda, 1.0 - 0.02 / 0.15, 1e-15);
    EXPECT_LE(verify_residual(dr, ResidualGrid::plane(32), 2.0), 1e-10);
}

TEST(Loci, SteadyPointsLieOnBothCurves) {
    for (double C : {0.0, 0.05, 0.11}) {
        PhysicalParams pp = coriolis(0.3);
        pp.C = C;
        for (double ratio : {-0.5, 0.0}) {
            const auto pts = sw_steady_loci(loci_mixed, pp, ratio);
            if (C < 0.1) {
                EXPECT_FALSE(pts.empty());
            }
            for (const auto& k : pts) {
                EXPECT_NEAR(sw_plane_rate(k, loci_mixed) - C / pp.H0, 0.0, 1e-11);
                EXPECT_NEAR(sw_amplitude_relation(k, 1.0, ratio, loci_mixed, pp.f), 0.0, 1e-11);
            }
        }
    }
}

TEST(Loci, MapFlagsSignChanges) {
    std::vector<double> ax;
    for (int i = 0; i < 81; ++i) ax.push_back(-2.0 + 4.0 * i / 80);
    const auto map = sw_loci_map(ax, ax, loci_mixed, coriolis(0.3), -0.5);
    int marginal = 0, steady = 0;
    for (int iy = 0; iy + 1 < map.ny; ++iy)
        for (int ix = 0; ix + 1 < map.nx; ++ix) {
            const auto& c = map.at(ix, iy);
            const bool flip = (c.lambda > 0) != (map.at(ix + 1, iy).lambda > 0) ||
                              (c.lambda > 0) != (map.at(ix, iy + 1).lambda > 0);
            if (!(c.kx == 0.0 && c.ky == 0.0)) {
                EXPECT_EQ(c.on_marginal, flip);
            }
            marginal += c.on_marginal;
            steady += c.steady;
        }
    EXPECT_GT(marginal, 0);
    EXPECT_GT(steady, 0);
    // every located steady point has a flagged cell within two grid spacings
    for (const auto& k : sw_steady_loci(loci_mixed, coriolis(0.3), -0.5)) {
        bool near = false;
        for (const auto& c : map.cells)
            if (c.steady && std::hypot(c.kx - k.kx, c.ky - k.ky) < 0.11) near = true;
        EXPECT_TRUE(near) << k.kx << " " << k.ky;
    }
}

TEST(Superposition, Radial) {
    const auto s = radial_superpose({euler_plane_wave(1.0, {1.0, 2.0}, 5.0, 1.0, 3.0),
                                     euler_plane_wave(0.5, {2.0, 4.0}, 5.0, 1.0, 3.0, 0.3)});
    EXPECT_LE(verify_residual(s, ResidualGrid::plane(32), 0.1), 1e-10);
    EXPECT_THROW(radial_superpose({euler_plane_wave(1.0, {1.0, 0.0}, 1.0, 1.0, 0.0),
                                   euler_plane_wave(1.0, {0.0, 1.0}, 1.0, 1.0, 0.0)}),
                 RangeError);
    EXPECT_THROW(radial_superpose({euler_plane_wave(1.0, {1.0, 0.0}, 1.0, 1.0, 0.0),
                                   euler_plane_wave(1.0, {-1.0, 0.0}, 1.0, 1.0, 0.0)}),
                 RangeError);
    EXPECT_THROW(radial_superpose({}), RangeError);
}

TEST(Superposition, AngularOnCircle) {
    const BackscatterParams bp{1.1, 2.2, 1.0, 1.04};
    const auto samples = circle_samples(
        1.2, 12, [](double phi) { return std::cos(2.0 * phi) + 0.3; }, [](double phi) { return 0.5 * phi; });
    const auto s = angular_superpose(samples, bp, coriolis(0.3));
    EXPECT_EQ(s.components.size(), 12u);
    EXPECT_LE(verify_residual(s, ResidualGrid::plane(32), 0.2), 1e-10);
    EXPECT_THROW(angular_superpose({{{1.0, 0.0}, 1.0, 0.0}, {{0.0, 2.0}, 1.0, 0.0}}, bp, coriolis(0.3)), RangeError);
    EXPECT_THROW(angular_superpose({{{0.6, 0.8}, 1.0, 0.0}}, bp, coriolis(0.0)), ComplianceError);
}

TEST(Kolmogorov, PolynomialIsMinusDeterminant) {
    PhysicalParams pp = coriolis(1.0);
    pp.N2 = 1.0;
    pp.nu_v = 0.2;
    pp.mu = 0.1;
    const auto c = kolmogorov_polynomial(0.6, 1.0, loci_mixed, pp);
    for (const cplx z : {cplx(0.0), cplx(1.0, 0.5), cplx(-2.0, 3.0)}) {
        const cplx poly = ((c[0] * z + c[1]) * z + c[2]) * z + c[3];
        EXPECT_LE(std::abs(poly + kolmogorov_matrix(0.6, 1.0, z, loci_mixed, pp).determinant()), 1e-12 * (1.0 + std::abs(poly)));
    }
}

TEST(Kolmogorov, ModesAreNullVectorsWithSmallResidual) {
    PhysicalParams pp = coriolis(1.0);
    pp.N2 = 1.0;
    pp.nu_v = 0.2;
    pp.mu = 0.1;
    const auto modes = kolmogorov_solve(0.6, 1.0, loci_mixed, pp);
    EXPECT_EQ(modes.size(), 3u);
    for (const auto& md : modes) {
        EXPECT_LE((md.matrix() * md.coeffs).norm(), 1e-10);
        EXPECT_NEAR(md.coeffs.norm(), 1.0, 1e-12);
        EXPECT_LE(verify_residual(md, ResidualGrid::box(16), 0.3), 1e-9);
    }
    EXPECT_THROW(kolmogorov_solve(0.0, 0.0, loci_mixed, pp), RangeError);
}

TEST(IGW, SpecialModeRateAndNullSpace) {
    const BackscatterParams bp = BackscatterParams::isotropic(2.2, 1.04);
    const PhysicalParams pp = coriolis(0.3);
    const auto md = igw_special(1.0, 1, bp, pp);
    EXPECT_NEAR(md.lambda, 1.16, 1e-14);
    EXPECT_NEAR(md.amps[0], -0.3, 1e-15);
    const auto A = igw_assemble(md.k, md.m, md.omega, md.lambda, bp, pp);
    Eigen::Matrix<double, 6, 1> a;
    for (int j = 0; j < 6; ++j) a[j] = md.amps[std::size_t(j)];
    EXPECT_LE((A * a).norm(), 1e-12);
    EXPECT_FALSE(igw_modes(md.k, md.m, md.omega, md.lambda, bp, pp).empty());
    EXPECT_TRUE(igw_modes(md.k, md.m, 0.77, md.lambda, bp, pp).empty());
    EXPECT_LE(verify_residual(md, ResidualGrid::box(16), 0.4), 1e-10);
    EXPECT_THROW(igw_special(1.0, 1, loci_mixed, pp), RangeError);
    EXPECT_THROW(igw_special(1.0, 1, bp, coriolis(0.0)), RangeError);
}

TEST(IGW, NullSpaceModesHaveSmallResidual) {
    const BackscatterParams bp = BackscatterParams::isotropic(2.2, 1.04);
    PhysicalParams pp = coriolis(0.5);
    pp.N2 = 2.0;
    for (int sign : {1, -1}) {
        const auto sp = igw_special(0.8, sign, bp, pp);
        const auto modes = igw_modes(0.0, 0.8, sp.omega, sp.lambda, bp, pp);
        ASSERT_FALSE(modes.empty());
        for (const auto& md : modes) EXPECT_LE(verify_residual(md, ResidualGrid::box(16), 0.2), 1e-9);
    }
}

TEST(Parallel, ResidualAtSeveralTimes) {
    PhysicalParams pp;
    pp.N2 = 1.0;
    pp.nu_v = 0.1;
    pp.mu = 0.05;
    const auto pf = parallel_flow({{{1.0, 0.0}, 1.0, 0.7, 0.8, 0.6}, {{0.0, 2.0}, 0.9, 0.6, 0.5, 0.7}}, 0.0, pp);
    for (double t : {0.0, 0.5, 3.0}) EXPECT_LE(verify_residual(pf, ResidualGrid::box(16), t), 1e-10) << t;
    const auto mean = parallel_flow({{{0.0, 0.0}, 1.0, 0.0, 0.5, 0.0}}, 0.3, pp);
    EXPECT_LE(verify_residual(mean, ResidualGrid::box(16), 1.0), 1e-10);
}

TEST(Catalog, AllResidualsSmall) {
    const auto cat = reference_catalog();
    EXPECT_EQ(cat.size(), 10u);
    for (const auto& f : cat) {
        for (double t : {0.0, 0.7}) EXPECT_LE(verify_residual(f, f.grid, t), 1e-8) << f.name;
        EXPECT_LE(verify_residual(f, f.grid, 0.7, true), 1e-6) << f.name;
    }
}

TEST(Catalog, CorruptedTermsAreDetected) {
    for (const auto& f : reference_catalog()) {
        const FlowSnapshot s = f.snapshot(0.0);
        for (int v = 0; v < n_vars; ++v) {
            for (std::size_t i = 0; i < s.terms[std::size_t(v)].size(); ++i) {
                const auto& term = s.terms[std::size_t(v)][i];
                if (term.k.x == 0.0 && term.k.y == 0.0 && term.k.z == 0.0) continue;
                const auto bad = s.corrupted(Var(v), i, 1.01);
                EXPECT_GT(snapshot_residual(bad, f.params, f.grid).relative, 1e-3)
                    << f.name << " var " << v << " term " << i;
            }
        }
    }
}
