#pragma once

#include <Eigen/Dense>
#include <Eigen/SVD>
#include <boost/math/tools/roots.hpp>
#include <unsupported/Eigen/MatrixFunctions>

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "core.hpp"
#include "dispersion.hpp"
#include "polynomial.hpp"
#include "residual.hpp"

namespace bslab {

namespace detail {

inline WaveTerm wave(double amp, double rate, Vec3 k, double phase = 0.0, double phase_rate = 0.0) {
    return {amp, rate * amp, k, phase, phase_rate};
}

/// Real part of c e^{lambda t} cos(k.x + phase) as a wave term.
inline WaveTerm modal(cplx c, cplx lambda, double t, Vec3 k, double phase = 0.0) {
    const cplx a = c * std::exp(lambda * t);
    return {a.real(), (lambda * a).real(), k, phase, 0.0};
}

inline bool negligible(double v, double scale) { return std::abs(v) <= 1e-12 * std::max(1.0, scale); }

inline Vec3 horizontal(WaveVector k) { return {k.kx, k.ky, 0.0}; }

}  // namespace detail

// ---------------------------------------------------------------- plane waves

/// Pressure of a plane wave: amp e^{lambda t} sin(k.x + tau).
struct PressureProfile {
    std::string form = "none";
    double amp = 0.0;
};

struct PlaneWaveFlow {
    Model model = Model::Euler2D;
    WaveVector k;
    double alpha1 = 0.0;
    double alpha2 = 0.0;
    double tau = 0.0;
    double s = 0.0;
    double lambda = 0.0;
    PressureProfile pressure;
    BackscatterParams bp;
    PhysicalParams pp;

    /// Velocity vector multiplying alpha1 e^{lambda t} cos(k.x + tau).
    Vec2 direction() const {
        if (model == Model::Euler2D) return (1.0 / k.norm()) * Vec2{k.ky, -k.kx};
        return k.perp();
    }

    ModelParams model_params() const {
        ModelParams mp;
        mp.model = model;
        mp.bp = bp;
        mp.pp = pp;
        return mp;
    }

    FlowSnapshot snapshot(double t) const {
        FlowSnapshot out;
        out.t = t;
        const double e = std::exp(lambda * t);
        const Vec3 kv = detail::horizontal(k);
        const Vec2 dir = direction();
        if (alpha1 * dir.x != 0.0) out[Var::U].push_back(detail::wave(alpha1 * e * dir.x, lambda, kv, tau));
        if (alpha1 * dir.y != 0.0) out[Var::V].push_back(detail::wave(alpha1 * e * dir.y, lambda, kv, tau));
        if (pressure.amp != 0.0) out[Var::P].push_back(detail::wave(pressure.amp * e, lambda, kv, tau - pi / 2));
        if (model == Model::ShallowWater) {
            if (alpha2 != 0.0) out[Var::Eta].push_back(detail::wave(alpha2 * pp.f / pp.g, 0.0, kv, tau - pi / 2));
            if (s != 0.0) out[Var::Eta].push_back(detail::wave(s, 0.0, {}));
        }
        return out;
    }
};

/// A e^{lambda t} cos(k.x + tau) (ky, -kx)/|k| with lambda = b|k|^2 - d|k|^4 and pressure
/// -f A e^{lambda t} sin(k.x + tau)/|k|.
inline PlaneWaveFlow euler_plane_wave(double A, WaveVector k, double b, double d, double f, double tau = 0.0) {
    if (k.is_zero()) throw RangeError("euler_plane_wave: zero wave vector");
    PlaneWaveFlow w;
    w.model = Model::Euler2D;
    w.k = k;
    w.alpha1 = A;
    w.tau = tau;
    w.lambda = backscatter_symbol(k.norm(), b, d);
    w.bp = BackscatterParams::isotropic(b, d);
    w.pp.f = f;
    if (f != 0.0) w.pressure = {"sin", -f * A / k.norm()};
    return w;
}

/// Growth rate (b1 - d1|k|^2) ky^2 + (b2 - d2|k|^2) kx^2 of the monochromatic shallow water flow.
inline double sw_plane_rate(WaveVector k, const BackscatterParams& bp) {
    const double K = k.norm2();
    return (bp.b1 - bp.d1 * K) * k.ky * k.ky + (bp.b2 - bp.d2 * K) * k.kx * k.kx;
}

/// Residual (alpha2 - alpha1) f - alpha1 kx ky ((d1 - d2)|k|^2 + b2 - b1) of the amplitude relation.
inline double sw_amplitude_relation(WaveVector k, double alpha1, double alpha2, const BackscatterParams& bp, double f) {
    return (alpha2 - alpha1) * f - alpha1 * k.kx * k.ky * ((bp.d1 - bp.d2) * k.norm2() + bp.b2 - bp.b1);
}

/// alpha1 e^{lambda t} cos(k.x + tau) k_perp, eta = alpha2 (f/g) sin(k.x + tau) + s.
/// A linear drag C is admitted for alpha2 = 0 and lowers the rate by C/(H0 + s); Q must vanish.
inline PlaneWaveFlow sw_monochromatic(WaveVector k, double alpha1, double alpha2, double tau, double s,
                                      const BackscatterParams& bp, const PhysicalParams& pp) {
    if (k.is_zero()) throw RangeError("sw_monochromatic: zero wave vector");
    if (pp.Q != 0.0) throw RangeError("sw_monochromatic: requires Q = 0");
    if (pp.C != 0.0 && alpha2 != 0.0) throw ComplianceError("sw_monochromatic: linear drag requires alpha2 = 0");
    if (!(pp.H0 + s > 0.0)) throw DepthViolation("sw_monochromatic: H0 + s must be positive");

    PlaneWaveFlow w;
    w.model = Model::ShallowWater;
    w.k = k;
    w.alpha1 = alpha1;
    w.alpha2 = alpha2;
    w.tau = tau;
    w.s = s;
    w.bp = bp;
    w.pp = pp;
    w.lambda = sw_plane_rate(k, bp) - pp.C / (pp.H0 + s);

    const double coupling = std::abs(alpha1 * k.kx * k.ky) * (std::abs(bp.d1 - bp.d2) * k.norm2() + std::abs(bp.b2 - bp.b1));
    const double scale_b = std::max({std::abs(alpha1 * pp.f), std::abs(alpha2 * pp.f), coupling});
    if (!detail::negligible(sw_amplitude_relation(k, alpha1, alpha2, bp, pp.f), scale_b))
        throw ComplianceError("sw_monochromatic: amplitude relation (b) violated");
    const double scale_c = std::abs(alpha2) * (std::abs(bp.b1) + std::abs(bp.b2) + (bp.d1 + bp.d2) * k.norm2()) * k.norm2();
    if (!detail::negligible(alpha2 * w.lambda, scale_c))
        throw ComplianceError("sw_monochromatic: compatibility alpha2 * lambda = 0 (c) violated");
    return w;
}

// ---------------------------------------------------------------- primitive equations

/// Root omega in [0, pi/(2H)) of beta = omega tan(omega H).
inline double primitive_frequency(double beta, double H) {
    if (!(H > 0.0)) throw RangeError("primitive_mode: H must be positive");
    if (!(beta >= 0.0)) throw RangeError("primitive_mode: beta must be non-negative");
    if (beta == 0.0) return 0.0;
    const double top = std::nextafter(pi / (2.0 * H), 0.0);
    auto g = [&](double w) { return w * std::tan(w * H) - beta; };
    boost::math::tools::eps_tolerance<double> tol(52);
    std::uintmax_t iters = 200;
    const auto [lo, hi] = boost::math::tools::toms748_solve(g, 0.0, top, -beta, g(top), tol, iters);
    if (iters >= 200) throw ConvergenceError("primitive_mode: no root of omega tan(omega H) = beta in bracket");
    return 0.5 * (lo + hi);
}

/// u = A e^{lambda t} cos(omega z) cos(k y) (1, 0), T = 0 on z in [-H, 0] with f = 0.
struct PrimitiveMode {
    double A = 0.0;
    double k = 1.0;
    double beta = 0.0;
    double H = 1.0;
    double omega = 0.0;
    double lambda = 0.0;
    BackscatterParams bp;
    PhysicalParams pp;
    double rho0 = 1.0;

    ModelParams model_params() const {
        ModelParams mp;
        mp.model = Model::Primitive;
        mp.bp = bp;
        mp.pp = pp;
        mp.rho0 = rho0;
        mp.depth = H;
        mp.beta = beta;
        return mp;
    }

    ResidualGrid grid(int n = 64, int nz = 17) const { return {n, n, nz, -H, 0.0}; }

    FlowSnapshot snapshot(double t) const {
        FlowSnapshot out;
        out.t = t;
        const double a = 0.5 * A * std::exp(lambda * t);
        out[Var::U].push_back(detail::wave(a, lambda, {0.0, k, omega}));
        out[Var::U].push_back(detail::wave(a, lambda, {0.0, k, -omega}));
        out.grad_p = {0.0, 0.0, -rho0 * pp.g};
        return out;
    }
};

/// Mode with rate lambda = b k^2 - d k^4 - nu_v omega^2 (k = 1 gives b - d - nu_v omega^2).
inline PrimitiveMode primitive_mode(double A, double k, double beta, double H, double b, double d, double nu_v) {
    PrimitiveMode m;
    m.A = A;
    m.k = k;
    m.beta = beta;
    m.H = H;
    m.omega = primitive_frequency(beta, H);
    m.lambda = backscatter_symbol(k, b, d) - nu_v * m.omega * m.omega;
    m.bp = BackscatterParams::isotropic(b, d);
    m.pp.nu_v = nu_v;
    return m;
}

// ---------------------------------------------------------------- loci

struct LociCell {
    double kx = 0.0;
    double ky = 0.0;
    double lambda = 0.0;
    double relation = 0.0;      // residual of the amplitude relation for the given ratio
    bool on_marginal = false;   // lambda changes sign towards a neighbour
    bool on_relation = false;   // relation changes sign towards a neighbour
    bool steady = false;        // both
    int sign() const { return lambda > 0.0 ? 1 : (lambda < 0.0 ? -1 : 0); }
};

struct LociMap {
    int nx = 0;
    int ny = 0;
    std::vector<LociCell> cells;  // row-major in ky
    const LociCell& at(int ix, int iy) const { return cells[std::size_t(iy) * nx + ix]; }
};

/// Rate and amplitude relation (with alpha2 = ratio * alpha1, alpha1 = 1) over the grid kxs x kys.
/// The rate includes the drag shift -C/H0 of flows with constant surface.
inline LociMap sw_loci_map(const std::vector<double>& kxs, const std::vector<double>& kys, const BackscatterParams& bp,
                           const PhysicalParams& pp, double ratio) {
    LociMap map;
    map.nx = int(kxs.size());
    map.ny = int(kys.size());
    map.cells.resize(kxs.size() * kys.size());
    for (int iy = 0; iy < map.ny; ++iy) {
        for (int ix = 0; ix < map.nx; ++ix) {
            auto& c = map.cells[std::size_t(iy) * map.nx + ix];
            const WaveVector k{kxs[std::size_t(ix)], kys[std::size_t(iy)]};
            c.kx = k.kx;
            c.ky = k.ky;
            c.lambda = sw_plane_rate(k, bp) - pp.C / pp.H0;
            c.relation = sw_amplitude_relation(k, 1.0, ratio, bp, pp.f);
        }
    }
    auto flips = [](double a, double b) { return (a <= 0.0 && b > 0.0) || (a > 0.0 && b <= 0.0); };
    for (int iy = 0; iy < map.ny; ++iy) {
        for (int ix = 0; ix < map.nx; ++ix) {
            auto& c = map.cells[std::size_t(iy) * map.nx + ix];
            if (c.kx == 0.0 && c.ky == 0.0) continue;
            for (auto [dx, dy] : {std::pair{1, 0}, std::pair{0, 1}}) {
                if (ix + dx >= map.nx || iy + dy >= map.ny) continue;
                const auto& o = map.at(ix + dx, iy + dy);
                c.on_marginal = c.on_marginal || flips(c.lambda, o.lambda);
                c.on_relation = c.on_relation || flips(c.relation, o.relation);
            }
            c.steady = c.on_marginal && c.on_relation;
        }
    }
    return map;
}

/// Wave vectors on the marginal curve lambda = C/H0 of the rate at which the amplitude relation holds
/// for alpha2 = ratio * alpha1, located by bisection in the polar angle. With drag the marginal set
/// has an inner and an outer branch.
inline std::vector<WaveVector> sw_steady_loci(const BackscatterParams& bp, const PhysicalParams& pp, double ratio,
                                              int n_angles = 720) {
    const double r = pp.C / pp.H0;
    // rate along direction th is B K - D K^2 in K = |k|^2
    auto radius2 = [&](double th, int branch) {
        const double c2 = std::cos(th) * std::cos(th);
        const double s2 = std::sin(th) * std::sin(th);
        const double B = bp.b1 * s2 + bp.b2 * c2;
        const double D = bp.d1 * s2 + bp.d2 * c2;
        const double disc = B * B - 4.0 * D * r;
        if (disc < 0.0) return std::numeric_limits<double>::quiet_NaN();
        return (B + branch * std::sqrt(disc)) / (2.0 * D);
    };
    std::vector<WaveVector> out;
    for (int branch : {1, -1}) {
        if (branch < 0 && r == 0.0) break;
        auto point = [&](double th) -> WaveVector {
            const double K = std::max(radius2(th, branch), 0.0);
            return {std::sqrt(K) * std::cos(th), std::sqrt(K) * std::sin(th)};
        };
        auto h = [&](double th) { return sw_amplitude_relation(point(th), 1.0, ratio, bp, pp.f); };
        for (int i = 0; i < n_angles; ++i) {
            const double a = 2.0 * pi * i / n_angles;
            const double b = 2.0 * pi * (i + 1) / n_angles;
            if (!(radius2(a, branch) > 0.0) || !(radius2(b, branch) > 0.0)) continue;
            const double ha = h(a);
            const double hb = h(b);
            if (ha == 0.0) {
                out.push_back(point(a));
                continue;
            }
            if (ha * hb >= 0.0) continue;
            boost::math::tools::eps_tolerance<double> tol(52);
            std::uintmax_t iters = 200;
            const auto [lo, hi] = boost::math::tools::toms748_solve(h, a, b, ha, hb, tol, iters);
            out.push_back(point(0.5 * (lo + hi)));
        }
    }
    return out;
}

// ---------------------------------------------------------------- superposition

enum class SuperpositionKind { Radial, Angular };

struct AngularSample {
    WaveVector k;
    double alpha = 0.0;
    double tau = 0.0;
};

struct AngularComponent {
    WaveVector k;
    double phi = 0.0;
    double alpha = 0.0;
    double tau = 0.0;
    double lambda = 0.0;
    double gamma = 0.0;
};

struct SuperposedFlow {
    SuperpositionKind kind = SuperpositionKind::Radial;
    ModelParams params;
    std::vector<PlaneWaveFlow> waves;             // radial
    std::vector<AngularComponent> components;     // angular

    ModelParams model_params() const { return params; }

    FlowSnapshot snapshot(double t) const {
        FlowSnapshot out;
        out.t = t;
        for (const auto& w : waves) out += w.snapshot(t);
        const double f = params.pp.f;
        for (std::size_t i = 0; i < components.size(); ++i) {
            const auto& c = components[i];
            const double a = c.alpha * std::exp(c.lambda * t);
            const Vec3 kv = detail::horizontal(c.k);
            // alpha e^{lambda t} sin(xi) k_perp
            if (a * c.k.ky != 0.0) out[Var::U].push_back(detail::wave(-a * c.k.ky, c.lambda, kv, c.tau - pi / 2));
            if (a * c.k.kx != 0.0) out[Var::V].push_back(detail::wave(a * c.k.kx, c.lambda, kv, c.tau - pi / 2));
            if (f != 0.0 && c.gamma != 0.0)
                out[Var::P].push_back(detail::wave(-f * c.gamma * std::exp(c.lambda * t), c.lambda, kv, c.tau));
            for (std::size_t j = i + 1; j < components.size(); ++j) {
                const auto& o = components[j];
                const double aa = a * o.alpha * std::exp(o.lambda * t);
                const double K = c.k.norm2();
                const double cphi = dot(c.k.vec(), o.k.vec()) / K;
                const double rate = c.lambda + o.lambda;
                // -k^2 a_i a_j (cos xi_i cos xi_j + cos(phi_i - phi_j) sin xi_i sin xi_j)
                const Vec3 kd{c.k.kx - o.k.kx, c.k.ky - o.k.ky, 0.0};
                const Vec3 ks{c.k.kx + o.k.kx, c.k.ky + o.k.ky, 0.0};
                out[Var::P].push_back(detail::wave(-0.5 * K * aa * (1.0 + cphi), rate, kd, c.tau - o.tau));
                out[Var::P].push_back(detail::wave(-0.5 * K * aa * (1.0 - cphi), rate, ks, c.tau + o.tau));
            }
        }
        return out;
    }
};

/// Sum of admissible plane waves whose wave vectors are positive multiples of one direction.
inline SuperposedFlow radial_superpose(const std::vector<PlaneWaveFlow>& waves) {
    if (waves.empty()) throw RangeError("radial_superpose: no components");
    const auto& w0 = waves.front();
    for (const auto& w : waves) {
        if (w.model != w0.model) throw RangeError("radial_superpose: components of different models");
        const double cross = w.k.kx * w0.k.ky - w.k.ky * w0.k.kx;
        if (std::abs(cross) > 1e-12 * w.k.norm() * w0.k.norm() || dot(w.k.vec(), w0.k.vec()) <= 0.0)
            throw RangeError("radial_superpose: wave vectors not on one ray");
    }
    SuperposedFlow s;
    s.kind = SuperpositionKind::Radial;
    s.params = w0.model_params();
    s.waves = waves;
    // the mean surface shift is a single free constant
    for (std::size_t i = 1; i < s.waves.size(); ++i) s.waves[i].s = 0.0;
    return s;
}

/// Horizontal Boussinesq flow built from samples on one circle |k| = const. Each sample gets its
/// rate and Coriolis pressure coefficient from the dispersion and amplitude relations.
inline SuperposedFlow angular_superpose(const std::vector<AngularSample>& samples, const BackscatterParams& bp,
                                        const PhysicalParams& pp, Model model = Model::BoussinesqHorizontal) {
    if (samples.empty()) throw RangeError("angular_superpose: no components");
    const double r = samples.front().k.norm();
    if (r == 0.0) throw RangeError("angular_superpose: zero wave vector");
    SuperposedFlow s;
    s.kind = SuperpositionKind::Angular;
    s.params.model = model;
    s.params.bp = bp;
    s.params.pp = pp;
    for (const auto& smp : samples) {
        if (std::abs(smp.k.norm() - r) > 1e-12 * r) throw RangeError("angular_superpose: mixed radii");
        AngularComponent c;
        c.k = smp.k;
        c.phi = std::atan2(smp.k.ky, smp.k.kx);
        c.alpha = smp.alpha;
        c.tau = smp.tau;
        c.lambda = sw_plane_rate(smp.k, bp);
        const double rhs = smp.alpha * smp.k.kx * smp.k.ky * ((bp.d1 - bp.d2) * r * r + bp.b2 - bp.b1);
        if (pp.f != 0.0) {
            c.gamma = smp.alpha + rhs / pp.f;
        } else {
            if (!detail::negligible(rhs, std::abs(smp.alpha) * r * r * (bp.d1 + bp.d2 + bp.b1 + bp.b2)))
                throw ComplianceError("angular_superpose: amplitude relation cannot hold with f = 0");
            c.gamma = smp.alpha;
        }
        s.components.push_back(c);
    }
    return s;
}

/// Trapezoid discretization of a circle integral: n equally spaced directions with weights folded into alpha.
inline std::vector<AngularSample> circle_samples(double k, int n, const std::function<double(double)>& alpha,
                                                 const std::function<double(double)>& tau) {
    std::vector<AngularSample> out;
    const double w = 2.0 * pi * k / n;
    for (int i = 0; i < n; ++i) {
        const double phi = 2.0 * pi * i / n;
        out.push_back({{k * std::cos(phi), k * std::sin(phi)}, w * alpha(phi), tau(phi)});
    }
    return out;
}

// ---------------------------------------------------------------- Kolmogorov flows

/// (delta1, delta2, delta3, delta_mu) with |k|^2 = k^2 + m^2.
inline std::array<double, 4> kolmogorov_deltas(double k, double m, const BackscatterParams& bp, const PhysicalParams& pp) {
    const double K = k * k + m * m;
    return {bp.d1 * K * K - bp.b1 * K, bp.d2 * K * K - bp.b2 * K, pp.nu_v * K, pp.mu * K};
}

inline Eigen::Matrix4cd kolmogorov_matrix(double k, double m, cplx lambda, const BackscatterParams& bp,
                                          const PhysicalParams& pp) {
    const auto d = kolmogorov_deltas(k, m, bp, pp);
    Eigen::Matrix4cd M;
    M << -pp.f, m * (lambda + d[0]), 0.0, k,
        lambda + d[1], pp.f * m, 0.0, 0.0,
        0.0, k * (lambda + d[2]), -1.0, -m,
        0.0, pp.N2 * k, lambda + d[3], 0.0;
    return M;
}

/// Coefficients (highest first) of -det of the Kolmogorov matrix as a cubic in lambda.
inline std::vector<double> kolmogorov_polynomial(double k, double m, const BackscatterParams& bp,
                                                 const PhysicalParams& pp) {
    const auto d = kolmogorov_deltas(k, m, bp, pp);
    const double s2 = m * m + k * k;
    const double s1 = m * m * (d[0] + d[1]) + k * k * (d[1] + d[2]);
    const double s0 = pp.f * pp.f * m * m + m * m * d[0] * d[1] + k * k * d[1] * d[2];
    const double nk = pp.N2 * k * k;
    return {s2, s1 + d[3] * s2, s0 + d[3] * s1 + nk, d[3] * s0 + nk * d[1]};
}

/// v = e^{lambda t} cos(theta)(alpha (0,1,0) + beta (m,0,k)), b = c e^{lambda t} cos(theta),
/// p = gamma e^{lambda t} sin(theta), theta = k x - m z. Complex rates give the real part.
struct KolmogorovMode {
    double k = 0.0;
    double m = 0.0;
    cplx lambda = 0.0;
    bool real = true;
    Eigen::Vector4cd coeffs = Eigen::Vector4cd::Zero();  // alpha, beta, c, gamma
    std::array<double, 4> deltas{};
    BackscatterParams bp;
    PhysicalParams pp;

    ModelParams model_params() const {
        ModelParams mp;
        mp.model = Model::Boussinesq3D;
        mp.bp = bp;
        mp.pp = pp;
        return mp;
    }

    Eigen::Matrix4cd matrix() const { return kolmogorov_matrix(k, m, lambda, bp, pp); }

    FlowSnapshot snapshot(double t) const {
        FlowSnapshot out;
        out.t = t;
        const Vec3 kv{k, 0.0, -m};
        const cplx al = coeffs[0], be = coeffs[1], c = coeffs[2], ga = coeffs[3];
        out[Var::U].push_back(detail::modal(be * m, lambda, t, kv));
        out[Var::V].push_back(detail::modal(al, lambda, t, kv));
        out[Var::W].push_back(detail::modal(be * k, lambda, t, kv));
        out[Var::B].push_back(detail::modal(c, lambda, t, kv));
        out[Var::P].push_back(detail::modal(ga, lambda, t, kv, -pi / 2));
        return out;
    }
};

namespace detail {

/// Unit null vector of a square matrix, phase-normalized so that its largest entry is real and positive.
template <class Mat>
Eigen::Matrix<cplx, Mat::ColsAtCompileTime, 1> null_vector(const Mat& M) {
    Eigen::JacobiSVD<Mat> svd(M, Eigen::ComputeFullV);
    Eigen::Matrix<cplx, Mat::ColsAtCompileTime, 1> v = svd.matrixV().col(M.cols() - 1);
    Eigen::Index imax = 0;
    v.cwiseAbs().maxCoeff(&imax);
    v *= std::abs(v[imax]) / v[imax];
    return v;
}

}  // namespace detail

/// All rates making the Kolmogorov matrix singular, each with a null vector.
inline std::vector<KolmogorovMode> kolmogorov_solve(double k, double m, const BackscatterParams& bp,
                                                    const PhysicalParams& pp) {
    if (k == 0.0 && m == 0.0) throw RangeError("kolmogorov_solve: zero wave vector");
    std::vector<KolmogorovMode> out;
    for (cplx lam : polynomial_roots(kolmogorov_polynomial(k, m, bp, pp))) {
        KolmogorovMode md;
        md.k = k;
        md.m = m;
        md.bp = bp;
        md.pp = pp;
        md.deltas = kolmogorov_deltas(k, m, bp, pp);
        md.real = lam.imag() == 0.0;
        md.lambda = lam;
        md.coeffs = detail::null_vector(md.matrix());
        if (md.real) md.coeffs = md.coeffs.real().cast<cplx>();
        out.push_back(md);
    }
    return out;
}

// ---------------------------------------------------------------- internal gravity waves

/// v = a1 e sin(xi) (0,1,0) + a2 omega e cos(xi) (-m,0,k), b = b1 e sin(xi) + b2 omega e cos(xi),
/// p = g1 e cos(xi) + g2 omega e sin(xi) with e = e^{lambda t}, xi = k x + m z - omega t.
struct IGWMode {
    double k = 0.0;
    double m = 0.0;
    double omega = 0.0;
    double lambda = 0.0;
    std::array<double, 6> amps{};  // alpha1, alpha2, beta1, beta2, gamma1, gamma2
    BackscatterParams bp;
    PhysicalParams pp;

    ModelParams model_params() const {
        ModelParams mp;
        mp.model = Model::Boussinesq3D;
        mp.bp = bp;
        mp.pp = pp;
        return mp;
    }

    FlowSnapshot snapshot(double t) const {
        FlowSnapshot out;
        out.t = t;
        const double e = std::exp(lambda * t);
        const Vec3 kv{k, 0.0, m};
        const double ph = -omega * t;
        auto add = [&](Var v, double a, double shift) {
            if (a != 0.0) out[v].push_back(detail::wave(a * e, lambda, kv, ph + shift, -omega));
        };
        const double sin_shift = -pi / 2;
        add(Var::V, amps[0], sin_shift);
        add(Var::U, -amps[1] * omega * m, 0.0);
        add(Var::W, amps[1] * omega * k, 0.0);
        add(Var::B, amps[2], sin_shift);
        add(Var::B, amps[3] * omega, 0.0);
        add(Var::P, amps[4], 0.0);
        add(Var::P, amps[5] * omega, sin_shift);
        return out;
    }
};

/// Eight linear conditions on the six amplitudes: projections of the x, y, z momentum and buoyancy
/// residuals onto sin(xi) and cos(xi), one column per unit amplitude.
inline Eigen::Matrix<double, 8, 6> igw_assemble(double k, double m, double omega, double lambda,
                                                const BackscatterParams& bp, const PhysicalParams& pp) {
    if (k == 0.0 && m == 0.0) throw RangeError("igw_assemble: zero wave vector");
    Eigen::Matrix<double, 8, 6> A = Eigen::Matrix<double, 8, 6>::Zero();
    constexpr int samples = 16;
    const std::array<std::size_t, 4> eqs{0, 1, 2, 4};
    const double K = k * k + m * m;
    for (int j = 0; j < 6; ++j) {
        IGWMode md{k, m, omega, lambda, {}, bp, pp};
        md.amps[std::size_t(j)] = 1.0;
        const FlowSnapshot s = md.snapshot(0.0);
        const ModelParams mp = md.model_params();
        for (int q = 0; q < samples; ++q) {
            const double xi = 2.0 * pi * q / samples;
            const Vec3 x{xi * k / K, 0.0, xi * m / K};
            const auto r = pointwise_residual(s, mp, x);
            for (int e = 0; e < 4; ++e) {
                A(2 * e, j) += 2.0 / samples * r[eqs[std::size_t(e)]] * std::sin(xi);
                A(2 * e + 1, j) += 2.0 / samples * r[eqs[std::size_t(e)]] * std::cos(xi);
            }
        }
    }
    return A;
}

/// Basis of the null space of the IGW conditions; empty when no IGW exists for these parameters.
inline std::vector<IGWMode> igw_modes(double k, double m, double omega, double lambda, const BackscatterParams& bp,
                                      const PhysicalParams& pp, double tol = 1e-10) {
    const auto A = igw_assemble(k, m, omega, lambda, bp, pp);
    Eigen::JacobiSVD<Eigen::Matrix<double, 8, 6>> svd(A, Eigen::ComputeFullV);
    const auto& sv = svd.singularValues();
    const double scale = std::max(1.0, sv[0]);
    std::vector<IGWMode> out;
    for (int i = 0; i < 6; ++i) {
        if (sv[i] > tol * scale) continue;
        IGWMode md{k, m, omega, lambda, {}, bp, pp};
        Eigen::VectorXd v = svd.matrixV().col(i);
        Eigen::Index imax = 0;
        v.cwiseAbs().maxCoeff(&imax);
        if (v[imax] < 0.0) v = -v;
        for (int j = 0; j < 6; ++j) md.amps[std::size_t(j)] = v[j];
        out.push_back(md);
    }
    return out;
}

/// The special IGW with k = 0, omega = sign * f: alpha1 = -alpha2 m f, rate (b2 - d2 m^2) m^2.
inline IGWMode igw_special(double m, int sign, const BackscatterParams& bp, const PhysicalParams& pp,
                           double alpha2 = 1.0) {
    if (bp.d1 != bp.d2 || bp.b1 != bp.b2) throw RangeError("igw_special: requires d1 = d2 and b1 = b2");
    if (pp.f == 0.0) throw RangeError("igw_special: requires f != 0");
    if (m == 0.0) throw RangeError("igw_special: requires m != 0");
    IGWMode md;
    md.k = 0.0;
    md.m = m;
    md.omega = (sign < 0 ? -1.0 : 1.0) * pp.f;
    md.lambda = (bp.b2 - bp.d2 * m * m) * m * m;
    md.amps = {-alpha2 * m * pp.f, alpha2, 0.0, 0.0, 0.0, 0.0};
    md.bp = bp;
    md.pp = pp;
    return md;
}

// ---------------------------------------------------------------- parallel flows

/// Horizontal Fourier mode of w and b: w_cos cos(k.x) + w_sin sin(k.x), likewise for b.
struct ParallelMode {
    WaveVector k;
    double w_cos = 0.0;
    double w_sin = 0.0;
    double b_cos = 0.0;
    double b_sin = 0.0;
};

/// v = w(t, x, y) e3, b = b(t, x, y), p = p_tilde z, each mode evolved by a matrix exponential.
struct ParallelFlow {
    std::vector<ParallelMode> modes;
    double p_tilde = 0.0;
    BackscatterParams bp;
    PhysicalParams pp;

    ModelParams model_params() const {
        ModelParams mp;
        mp.model = Model::Boussinesq3D;
        mp.bp = bp;
        mp.pp = pp;
        return mp;
    }

    /// Generator of (w, b, 1) for one mode; the constant forcing -p_tilde acts on the mean mode only.
    Eigen::Matrix3d generator(WaveVector k) const {
        const double K = k.norm2();
        Eigen::Matrix3d A;
        A << -pp.nu_v * K, 1.0, k.is_zero() ? -p_tilde : 0.0,
            -pp.N2, -pp.mu * K, 0.0,
            0.0, 0.0, 0.0;
        return A;
    }

    FlowSnapshot snapshot(double t) const {
        FlowSnapshot out;
        out.t = t;
        out.grad_p = {0.0, 0.0, p_tilde};
        for (const auto& md : modes) {
            const Vec3 kv = detail::horizontal(md.k);
            // cos part carries the pressure forcing of the mean mode; sin part is unforced
            const Eigen::Matrix3d A = generator(md.k);
            Eigen::Matrix3d G = A;
            G(0, 2) = 0.0;
            const std::array<Eigen::Vector3d, 2> y0{Eigen::Vector3d(md.w_cos, md.b_cos, 1.0),
                                                    Eigen::Vector3d(md.w_sin, md.b_sin, 0.0)};
            for (int part = 0; part < 2; ++part) {
                const Eigen::Matrix3d& gen = part == 0 ? A : G;
                const Eigen::Vector3d y = (gen * t).exp() * y0[std::size_t(part)];
                const Eigen::Vector3d dy = gen * y;
                if (y.head<2>().isZero(0.0) && dy.head<2>().isZero(0.0)) continue;
                const double phase = part == 0 ? 0.0 : -pi / 2;
                out[Var::W].push_back({y[0], dy[0], kv, phase, 0.0});
                out[Var::B].push_back({y[1], dy[1], kv, phase, 0.0});
            }
        }
        return out;
    }
};

inline ParallelFlow parallel_flow(std::vector<ParallelMode> modes, double p_tilde, const PhysicalParams& pp) {
    ParallelFlow pf;
    pf.modes = std::move(modes);
    pf.p_tilde = p_tilde;
    pf.pp = pp;
    return pf;
}

// ---------------------------------------------------------------- catalog

inline AnyFlow as_any(std::string name, const PlaneWaveFlow& f, ResidualGrid g = ResidualGrid::plane(64)) {
    return {std::move(name), f.model_params(), g, [f](double t) { return f.snapshot(t); }};
}

template <class Flow>
AnyFlow as_any(std::string name, const Flow& f, ResidualGrid g) {
    return {std::move(name), f.model_params(), g, [f](double t) { return f.snapshot(t); }};
}

/// One instance of every constructor, each with a non-zero rate or a coupling that makes the
/// amplitudes mutually constrained.
inline std::vector<AnyFlow> reference_catalog() {
    std::vector<AnyFlow> out;
    const ResidualGrid plane = ResidualGrid::plane(64);
    const ResidualGrid box = ResidualGrid::box(64);

    out.push_back(as_any("euler_plane_wave", euler_plane_wave(1.0, {0.0, 1.0}, 3.0, 1.0, 0.3), plane));
    out.push_back(as_any("euler_plane_wave_decay", euler_plane_wave(0.7, {1.0, 0.0}, 0.5, 1.0, 2.0, 0.4), plane));

    const PrimitiveMode prim = primitive_mode(1.0, 1.0, 1.0, 1.0, 3.0, 1.0, 1.0);
    out.push_back(as_any("primitive_mode", prim, prim.grid(64, 17)));

    const BackscatterParams loci_mixed{1.5, 2.2, 1.0, 1.04};
    PhysicalParams swp;
    swp.f = 0.3;
    const auto loci = sw_steady_loci(loci_mixed, swp, -0.5);
    if (!loci.empty()) {
        out.push_back(as_any("sw_monochromatic_steady", sw_monochromatic(loci.front(), 1.0, -0.5, 0.3, 0.01, loci_mixed, swp)));
    }
    {
        // alpha2 = 0 requires kx ky ((d1 - d2)|k|^2 + b2 - b1) = -f, i.e. sc (D K^2 + B K) + f = 0 in K = |k|^2
        const double th = -0.7;
        const double D = loci_mixed.d1 - loci_mixed.d2;
        const double B = loci_mixed.b2 - loci_mixed.b1;
        const double sc = std::cos(th) * std::sin(th);
        const double disc = std::sqrt(B * B - 4.0 * D * swp.f / sc);
        double K = std::min((-B + disc) / (2.0 * D), (-B - disc) / (2.0 * D));
        if (K <= 0.0) K = std::max((-B + disc) / (2.0 * D), (-B - disc) / (2.0 * D));
        const double r = std::sqrt(K);
        out.push_back(as_any("sw_monochromatic_growing",
                             sw_monochromatic({r * std::cos(th), r * std::sin(th)}, 1.0, 0.0, 0.2, 0.0, loci_mixed, swp)));
    }

    out.push_back(as_any("radial_superpose",
                         radial_superpose({euler_plane_wave(1.0, {1.0, 1.0}, 5.0, 1.0, 3.0),
                                           euler_plane_wave(1.5, {1.5, 1.5}, 5.0, 1.0, 3.0, 1.0)}),
                         plane));

    const BackscatterParams loci_weak{1.1, 2.2, 1.0, 1.04};
    const auto ang = angular_superpose({{{1.0, 0.0}, 1.0, 0.0}, {{0.0, 1.0}, 1.0, 0.5}}, loci_weak, swp);
    out.push_back(as_any("angular_superpose", ang, plane));

    PhysicalParams kp;
    kp.f = 1.0;
    kp.N2 = 1.0;
    kp.nu_v = 0.2;
    kp.mu = 0.1;
    const auto kol = kolmogorov_solve(0.6, 1.0, loci_mixed, kp);
    for (const auto& md : kol) {
        if (md.real) {
            out.push_back(as_any("kolmogorov", md, box));
            break;
        }
    }

    out.push_back(as_any("igw_special", igw_special(1.0, 1, BackscatterParams::isotropic(2.2, 1.04), swp), box));

    PhysicalParams parp;
    parp.N2 = 1.0;
    parp.nu_v = 0.1;
    parp.mu = 0.05;
    out.push_back(as_any("parallel_flow",
                         parallel_flow({{{1.0, 0.0}, 1.0, 0.7, 0.8, 0.6}, {{2.0, 0.0}, 0.9, 0.6, 0.5, 0.7}}, 0.0, parp),
                         box));
    return out;
}

}  // namespace bslab
