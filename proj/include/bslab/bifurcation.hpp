#pragma once

#include <Eigen/Dense>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/tools/roots.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "core.hpp"
#include "dispersion.hpp"

namespace bslab {

// ---------------------------------------------------------------- closed forms

struct BifParams {
    double alpha = 0.0;  // C = C_c - alpha H0
    double kappa = 0.0;  // |k| = k_c + kappa
    double Q = 0.0;
    BackscatterParams bp{2.0, 2.0, 1.0, 1.0};
    PhysicalParams pp{0.3, 9.8, 0.1};

    /// Threshold of the plane-wave reduction along x, which sees (b2, d2).
    double C_c() const { return pp.H0 * bp.b2 * bp.b2 / (4.0 * bp.d2); }
    double k_c() const { return std::sqrt(bp.b2 / (2.0 * bp.d2)); }
    double omega_c() const { return std::sqrt(pp.g * pp.H0 * k_c() * k_c() + pp.f * pp.f); }
    double M() const { return pp.g * k_c() * k_c() * pp.H0 / (omega_c() * omega_c()); }
    double C() const { return C_c() - alpha * pp.H0; }
    double k() const { return k_c() + kappa; }

    /// Physical parameters with C and Q taken from this point.
    PhysicalParams physical() const {
        PhysicalParams p = pp;
        p.C = C();
        p.Q = Q;
        return p;
    }

    void validate() const {
        bp.validate();
        pp.validate();
        if (!(bp.b2 > 0.0)) throw RangeError("bifurcation: requires b > 0");
        if (!(Q >= 0.0)) throw RangeError("bifurcation: Q must be non-negative");
    }
};

/// M (alpha - 2 b kappa^2)
inline double lambda_expansion(const BifParams& p) {
    if (!p.bp.is_isotropic()) throw RangeError("lambda_expansion: isotropic backscatter required");
    return p.M() * (p.alpha - 2.0 * p.bp.b1 * p.kappa * p.kappa);
}

/// Leading-order |A1| of bifurcating geostrophic equilibria; 0 when alpha <= 2 b kappa^2.
inline double ge_amplitude(const BifParams& p) {
    const double b = p.bp.b2;
    const double d = p.bp.d2;
    const double drive = p.alpha - 2.0 * b * p.kappa * p.kappa;
    if (p.Q == 0.0) {
        if (p.pp.f == 0.0) throw VerticalBranch("ge_amplitude: Q = 0 and f = 0 leave A1 undetermined at leading order");
        if (drive <= 0.0) return 0.0;
        return 6.0 * p.pp.g * p.pp.H0 / (b * std::abs(p.pp.f)) * std::sqrt(2.0 * d * drive / 17.0);
    }
    if (drive <= 0.0) return 0.0;
    return 3.0 * pi * p.pp.H0 * std::sqrt(2.0 * d) / (16.0 * p.Q * std::sqrt(b)) * drive;
}

// ---------------------------------------------------------------- real Fourier basis

/// Real trigonometric basis 1, cos j, sin j (j = 1..N) on [0, 2pi) with products evaluated on M points.
/// Coefficient layout: [c0, a1, b1, a2, b2, ...].
class RealFourier {
public:
    /// Synthesis S and S D at quadrature nodes and the matching projection P onto coefficients.
    struct QuadRule {
        Eigen::MatrixXd S;
        Eigen::MatrixXd Sd;
        Eigen::MatrixXd P;
    };

    explicit RealFourier(int N = 31, int M = 256) : N_(N), M_(M), K_(2 * N + 1) {
        if (N < 1 || M <= 2 * N) throw RangeError("RealFourier: requires 1 <= N < M/2");
        D_ = Eigen::MatrixXd::Zero(K_, K_);
        for (int j = 1; j <= N; ++j) {
            D_(2 * j, 2 * j - 1) = -j;
            D_(2 * j - 1, 2 * j) = j;
        }
        Eigen::VectorXd x(M);
        for (int p = 0; p < M; ++p) x(p) = 2.0 * pi * p / M;
        uniform_ = rule(x, Eigen::VectorXd::Constant(M, 2.0 * pi / M));
        fine_.resize(4 * M, K_);
        for (int i = 0; i < 4 * M; ++i) fill_row(2.0 * pi * i / (4 * M), fine_.row(i));
        S_ = uniform_.S;
        Sd_ = uniform_.Sd;
        P_ = uniform_.P;
    }

    QuadRule rule(const Eigen::VectorXd& x, const Eigen::VectorXd& w) const {
        QuadRule r;
        r.S.resize(x.size(), K_);
        r.Sd.resize(x.size(), K_);
        for (Eigen::Index p = 0; p < x.size(); ++p) {
            fill_row(x(p), r.S.row(p));
            r.Sd(p, 0) = 0.0;
            for (int j = 1; j <= N_; ++j) {
                r.Sd(p, 2 * j - 1) = -j * r.S(p, 2 * j);
                r.Sd(p, 2 * j) = j * r.S(p, 2 * j - 1);
            }
        }
        r.P = r.S.transpose() * (w / pi).asDiagonal();
        r.P.row(0) *= 0.5;
        return r;
    }

    const QuadRule& uniform() const { return uniform_; }

    /// Composite Gauss-Legendre rule on the arcs between the given points of [0, 2pi).
    QuadRule split_rule(std::vector<double> breaks) const {
        static const auto gl = gauss_legendre(20);
        std::sort(breaks.begin(), breaks.end());
        const std::size_t nb = breaks.size();
        std::vector<double> xs;
        std::vector<double> ws;
        for (std::size_t i = 0; i < nb; ++i) {
            const double a = breaks[i];
            const double b = i + 1 < nb ? breaks[i + 1] : breaks[0] + 2.0 * pi;
            if (b - a <= 0.0) continue;
            const int pieces = std::max(1, int(std::ceil((b - a) * M_ / (2.0 * pi * 8.0))));
            const double h = (b - a) / pieces;
            for (int q = 0; q < pieces; ++q) {
                const double lo = a + q * h;
                for (std::size_t g = 0; g < gl.first.size(); ++g) {
                    xs.push_back(lo + 0.5 * h * (gl.first[g] + 1.0));
                    ws.push_back(0.5 * h * gl.second[g]);
                }
            }
        }
        return rule(Eigen::Map<Eigen::VectorXd>(xs.data(), Eigen::Index(xs.size())),
                    Eigen::Map<Eigen::VectorXd>(ws.data(), Eigen::Index(ws.size())));
    }

    double eval(const Eigen::VectorXd& c, double x) const {
        Eigen::RowVectorXd row(K_);
        fill_row(x, row);
        return row.dot(c);
    }

    /// Zeros in [0, 2pi) of the trigonometric polynomial with coefficients c (sign changes on a 4M grid).
    std::vector<double> zeros(const Eigen::VectorXd& c) const {
        const Eigen::Index n = fine_.rows();
        const Eigen::VectorXd vals = fine_ * c;
        std::vector<double> out;
        for (Eigen::Index i = 0; i < n; ++i) {
            const double a = 2.0 * pi * double(i) / double(n);
            const double fa = vals(i);
            const double fb = vals((i + 1) % n);
            if (fa == 0.0) {
                out.push_back(a);
                continue;
            }
            if (fb == 0.0 || (fa > 0.0) == (fb > 0.0)) continue;
            const double b = a + 2.0 * pi / double(n);
            std::uintmax_t iters = 100;
            auto fn = [&](double x) { return eval(c, x); };
            const auto r = boost::math::tools::toms748_solve(fn, a, b, fa, fb,
                                                             boost::math::tools::eps_tolerance<double>(52), iters);
            out.push_back(std::fmod(0.5 * (r.first + r.second), 2.0 * pi));
        }
        return out;
    }

    int N() const { return N_; }
    int M() const { return M_; }
    int K() const { return K_; }
    static int cos_index(int j) { return 2 * j - 1; }
    static int sin_index(int j) { return 2 * j; }

    const Eigen::MatrixXd& synth() const { return S_; }
    const Eigen::MatrixXd& synth_d() const { return Sd_; }
    const Eigen::MatrixXd& project() const { return P_; }
    const Eigen::MatrixXd& deriv() const { return D_; }

    Eigen::VectorXd values(const Eigen::VectorXd& c) const { return S_ * c; }
    Eigen::VectorXd dvalues(const Eigen::VectorXd& c) const { return Sd_ * c; }
    Eigen::VectorXd coeffs(const Eigen::VectorXd& v) const { return P_ * v; }

    /// Diagonal symbol -d k^4 j^4 + b k^2 j^2 of -d k^4 d^4 - b k^2 d^2.
    Eigen::VectorXd hyper(double b, double d, double k) const {
        Eigen::VectorXd h(K_);
        h(0) = 0.0;
        for (int j = 1; j <= N_; ++j) {
            const double kj2 = k * k * j * j;
            h(2 * j - 1) = h(2 * j) = -d * kj2 * kj2 + b * kj2;
        }
        return h;
    }

    /// Mean-zero antiderivative; the mean of c is dropped.
    Eigen::VectorXd antiderivative(const Eigen::VectorXd& c) const {
        Eigen::VectorXd out = Eigen::VectorXd::Zero(K_);
        for (int j = 1; j <= N_; ++j) {
            out(2 * j - 1) = -c(2 * j) / j;
            out(2 * j) = c(2 * j - 1) / j;
        }
        return out;
    }

    /// |first harmonic|, i.e. |A1| for a profile 2 A1 cos(xi + theta).
    static double first_harmonic(const Eigen::VectorXd& c) { return 0.5 * std::hypot(c(1), c(2)); }

private:
    template <class Row>
    void fill_row(double x, Row&& row) const {
        const double c1 = std::cos(x);
        const double s1 = std::sin(x);
        double c = 1.0;
        double sn = 0.0;
        row(0) = 1.0;
        for (int j = 1; j <= N_; ++j) {
            const double cn = c * c1 - sn * s1;
            sn = sn * c1 + c * s1;
            c = cn;
            row(2 * j - 1) = c;
            row(2 * j) = sn;
        }
    }

    static std::pair<std::vector<double>, std::vector<double>> gauss_legendre(int n) {
        Eigen::MatrixXd J = Eigen::MatrixXd::Zero(n, n);
        for (int i = 1; i < n; ++i) J(i, i - 1) = J(i - 1, i) = i / std::sqrt(4.0 * i * i - 1.0);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(J);
        std::vector<double> x(n);
        std::vector<double> w(n);
        for (int i = 0; i < n; ++i) {
            x[i] = es.eigenvalues()(i);
            w[i] = 2.0 * es.eigenvectors()(0, i) * es.eigenvectors()(0, i);
        }
        return {x, w};
    }

    int N_;
    int M_;
    int K_;
    QuadRule uniform_;
    Eigen::MatrixXd fine_;  // synthesis on 4M points for zero bracketing
    Eigen::MatrixXd S_;
    Eigen::MatrixXd Sd_;
    Eigen::MatrixXd P_;
    Eigen::MatrixXd D_;
};

// ---------------------------------------------------------------- 1D shallow water

/// x-dependent restriction of the shallow water system with drag, in the phase xi = k x.
/// State layout: [u (K), v (K), eta (K)] in the real Fourier basis.
class ShallowWater1D {
public:
    ShallowWater1D(double k, const BackscatterParams& bp, const PhysicalParams& pp, int N = 31, int M = 256)
        : k_(k), bp_(bp), pp_(pp), basis_(N, M) {}

    const RealFourier& basis() const { return basis_; }
    int K() const { return basis_.K(); }
    double k() const { return k_; }
    const PhysicalParams& physical() const { return pp_; }
    const BackscatterParams& backscatter() const { return bp_; }
    void set_C(double C) { pp_.C = C; }

    struct Grid {
        std::optional<RealFourier::QuadRule> own;
        const RealFourier::QuadRule* uniform = nullptr;
        Eigen::ArrayXd u, v, e, ud, vd, ed, H, s, Dg;

        const RealFourier::QuadRule& rule() const { return own ? *own : *uniform; }
    };

    /// Quadrature for the state: split at the zeros of |(u, v)| when one component vanishes identically,
    /// since |(u, v)| has kinks there; uniform otherwise.
    Grid grid(const Eigen::VectorXd& U) const {
        const int K = this->K();
        Grid g;
        g.uniform = &basis_.uniform();
        const Eigen::VectorXd uc = U.segment(0, K);
        const Eigen::VectorXd vc = U.segment(K, K);
        const Eigen::VectorXd ec = U.segment(2 * K, K);
        if (pp_.Q != 0.0) {
            const double um = uc.cwiseAbs().maxCoeff();
            const double vm = vc.cwiseAbs().maxCoeff();
            std::vector<double> kinks;
            if (vm > 0.0 && um <= 1e-13 * vm) kinks = basis_.zeros(vc);
            else if (um > 0.0 && vm <= 1e-13 * um) kinks = basis_.zeros(uc);
            if (!kinks.empty()) g.own = basis_.split_rule(kinks);
        }
        const auto& S = g.rule().S;
        const auto& Sd = g.rule().Sd;
        g.u = (S * uc).array();
        g.v = (S * vc).array();
        g.e = (S * ec).array();
        g.ud = (Sd * uc).array();
        g.vd = (Sd * vc).array();
        g.ed = (Sd * ec).array();
        g.H = pp_.H0 + g.e;
        if (g.H.minCoeff() <= 0.0) throw DepthViolation("shallow water 1D: H0 + eta <= 0");
        g.s = (g.u * g.u + g.v * g.v).sqrt();
        g.Dg = (pp_.C + pp_.Q * g.s) / g.H;
        return g;
    }

    /// Right-hand side F(U) of dU/dt = F(U).
    Eigen::VectorXd rhs(const Eigen::VectorXd& U) const {
        const int K = this->K();
        const Grid g = grid(U);
        const auto& P = g.rule().P;
        const auto& D = basis_.deriv();
        const Eigen::VectorXd hu = basis_.hyper(bp_.b1, bp_.d1, k_);
        const Eigen::VectorXd hv = basis_.hyper(bp_.b2, bp_.d2, k_);
        Eigen::VectorXd F(3 * K);
        const auto uc = U.segment(0, K);
        const auto vc = U.segment(K, K);
        const auto ec = U.segment(2 * K, K);
        F.segment(0, K) = hu.cwiseProduct(uc) + pp_.f * vc - pp_.g * k_ * (D * ec) -
                          P * (k_ * g.u * g.ud + g.Dg * g.u).matrix();
        F.segment(K, K) = hv.cwiseProduct(vc) - pp_.f * uc - P * (k_ * g.u * g.vd + g.Dg * g.v).matrix();
        F.segment(2 * K, K) = -P * (k_ * g.u * g.ed + k_ * g.H * g.ud).matrix();
        return F;
    }

    /// dF/dC at U.
    Eigen::VectorXd rhs_dC(const Eigen::VectorXd& U) const {
        const int K = this->K();
        const Grid g = grid(U);
        const auto& P = g.rule().P;
        Eigen::VectorXd F = Eigen::VectorXd::Zero(3 * K);
        F.segment(0, K) = -P * (g.u / g.H).matrix();
        F.segment(K, K) = -P * (g.v / g.H).matrix();
        return F;
    }

    /// Jacobian of F at U; |(u, v)| is differentiated as (u, v)/|(u, v)| off its zero set and 0 on it.
    Eigen::MatrixXd jacobian(const Eigen::VectorXd& U) const {
        const int K = this->K();
        const Grid g = grid(U);
        const auto& S = g.rule().S;
        const auto& Sd = g.rule().Sd;
        const auto& P = g.rule().P;
        const auto& D = basis_.deriv();
        const Eigen::ArrayXd inv_s = (g.s > 0.0).select(1.0 / g.s, 0.0);
        const Eigen::ArrayXd qs = pp_.Q * inv_s / g.H;  // Q / (s H)
        const Eigen::ArrayXd dDe = -g.Dg / g.H;          // dDg/deta
        auto op = [&](const Eigen::ArrayXd& w, const Eigen::MatrixXd& B) -> Eigen::MatrixXd {
            return P * (w.matrix().asDiagonal() * B);
        };
        const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(K, K);
        Eigen::MatrixXd J = Eigen::MatrixXd::Zero(3 * K, 3 * K);
        const Eigen::VectorXd hu = basis_.hyper(bp_.b1, bp_.d1, k_);
        const Eigen::VectorXd hv = basis_.hyper(bp_.b2, bp_.d2, k_);

        J.block(0, 0, K, K) = Eigen::MatrixXd(hu.asDiagonal()) -
                              op(k_ * g.ud + g.Dg + g.u * g.u * qs, S) - op(k_ * g.u, Sd);
        J.block(0, K, K, K) = pp_.f * I - op(g.u * g.v * qs, S);
        J.block(0, 2 * K, K, K) = -pp_.g * k_ * D - op(g.u * dDe, S);

        J.block(K, 0, K, K) = -pp_.f * I - op(k_ * g.vd + g.v * g.u * qs, S);
        J.block(K, K, K, K) = Eigen::MatrixXd(hv.asDiagonal()) - op(g.Dg + g.v * g.v * qs, S) - op(k_ * g.u, Sd);
        J.block(K, 2 * K, K, K) = -op(g.v * dDe, S);

        J.block(2 * K, 0, K, K) = -op(k_ * g.ed, S) - op(k_ * g.H, Sd);
        J.block(2 * K, 2 * K, K, K) = -op(k_ * g.u, Sd) - op(k_ * g.ud, S);
        return J;
    }

private:
    double k_;
    BackscatterParams bp_;
    PhysicalParams pp_;
    RealFourier basis_;
};

// ---------------------------------------------------------------- reduced equation

/// Coefficients of the wave shape phi (eta = f phi / g, v_h = phi' k_perp) in the real basis.
struct ReducedProfile {
    Eigen::VectorXd phi;
    double k = 1.0;
    double C = 0.0;
    double A1 = 0.0;  // half the cos(xi) coefficient of phi
    double residual = 0.0;
    int iterations = 0;
};

/// Leading-order GE profile 2 A1 cos xi (+ f A1^2/(9 g H0) cos 2xi when Q = 0).
inline ReducedProfile ge_profile(double A1, const BifParams& p, int N = 31) {
    ReducedProfile r;
    r.phi = Eigen::VectorXd::Zero(2 * N + 1);
    r.phi(RealFourier::cos_index(1)) = 2.0 * A1;
    if (p.Q == 0.0 && N >= 2) r.phi(RealFourier::cos_index(2)) = p.pp.f / (9.0 * p.pp.g * p.pp.H0) * A1 * A1;
    r.k = p.k();
    r.C = p.C();
    r.A1 = A1;
    return r;
}

/// Full (u, v, eta) state of a GE profile along x: u = 0, v = k phi', eta = f phi / g.
inline Eigen::VectorXd ge_state(const ReducedProfile& prof, const RealFourier& basis, const PhysicalParams& pp) {
    const int K = basis.K();
    Eigen::VectorXd U = Eigen::VectorXd::Zero(3 * K);
    U.segment(K, K) = prof.k * (basis.deriv() * prof.phi);
    U.segment(2 * K, K) = pp.f / pp.g * prof.phi;
    return U;
}

enum class Coupling { Constant, Geostrophic };

/// d psi/dt = -d k^4 psi'''' - b k^2 psi'' - (C + Q k |psi|) psi / (H0 + eta) with eta = phi0 (Constant)
/// or eta = (f/g) times the mean-zero antiderivative of psi (Geostrophic). Uses (b2, d2).
inline Eigen::VectorXd reduced_rhs(const Eigen::VectorXd& psi, Coupling coupling, double phi0, double k,
                                   const BackscatterParams& bp, const PhysicalParams& pp,
                                   const RealFourier& basis) {
    if (psi.size() != basis.K()) throw SizeMismatch("reduced_rhs: coefficient vector does not match basis");
    std::optional<RealFourier::QuadRule> own;
    if (pp.Q != 0.0 && psi.cwiseAbs().maxCoeff() > 0.0) {
        const auto kinks = basis.zeros(psi);
        if (!kinks.empty()) own = basis.split_rule(kinks);
    }
    const RealFourier::QuadRule& rule = own ? *own : basis.uniform();
    const Eigen::ArrayXd ps = (rule.S * psi).array();
    Eigen::ArrayXd eta;
    if (coupling == Coupling::Constant) {
        eta = Eigen::ArrayXd::Constant(ps.size(), phi0);
    } else {
        eta = (rule.S * (pp.f / pp.g * basis.antiderivative(psi))).array();
    }
    const Eigen::ArrayXd H = pp.H0 + eta;
    if (H.minCoeff() <= 0.0) throw DepthViolation("reduced_rhs: H0 + phi <= 0");
    const Eigen::ArrayXd drag = (pp.C + pp.Q * k * ps.abs()) * ps / H;
    return basis.hyper(bp.b2, bp.d2, k).cwiseProduct(psi) - rule.P * drag.matrix();
}

struct NewtonOptions {
    double tol = 1e-10;
    int max_iter = 50;
};

namespace detail {

// Even-subspace GE problem: unknown cos coefficients of phi, equations = sin coefficients of the
// v-momentum residual divided by k.
struct GeProblem {
    const ShallowWater1D& sw;

    Eigen::VectorXd expand(const Eigen::VectorXd& a) const {
        Eigen::VectorXd phi = Eigen::VectorXd::Zero(sw.K());
        for (int j = 1; j <= sw.basis().N(); ++j) phi(RealFourier::cos_index(j)) = a(j - 1);
        return phi;
    }

    Eigen::VectorXd state(const Eigen::VectorXd& a) const {
        ReducedProfile p;
        p.phi = expand(a);
        p.k = sw.k();
        return ge_state(p, sw.basis(), sw.physical());
    }

    Eigen::VectorXd pick_sin(const Eigen::VectorXd& vrow) const {
        const int N = sw.basis().N();
        Eigen::VectorXd r(N);
        for (int j = 1; j <= N; ++j) r(j - 1) = vrow(RealFourier::sin_index(j));
        return r;
    }

    Eigen::VectorXd residual(const Eigen::VectorXd& a) const {
        const int K = sw.K();
        return pick_sin(sw.rhs(state(a)).segment(K, K)) / sw.k();
    }

    Eigen::VectorXd residual_dC(const Eigen::VectorXd& a) const {
        const int K = sw.K();
        return pick_sin(sw.rhs_dC(state(a)).segment(K, K)) / sw.k();
    }

    Eigen::MatrixXd jacobian(const Eigen::VectorXd& a) const {
        const int K = sw.K();
        const int N = sw.basis().N();
        const PhysicalParams& pp = sw.physical();
        const Eigen::MatrixXd J = sw.jacobian(state(a));
        // d(v, eta)/d phi
        const Eigen::MatrixXd dv = J.block(K, K, K, K) * (sw.k() * sw.basis().deriv()) +
                                   J.block(K, 2 * K, K, K) * (pp.f / pp.g);
        Eigen::MatrixXd out(N, N);
        for (int i = 1; i <= N; ++i)
            for (int j = 1; j <= N; ++j)
                out(i - 1, j - 1) = dv(RealFourier::sin_index(i), RealFourier::cos_index(j)) / sw.k();
        return out;
    }
};

inline Eigen::VectorXd even_part(const ReducedProfile& p, int N) {
    Eigen::VectorXd a = Eigen::VectorXd::Zero(N);
    for (int j = 1; j <= N && RealFourier::cos_index(j) < p.phi.size(); ++j) a(j - 1) = p.phi(RealFourier::cos_index(j));
    return a;
}

}  // namespace detail

/// Semismooth Newton for steady GE profiles (even wave shapes, mean zero, translation fixed by evenness).
inline ReducedProfile reduced_steady_solve(const ReducedProfile& initial, double C, double k,
                                           const BackscatterParams& bp, const PhysicalParams& pp,
                                           NewtonOptions opt = {}, int N = 31, int M = 256) {
    PhysicalParams p = pp;
    p.C = C;
    ShallowWater1D sw(k, bp, p, N, M);
    detail::GeProblem prob{sw};
    Eigen::VectorXd a = detail::even_part(initial, N);
    ReducedProfile out;
    out.k = k;
    out.C = C;
    double last = INFINITY;
    for (int it = 0; it <= opt.max_iter; ++it) {
        const Eigen::VectorXd r = prob.residual(a);
        out.residual = r.cwiseAbs().maxCoeff();
        out.iterations = it;
        // once within tolerance, keep iterating while Newton still gains
        if (out.residual <= opt.tol && (out.residual <= 1e-3 * opt.tol || out.residual >= 0.5 * last)) {
            out.phi = prob.expand(a);
            out.A1 = 0.5 * a(0);
            return out;
        }
        if (it == opt.max_iter) break;
        last = out.residual;
        a -= prob.jacobian(a).partialPivLu().solve(r);
        if (!a.allFinite()) break;
    }
    throw ConvergenceError("reduced_steady_solve: no convergence in " + std::to_string(opt.max_iter) +
                           " iterations (residual " + std::to_string(out.residual) + ")");
}

// ---------------------------------------------------------------- stability

struct StabilityReport {
    std::vector<cplx> eigenvalues;  // sorted by decreasing real part
    double max_real = 0.0;
    int n_unstable = 0;
    bool has_unstable_complex_pair = false;
    double translation_residual = 0.0;  // ||L dU/dxi|| / ||dU/dxi||
    double translation_eigenvalue = 0.0;  // |lambda| of the eigenvalue closest to 0
    bool degenerate = false;              // |v_h| vanishes on an interval of quadrature points
};

/// Eigenvalues of the linearization of the 1D three-component system about U, in a frame moving with
/// frequency omega (d/dt U = F(U) - omega U').
inline StabilityReport linear_stability(const ShallowWater1D& sw, const Eigen::VectorXd& U, double omega = 0.0,
                                        double unstable_tol = 1e-8) {
    const int K = sw.K();
    Eigen::MatrixXd D3 = Eigen::MatrixXd::Zero(3 * K, 3 * K);
    for (int c = 0; c < 3; ++c) D3.block(c * K, c * K, K, K) = sw.basis().deriv();
    const Eigen::MatrixXd L = sw.jacobian(U) - omega * D3;
    StabilityReport rep;

    const auto g = sw.grid(U);
    const double smax = g.s.maxCoeff();
    if (smax > 0.0) {
        int run = 0;
        for (Eigen::Index i = 0; i < g.s.size() + 1; ++i) {
            const bool z = g.s(i % g.s.size()) <= 1e-12 * smax;
            run = z ? run + 1 : 0;
            if (run >= 2) rep.degenerate = true;
        }
    }

    const Eigen::VectorXd dU = D3 * U;
    if (dU.norm() > 0.0) rep.translation_residual = (L * dU).norm() / dU.norm();

    Eigen::EigenSolver<Eigen::MatrixXd> es;
    es.setMaxIterations(200 * int(L.rows()));
    es.compute(L, false);
    if (es.info() == Eigen::Success) {
        for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) rep.eigenvalues.push_back(es.eigenvalues()(i));
    } else {
        Eigen::ComplexEigenSolver<Eigen::MatrixXcd> ces;
        ces.setMaxIterations(200 * int(L.rows()));
        ces.compute(L.cast<cplx>(), false);
        if (ces.info() != Eigen::Success) throw ConvergenceError("linear_stability: eigenvalue iteration failed");
        for (Eigen::Index i = 0; i < ces.eigenvalues().size(); ++i) rep.eigenvalues.push_back(ces.eigenvalues()(i));
    }
    std::sort(rep.eigenvalues.begin(), rep.eigenvalues.end(), [](cplx a, cplx b) {
        return a.real() != b.real() ? a.real() > b.real() : a.imag() > b.imag();
    });
    rep.max_real = rep.eigenvalues.front().real();
    rep.translation_eigenvalue = INFINITY;
    for (const auto& z : rep.eigenvalues) {
        rep.translation_eigenvalue = std::min(rep.translation_eigenvalue, std::abs(z));
        if (z.real() > unstable_tol) {
            ++rep.n_unstable;
            if (std::abs(z.imag()) > unstable_tol) rep.has_unstable_complex_pair = true;
        }
    }
    return rep;
}

/// Stability of a GE profile against x-dependent perturbations of the same period.
inline StabilityReport reduced_stability(const ReducedProfile& prof, const BackscatterParams& bp,
                                         const PhysicalParams& pp, int N = 31, int M = 256) {
    PhysicalParams p = pp;
    p.C = prof.C;
    ShallowWater1D sw(prof.k, bp, p, N, M);
    ReducedProfile q = prof;
    if (q.phi.size() != sw.K()) {
        q.phi = Eigen::VectorXd::Zero(sw.K());
        q.phi.head(std::min<Eigen::Index>(prof.phi.size(), sw.K())) =
            prof.phi.head(std::min<Eigen::Index>(prof.phi.size(), sw.K()));
    }
    return linear_stability(sw, ge_state(q, sw.basis(), p));
}

// ---------------------------------------------------------------- gravity waves

struct GWQuadratures {
    double I1 = 0.0;
    double I2 = 0.0;
};

inline GWQuadratures gw_quadratures(double f, double g, double H0, double k_c) {
    using boost::math::quadrature::gauss_kronrod;
    const double c = k_c * k_c * g * H0;
    auto w = [&](double x) { return std::sqrt(f * f + c * std::cos(x) * std::cos(x)); };
    GWQuadratures q;
    q.I1 = gauss_kronrod<double, 61>::integrate(w, 0.0, 2.0 * pi, 15, 1e-14) / (2.0 * pi);
    q.I2 = gauss_kronrod<double, 61>::integrate([&](double x) { return w(x) * std::cos(2.0 * x); }, 0.0, 2.0 * pi,
                                                15, 1e-14) /
           (2.0 * pi);
    return q;
}

inline GWQuadratures gw_quadratures(const BifParams& p) { return gw_quadratures(p.pp.f, p.pp.g, p.pp.H0, p.k_c()); }

struct GWPrediction {
    double A1 = 0.0;
    double s = 0.0;
    double coefficient = 0.0;  // (2 Q k_c / H0)(I1 + k_c^2 g H0 / (2 f^2 + k_c^2 g H0) I2)
};

inline GWPrediction gw_amplitude_and_speed(const BifParams& p) {
    if (p.Q == 0.0) throw RangeError("gw_amplitude_and_speed: Q = 0 not covered");
    const double kc = p.k_c();
    const double f = p.pp.f;
    const double c = kc * kc * p.pp.g * p.pp.H0;
    const GWQuadratures q = gw_quadratures(p);
    GWPrediction out;
    out.coefficient = 2.0 * p.Q * kc / p.pp.H0 * (q.I1 + c / (2.0 * f * f + c) * q.I2);
    out.s = p.kappa * f * f / p.omega_c();
    out.A1 = p.alpha > 0.0 ? p.alpha / out.coefficient : 0.0;
    return out;
}

/// Travelling wave (u, v, eta)(k x + omega t) of the 1D system.
struct GWProfile {
    Eigen::VectorXd state;  // [u, v, eta] coefficients
    double omega = 0.0;     // frame frequency; -omega_c at onset for the displayed family
    double k = 1.0;
    double C = 0.0;
    double A1 = 0.0;  // cos coefficient of eta divided by 2 k^2 H0
    double residual = 0.0;
    int iterations = 0;
};

/// Leading-order GW seed 2 A1 (omega_c k cos, f k sin, k^2 H0 cos) in the frame omega = -omega_c.
inline GWProfile gw_seed(double A1, const BifParams& p, int N = 31) {
    const int K = 2 * N + 1;
    GWProfile g;
    g.state = Eigen::VectorXd::Zero(3 * K);
    const double k = p.k();
    const double wc = std::sqrt(p.pp.g * p.pp.H0 * k * k + p.pp.f * p.pp.f);
    g.state(RealFourier::cos_index(1)) = 2.0 * A1 * wc * k;
    g.state(K + RealFourier::sin_index(1)) = 2.0 * A1 * p.pp.f * k;
    g.state(2 * K + RealFourier::cos_index(1)) = 2.0 * A1 * k * k * p.pp.H0;
    g.omega = -wc;
    g.k = k;
    g.C = p.C();
    g.A1 = A1;
    return g;
}

namespace detail {

// Unknowns [U, omega]; equations omega U' - F(U) with the eta mean row replaced by mean(eta) = 0 and
// one extra row fixing the sin(xi) coefficient of eta.
struct GwProblem {
    const ShallowWater1D& sw;

    int size() const { return 3 * sw.K() + 1; }

    Eigen::VectorXd residual(const Eigen::VectorXd& x) const {
        const int K = sw.K();
        const Eigen::VectorXd U = x.head(3 * K);
        const double om = x(3 * K);
        Eigen::VectorXd r(3 * K + 1);
        Eigen::VectorXd dU(3 * K);
        for (int c = 0; c < 3; ++c) dU.segment(c * K, K) = sw.basis().deriv() * U.segment(c * K, K);
        r.head(3 * K) = om * dU - sw.rhs(U);
        r(2 * K) = U(2 * K);
        r(3 * K) = U(2 * K + RealFourier::sin_index(1));
        return r;
    }

    Eigen::VectorXd residual_dC(const Eigen::VectorXd& x) const {
        const int K = sw.K();
        Eigen::VectorXd r = Eigen::VectorXd::Zero(3 * K + 1);
        r.head(3 * K) = -sw.rhs_dC(x.head(3 * K));
        r(2 * K) = 0.0;
        return r;
    }

    Eigen::MatrixXd jacobian(const Eigen::VectorXd& x) const {
        const int K = sw.K();
        const Eigen::VectorXd U = x.head(3 * K);
        const double om = x(3 * K);
        Eigen::MatrixXd J = Eigen::MatrixXd::Zero(3 * K + 1, 3 * K + 1);
        J.topLeftCorner(3 * K, 3 * K) = -sw.jacobian(U);
        for (int c = 0; c < 3; ++c) {
            J.block(c * K, c * K, K, K) += om * sw.basis().deriv();
            J.block(c * K, 3 * K, K, 1) = sw.basis().deriv() * U.segment(c * K, K);
        }
        J.row(2 * K).setZero();
        J(2 * K, 2 * K) = 1.0;
        J.row(3 * K).setZero();
        J(3 * K, 2 * K + RealFourier::sin_index(1)) = 1.0;
        return J;
    }
};

inline double gw_amplitude_of(const Eigen::VectorXd& U, int K, double k, double H0) {
    return U(2 * K + RealFourier::cos_index(1)) / (2.0 * k * k * H0);
}

}  // namespace detail

/// Newton solve for a travelling gravity wave with unknown frame frequency.
inline GWProfile gw_travelling_solve(const GWProfile& initial, double C, double k, const BackscatterParams& bp,
                                     const PhysicalParams& pp, NewtonOptions opt = {}, int N = 31, int M = 256) {
    PhysicalParams p = pp;
    p.C = C;
    ShallowWater1D sw(k, bp, p, N, M);
    detail::GwProblem prob{sw};
    const int K = sw.K();
    if (initial.state.size() != 3 * K) throw SizeMismatch("gw_travelling_solve: seed does not match basis");
    Eigen::VectorXd x(3 * K + 1);
    x << initial.state, initial.omega;
    GWProfile out;
    out.k = k;
    out.C = C;
    for (int it = 0; it <= opt.max_iter; ++it) {
        const Eigen::VectorXd r = prob.residual(x);
        out.residual = r.cwiseAbs().maxCoeff();
        out.iterations = it;
        if (out.residual <= opt.tol) {
            out.state = x.head(3 * K);
            out.omega = x(3 * K);
            out.A1 = detail::gw_amplitude_of(out.state, K, k, p.H0);
            return out;
        }
        if (it == opt.max_iter) break;
        x -= prob.jacobian(x).partialPivLu().solve(r);
        if (!x.allFinite()) break;
    }
    throw ConvergenceError("gw_travelling_solve: no convergence in " + std::to_string(opt.max_iter) + " iterations");
}

// ---------------------------------------------------------------- continuation

enum class BranchType { GE, GW };

inline const char* to_string(BranchType t) { return t == BranchType::GE ? "GE" : "GW"; }

struct BranchPoint {
    BranchType type = BranchType::GE;
    double C = 0.0;
    double alpha = 0.0;  // (C_c - C) / H0
    double arclength = 0.0;
    double A1 = 0.0;
    double norm = 0.0;   // ||eta||_2 (mean measure)
    double omega = 0.0;  // frame frequency (GW)
    double residual = 0.0;
    ReducedProfile profile;  // GE wave shape
    Eigen::VectorXd state;   // [u, v, eta] coefficients
    StabilityReport stability;
};

struct ContinuationOptions {
    double ds = 1e-2;
    double ds_max = 0.1;
    double ds_min = 1e-6;
    int max_retries = 5;
    int n_steps = 400;
    double C_stop = 0.0;
    bool stability = true;
    NewtonOptions newton{1e-10, 12};
};

namespace detail {

inline double mean_norm(const Eigen::VectorXd& c) {
    double s = c(0) * c(0);
    for (Eigen::Index i = 1; i < c.size(); ++i) s += 0.5 * c(i) * c(i);
    return std::sqrt(s);
}

struct ContinuationProblem {
    std::function<Eigen::VectorXd(const Eigen::VectorXd&, double)> residual;
    std::function<Eigen::VectorXd(const Eigen::VectorXd&, double)> residual_dC;
    std::function<Eigen::MatrixXd(const Eigen::VectorXd&, double)> jacobian;
};

inline Eigen::VectorXd tangent(const ContinuationProblem& pr, const Eigen::VectorXd& x, double C,
                               const Eigen::VectorXd* previous, int direction) {
    const Eigen::Index n = x.size();
    Eigen::MatrixXd A(n, n + 1);
    A.leftCols(n) = pr.jacobian(x, C);
    A.col(n) = pr.residual_dC(x, C);
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(A.transpose());
    Eigen::VectorXd t = qr.householderQ() * Eigen::VectorXd::Unit(n + 1, n);
    if (previous) {
        if (t.dot(*previous) < 0.0) t = -t;
    } else if (t(n) * direction < 0.0) {
        t = -t;
    }
    return t / t.norm();
}

// Newton on [R(x, C); t.(X - X0) - ds] or, when t is null, on R(x, C_fixed).
inline bool correct(const ContinuationProblem& pr, Eigen::VectorXd& X, const Eigen::VectorXd& X0,
                    const Eigen::VectorXd* t, double ds, const NewtonOptions& opt, double& res, int& iters) {
    const Eigen::Index n = X.size() - 1;
    try {
        for (int it = 0; it <= opt.max_iter; ++it) {
            const Eigen::VectorXd x = X.head(n);
            const double C = X(n);
            const Eigen::VectorXd r = pr.residual(x, C);
            res = r.cwiseAbs().maxCoeff();
            iters = it;
            if (!std::isfinite(res)) return false;
            if (res <= opt.tol && (!t || std::abs(t->dot(X - X0) - ds) <= 1e-12)) return true;
            if (it == opt.max_iter) return false;
            if (t) {
                Eigen::MatrixXd J(n + 1, n + 1);
                J.topLeftCorner(n, n) = pr.jacobian(x, C);
                J.topRightCorner(n, 1) = pr.residual_dC(x, C);
                J.bottomRows(1) = t->transpose();
                Eigen::VectorXd G(n + 1);
                G << r, t->dot(X - X0) - ds;
                X -= J.partialPivLu().solve(G);
            } else {
                X.head(n) -= pr.jacobian(x, C).partialPivLu().solve(r);
            }
            if (!X.allFinite()) return false;
        }
    } catch (const DepthViolation&) {
        return false;
    }
    return false;
}

template <class MakePoint>
std::vector<BranchPoint> palc(const ContinuationProblem& pr, Eigen::VectorXd x0, double C0, int direction,
                              const ContinuationOptions& opt, const MakePoint& make_point) {
    const Eigen::Index n = x0.size();
    std::vector<BranchPoint> out;
    Eigen::VectorXd X0(n + 1);
    X0 << x0, C0;
    out.push_back(make_point(x0, C0, 0.0, pr.residual(x0, C0).cwiseAbs().maxCoeff()));
    Eigen::VectorXd t = tangent(pr, x0, C0, nullptr, direction);
    double ds = opt.ds;
    double s = 0.0;
    const auto beyond = [&](double C) { return direction < 0 ? C < opt.C_stop : C > opt.C_stop; };
    for (int step = 0; step < opt.n_steps; ++step) {
        bool ok = false;
        Eigen::VectorXd X;
        double res = 0.0;
        int iters = 0;
        for (int attempt = 0; attempt <= opt.max_retries; ++attempt) {
            X = X0 + ds * t;
            if (correct(pr, X, X0, &t, ds, opt.newton, res, iters)) {
                ok = true;
                break;
            }
            ds *= 0.5;
            if (ds < opt.ds_min) break;
        }
        if (!ok) throw ConvergenceError("continue_branch: step failed after retries at C = " + std::to_string(X0(n)));
        if (beyond(X(n))) {
            // land exactly on C_stop from the linear interpolant
            const double theta = (opt.C_stop - X0(n)) / (X(n) - X0(n));
            Eigen::VectorXd Y = X0 + theta * (X - X0);
            Y(n) = opt.C_stop;
            if (!correct(pr, Y, X0, nullptr, 0.0, opt.newton, res, iters))
                throw ConvergenceError("continue_branch: final solve at C_stop failed");
            s += (Y - X0).norm();
            out.push_back(make_point(Y.head(n), Y(n), s, res));
            break;
        }
        s += ds;
        out.push_back(make_point(X.head(n), X(n), s, res));
        const Eigen::VectorXd tn = tangent(pr, X.head(n), X(n), &t, direction);
        t = tn;
        X0 = X;
        if (iters <= 3) ds = std::min(opt.ds_max, 1.5 * ds);
    }
    return out;
}

}  // namespace detail

/// Pseudo-arclength continuation of a GE branch in C; direction -1 decreases C. Stops at C_stop.
inline std::vector<BranchPoint> continue_branch(const ReducedProfile& start, const BackscatterParams& bp,
                                                const PhysicalParams& pp, int direction,
                                                const ContinuationOptions& opt = {}, int N = 31, int M = 256) {
    PhysicalParams p = pp;
    ShallowWater1D sw(start.k, bp, p, N, M);
    detail::GeProblem ge{sw};
    const double Cc = pp.H0 * bp.b2 * bp.b2 / (4.0 * bp.d2);
    detail::ContinuationProblem pr;
    pr.residual = [&](const Eigen::VectorXd& a, double C) {
        sw.set_C(C);
        return ge.residual(a);
    };
    pr.residual_dC = [&](const Eigen::VectorXd& a, double C) {
        sw.set_C(C);
        return ge.residual_dC(a);
    };
    pr.jacobian = [&](const Eigen::VectorXd& a, double C) {
        sw.set_C(C);
        return ge.jacobian(a);
    };
    auto make = [&](const Eigen::VectorXd& a, double C, double s, double res) {
        BranchPoint b;
        b.type = BranchType::GE;
        b.C = C;
        b.alpha = (Cc - C) / pp.H0;
        b.arclength = s;
        b.residual = res;
        b.profile.phi = ge.expand(a);
        b.profile.k = start.k;
        b.profile.C = C;
        b.profile.A1 = 0.5 * a(0);
        b.profile.residual = res;
        b.A1 = b.profile.A1;
        sw.set_C(C);
        b.state = ge.state(a);
        b.norm = detail::mean_norm(b.state.tail(sw.K()));
        if (opt.stability) b.stability = linear_stability(sw, b.state);
        return b;
    };
    return detail::palc(pr, detail::even_part(start, N), start.C, direction, opt, make);
}

/// Pseudo-arclength continuation of a travelling GW branch in C.
inline std::vector<BranchPoint> continue_branch(const GWProfile& start, const BackscatterParams& bp,
                                                const PhysicalParams& pp, int direction,
                                                const ContinuationOptions& opt = {}, int N = 31, int M = 256) {
    PhysicalParams p = pp;
    ShallowWater1D sw(start.k, bp, p, N, M);
    detail::GwProblem gw{sw};
    const int K = sw.K();
    const double Cc = pp.H0 * bp.b2 * bp.b2 / (4.0 * bp.d2);
    detail::ContinuationProblem pr;
    pr.residual = [&](const Eigen::VectorXd& x, double C) {
        sw.set_C(C);
        return gw.residual(x);
    };
    pr.residual_dC = [&](const Eigen::VectorXd& x, double C) {
        sw.set_C(C);
        return gw.residual_dC(x);
    };
    pr.jacobian = [&](const Eigen::VectorXd& x, double C) {
        sw.set_C(C);
        return gw.jacobian(x);
    };
    auto make = [&](const Eigen::VectorXd& x, double C, double s, double res) {
        BranchPoint b;
        b.type = BranchType::GW;
        b.C = C;
        b.alpha = (Cc - C) / pp.H0;
        b.arclength = s;
        b.residual = res;
        b.state = x.head(3 * K);
        b.omega = x(3 * K);
        b.A1 = detail::gw_amplitude_of(b.state, K, start.k, pp.H0);
        b.norm = detail::mean_norm(b.state.tail(K));
        sw.set_C(C);
        if (opt.stability) b.stability = linear_stability(sw, b.state, b.omega);
        return b;
    };
    Eigen::VectorXd x0(3 * K + 1);
    x0 << start.state, start.omega;
    return detail::palc(pr, x0, start.C, direction, opt, make);
}

// ---------------------------------------------------------------- reduced dynamics

struct ReducedEvolveConfig {
    double k = 1.0;
    double C = 0.0;
    Coupling coupling = Coupling::Geostrophic;
    double phi0 = 0.0;  // constant depth offset for Coupling::Constant
    double dt = 0.05;
    double t_end = 100.0;
    int output_stride = 20;
    int N = 31;
    int M = 256;
};

struct ReducedSample {
    double t = 0.0;
    double A1 = 0.0;  // |first harmonic of psi|
    double norm = 0.0;
};

struct ReducedEvolution {
    std::vector<ReducedSample> samples;
    Eigen::VectorXd psi;
};

/// SBDF2 integration (hyperdiffusion implicit, drag explicit) of the reduced plane-wave equation.
inline ReducedEvolution reduced_time_evolve(const Eigen::VectorXd& psi0, const ReducedEvolveConfig& cfg,
                                            const BackscatterParams& bp, const PhysicalParams& pp) {
    if (!(cfg.dt > 0.0)) throw ConfigError("dt", "must be positive");
    if (cfg.output_stride < 1) throw ConfigError("output_stride", "must be at least 1");
    if (cfg.coupling == Coupling::Geostrophic && pp.f == 0.0)
        throw RangeError("reduced_time_evolve: geostrophic coupling needs f != 0; use Coupling::Constant");
    RealFourier basis(cfg.N, cfg.M);
    if (psi0.size() != basis.K()) throw SizeMismatch("reduced_time_evolve: initial data does not match basis");
    PhysicalParams p = pp;
    p.C = cfg.C;
    const Eigen::VectorXd h = basis.hyper(bp.b2, bp.d2, cfg.k);
    auto nonlinear = [&](const Eigen::VectorXd& psi) -> Eigen::VectorXd {
        return reduced_rhs(psi, cfg.coupling, cfg.phi0, cfg.k, bp, p, basis) - h.cwiseProduct(psi);
    };
    auto sample = [&](double t, const Eigen::VectorXd& psi) {
        return ReducedSample{t, RealFourier::first_harmonic(psi), detail::mean_norm(psi)};
    };
    ReducedEvolution out;
    Eigen::VectorXd psi = psi0;
    Eigen::VectorXd prev;
    Eigen::VectorXd n_prev;
    out.samples.push_back(sample(0.0, psi));
    const long total = long(std::llround(cfg.t_end / cfg.dt));
    for (long step = 1; step <= total; ++step) {
        const Eigen::VectorXd nl = nonlinear(psi);
        Eigen::VectorXd next;
        if (step == 1) {
            next = ((psi + cfg.dt * nl).array() / (1.0 - cfg.dt * h.array())).matrix();
        } else {
            next = ((4.0 * psi - prev + 2.0 * cfg.dt * (2.0 * nl - n_prev)).array() / (3.0 - 2.0 * cfg.dt * h.array()))
                       .matrix();
        }
        prev = psi;
        n_prev = nl;
        psi = next;
        if (!psi.allFinite() || psi.norm() > 1e12)
            throw SimulationDiverged("reduced_time_evolve: diverged", step * cfg.dt);
        if (step % cfg.output_stride == 0 || step == total) out.samples.push_back(sample(step * cfg.dt, psi));
    }
    out.psi = psi;
    return out;
}

}  // namespace bslab
