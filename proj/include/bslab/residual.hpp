#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <initializer_list>
#include <string>
#include <vector>

#include "core.hpp"

namespace bslab {

struct Vec3 {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;
};

/// amp * cos(k.x + phase); d/dt of the term is amp_rate * cos(.) - amp * phase_rate * sin(.).
struct WaveTerm {
    double amp = 0.0;
    double amp_rate = 0.0;
    Vec3 k;
    double phase = 0.0;
    double phase_rate = 0.0;
};

enum class Var { U = 0, V = 1, W = 2, B = 3, Eta = 4, P = 5 };
inline constexpr int n_vars = 6;

/// A flow at one instant as finite sums of wave terms per variable. B doubles as temperature
/// in the primitive model. The pressure may carry an additional linear part grad_p . x.
struct FlowSnapshot {
    double t = 0.0;
    std::array<std::vector<WaveTerm>, n_vars> terms;
    Vec3 grad_p;

    std::vector<WaveTerm>& operator[](Var v) { return terms[std::size_t(v)]; }
    const std::vector<WaveTerm>& operator[](Var v) const { return terms[std::size_t(v)]; }

    FlowSnapshot& operator+=(const FlowSnapshot& o) {
        for (int i = 0; i < n_vars; ++i) terms[i].insert(terms[i].end(), o.terms[i].begin(), o.terms[i].end());
        grad_p.x += o.grad_p.x;
        grad_p.y += o.grad_p.y;
        grad_p.z += o.grad_p.z;
        return *this;
    }

    std::size_t term_count() const {
        std::size_t n = 0;
        for (const auto& t : terms) n += t.size();
        return n;
    }

    /// Copy with the value of one term scaled, its recorded time derivative unchanged.
    FlowSnapshot corrupted(Var v, std::size_t index, double factor) const {
        FlowSnapshot c = *this;
        c[v].at(index).amp *= factor;
        return c;
    }
};

enum class Model { Euler2D, ShallowWater, BoussinesqHorizontal, Boussinesq3D, Primitive };

inline const char* model_name(Model m) {
    switch (m) {
        case Model::Euler2D: return "Euler2D";
        case Model::ShallowWater: return "ShallowWater";
        case Model::BoussinesqHorizontal: return "BoussinesqHorizontal";
        case Model::Boussinesq3D: return "Boussinesq3D";
        case Model::Primitive: return "Primitive";
    }
    return "?";
}

struct ModelParams {
    Model model = Model::Euler2D;
    BackscatterParams bp;
    PhysicalParams pp;
    // primitive equations
    double rho0 = 1.0;
    double expansion = 0.0;  // rho = rho0 (1 + a T)
    double depth = 1.0;      // z in [-depth, 0]
    double beta = 0.0;       // bottom condition dz u = beta u
    Vec2 wind;               // top condition dz u = wind
};

struct ResidualGrid {
    int nx = 64;
    int ny = 64;
    int nz = 1;
    double z0 = 0.0;  // z range; nz == 1 samples z0 only
    double z1 = 0.0;

    static ResidualGrid plane(int n) { return {n, n, 1, 0.0, 0.0}; }
    static ResidualGrid box(int n) { return {n, n, n, 0.0, 2.0 * pi * (n - 1) / n}; }
};

struct ResidualReport {
    double relative = 0.0;  // ||R|| / ||state||, R stacking all equations, state = (u, v, w, b, eta)
    std::string worst_equation;
    std::vector<std::string> equations;
    std::vector<double> per_equation;
};

namespace detail {

struct Jet {
    double val = 0, dt = 0, dx = 0, dy = 0, dz = 0;
    double lap = 0, lap_h = 0, bilap = 0, bilap_h = 0, dzz = 0;
};

inline Jet evaluate(const std::vector<WaveTerm>& terms, const Vec3& x) {
    Jet j;
    for (const auto& m : terms) {
        const double th = m.k.x * x.x + m.k.y * x.y + m.k.z * x.z + m.phase;
        const double c = std::cos(th);
        const double s = std::sin(th);
        const double kh2 = m.k.x * m.k.x + m.k.y * m.k.y;
        const double k2 = kh2 + m.k.z * m.k.z;
        j.val += m.amp * c;
        j.dt += m.amp_rate * c - m.amp * m.phase_rate * s;
        j.dx -= m.amp * m.k.x * s;
        j.dy -= m.amp * m.k.y * s;
        j.dz -= m.amp * m.k.z * s;
        j.lap -= m.amp * k2 * c;
        j.lap_h -= m.amp * kh2 * c;
        j.bilap += m.amp * k2 * k2 * c;
        j.bilap_h += m.amp * kh2 * kh2 * c;
        j.dzz -= m.amp * m.k.z * m.k.z * c;
    }
    return j;
}

class Accumulator {
public:
    explicit Accumulator(std::vector<std::string> names) : names_(std::move(names)), r2_(names_.size(), 0.0) {}

    void add(std::size_t e, std::initializer_list<double> terms) {
        double r = 0.0;
        for (double t : terms) r += t;
        r2_[e] += r * r;
    }

    void add_state(double v) { s2_ += v * v; }

    /// Residual norms relative to the state norm; absolute if the state vanishes.
    ResidualReport report() const {
        ResidualReport rep;
        rep.equations = names_;
        const double scale = s2_ > 0.0 ? std::sqrt(s2_) : 1.0;
        double total = 0.0;
        for (std::size_t e = 0; e < names_.size(); ++e) {
            const double v = std::sqrt(r2_[e]) / scale;
            total += r2_[e];
            rep.per_equation.push_back(v);
        }
        std::size_t worst = 0;
        for (std::size_t e = 1; e < names_.size(); ++e)
            if (rep.per_equation[e] > rep.per_equation[worst]) worst = e;
        rep.worst_equation = names_.empty() ? "" : names_[worst];
        rep.relative = std::sqrt(total) / scale;
        return rep;
    }

private:
    std::vector<std::string> names_;
    std::vector<double> r2_;
    double s2_ = 0.0;
};

inline std::vector<std::string> equation_names(Model m) {
    switch (m) {
        case Model::Euler2D:
        case Model::BoussinesqHorizontal: return {"momentum_x", "momentum_y", "divergence"};
        case Model::ShallowWater: return {"momentum_x", "momentum_y", "mass"};
        case Model::Boussinesq3D: return {"momentum_x", "momentum_y", "momentum_z", "divergence", "buoyancy"};
        case Model::Primitive:
            return {"momentum_x", "momentum_y", "divergence", "temperature", "hydrostatic", "top_bc", "bottom_bc"};
    }
    return {};
}

}  // namespace detail

namespace detail {

// Calls sink(e, {terms}) for every equation at point x; the terms of each equation sum to its residual.
template <class JetFn, class Sink>
void equations_at(const FlowSnapshot& s, const ModelParams& mp, const Vec3& x, bool top, bool bottom,
                  const JetFn& jet, Sink&& sink) {
    const auto& bp = mp.bp;
    const auto& pp = mp.pp;
    const auto u = jet(Var::U, x);
    const auto v = jet(Var::V, x);
    auto p = jet(Var::P, x);
    p.dx += s.grad_p.x;
    p.dy += s.grad_p.y;
    p.dz += s.grad_p.z;

    switch (mp.model) {
        case Model::Euler2D:
        case Model::BoussinesqHorizontal: {
            sink(0, {u.dt, u.val * u.dx, v.val * u.dy, -pp.f * v.val, p.dx, bp.d1 * u.bilap_h, bp.b1 * u.lap_h});
            sink(1, {v.dt, u.val * v.dx, v.val * v.dy, pp.f * u.val, p.dy, bp.d2 * v.bilap_h, bp.b2 * v.lap_h});
            sink(2, {u.dx, v.dy});
            break;
        }
        case Model::ShallowWater: {
            const auto eta = jet(Var::Eta, x);
            const double depth = pp.H0 + eta.val;
            const double speed = std::hypot(u.val, v.val);
            const double drag = (pp.C + pp.Q * speed) / depth;
            sink(0, {u.dt, u.val * u.dx, v.val * u.dy, -pp.f * v.val, pp.g * eta.dx, bp.d1 * u.bilap_h,
                     bp.b1 * u.lap_h, drag * u.val});
            sink(1, {v.dt, u.val * v.dx, v.val * v.dy, pp.f * u.val, pp.g * eta.dy, bp.d2 * v.bilap_h,
                     bp.b2 * v.lap_h, drag * v.val});
            sink(2, {eta.dt, u.val * eta.dx, v.val * eta.dy, depth * u.dx, depth * v.dy});
            break;
        }
        case Model::Boussinesq3D: {
            const auto w = jet(Var::W, x);
            const auto b = jet(Var::B, x);
            sink(0, {u.dt, u.val * u.dx, v.val * u.dy, w.val * u.dz, -pp.f * v.val, p.dx, bp.d1 * u.bilap,
                     bp.b1 * u.lap});
            sink(1, {v.dt, u.val * v.dx, v.val * v.dy, w.val * v.dz, pp.f * u.val, p.dy, bp.d2 * v.bilap,
                     bp.b2 * v.lap});
            sink(2, {w.dt, u.val * w.dx, v.val * w.dy, w.val * w.dz, p.dz, -b.val, -pp.nu_v * w.lap});
            sink(3, {u.dx, v.dy, w.dz});
            sink(4, {b.dt, u.val * b.dx, v.val * b.dy, w.val * b.dz, pp.N2 * w.val, -pp.mu * b.lap});
            break;
        }
        case Model::Primitive: {
            const auto w = jet(Var::W, x);
            const auto T = jet(Var::B, x);
            sink(0, {u.dt, u.val * u.dx, v.val * u.dy, w.val * u.dz, -pp.f * v.val, p.dx / mp.rho0,
                     bp.d1 * u.bilap_h, bp.b1 * u.lap_h, -pp.nu_v * u.dzz});
            sink(1, {v.dt, u.val * v.dx, v.val * v.dy, w.val * v.dz, pp.f * u.val, p.dy / mp.rho0,
                     bp.d2 * v.bilap_h, bp.b2 * v.lap_h, -pp.nu_v * v.dzz});
            sink(2, {u.dx, v.dy, w.dz});
            sink(3, {T.dt, u.val * T.dx, v.val * T.dy, w.val * T.dz, -pp.mu * T.lap});
            sink(4, {p.dz, mp.rho0 * pp.g, mp.rho0 * pp.g * mp.expansion * T.val});
            if (top) {
                sink(5, {u.dz, -mp.wind.x});
                sink(5, {v.dz, -mp.wind.y});
                sink(5, {w.val});
            }
            if (bottom) {
                sink(6, {u.dz, -mp.beta * u.val});
                sink(6, {v.dz, -mp.beta * v.val});
                sink(6, {w.val});
            }
            break;
        }
    }
}

}  // namespace detail

/// Residual of each equation at one point, using the time derivatives recorded in the snapshot.
inline std::vector<double> pointwise_residual(const FlowSnapshot& s, const ModelParams& mp, const Vec3& x) {
    std::vector<double> r(detail::equation_names(mp.model).size(), 0.0);
    auto jet = [&](Var v, const Vec3& y) { return detail::evaluate(s[v], y); };
    detail::equations_at(s, mp, x, false, false, jet, [&](std::size_t e, std::initializer_list<double> terms) {
        for (double t : terms) r[e] += t;
    });
    return r;
}

/// Pointwise PDE residual of a snapshot. Spatial derivatives are exact for the wave-term
/// representation; time derivatives come from the snapshot or, if given, from the two
/// neighbouring snapshots by central difference with step h.
inline ResidualReport snapshot_residual(const FlowSnapshot& s, const ModelParams& mp, const ResidualGrid& grid,
                                        const FlowSnapshot* s_minus = nullptr, const FlowSnapshot* s_plus = nullptr,
                                        double h = 0.0) {
    detail::Accumulator acc(detail::equation_names(mp.model));
    auto jet = [&](Var v, const Vec3& x) {
        detail::Jet j = detail::evaluate(s[v], x);
        if (s_minus && s_plus) {
            j.dt = (detail::evaluate((*s_plus)[v], x).val - detail::evaluate((*s_minus)[v], x).val) / (2.0 * h);
        }
        return j;
    };
    auto sink = [&](std::size_t e, std::initializer_list<double> terms) { acc.add(e, terms); };

    for (int iz = 0; iz < grid.nz; ++iz) {
        const double z = grid.nz == 1 ? grid.z0 : grid.z0 + (grid.z1 - grid.z0) * iz / (grid.nz - 1);
        const bool top = grid.nz > 1 && iz == grid.nz - 1;
        const bool bottom = grid.nz > 1 && iz == 0;
        for (int iy = 0; iy < grid.ny; ++iy) {
            for (int ix = 0; ix < grid.nx; ++ix) {
                const Vec3 x{2.0 * pi * ix / grid.nx, 2.0 * pi * iy / grid.ny, z};
                detail::equations_at(s, mp, x, top, bottom, jet, sink);
                for (Var v : {Var::U, Var::V, Var::W, Var::B, Var::Eta}) {
                    if (!s[v].empty()) acc.add_state(detail::evaluate(s[v], x).val);
                }
            }
        }
    }
    return acc.report();
}

/// Any flow type exposing `FlowSnapshot snapshot(double t) const` and `ModelParams model_params() const`.
template <class Flow>
ResidualReport verify_residual_report(const Flow& flow, const ResidualGrid& grid, double t, bool central_difference = false) {
    const FlowSnapshot s = flow.snapshot(t);
    if (!central_difference) return snapshot_residual(s, flow.model_params(), grid);
    const double h = 1e-6;
    const FlowSnapshot sm = flow.snapshot(t - h);
    const FlowSnapshot sp = flow.snapshot(t + h);
    return snapshot_residual(s, flow.model_params(), grid, &sm, &sp, h);
}

template <class Flow>
double verify_residual(const Flow& flow, const ResidualGrid& grid, double t, bool central_difference = false) {
    return verify_residual_report(flow, grid, t, central_difference).relative;
}

/// Type-erased flow for catalogs and CLI replay.
struct AnyFlow {
    std::string name;
    ModelParams params;
    ResidualGrid grid = ResidualGrid::plane(64);
    std::function<FlowSnapshot(double)> evaluator;

    FlowSnapshot snapshot(double t) const { return evaluator(t); }
    ModelParams model_params() const { return params; }
};

}  // namespace bslab
