// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include <chrono>
#include <cstdarg>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "bslab/bifurcation.hpp"
#include "bslab/dispersion.hpp"
#include "bslab/explicit_solutions.hpp"
#include "bslab/growth.hpp"
#include "bslab/simulator.hpp"

using namespace bslab;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

struct Criterion {
    int id;
    const char* name;
    double budget_s;
    std::function<Outcome()> run;
};

std::string fmt(const char* f, ...) __attribute__((format(printf, 1, 2)));
std::string fmt(const char* f, ...) {
    char buf[512];
    va_list ap;
    va_start(ap, f);
    std::vsnprintf(buf, sizeof buf, f, ap);
    va_end(ap);
    return buf;
}

const BackscatterParams iso = BackscatterParams::isotropic(2.0, 1.0);

PhysicalParams sw_onset(double C) {
    PhysicalParams p;
    p.f = 0.3;
    p.g = 9.8;
    p.H0 = 0.1;
    p.C = C;
    return p;
}

BifParams onset_params(double alpha) {
    BifParams p;
    p.alpha = alpha;
    p.Q = 0.05;
    return p;
}

// adaptive Simpson, independent of the library quadrature
double simpson(const std::function<double(double)>& f, double a, double b, double fa, double fm, double fb,
               double whole, double tol, int depth) {
    const double m = 0.5 * (a + b);
    const double flm = f(0.5 * (a + m));
    const double frm = f(0.5 * (m + b));
    const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    if (depth <= 0 || std::abs(left + right - whole) <= 15.0 * tol) return left + right + (left + right - whole) / 15.0;
    return simpson(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
           simpson(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

double period_mean(const std::function<double(double)>& f) {
    const double b = 2.0 * pi;
    const double fa = f(0.0), fm = f(pi), fb = f(b);
    return simpson(f, 0.0, b, fa, fm, fb, b / 6.0 * (fa + 4.0 * fm + fb), 1e-15, 40) / b;
}

SpectralField2D stokes(SpectralField2D u) {
    for (std::size_t i = 0; i < u.size(); ++i) {
        const double k2 = double(u.kx_of(i)) * u.kx_of(i) + double(u.ky_of(i)) * u.ky_of(i);
        u.uhat()[i] *= k2;
        u.vhat()[i] *= k2;
    }
    return u;
}

Outcome criticality() {
    const auto cp = critical_point(iso, sw_onset(0.0));
    const double ec = std::abs(cp.C_c - 0.1);
    const double ek = std::abs(cp.k_c - 1.0);
    const double ew = std::abs(cp.omega_c - std::sqrt(1.07));
    return {ec <= 1e-12 && ek <= 1e-12 && ew <= 1e-12,
            fmt("C_c=%.15g k_c=%.15g omega_c=%.15g (errors %.1e %.1e %.1e)", cp.C_c, cp.k_c, cp.omega_c, ec, ek, ew)};
}

Outcome classification() {
    const auto hi = sw_dispersion_roots({1.0, 0.0}, iso, sw_onset(0.12)).flags;
    const auto lo = sw_dispersion_roots({1.0, 0.0}, iso, sw_onset(0.08)).flags;
    const auto at = sw_dispersion_roots({1.0, 0.0}, iso, sw_onset(0.1)).flags;
    std::vector<WaveVector> ks;
    ks.reserve(40000);
    for (int i = 0; i < 200; ++i)
        for (int j = 0; j < 200; ++j) ks.push_back({-3.0 + 6.0 * i / 199, -3.0 + 6.0 * j / 199});
    const auto t0 = std::chrono::steady_clock::now();
    const auto sweep = spectrum_sweep(ks, iso, sw_onset(0.1), 1);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool ok = hi.str() == "Stable" && lo.str() == "Unstable" && at.str() == "ZeroRoot+Hopf" &&
                    sweep.size() == ks.size() && secs < 1.0;
    return {ok, fmt("C=0.12 %s, C=0.08 %s, C=0.1 %s, 200x200 sweep %.3f s", hi.str().c_str(), lo.str().c_str(),
                    at.str().c_str(), secs)};
}

Outcome catalog() {
    double worst = 0.0;
    double least_sensitive = INFINITY;
    std::string worst_name;
    int corrupted = 0;
    for (const auto& f : reference_catalog()) {
        const double r = verify_residual(f, f.grid, 0.5);
        if (r > worst) {
            worst = r;
            worst_name = f.name;
        }
        // at t = 0 the term values are the constructor amplitudes
        const FlowSnapshot s = f.snapshot(0.0);
        for (int v = 0; v < n_vars; ++v)
            for (std::size_t i = 0; i < s.terms[std::size_t(v)].size(); ++i) {
                const auto& term = s.terms[std::size_t(v)][i];
                // a constant surface offset only enters through the mean depth
                if (term.k.x == 0.0 && term.k.y == 0.0 && term.k.z == 0.0) continue;
                least_sensitive =
                    std::min(least_sensitive, snapshot_residual(s.corrupted(Var(v), i, 1.01), f.params, f.grid).relative);
                ++corrupted;
            }
    }
    return {worst <= 1e-8 && least_sensitive > 1e-3,
            fmt("max residual %.2e (%s), min corrupted residual %.2e over %d terms", worst, worst_name.c_str(),
                least_sensitive, corrupted)};
}

Outcome plane_wave_growth() {
    SimConfig c;
    c.n = 64;
    c.dt = 0.1;
    c.t_end = 2000.0;
    c.b = 0.0015;
    c.d = 0.001;
    c.output_stride = 100;
    Simulator sim(c);
    const auto [s, d] = sim.run(shear_mode(64, 1));
    std::vector<double> t, a;
    for (const auto& r : d.records) {
        t.push_back(r.t);
        a.push_back(r.amplitudes[0]);
    }
    const double rate = fit_rate(t, a).rate;
    SpectralField2D rest = s.field;
    rest.u(0, 1) = 0.0;
    rest.u(0, -1) = 0.0;
    double other = 0.0;
    for (std::size_t i = 0; i < rest.size(); ++i)
        other = std::max({other, std::abs(rest.uhat()[i]), std::abs(rest.vhat()[i])});
    const double rel = std::abs(rate - 5e-4) / 5e-4;
    return {rel <= 0.02 && other < 1e-12, fmt("rate %.6e (rel err %.1e), max other mode %.1e", rate, rel, other)};
}

Outcome growth_theorem() {
    std::vector<GrowthConfig> cfgs;
    for (int j = 0; j < 4; ++j)
        for (int r = 0; r < 20; ++r) {
            GrowthConfig c;
            c.u_star = {0.0, 0.0, 0.0, 0.0};
            c.u_star[std::size_t(j)] = 1.0;
            c.seed = std::uint64_t(4 * r + j);
            cfgs.push_back(c);
        }
    const auto reps = verify_growth_batch(cfgs, std::max(1u, std::thread::hardware_concurrency()));
    int passed = 0;
    double margin = INFINITY, envelope = 0.0;
    for (const auto& r : reps) {
        passed += r.pass_lower_bound && r.pass_envelope;
        margin = std::min(margin, r.lower_bound_margin);
        envelope = std::max(envelope, r.envelope_ratio);
    }
    return {passed == 80, fmt("%d/80 runs pass, min lower-bound margin %.3f, max envelope ratio %.3f", passed, margin,
                              envelope)};
}

Outcome gronwall() {
    std::mt19937_64 rng(2024);
    std::uniform_real_distribution<double> amp(0.1, 10.0);
    double worst = 0.0;
    for (int i = 0; i < 10; ++i) {
        SimConfig c;
        c.n = 32;
        c.dt = 0.005;
        c.t_end = 5.0;
        c.b = 0.5;
        c.d = 1.0;
        c.f = 0.5 * i;
        c.output_stride = 10;
        Simulator sim(c);
        SpectralField2D u0 = random_field(32, 100 + std::uint64_t(i));
        u0 *= amp(rng);
        const double n0 = l2_norm(u0);
        const auto d = sim.run(u0).second;
        for (const auto& r : d.records)
            worst = std::max(worst, std::sqrt(2.0 * r.energy) / (std::exp(-0.5 * r.t) * n0));
    }
    return {worst <= 1.0 + 1e-3, fmt("max ||u(t)|| / (e^{-t/2} ||u0||) = %.6f", worst)};
}

Outcome nonlinearity() {
    SimConfig c;
    c.n = 32;
    Simulator sim(c);
    double e_u = 0.0, e_a = 0.0;
    for (std::uint64_t s = 0; s < 50; ++s) {
        SpectralField2D u = random_field(32, 500 + s);
        u *= double(1 + s % 7);
        const SpectralField2D B = sim.bilinear(u, u);
        const double scale_u = l2_norm(B) * l2_norm(u);
        const SpectralField2D Au = stokes(u);
        const double scale_a = l2_norm(B) * l2_norm(Au);
        e_u = std::max(e_u, std::abs(inner(B, u)) / scale_u);
        e_a = std::max(e_a, std::abs(inner(B, Au)) / scale_a);
    }
    double e_t = 0.0;
    for (int j = 1; j <= 4; ++j)
        for (int k = 1; k <= 4; ++k)
            for (int l = 1; l <= 4; ++l)
                e_t = std::max(e_t, std::abs(inner(sim.bilinear(shear_mode(32, j), shear_mode(32, k)), shear_mode(32, l))));
    return {e_u <= 1e-11 && e_a <= 1e-11 && e_t <= 1e-12,
            fmt("<B(u,u),u> %.1e, <B(u,u),Au> %.1e (relative, 50 fields); <B(e_j,e_k),e_l> %.1e (64 triples)", e_u, e_a,
                e_t)};
}

Outcome energy_budget() {
    std::vector<double> resid;
    for (double dt : {0.02, 0.01, 0.005, 0.0025}) {
        SimConfig c;
        c.n = 32;
        c.dt = dt;
        c.b = 0.0015;
        c.d = 0.001;
        c.f = 0.7;
        Simulator sim(c);
        SimState s = sim.initial_state(random_field(32, 5));
        for (int i = 0; i < 4; ++i) sim.step(s);
        const SpectralField2D old = s.field;
        sim.step(s);
        SpectralField2D mid = old;
        mid += s.field;
        mid *= 0.5;
        const double dE = (energy(s.field) - energy(old)) / dt;
        resid.push_back(std::abs(dE - (c.b * grad_norm_sq(mid) - c.d * lap_norm_sq(mid))));
    }
    double slope = INFINITY;
    std::ostringstream os;
    for (std::size_t i = 1; i < resid.size(); ++i) {
        const double s = std::log2(resid[i - 1] / resid[i]);
        slope = std::min(slope, s);
        os << (i > 1 ? ", " : "") << fmt("%.3f", s);
    }
    return {slope >= 1.9, "dt-halving slopes " + os.str()};
}

Outcome endgame() {
    SimConfig c;
    c.n = 64;
    c.dt = 0.1;
    c.t_end = 8500.0;
    c.b = 0.0015;
    c.d = 0.001;
    c.output_stride = 1000;
    Simulator sim(c);
    const auto d = sim.run(random_field(64, 1)).second;
    const auto& last = d.records.back();
    const double frac = last.large_norm * last.large_norm / (2.0 * last.energy);
    return {frac >= 0.99, fmt("energy fraction in e1..e4 at t=%.0f: %.6f", last.t, frac)};
}

Outcome amplitudes() {
    double err[2];
    double gw_err[2];
    int i = 0;
    for (double alpha : {0.01, 0.005}) {
        const BifParams p = onset_params(alpha);
        const double A = ge_amplitude(p);
        const auto prof = reduced_steady_solve(ge_profile(A, p), p.C(), p.k(), p.bp, p.physical());
        err[i] = std::abs(std::abs(prof.A1) - A) / A;
        const double G = gw_amplitude_and_speed(p).A1;
        const auto gw = gw_travelling_solve(gw_seed(G, p), p.C(), p.k(), p.bp, p.physical());
        gw_err[i] = std::abs(std::abs(gw.A1) - G) / G;
        ++i;
    }
    const bool ok = err[0] <= 0.1 && err[1] <= 0.1 && err[1] < err[0];
    return {ok, fmt("GE rel err %.2e (alpha 0.01), %.2e (alpha 0.005); GW rel err %.2e, %.2e", err[0], err[1],
                    gw_err[0], gw_err[1])};
}

Outcome quadratures() {
    const double f = 0.3, c = 9.8 * 0.1;
    auto w = [&](double x) { return std::sqrt(f * f + c * std::cos(x) * std::cos(x)); };
    const double I1 = period_mean(w);
    const double I2 = period_mean([&](double x) { return w(x) * std::cos(2.0 * x); });
    const auto q = gw_quadratures(0.3, 9.8, 0.1, 1.0);
    const double e1 = std::abs(q.I1 - I1), e2 = std::abs(q.I2 - I2);
    return {e1 <= 1e-10 && e2 <= 1e-10 && q.I1 > q.I2 && q.I2 > 0.0,
            fmt("I1=%.15f I2=%.15f (oracle errors %.1e %.1e)", q.I1, q.I2, e1, e2)};
}

Outcome stability() {
    const BifParams p = onset_params(0.01);
    const auto prof = reduced_steady_solve(ge_profile(ge_amplitude(p), p), p.C(), p.k(), p.bp, p.physical());
    const auto st = reduced_stability(prof, p.bp, p.physical());
    return {st.has_unstable_complex_pair && st.translation_eigenvalue <= 1e-8 && st.translation_residual <= 1e-8,
            fmt("max Re %.3e, %d unstable, complex pair %s, translation eigenvalue %.1e, residual %.1e", st.max_real,
                st.n_unstable, st.has_unstable_complex_pair ? "yes" : "no", st.translation_eigenvalue,
                st.translation_residual)};
}

Outcome scaling() {
    std::mt19937_64 rng(13);
    std::uniform_real_distribution<double> logeps(-4.0, 2.0);
    double e0 = 0.0, eq = 0.0;
    for (int i = 0; i < 200; ++i) {
        const double eps = std::pow(10.0, logeps(rng));
        BifParams p = onset_params(0.01 + 0.05 * (i % 5));
        p.Q = 0.0;
        const double a0 = ge_amplitude(p);
        BifParams s = p;
        s.bp = {eps * p.bp.b1, eps * p.bp.b2, eps * p.bp.d1, eps * p.bp.d2};
        e0 = std::max(e0, std::abs(ge_amplitude(s) - a0 / std::sqrt(eps)) / (a0 / std::sqrt(eps)));
        p.Q = 0.05 + 0.1 * (i % 3);
        s.Q = p.Q;
        const double aq = ge_amplitude(p);
        eq = std::max(eq, std::abs(ge_amplitude(s) - aq) / aq);
    }
    return {e0 <= 1e-13 && eq <= 1e-13, fmt("max rel dev Q=0: %.1e, Q>0: %.1e over 200 random eps", e0, eq)};
}

}  // namespace

int main() {
    const std::vector<Criterion> all{
        {1, "criticality", 1.0, criticality},
        {2, "classification", 1.0, classification},
        {3, "explicit solutions", 30.0, catalog},
        {4, "plane-wave growth", 60.0, plane_wave_growth},
        {5, "growth theorem", 600.0, growth_theorem},
        {6, "decay bound", 60.0, gronwall},
        {7, "nonlinearity identities", 10.0, nonlinearity},
        {8, "energy budget", 10.0, energy_budget},
        {9, "endgame", 600.0, endgame},
        {10, "bifurcation amplitudes", 30.0, amplitudes},
        {11, "quadratures", 1.0, quadratures},
        {12, "stability", 30.0, stability},
        {13, "scaling", 1.0, scaling},
    };
    int failed = 0;
    for (const auto& c : all) {
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        const bool in_time = secs <= c.budget_s;
        const bool pass = o.pass && in_time;
        failed += !pass;
        std::printf("%s %2d %s: %s [%.2f s / %.0f s%s]\n", pass ? "PASS" : "FAIL", c.id, c.name, o.detail.c_str(), secs,
                    c.budget_s, in_time ? "" : ", over budget");
        std::fflush(stdout);
    }
    std::printf("%d/%zu criteria passed\n", int(all.size()) - failed, all.size());
    return failed == 0 ? 0 : 1;
}
