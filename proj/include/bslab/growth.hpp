#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <exception>
#include <thread>
#include <vector>

#include "simulator.hpp"

namespace bslab {

struct RateFit {
    double rate = 0.0;
    double r_squared = 0.0;
    int samples = 0;
};

/// Least-squares slope of log(value) against t over t_min <= t <= t_max.
inline RateFit fit_rate(const std::vector<double>& t, const std::vector<double>& value, double t_min = -INFINITY,
                        double t_max = INFINITY) {
    if (t.size() != value.size()) throw SizeMismatch("fit_rate: series of different length");
    std::vector<double> xs;
    std::vector<double> ys;
    for (std::size_t i = 0; i < t.size(); ++i) {
        if (t[i] < t_min || t[i] > t_max) continue;
        if (!(value[i] > 0.0)) throw RangeError("fit_rate: nonpositive value in window");
        xs.push_back(t[i]);
        ys.push_back(std::log(value[i]));
    }
    if (xs.size() < 10) throw RangeError("fit_rate: fewer than 10 samples in window");
    const double m = double(xs.size());
    double mx = 0.0;
    double my = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        mx += xs[i];
        my += ys[i];
    }
    mx /= m;
    my /= m;
    double sxx = 0.0;
    double sxy = 0.0;
    double syy = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        sxx += (xs[i] - mx) * (xs[i] - mx);
        sxy += (xs[i] - mx) * (ys[i] - my);
        syy += (ys[i] - my) * (ys[i] - my);
    }
    if (sxx == 0.0) throw RangeError("fit_rate: window has no time extent");
    RateFit fit;
    fit.rate = sxy / sxx;
    fit.r_squared = syy > 0.0 ? sxy * sxy / (sxx * syy) : 1.0;
    fit.samples = int(xs.size());
    return fit;
}

struct GrowthConfig {
    double b = 1.5;
    double d = 1.0;
    double eps = 0.05;
    std::array<double, 4> u_star{1.0, 0.0, 0.0, 0.0};
    double perturbation = 1e-3;  // H2 norm of the band-limited perturbation
    std::uint64_t seed = 0;
    int n = 32;
    double dt = 1e-3;
    double t_end = 10.0;
    int output_stride = 10;
    double fit_start = 1.0;
};

struct GrowthReport {
    RateFit large;  // rate of ||u_bar||_2
    RateFit small;  // rate of ||u'||_H1
    double t_min = 0.0;
    double t_max = 0.0;
    double growth_bound = 0.0;  // (1 - 2 eps)(b - d)
    double decay_bound = 0.0;   // -2(2d - b)
    // min_t ||u_bar(t)|| / ((1/(2 sqrt 2)) e^{growth_bound t} ||u_star||); >= 1 means (i) holds
    double lower_bound_margin = INFINITY;
    // max_t ||grad u'(t)|| / (sqrt 2 e^{decay_bound t} ||grad u'(0)||); <= 1 means (ii) holds
    double envelope_ratio = 0.0;
    bool total_dominates_large = true;
    bool pass_lower_bound = false;
    bool pass_envelope = false;
    bool pass_rate = false;
    Diagnostics diagnostics;

    bool pass() const { return pass_lower_bound && pass_envelope && pass_rate; }
};

/// Initial datum u_star + perturbation with the perturbation drawn from random_field(seed).
inline SpectralField2D growth_initial_field(const GrowthConfig& cfg) {
    SpectralField2D u = shear_modes(cfg.n, cfg.u_star);
    if (cfg.perturbation > 0.0) u += cfg.perturbation * random_field(cfg.n, cfg.seed);
    return u;
}

inline GrowthReport verify_growth_theorem(const GrowthConfig& cfg, const SpectralField2D& u0) {
    if (!(cfg.d > 0.0 && cfg.b > cfg.d && cfg.b < 2.0 * cfg.d))
        throw RangeError("verify_growth_theorem: requires d < b < 2d");
    if (!(cfg.eps > 0.0 && cfg.eps < 0.5)) throw RangeError("verify_growth_theorem: eps must lie in (0, 1/2)");
    const double star = l2_norm(shear_modes(cfg.n, cfg.u_star));
    if (star == 0.0) throw RangeError("verify_growth_theorem: u_star must be nonzero");

    SimConfig sc;
    sc.n = cfg.n;
    sc.dt = cfg.dt;
    sc.t_end = cfg.t_end;
    sc.b = cfg.b;
    sc.d = cfg.d;
    sc.output_stride = cfg.output_stride;
    Simulator sim(sc);
    GrowthReport rep;
    rep.diagnostics = sim.run(u0).second;

    rep.growth_bound = (1.0 - 2.0 * cfg.eps) * (cfg.b - cfg.d);
    rep.decay_bound = -2.0 * (2.0 * cfg.d - cfg.b);
    const auto& rec = rep.diagnostics.records;
    const double g0 = rec.front().small_grad;
    std::vector<double> ts;
    std::vector<double> large;
    std::vector<double> small;
    for (const auto& r : rec) {
        ts.push_back(r.t);
        large.push_back(r.large_norm);
        small.push_back(r.small_h1);
        const double lower = std::exp(rep.growth_bound * r.t) * star / (2.0 * std::sqrt(2.0));
        rep.lower_bound_margin = std::min(rep.lower_bound_margin, r.large_norm / lower);
        const double env = std::sqrt(2.0) * std::exp(rep.decay_bound * r.t) * g0;
        if (env > 0.0) rep.envelope_ratio = std::max(rep.envelope_ratio, r.small_grad / env);
        else if (r.small_grad > 0.0) rep.envelope_ratio = INFINITY;
        if (std::sqrt(2.0 * r.energy) < r.large_norm * (1.0 - 1e-14)) rep.total_dominates_large = false;
    }
    rep.t_min = cfg.fit_start;
    rep.t_max = cfg.t_end;
    rep.large = fit_rate(ts, large, rep.t_min, rep.t_max);
    if (g0 > 0.0) rep.small = fit_rate(ts, small, rep.t_min, rep.t_max);
    rep.pass_lower_bound = rep.lower_bound_margin >= 1.0;
    rep.pass_envelope = rep.envelope_ratio <= 1.0;
    rep.pass_rate = rep.large.rate >= rep.growth_bound;
    return rep;
}

inline GrowthReport verify_growth_theorem(const GrowthConfig& cfg) {
    return verify_growth_theorem(cfg, growth_initial_field(cfg));
}

/// Runs independent configurations on up to `threads` worker threads; output order equals input order.
inline std::vector<GrowthReport> verify_growth_batch(const std::vector<GrowthConfig>& cfgs, unsigned threads = 1) {
    std::vector<GrowthReport> out(cfgs.size());
    threads = std::max(1u, std::min<unsigned>(threads, unsigned(cfgs.size())));
    std::vector<std::exception_ptr> errors(cfgs.size());
    auto work = [&](unsigned w) {
        for (std::size_t i = w; i < cfgs.size(); i += threads) {
            try {
                out[i] = verify_growth_theorem(cfgs[i]);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    if (threads == 1) {
        work(0);
    } else {
        std::vector<std::thread> pool;
        for (unsigned w = 0; w < threads; ++w) pool.emplace_back(work, w);
        for (auto& th : pool) th.join();
    }
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
    return out;
}

}  // namespace bslab
