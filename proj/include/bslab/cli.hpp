#pragma once

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "bifurcation.hpp"
#include "dispersion.hpp"
#include "explicit_solutions.hpp"
#include "growth.hpp"
#include "io.hpp"
#include "simulator.hpp"

namespace bslab::cli {

using io::Json;

inline const std::vector<std::string>& commands() {
    static const std::vector<std::string> c{"spectrum", "modes", "flows", "simulate", "growth", "bifurcate", "verify"};
    return c;
}

// ---------------------------------------------------------------- schema

struct Param {
    std::string path;  // section.key
    Json value;        // default; its type is the declared type
    std::string doc;   // meaning and units
};

inline const std::vector<Param>& schema_table() {
    static const std::vector<Param> t{
        {"backscatter.b1", 2.0, "backscatter coefficient of the u equation [L^2/T]"},
        {"backscatter.b2", 2.0, "backscatter coefficient of the v equation [L^2/T]"},
        {"backscatter.d1", 1.0, "hyperviscosity of the u equation [L^4/T]"},
        {"backscatter.d2", 1.0, "hyperviscosity of the v equation [L^4/T]"},
        {"physical.f", 0.3, "Coriolis parameter [1/T]"},
        {"physical.g", 9.8, "gravitational acceleration [L/T^2]"},
        {"physical.H0", 0.1, "mean fluid depth [L]"},
        {"physical.C", 0.1, "linear bottom drag [L/T]"},
        {"physical.Q", 0.0, "quadratic bottom drag [-]"},
        {"spectrum.model", "sw", "sw (rotating shallow water) or backscatter (scalar operator)"},
        {"spectrum.k_max", 3.0, "largest wave number of the sweeps [1/L]"},
        {"spectrum.n_k", 601, "samples of the radial sweep"},
        {"spectrum.theta", 0.0, "direction of the radial sweep [rad]"},
        {"spectrum.grid", 200, "points per axis of the wave vector grid (sw)"},
        {"spectrum.C_values", Json::array({0.12, 0.08}), "extra drag values for spectrum_panels.csv (sw) [L/T]"},
        {"spectrum.b_values", Json::array({0.6, 1.6, 3.0}), "backscatter values (backscatter model) [L^2/T]"},
        {"spectrum.torus_max", 3, "largest integer wave number on the torus (backscatter model)"},
        {"modes.ratio", -0.5, "alpha2 / alpha1 of the plane-wave amplitudes [-]"},
        {"modes.C_values", Json::array(), "drag values; empty uses physical.C [L/T]"},
        {"modes.k_max", 2.0, "half width of the wave vector window [1/L]"},
        {"modes.grid", 161, "points per axis of the wave vector window"},
        {"modes.n_angles", 720, "angular resolution of the steady loci search"},
        {"flows.t", 0.5, "evaluation time of every catalog flow [T]"},
        {"sim.n", 64, "grid points per direction (power of two)"},
        {"sim.dt", 0.1, "time step [T]"},
        {"sim.t_end", 100.0, "final time [T]"},
        {"sim.b", 0.0015, "backscatter coefficient [L^2/T]"},
        {"sim.d", 0.001, "hyperviscosity [L^4/T]"},
        {"sim.f", 0.0, "Coriolis parameter [1/T]"},
        {"sim.seed", 1, "seed of the random initial datum"},
        {"sim.dealias_fraction", 2.0 / 3.0, "retained fraction of the Nyquist range [-]"},
        {"sim.output_stride", 10, "steps between diagnostic records"},
        {"sim.retain_mean", false, "evolve the (0,0) mode instead of zeroing it"},
        {"sim.init", "random", "random (band-limited) or shear (sum of e1..e4)"},
        {"sim.init_kmax", 0.0, "band limit of the random datum; 0 selects n/8 [1/L]"},
        {"sim.init_scale", 1.0, "H2 norm of the random datum"},
        {"sim.amplitudes", Json::array({1.0, 0.0, 0.0, 0.0}), "coefficients of e1..e4 for init = shear"},
        {"growth.b", 1.5, "backscatter coefficient [L^2/T]"},
        {"growth.d", 1.0, "hyperviscosity [L^4/T]"},
        {"growth.eps", 0.05, "rate slack in (0, 1/2) [-]"},
        {"growth.perturbation", 1e-3, "H2 norm of each random perturbation"},
        {"growth.runs_per_mode", 20, "random perturbations per basis mode"},
        {"growth.modes", Json::array({1, 2, 3, 4}), "indices j of the base states e_j"},
        {"growth.seed", 0, "first seed; run r of mode j uses seed + 4 r + j - 1"},
        {"growth.n", 32, "grid points per direction"},
        {"growth.dt", 1e-3, "time step [T]"},
        {"growth.t_end", 10.0, "final time [T]"},
        {"growth.output_stride", 10, "steps between diagnostic records"},
        {"growth.fit_start", 1.0, "start of the rate fit window [T]"},
        {"bifurcation.mode", "branches", "branches, amplitude or steady"},
        {"bifurcation.branches", "both", "GE, GW or both (mode branches)"},
        {"bifurcation.alpha", 0.01, "drag offset (C_c - C) / H0 of the starting point or sweep [1/T]"},
        {"bifurcation.kappa", 0.0, "wave number offset |k| - k_c [1/L]"},
        {"bifurcation.N", 31, "Fourier modes of the profiles"},
        {"bifurcation.M", 256, "quadrature nodes"},
        {"bifurcation.ds", 0.01, "initial arclength step"},
        {"bifurcation.ds_max", 0.1, "largest arclength step"},
        {"bifurcation.n_steps", 400, "maximal continuation steps"},
        {"bifurcation.C_stop", 0.0, "continuation end point in C [L/T]"},
        {"bifurcation.stability", true, "compute spectra along the branches"},
        {"bifurcation.alpha_min", -0.05, "alpha sweep start (mode amplitude) [1/T]"},
        {"bifurcation.alpha_max", 0.2, "alpha sweep end (mode amplitude) [1/T]"},
        {"bifurcation.n_alpha", 251, "alpha samples (mode amplitude)"},
        {"bifurcation.kappa_max", 0.3, "kappa sweep half width (mode amplitude) [1/L]"},
        {"bifurcation.n_kappa", 241, "kappa samples (mode amplitude)"},
        {"bifurcation.amp_Q", Json::array({0.0}), "Q of each amplitude curve (mode amplitude)"},
        {"bifurcation.amp_f", Json::array({0.3}), "f of each amplitude curve (mode amplitude) [1/T]"},
        {"verify.n", 32, "grid of the nonlinearity checks"},
        {"verify.samples", 5, "random fields of the nonlinearity checks"},
        {"verify.seed", 7, "first seed of the nonlinearity checks"},
    };
    return t;
}

inline std::vector<std::string> sections_of(const std::string& command) {
    if (command == "spectrum") return {"backscatter", "physical", "spectrum"};
    if (command == "modes") return {"backscatter", "physical", "modes"};
    if (command == "flows") return {"flows"};
    if (command == "simulate") return {"sim"};
    if (command == "growth") return {"growth"};
    if (command == "bifurcate") return {"backscatter", "physical", "bifurcation"};
    if (command == "verify") return {"backscatter", "physical", "verify"};
    throw ConfigError("command", "unknown command '" + command + "'");
}

/// Default parameter document of a command.
inline Json defaults(const std::string& command) {
    const auto secs = sections_of(command);
    Json j = Json::object();
    for (const auto& p : schema_table()) {
        const auto dot = p.path.find('.');
        const std::string sec = p.path.substr(0, dot);
        if (std::find(secs.begin(), secs.end(), sec) == secs.end()) continue;
        j[sec][p.path.substr(dot + 1)] = p.value;
    }
    return j;
}

// ---------------------------------------------------------------- presets

struct Preset {
    std::string command;
    Json parameters;
    std::string summary;
};

inline const std::map<std::string, Preset>& presets() {
    static const std::map<std::string, Preset> p{
        {"bs_spectra",
         {"spectrum",
          {{"backscatter", {{"d1", 1.0}, {"d2", 1.0}}},
           {"spectrum", {{"model", "backscatter"}, {"b_values", {0.6, 1.6, 3.0}}, {"k_max", 2.0}, {"torus_max", 2}}}},
          "backscatter operator spectra, d = 1, b = 0.6, 1.6, 3"}},
        {"sw_onset",
         {"spectrum",
          {{"backscatter", {{"b1", 2.0}, {"b2", 2.0}, {"d1", 1.0}, {"d2", 1.0}}},
           {"physical", {{"f", 0.3}, {"g", 9.8}, {"H0", 0.1}, {"C", 0.1}, {"Q", 0.0}}},
           {"spectrum", {{"model", "sw"}, {"C_values", {0.12, 0.08}}, {"k_max", 3.0}}}},
          "shallow water spectra at C = C_c = 0.1, panels at C = 0.12 and 0.08"}},
        {"loci_mixed",
         {"modes",
          {{"backscatter", {{"b1", 1.5}, {"b2", 2.2}, {"d1", 1.0}, {"d2", 1.04}}},
           {"physical", {{"f", 0.3}, {"g", 9.8}, {"H0", 0.1}, {"C", 0.0}, {"Q", 0.0}}},
           {"modes", {{"ratio", -0.5}, {"C_values", Json::array()}, {"k_max", 2.0}}}},
          "plane-wave loci with alpha1 = 1, alpha2 = -0.5"}},
        {"euler_backscatter",
         {"simulate",
          {{"sim",
            {{"n", 128},
             {"dt", 0.1},
             {"t_end", 8500.0},
             {"b", 0.0015},
             {"d", 0.001},
             {"f", 0.0},
             {"init", "random"},
             {"output_stride", 100}}}},
          "2D Euler with backscatter, 128^2 modes, dt = 0.1 to t = 8500"}},
        {"loci_drag",
         {"modes",
          {{"backscatter", {{"b1", 1.5}, {"b2", 2.2}, {"d1", 1.0}, {"d2", 1.04}}},
           {"physical", {{"f", 0.3}, {"g", 9.8}, {"H0", 0.1}, {"Q", 0.0}}},
           {"modes", {{"ratio", 0.0}, {"C_values", {0.11, 0.08, 0.05, 0.0}}, {"k_max", 2.0}}}},
          "plane-wave loci with alpha2 = 0 at C = 0.11, 0.08, 0.05, 0"}},
        {"ge_amplitudes",
         {"bifurcate",
          {{"backscatter", {{"b1", 2.0}, {"b2", 2.0}, {"d1", 1.0}, {"d2", 1.0}}},
           {"physical", {{"g", 9.8}, {"H0", 0.1}}},
           {"bifurcation",
            {{"mode", "amplitude"}, {"alpha", 0.1}, {"amp_Q", {0.0, 0.0, 0.5}}, {"amp_f", {10.0, 0.0, 10.0}}}}},
          "leading-order GE amplitudes, Q = 0 (f = 10, f = 0) and Q = 0.5"}},
        {"onset_branches",
         {"bifurcate",
          {{"backscatter", {{"b1", 2.0}, {"b2", 2.0}, {"d1", 1.0}, {"d2", 1.0}}},
           {"physical", {{"f", 0.3}, {"g", 9.8}, {"H0", 0.1}, {"Q", 0.05}}},
           {"bifurcation", {{"mode", "branches"}, {"branches", "both"}, {"alpha", 0.01}, {"C_stop", 0.0}}}},
          "numerical GE and GW branches, isotropic, Q = 0.05"}},
        {"shear_growth",
         {"growth",
          {{"growth",
            {{"b", 1.5},
             {"d", 1.0},
             {"eps", 0.05},
             {"perturbation", 1e-3},
             {"runs_per_mode", 20},
             {"modes", {1, 2, 3, 4}},
             {"n", 32},
             {"dt", 1e-3},
             {"t_end", 10.0}}}},
          "growth theorem harness, d = 1, b = 1.5, 20 perturbations of each e_j"}},
    };
    return p;
}

// ---------------------------------------------------------------- configuration

struct RunConfig {
    std::string command;
    Json parameters;
    std::string output_dir;
    std::optional<std::string> preset;

    /// Document written to output_dir/config.resolved.
    Json resolved() const {
        Json j;
        j["command"] = command;
        j["preset"] = preset ? Json(*preset) : Json(nullptr);
        j["parameters"] = parameters;
        return j;
    }
};

namespace detail {

inline std::string type_name(const Json& v) {
    if (v.is_boolean()) return "boolean";
    if (v.is_number_integer()) return "integer";
    if (v.is_number()) return "number";
    if (v.is_string()) return "string";
    if (v.is_array()) return "array of numbers";
    if (v.is_object()) return "object";
    return "null";
}

inline bool compatible(const Json& declared, const Json& given) {
    if (declared.is_boolean()) return given.is_boolean();
    if (declared.is_number_integer()) return given.is_number_integer();
    if (declared.is_number()) return given.is_number();
    if (declared.is_string()) return given.is_string();
    if (declared.is_array()) {
        if (!given.is_array()) return false;
        const bool ints = !declared.empty() && declared.front().is_number_integer();
        for (const auto& e : given)
            if (ints ? !e.is_number_integer() : !e.is_number()) return false;
        return true;
    }
    return false;
}

/// Overlays src on dst; every key of src must exist in dst with a compatible type.
inline void overlay(Json& dst, const Json& src, const std::string& prefix) {
    if (!src.is_object()) throw ConfigError(prefix, "expected an object");
    for (auto it = src.begin(); it != src.end(); ++it) {
        const std::string path = prefix.empty() ? it.key() : prefix + "." + it.key();
        if (!dst.contains(it.key())) throw ConfigError(path, "unknown key");
        Json& d = dst[it.key()];
        if (d.is_object()) {
            overlay(d, it.value(), path);
            continue;
        }
        if (!compatible(d, it.value()))
            throw ConfigError(path, "type mismatch: expected " + type_name(d) + ", got " + type_name(it.value()));
        d = it.value();
    }
}

inline std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, sep)) out.push_back(item);
    return out;
}

/// Full dotted path of a possibly bare key.
inline std::string resolve_key(const Json& params, const std::string& key) {
    if (key.find('.') != std::string::npos) return key;
    std::vector<std::string> hits;
    for (auto it = params.begin(); it != params.end(); ++it)
        if (it.value().is_object() && it.value().contains(key)) hits.push_back(it.key() + "." + key);
    if (hits.empty()) throw ConfigError(key, "unknown key");
    if (hits.size() > 1) {
        std::string all;
        for (const auto& h : hits) all += (all.empty() ? "" : ", ") + h;
        throw ConfigError(key, "ambiguous key, use one of " + all);
    }
    return hits.front();
}

inline void apply_set(Json& params, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError(assignment, "override must have the form key=value");
    const std::string path = resolve_key(params, assignment.substr(0, eq));
    const std::string text = assignment.substr(eq + 1);
    Json value = Json::parse(text, nullptr, false);
    if (value.is_discarded()) value = text;
    Json patch = value;
    const auto parts = split(path, '.');
    for (auto it = parts.rbegin(); it != parts.rend(); ++it) patch = Json{{*it, patch}};
    overlay(params, patch, "");
}

}  // namespace detail

/// Resolves command, preset, config file and key=value overrides (in increasing precedence).
inline RunConfig parse_config(std::optional<std::string> command, const std::optional<std::string>& config_file,
                              std::optional<std::string> preset, const std::vector<std::string>& sets,
                              std::optional<std::string> output_dir) {
    Json file = Json::object();
    if (config_file) {
        if (!std::filesystem::exists(*config_file)) throw ConfigError("config", "file not found: " + *config_file);
        file = Json::parse(io::read_text(*config_file), nullptr, false);
        if (file.is_discarded()) throw ConfigError("config", "not valid JSON: " + *config_file);
        if (!file.is_object()) throw ConfigError("config", "top level must be an object");
        if (file.contains("command")) {
            if (!file["command"].is_string()) throw ConfigError("command", "type mismatch: expected string");
            const std::string c = file["command"];
            if (command && *command != c)
                throw ConfigError("command", "file names '" + c + "' but '" + *command + "' was requested");
            command = c;
            file.erase("command");
        }
        if (file.contains("preset")) {
            if (!file["preset"].is_string()) throw ConfigError("preset", "type mismatch: expected string");
            if (!preset) preset = file["preset"].get<std::string>();
            file.erase("preset");
        }
        if (file.contains("output_dir")) {
            if (!file["output_dir"].is_string()) throw ConfigError("output_dir", "type mismatch: expected string");
            if (!output_dir) output_dir = file["output_dir"].get<std::string>();
            file.erase("output_dir");
        }
    }
    const Preset* pre = nullptr;
    if (preset) {
        const auto it = presets().find(*preset);
        if (it == presets().end()) throw ConfigError("preset", "unknown preset '" + *preset + "'");
        pre = &it->second;
        if (command && *command != pre->command)
            throw ConfigError("preset", "preset '" + *preset + "' belongs to command '" + pre->command + "'");
        command = pre->command;
    }
    if (!command) throw ConfigError("command", "missing required key");
    if (!output_dir || output_dir->empty()) throw ConfigError("output_dir", "missing required key (use --out)");

    RunConfig rc;
    rc.command = *command;
    rc.preset = preset;
    rc.output_dir = *output_dir;
    rc.parameters = defaults(rc.command);
    if (pre) detail::overlay(rc.parameters, pre->parameters, "");
    detail::overlay(rc.parameters, file, "");
    for (const auto& s : sets) detail::apply_set(rc.parameters, s);
    return rc;
}

// ---------------------------------------------------------------- parameter access

inline const Json& at(const Json& params, const std::string& path) {
    const Json* j = &params;
    for (const auto& part : detail::split(path, '.')) {
        if (!j->is_object() || !j->contains(part)) throw ConfigError(path, "missing required key");
        j = &(*j)[part];
    }
    return *j;
}

inline double num(const Json& p, const std::string& path) { return at(p, path).get<double>(); }
inline int integer(const Json& p, const std::string& path) { return at(p, path).get<int>(); }
inline bool flag(const Json& p, const std::string& path) { return at(p, path).get<bool>(); }
inline std::string str(const Json& p, const std::string& path) { return at(p, path).get<std::string>(); }
inline std::vector<double> nums(const Json& p, const std::string& path) {
    return at(p, path).get<std::vector<double>>();
}

inline void require(bool ok, const std::string& path, const std::string& what) {
    if (!ok) throw ConfigError(path, what);
}

inline std::string one_of(const Json& p, const std::string& path, std::initializer_list<const char*> allowed) {
    const std::string v = str(p, path);
    std::string list;
    for (const char* a : allowed) {
        if (v == a) return v;
        list += (list.empty() ? "" : ", ") + std::string(a);
    }
    throw ConfigError(path, "must be one of " + list + " (got '" + v + "')");
}

inline BackscatterParams backscatter_of(const Json& p) {
    BackscatterParams bp{num(p, "backscatter.b1"), num(p, "backscatter.b2"), num(p, "backscatter.d1"),
                         num(p, "backscatter.d2")};
    require(bp.d1 > 0.0, "backscatter.d1", "must be positive");
    require(bp.d2 > 0.0, "backscatter.d2", "must be positive");
    require(bp.b1 >= 0.0, "backscatter.b1", "must be non-negative");
    require(bp.b2 >= 0.0, "backscatter.b2", "must be non-negative");
    return bp;
}

inline PhysicalParams physical_of(const Json& p) {
    PhysicalParams pp;
    pp.f = num(p, "physical.f");
    pp.g = num(p, "physical.g");
    pp.H0 = num(p, "physical.H0");
    pp.C = num(p, "physical.C");
    pp.Q = num(p, "physical.Q");
    require(pp.g > 0.0, "physical.g", "must be positive");
    require(pp.H0 > 0.0, "physical.H0", "must be positive");
    require(pp.C >= 0.0, "physical.C", "must be non-negative");
    require(pp.Q >= 0.0, "physical.Q", "must be non-negative");
    return pp;
}

inline SimConfig sim_config_of(const Json& p) {
    SimConfig c;
    c.n = integer(p, "sim.n");
    c.dt = num(p, "sim.dt");
    c.t_end = num(p, "sim.t_end");
    c.b = num(p, "sim.b");
    c.d = num(p, "sim.d");
    c.f = num(p, "sim.f");
    const long long seed = at(p, "sim.seed").get<long long>();
    require(seed >= 0, "sim.seed", "must be non-negative");
    c.seed = std::uint64_t(seed);
    c.dealias_fraction = num(p, "sim.dealias_fraction");
    c.output_stride = integer(p, "sim.output_stride");
    c.retain_mean = flag(p, "sim.retain_mean");
    try {
        c.validate();
    } catch (const ConfigError& e) {
        const std::string what = e.what();
        throw ConfigError("sim." + e.key, what.substr(std::min(what.size(), e.key.size() + 2)));
    }
    return c;
}

inline std::vector<double> linspace(double a, double b, int n) {
    std::vector<double> x(std::size_t(std::max(n, 0)));
    for (int i = 0; i < n; ++i) x[std::size_t(i)] = n == 1 ? a : a + (b - a) * i / (n - 1);
    return x;
}

/// Worker threads: BSLAB_THREADS if set, else the hardware concurrency.
inline unsigned thread_budget() {
    if (const char* env = std::getenv("BSLAB_THREADS")) {
        char* end = nullptr;
        const long v = std::strtol(env, &end, 10);
        if (end == env || *end != '\0' || v < 1) throw ConfigError("BSLAB_THREADS", "must be a positive integer");
        return unsigned(v);
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

// ---------------------------------------------------------------- commands

namespace detail {

inline std::array<cplx, 3> sorted_roots(std::array<cplx, 3> r) {
    std::sort(r.begin(), r.end(), [](cplx a, cplx b) {
        if (a.real() != b.real()) return a.real() > b.real();
        return a.imag() > b.imag();
    });
    return r;
}

inline void spectrum_sw(const Json& p, io::OutputDir& out, Json& summary) {
    const BackscatterParams bp = backscatter_of(p);
    const PhysicalParams pp = physical_of(p);
    const double kmax = num(p, "spectrum.k_max");
    const int nk = integer(p, "spectrum.n_k");
    const int grid = integer(p, "spectrum.grid");
    const double th = num(p, "spectrum.theta");
    require(kmax > 0.0, "spectrum.k_max", "must be positive");
    require(nk >= 2, "spectrum.n_k", "must be at least 2");
    require(grid >= 2, "spectrum.grid", "must be at least 2");
    const unsigned threads = thread_budget();

    std::vector<WaveVector> ray;
    for (double s : linspace(0.0, kmax, nk)) ray.push_back({s * std::cos(th), s * std::sin(th)});
    auto radial = [&](io::CsvTable& t, const PhysicalParams& q, std::optional<double> C) {
        for (const auto& r : spectrum_sweep(ray, bp, q, threads)) {
            const auto z = sorted_roots(r.roots);
            const double k = r.k.norm();
            if (C)
                t.add(*C, k, z[0].real(), z[0].imag(), z[1].real(), z[1].imag(), z[2].real(), z[2].imag(),
                      r.flags.str());
            else
                t.add(k, z[0].real(), z[0].imag(), z[1].real(), z[1].imag(), z[2].real(), z[2].imag(), r.flags.str());
        }
    };
    io::CsvTable line({"k", "re1", "im1", "re2", "im2", "re3", "im3", "flags"});
    radial(line, pp, std::nullopt);
    out.write("spectrum.csv", line);

    io::CsvTable panels({"C", "k", "re1", "im1", "re2", "im2", "re3", "im3", "flags"});
    for (double C : nums(p, "spectrum.C_values")) {
        require(C >= 0.0, "spectrum.C_values", "entries must be non-negative");
        PhysicalParams q = pp;
        q.C = C;
        radial(panels, q, C);
    }
    out.write("spectrum_panels.csv", panels);

    std::vector<WaveVector> ks;
    const auto axis = linspace(-kmax, kmax, grid);
    for (double ky : axis)
        for (double kx : axis) ks.push_back({kx, ky});
    const auto res = spectrum_sweep(ks, bp, pp, threads);
    io::CsvTable g({"kx", "ky", "max_real", "flags"});
    double best = -INFINITY;
    WaveVector arg;
    int unstable = 0;
    for (const auto& r : res) {
        g.add(r.k.kx, r.k.ky, r.max_real(), r.flags.str());
        if (r.max_real() > best) {
            best = r.max_real();
            arg = r.k;
        }
        if (r.flags.unstable) ++unstable;
    }
    out.write("spectrum_grid.csv", g);

    summary["model"] = "sw";
    summary["C"] = pp.C;
    summary["max_real"] = best;
    summary["argmax"] = {arg.kx, arg.ky};
    summary["unstable_fraction"] = double(unstable) / double(res.size());
    if (bp.is_isotropic() && bp.b1 > 0.0) {
        const CriticalPoint cp = critical_point(bp, pp);
        const auto at_kc = sw_dispersion_roots({cp.k_c, 0.0}, bp, pp);
        summary["C_c"] = cp.C_c;
        summary["k_c"] = cp.k_c;
        summary["omega_c"] = cp.omega_c;
        summary["flags_at_k_c"] = at_kc.flags.str();
    } else {
        summary["C_c"] = nullptr;
        summary["k_c"] = nullptr;
        summary["omega_c"] = nullptr;
    }
}

inline void spectrum_backscatter(const Json& p, io::OutputDir& out, Json& summary) {
    const double d = num(p, "backscatter.d1");
    require(d > 0.0, "backscatter.d1", "must be positive");
    const double kmax = num(p, "spectrum.k_max");
    const int nk = integer(p, "spectrum.n_k");
    const int tmax = integer(p, "spectrum.torus_max");
    require(kmax > 0.0, "spectrum.k_max", "must be positive");
    require(nk >= 2, "spectrum.n_k", "must be at least 2");
    require(tmax >= 0, "spectrum.torus_max", "must be non-negative");
    io::CsvTable curve({"b", "k", "lambda"});
    io::CsvTable torus({"b", "kx", "ky", "direction", "lambda"});
    Json per_b = Json::array();
    for (double b : nums(p, "spectrum.b_values")) {
        require(b >= 0.0, "spectrum.b_values", "entries must be non-negative");
        for (double k : linspace(0.0, kmax, nk)) curve.add(b, k, backscatter_symbol(k, b, d));
        for (int j = 0; j <= tmax; ++j) {
            torus.add(b, j, 0, "axis", backscatter_symbol(double(j), b, d));
            torus.add(b, j, j, "diagonal", backscatter_symbol(std::sqrt(2.0) * j, b, d));
        }
        per_b.push_back({{"b", b},
                         {"unstable_radius", std::sqrt(b / d)},
                         {"k_max_growth", std::sqrt(b / (2.0 * d))},
                         {"max_growth", b * b / (4.0 * d)}});
    }
    out.write("backscatter_spectrum.csv", curve);
    out.write("torus.csv", torus);
    summary["model"] = "backscatter";
    summary["d"] = d;
    summary["curves"] = per_b;
}

inline void run_spectrum(const Json& p, io::OutputDir& out) {
    Json summary;
    if (one_of(p, "spectrum.model", {"sw", "backscatter"}) == "sw")
        spectrum_sw(p, out, summary);
    else
        spectrum_backscatter(p, out, summary);
    out.write("summary.json", summary);
}

inline void run_modes(const Json& p, io::OutputDir& out) {
    const BackscatterParams bp = backscatter_of(p);
    const PhysicalParams pp = physical_of(p);
    const double ratio = num(p, "modes.ratio");
    const double kmax = num(p, "modes.k_max");
    const int grid = integer(p, "modes.grid");
    const int n_angles = integer(p, "modes.n_angles");
    require(kmax > 0.0, "modes.k_max", "must be positive");
    require(grid >= 2, "modes.grid", "must be at least 2");
    require(n_angles >= 8, "modes.n_angles", "must be at least 8");
    std::vector<double> Cs = nums(p, "modes.C_values");
    if (Cs.empty()) Cs.push_back(pp.C);
    const auto axis = linspace(-kmax, kmax, grid);

    io::CsvTable loci({"C", "kx", "ky", "lambda", "relation", "sign", "on_marginal", "on_relation", "steady"});
    io::CsvTable steady({"C", "kx", "ky", "lambda"});
    Json per_C = Json::array();
    for (double C : Cs) {
        require(C >= 0.0, "modes.C_values", "entries must be non-negative");
        PhysicalParams q = pp;
        q.C = C;
        const LociMap map = sw_loci_map(axis, axis, bp, q, ratio);
        int growing = 0;
        for (const auto& c : map.cells) {
            loci.add(C, c.kx, c.ky, c.lambda, c.relation, c.sign(), c.on_marginal, c.on_relation, c.steady);
            if (c.on_relation && c.lambda > 0.0) ++growing;
        }
        const auto pts = sw_steady_loci(bp, q, ratio, n_angles);
        for (const auto& k : pts) steady.add(C, k.kx, k.ky, sw_plane_rate(k, bp) - C / pp.H0);
        per_C.push_back({{"C", C}, {"steady_loci", pts.size()}, {"growing_relation_cells", growing}});
    }
    out.write("loci.csv", loci);
    out.write("steady_loci.csv", steady);
    out.write("summary.json", Json{{"ratio", ratio}, {"panels", per_C}});
}

inline void run_flows(const Json& p, io::OutputDir& out) {
    const double t = num(p, "flows.t");
    io::CsvTable tab({"name", "model", "t", "residual", "residual_fd", "worst_equation"});
    Json list = Json::array();
    for (const auto& f : reference_catalog()) {
        const ResidualReport r = verify_residual_report(f, f.grid, t);
        const double fd = verify_residual(f, f.grid, t, true);
        tab.add(f.name, model_name(f.params.model), t, r.relative, fd, r.worst_equation);
        Json eq = Json::object();
        for (std::size_t i = 0; i < r.equations.size(); ++i) eq[r.equations[i]] = r.per_equation[i];
        list.push_back({{"name", f.name},
                        {"model", model_name(f.params.model)},
                        {"residual", r.relative},
                        {"residual_fd", fd},
                        {"per_equation", eq}});
    }
    out.write("flows.csv", tab);
    out.write("flows.json", Json{{"t", t}, {"flows", list}});
}

inline Json field_json(const SpectralField2D& f, double t) {
    std::vector<double> ur, ui, vr, vi;
    for (std::size_t i = 0; i < f.size(); ++i) {
        ur.push_back(f.uhat()[i].real());
        ui.push_back(f.uhat()[i].imag());
        vr.push_back(f.vhat()[i].real());
        vi.push_back(f.vhat()[i].imag());
    }
    return {{"n", f.n()}, {"t", t}, {"layout", "index = iy * n + ix, wave numbers in FFT order"},
            {"u_re", ur}, {"u_im", ui}, {"v_re", vr}, {"v_im", vi}};
}

inline void run_simulate(const Json& p, io::OutputDir& out) {
    const SimConfig cfg = sim_config_of(p);
    SpectralField2D u0;
    if (one_of(p, "sim.init", {"random", "shear"}) == "random") {
        const double kmax = num(p, "sim.init_kmax");
        const double scale = num(p, "sim.init_scale");
        require(kmax >= 0.0, "sim.init_kmax", "must be non-negative");
        require(scale > 0.0, "sim.init_scale", "must be positive");
        u0 = scale * random_field(cfg.n, cfg.seed, kmax);
    } else {
        const auto a = nums(p, "sim.amplitudes");
        require(a.size() == 4, "sim.amplitudes", "must have four entries");
        u0 = shear_modes(cfg.n, {a[0], a[1], a[2], a[3]});
    }
    Simulator sim(cfg);
    const auto [state, diag] = sim.run(u0);

    io::CsvTable tab({"t", "energy", "grad_sq", "lap_sq", "large_norm", "small_h1", "small_grad", "a1", "a2", "a3",
                      "a4", "mx", "my"});
    for (const auto& r : diag.records)
        tab.add(r.t, r.energy, r.grad_sq, r.lap_sq, r.large_norm, r.small_h1, r.small_grad, r.amplitudes[0],
                r.amplitudes[1], r.amplitudes[2], r.amplitudes[3], r.mx, r.my);
    out.write("diagnostics.csv", tab);

    io::CsvTable modes({"kx", "ky", "abs_u0", "abs_v0", "abs_u", "abs_v"});
    for (int ky = -4; ky <= 4; ++ky)
        for (int kx = -4; kx <= 4; ++kx)
            modes.add(kx, ky, std::abs(u0.u(kx, ky)), std::abs(u0.v(kx, ky)), std::abs(state.field.u(kx, ky)),
                      std::abs(state.field.v(kx, ky)));
    out.write("modes.csv", modes);
    out.write("initial_field.json", field_json(u0, 0.0));
    out.write("final_field.json", field_json(state.field, state.t));

    const auto& last = diag.records.back();
    const double total = 2.0 * last.energy;
    out.write("summary.json",
              Json{{"t", state.t},
                   {"steps", state.steps},
                   {"energy", last.energy},
                   {"large_scale_fraction", total > 0.0 ? last.large_norm * last.large_norm / total : 0.0},
                   {"amplitudes", last.amplitudes}});
}

inline void run_growth(const Json& p, io::OutputDir& out) {
    GrowthConfig base;
    base.b = num(p, "growth.b");
    base.d = num(p, "growth.d");
    base.eps = num(p, "growth.eps");
    base.perturbation = num(p, "growth.perturbation");
    base.n = integer(p, "growth.n");
    base.dt = num(p, "growth.dt");
    base.t_end = num(p, "growth.t_end");
    base.output_stride = integer(p, "growth.output_stride");
    base.fit_start = num(p, "growth.fit_start");
    require(base.d > 0.0 && base.b > base.d && base.b < 2.0 * base.d, "growth.b", "requires d < b < 2d");
    require(base.eps > 0.0 && base.eps < 0.5, "growth.eps", "must lie in (0, 1/2)");
    require(base.perturbation >= 0.0, "growth.perturbation", "must be non-negative");
    require(base.dt > 0.0, "growth.dt", "must be positive");
    require(base.t_end > base.fit_start, "growth.t_end", "must exceed growth.fit_start");
    require(base.output_stride >= 1, "growth.output_stride", "must be at least 1");
    const int runs = integer(p, "growth.runs_per_mode");
    require(runs >= 1, "growth.runs_per_mode", "must be at least 1");
    const long long seed0 = at(p, "growth.seed").get<long long>();
    require(seed0 >= 0, "growth.seed", "must be non-negative");
    const auto modes = at(p, "growth.modes").get<std::vector<int>>();
    require(!modes.empty(), "growth.modes", "must not be empty");
    for (int j : modes) require(j >= 1 && j <= 4, "growth.modes", "entries must lie in 1..4");

    std::vector<GrowthConfig> cfgs;
    std::vector<std::pair<int, std::uint64_t>> labels;
    for (int j : modes)
        for (int r = 0; r < runs; ++r) {
            GrowthConfig c = base;
            c.u_star = {0.0, 0.0, 0.0, 0.0};
            c.u_star[std::size_t(j - 1)] = 1.0;
            c.seed = std::uint64_t(seed0) + 4u * std::uint64_t(r) + std::uint64_t(j - 1);
            cfgs.push_back(c);
            labels.push_back({j, c.seed});
        }
    const auto reps = verify_growth_batch(cfgs, thread_budget());

    io::CsvTable tab({"mode", "seed", "large_rate", "large_r2", "small_rate", "growth_bound", "decay_bound",
                      "lower_bound_margin", "envelope_ratio", "pass_lower_bound", "pass_envelope", "pass_rate",
                      "pass"});
    Json list = Json::array();
    int passed = 0;
    for (std::size_t i = 0; i < reps.size(); ++i) {
        const auto& r = reps[i];
        tab.add(labels[i].first, labels[i].second, r.large.rate, r.large.r_squared, r.small.rate, r.growth_bound,
                r.decay_bound, r.lower_bound_margin, r.envelope_ratio, r.pass_lower_bound, r.pass_envelope,
                r.pass_rate, r.pass());
        list.push_back({{"mode", labels[i].first},
                        {"seed", labels[i].second},
                        {"large_rate", r.large.rate},
                        {"small_rate", r.small.rate},
                        {"growth_bound", r.growth_bound},
                        {"decay_bound", r.decay_bound},
                        {"lower_bound_margin", r.lower_bound_margin},
                        {"envelope_ratio", r.envelope_ratio},
                        {"total_dominates_large", r.total_dominates_large},
                        {"pass_lower_bound", r.pass_lower_bound},
                        {"pass_envelope", r.pass_envelope},
                        {"pass_rate", r.pass_rate},
                        {"pass", r.pass()}});
        if (r.pass()) ++passed;
    }
    out.write("growth_runs.csv", tab);
    out.write("growth_report.json", Json{{"runs", list},
                                         {"total", reps.size()},
                                         {"passed", passed},
                                         {"all_pass", passed == int(reps.size())}});
}

inline BifParams bif_params_of(const Json& p) {
    BifParams bpar;
    bpar.bp = backscatter_of(p);
    bpar.pp = physical_of(p);
    bpar.Q = bpar.pp.Q;
    bpar.alpha = num(p, "bifurcation.alpha");
    bpar.kappa = num(p, "bifurcation.kappa");
    require(bpar.bp.b2 > 0.0, "backscatter.b2", "must be positive for bifurcation analysis");
    return bpar;
}

inline Json stability_json(const StabilityReport& s) {
    return {{"max_real", s.max_real},
            {"n_unstable", s.n_unstable},
            {"unstable_complex_pair", s.has_unstable_complex_pair},
            {"translation_residual", s.translation_residual},
            {"translation_eigenvalue", s.translation_eigenvalue}};
}

inline Json profile_json(const BranchPoint& b, int K) {
    const Eigen::VectorXd& s = b.state;
    auto seg = [&](int c) {
        std::vector<double> v(static_cast<std::size_t>(K), 0.0);
        for (int i = 0; i < K; ++i) v[std::size_t(i)] = s(c * K + i);
        return v;
    };
    return {{"C", b.C}, {"alpha", b.alpha}, {"A1", b.A1}, {"omega", b.omega},
            {"layout", "[c0, a1, b1, a2, b2, ...] in xi = k x (+ omega t)"},
            {"u", seg(0)}, {"v", seg(1)}, {"eta", seg(2)}};
}

inline void run_branches(const Json& p, io::OutputDir& out) {
    const BifParams bpar = bif_params_of(p);
    const std::string which = one_of(p, "bifurcation.branches", {"GE", "GW", "both"});
    const int N = integer(p, "bifurcation.N");
    const int M = integer(p, "bifurcation.M");
    require(N >= 4, "bifurcation.N", "must be at least 4");
    require(M >= 2 * N + 2, "bifurcation.M", "must be at least 2 N + 2");
    require(bpar.alpha > 0.0, "bifurcation.alpha", "must be positive for branch starts");
    ContinuationOptions opt;
    opt.ds = num(p, "bifurcation.ds");
    opt.ds_max = num(p, "bifurcation.ds_max");
    opt.n_steps = integer(p, "bifurcation.n_steps");
    opt.C_stop = num(p, "bifurcation.C_stop");
    opt.stability = flag(p, "bifurcation.stability");
    require(opt.ds > 0.0, "bifurcation.ds", "must be positive");
    require(opt.ds_max >= opt.ds, "bifurcation.ds_max", "must be at least bifurcation.ds");
    require(opt.n_steps >= 1, "bifurcation.n_steps", "must be at least 1");
    require(opt.C_stop < bpar.C(), "bifurcation.C_stop", "must lie below the starting drag");

    const PhysicalParams pp = bpar.physical();
    const int K = 2 * N + 1;
    Json summary{{"C_c", bpar.C_c()}, {"k_c", bpar.k_c()}, {"omega_c", bpar.omega_c()}, {"C_start", bpar.C()},
                 {"k", bpar.k()}};
    Json profiles = Json::object();
    auto write_branch = [&](const std::string& name, const std::vector<BranchPoint>& pts) {
        io::CsvTable tab({"C", "alpha", "arclength", "A1", "norm", "omega", "residual", "max_real", "n_unstable",
                          "unstable_complex_pair"});
        for (const auto& b : pts)
            tab.add(b.C, b.alpha, b.arclength, b.A1, b.norm, b.omega, b.residual, b.stability.max_real,
                    b.stability.n_unstable, b.stability.has_unstable_complex_pair);
        out.write("branch_" + name + ".csv", tab);
        Json marked = Json::array();
        for (std::size_t i : {std::size_t(0), pts.size() / 2, pts.size() - 1}) marked.push_back(profile_json(pts[i], K));
        profiles[name] = marked;
        Json s{{"points", pts.size()}, {"C_end", pts.back().C}, {"A1_end", pts.back().A1}};
        if (opt.stability) s["start_stability"] = stability_json(pts.front().stability);
        summary[name] = s;
    };
    if (which != "GW") {
        const double A1 = bpar.Q == 0.0 && bpar.pp.f == 0.0 ? 0.0 : ge_amplitude(bpar);
        ReducedProfile start = reduced_steady_solve(ge_profile(A1, bpar, N), bpar.C(), bpar.k(), bpar.bp, pp, {}, N, M);
        summary["GE_start"] = {{"A1_leading_order", A1}, {"A1", start.A1}, {"residual", start.residual}};
        write_branch("GE", continue_branch(start, bpar.bp, pp, -1, opt, N, M));
    }
    if (which != "GE") {
        require(bpar.Q > 0.0, "physical.Q", "GW branches need Q > 0");
        const GWPrediction pred = gw_amplitude_and_speed(bpar);
        GWProfile start =
            gw_travelling_solve(gw_seed(pred.A1, bpar, N), bpar.C(), bpar.k(), bpar.bp, pp, {}, N, M);
        summary["GW_start"] = {
            {"A1_leading_order", pred.A1}, {"A1", start.A1}, {"omega", start.omega}, {"residual", start.residual}};
        write_branch("GW", continue_branch(start, bpar.bp, pp, -1, opt, N, M));
    }
    out.write("profiles.json", profiles);
    out.write("summary.json", summary);
}

inline void run_amplitude(const Json& p, io::OutputDir& out) {
    BifParams base = bif_params_of(p);
    const auto Qs = nums(p, "bifurcation.amp_Q");
    const auto fs = nums(p, "bifurcation.amp_f");
    require(!Qs.empty(), "bifurcation.amp_Q", "must not be empty");
    require(Qs.size() == fs.size(), "bifurcation.amp_f", "must have as many entries as bifurcation.amp_Q");
    const int na = integer(p, "bifurcation.n_alpha");
    const int nkap = integer(p, "bifurcation.n_kappa");
    require(na >= 2, "bifurcation.n_alpha", "must be at least 2");
    require(nkap >= 2, "bifurcation.n_kappa", "must be at least 2");
    const double kmax = num(p, "bifurcation.kappa_max");
    require(kmax > 0.0, "bifurcation.kappa_max", "must be positive");
    const double b = base.bp.b2;

    io::CsvTable ta({"case", "Q", "f", "alpha", "kappa", "A1"});
    io::CsvTable tk({"case", "Q", "f", "alpha", "kappa", "A1"});
    io::CsvTable tv({"case", "Q", "f", "sweep", "alpha", "kappa"});
    for (std::size_t c = 0; c < Qs.size(); ++c) {
        require(Qs[c] >= 0.0, "bifurcation.amp_Q", "entries must be non-negative");
        BifParams q = base;
        q.Q = Qs[c];
        q.pp.f = fs[c];
        const bool vertical = q.Q == 0.0 && q.pp.f == 0.0;
        auto eval = [&](double alpha, double kappa) {
            q.alpha = alpha;
            q.kappa = kappa;
            return vertical ? 0.0 : ge_amplitude(q);
        };
        for (double a : linspace(num(p, "bifurcation.alpha_min"), num(p, "bifurcation.alpha_max"), na))
            ta.add(int(c), q.Q, q.pp.f, a, 0.0, eval(a, 0.0));
        for (double k : linspace(-kmax, kmax, nkap)) tk.add(int(c), q.Q, q.pp.f, base.alpha, k, eval(base.alpha, k));
        if (vertical) {
            tv.add(int(c), q.Q, q.pp.f, "alpha", 0.0, 0.0);
            if (base.alpha > 0.0) {
                const double k0 = std::sqrt(base.alpha / (2.0 * b));
                tv.add(int(c), q.Q, q.pp.f, "kappa", base.alpha, -k0);
                tv.add(int(c), q.Q, q.pp.f, "kappa", base.alpha, k0);
            }
        }
    }
    out.write("amplitude_alpha.csv", ta);
    out.write("amplitude_kappa.csv", tk);
    out.write("amplitude_vertical.csv", tv);
    out.write("summary.json", Json{{"C_c", base.C_c()}, {"k_c", base.k_c()}, {"cases", Qs.size()}});
}

inline void run_steady(const Json& p, io::OutputDir& out) {
    const BifParams bpar = bif_params_of(p);
    const int N = integer(p, "bifurcation.N");
    const int M = integer(p, "bifurcation.M");
    require(N >= 4, "bifurcation.N", "must be at least 4");
    require(M >= 2 * N + 2, "bifurcation.M", "must be at least 2 N + 2");
    require(bpar.alpha > 0.0, "bifurcation.alpha", "must be positive");
    const double A1 = ge_amplitude(bpar);
    const PhysicalParams pp = bpar.physical();
    const ReducedProfile prof =
        reduced_steady_solve(ge_profile(A1, bpar, N), bpar.C(), bpar.k(), bpar.bp, pp, {}, N, M);
    const StabilityReport st = reduced_stability(prof, bpar.bp, pp, N, M);
    std::vector<double> phi(prof.phi.data(), prof.phi.data() + prof.phi.size());
    out.write("steady.json", Json{{"C", prof.C},
                                  {"k", prof.k},
                                  {"A1", prof.A1},
                                  {"A1_leading_order", A1},
                                  {"relative_error", A1 > 0.0 ? std::abs(prof.A1 - A1) / A1 : 0.0},
                                  {"residual", prof.residual},
                                  {"iterations", prof.iterations},
                                  {"stability", stability_json(st)},
                                  {"phi", phi}});
}

inline void run_bifurcate(const Json& p, io::OutputDir& out) {
    const std::string mode = one_of(p, "bifurcation.mode", {"branches", "amplitude", "steady"});
    if (mode == "branches") run_branches(p, out);
    else if (mode == "amplitude") run_amplitude(p, out);
    else run_steady(p, out);
}

/// Quick self-checks; returns false when any fails.
inline bool run_verify(const Json& p, io::OutputDir& out) {
    const BackscatterParams bp = backscatter_of(p);
    const PhysicalParams pp = physical_of(p);
    const int n = integer(p, "verify.n");
    const int samples = integer(p, "verify.samples");
    const long long seed0 = at(p, "verify.seed").get<long long>();
    require(n >= 16 && (n & (n - 1)) == 0, "verify.n", "must be a power of two >= 16");
    require(samples >= 1, "verify.samples", "must be at least 1");
    require(seed0 >= 0, "verify.seed", "must be non-negative");

    Json checks = Json::array();
    bool all = true;
    auto record = [&](const std::string& name, double value, double threshold, bool pass) {
        checks.push_back({{"name", name}, {"value", value}, {"threshold", threshold}, {"pass", pass}});
        all = all && pass;
    };
    if (bp.is_isotropic() && bp.b1 > 0.0) {
        const CriticalPoint cp = critical_point(bp, pp);
        PhysicalParams q = pp;
        q.C = cp.C_c;
        const auto r = sw_dispersion_roots({cp.k_c, 0.0}, bp, q);
        record("critical_flags_zero_root_and_hopf", r.max_real(), 0.0, r.flags.zero_root && r.flags.hopf);
    }
    for (const auto& f : reference_catalog()) {
        const double r = verify_residual(f, f.grid, 0.5);
        record("residual_" + f.name, r, 1e-8, r <= 1e-8);
    }
    SimConfig sc;
    sc.n = n;
    sc.d = 1.0;
    Simulator sim(sc);
    double worst = 0.0;
    for (int s = 0; s < samples; ++s) {
        const SpectralField2D u = random_field(n, std::uint64_t(seed0 + s));
        const SpectralField2D B = sim.bilinear(u, u);
        const double scale = l2_norm(B) * l2_norm(u);
        if (scale > 0.0) worst = std::max(worst, std::abs(inner(B, u)) / scale);
    }
    record("nonlinearity_orthogonality", worst, 1e-11, worst <= 1e-11);
    if (bp.is_isotropic() && bp.b1 > 0.0) {
        const CriticalPoint cp = critical_point(bp, pp);
        const GWQuadratures qd = gw_quadratures(pp.f, pp.g, pp.H0, cp.k_c);
        record("gw_quadratures_ordered", qd.I1 - qd.I2, 0.0, qd.I1 > qd.I2 && qd.I2 > 0.0);
    }
    out.write("verify.json", Json{{"checks", checks}, {"all_pass", all}});
    return all;
}

}  // namespace detail

/// Runs the command of a resolved configuration; returns the process exit code.
inline int dispatch(const RunConfig& rc, std::ostream& err = std::cerr) {
    try {
        io::OutputDir out(rc.output_dir);
        out.write("config.resolved", rc.resolved());
        const Json& p = rc.parameters;
        int code = 0;
        if (rc.command == "spectrum") detail::run_spectrum(p, out);
        else if (rc.command == "modes") detail::run_modes(p, out);
        else if (rc.command == "flows") detail::run_flows(p, out);
        else if (rc.command == "simulate") detail::run_simulate(p, out);
        else if (rc.command == "growth") detail::run_growth(p, out);
        else if (rc.command == "bifurcate") detail::run_bifurcate(p, out);
        else if (rc.command == "verify") code = detail::run_verify(p, out) ? 0 : 1;
        else throw ConfigError("command", "unknown command '" + rc.command + "'");
        out.write_manifest({{"command", rc.command}, {"exit_code", code}});
        if (code != 0) err << "bslab: " << rc.command << ": checks failed, see verify.json\n";
        return code;
    } catch (const ConfigError& e) {
        err << "bslab: configuration error: " << e.what() << "\n";
        return 2;
    } catch (const RangeError& e) {
        err << "bslab: configuration error: " << e.what() << "\n";
        return 2;
    } catch (const ComplianceError& e) {
        err << "bslab: configuration error: " << e.what() << "\n";
        return 2;
    } catch (const SimulationDiverged& e) {
        err << "bslab: numerical failure: " << e.what() << " at t = " << e.time << "\n";
        return 1;
    } catch (const std::exception& e) {
        err << "bslab: numerical failure: " << e.what() << "\n";
        return 1;
    }
}

// ---------------------------------------------------------------- command line

inline std::string help_footer(const std::string& command) {
    std::string s = "Parameters (section.key = default: meaning [units]):\n";
    for (const auto& sec : sections_of(command))
        for (const auto& p : schema_table())
            if (p.path.rfind(sec + ".", 0) == 0) s += "  " + p.path + " = " + p.value.dump() + ": " + p.doc + "\n";
    s += "Presets:";
    for (const auto& [name, pre] : presets())
        if (pre.command == command) s += "\n  " + name + ": " + pre.summary;
    s += "\nOutputs (all directories also get config.resolved and manifest.json):\n";
    if (command == "spectrum")
        s += "  sw: spectrum.csv k,re1,im1,re2,im2,re3,im3,flags (roots by decreasing real part)\n"
             "      spectrum_panels.csv C,k,re1,...,flags for spectrum.C_values\n"
             "      spectrum_grid.csv kx,ky,max_real,flags\n"
             "  backscatter: backscatter_spectrum.csv b,k,lambda; torus.csv b,kx,ky,direction,lambda\n"
             "  summary.json";
    else if (command == "modes")
        s += "  loci.csv C,kx,ky,lambda,relation,sign,on_marginal,on_relation,steady\n"
             "  steady_loci.csv C,kx,ky,lambda\n  summary.json";
    else if (command == "flows")
        s += "  flows.csv name,model,t,residual,residual_fd,worst_equation\n  flows.json";
    else if (command == "simulate")
        s += "  diagnostics.csv t,energy,grad_sq,lap_sq,large_norm,small_h1,small_grad,a1,a2,a3,a4,mx,my\n"
             "  modes.csv kx,ky,abs_u0,abs_v0,abs_u,abs_v (|kx|,|ky| <= 4)\n"
             "  initial_field.json, final_field.json, summary.json";
    else if (command == "growth")
        s += "  growth_runs.csv mode,seed,large_rate,large_r2,small_rate,growth_bound,decay_bound,\n"
             "    lower_bound_margin,envelope_ratio,pass_lower_bound,pass_envelope,pass_rate,pass\n"
             "  growth_report.json";
    else if (command == "bifurcate")
        s += "  branches: branch_GE.csv, branch_GW.csv C,alpha,arclength,A1,norm,omega,residual,max_real,\n"
             "    n_unstable,unstable_complex_pair; profiles.json; summary.json\n"
             "  amplitude: amplitude_alpha.csv, amplitude_kappa.csv case,Q,f,alpha,kappa,A1;\n"
             "    amplitude_vertical.csv case,Q,f,sweep,alpha,kappa\n"
             "  steady: steady.json";
    else if (command == "verify")
        s += "  verify.json (exit code 1 when a check fails)";
    return s;
}

/// Entry point of the bslab executable. Exit codes: 0 success, 1 numerical failure, 2 configuration error.
inline int main(int argc, char** argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
    CLI::App app{"bslab: kinetic energy backscatter experiments"};
    app.require_subcommand(1, 1);
    app.footer("Exit codes: 0 success, 1 numerical failure, 2 configuration error. "
               "BSLAB_THREADS caps worker threads.");
    struct Options {
        std::string config;
        std::string preset;
        std::vector<std::string> sets;
        std::string out;
        bool resolve_only = false;
    };
    std::map<std::string, Options> opts;
    for (const auto& c : commands()) {
        auto* sub = app.add_subcommand(c, "run the " + c + " command");
        auto& o = opts[c];
        sub->add_option("--config", o.config, "JSON configuration file");
        sub->add_option("--preset", o.preset, "named parameter set");
        sub->add_option("--set", o.sets, "override, key=value (key may omit its section when unique)");
        sub->add_option("--out", o.out, "output directory");
        sub->add_flag("--resolve-only", o.resolve_only, "write config.resolved and manifest.json, then stop");
        sub->footer(help_footer(c));
    }
    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::ParseError& e) {
        app.exit(e, out, err);
        return 2;
    }
    const std::string command = app.get_subcommands().front()->get_name();
    const Options& o = opts[command];
    RunConfig rc;
    try {
        rc = parse_config(command, o.config.empty() ? std::nullopt : std::optional(o.config),
                          o.preset.empty() ? std::nullopt : std::optional(o.preset), o.sets,
                          o.out.empty() ? std::nullopt : std::optional(o.out));
        if (o.resolve_only) {
            io::OutputDir dir(rc.output_dir);
            dir.write("config.resolved", rc.resolved());
            dir.write_manifest({{"command", rc.command}, {"exit_code", 0}});
            return 0;
        }
    } catch (const ConfigError& e) {
        err << "bslab: configuration error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        err << "bslab: configuration error: " << e.what() << "\n";
        return 2;
    }
    return dispatch(rc, err);
}

}  // namespace bslab::cli
