#pragma once

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "cbp/csbpdi.hpp"
#include "cbp/families.hpp"

namespace cbp {

// ---------------------------------------------------------------------------
// INI-style parsing: [section] headers, key = value lines, # or ; comments.
// Errors carry file:line positions.
// ---------------------------------------------------------------------------

struct ConfigValue {
    std::string value;
    int line = 0;
};

struct ParsedConfig {
    std::string filename;
    std::string raw_text;
    std::map<std::string, std::map<std::string, ConfigValue>> sections;

    const ConfigValue* find(const std::string& section, const std::string& key) const {
        auto sit = sections.find(section);
        if (sit == sections.end()) return nullptr;
        auto kit = sit->second.find(key);
        return kit == sit->second.end() ? nullptr : &kit->second;
    }
};

namespace detail {

inline std::string trim(const std::string& s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

[[noreturn]] inline void config_error(const std::string& file, int line, const std::string& msg) {
    throw ValidationError(file + ":" + std::to_string(line) + ": " + msg);
}

} // namespace detail

inline ParsedConfig parse_ini_text(const std::string& text, const std::string& filename) {
    ParsedConfig out;
    out.filename = filename;
    out.raw_text = text;
    std::istringstream in(text);
    std::string line, section;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find_first_of("#;");
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = detail::trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']') detail::config_error(filename, lineno, "unterminated section header");
            section = detail::trim(line.substr(1, line.size() - 2));
            if (section.empty()) detail::config_error(filename, lineno, "empty section name");
            out.sections[section];
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            detail::config_error(filename, lineno, "expected 'key = value'");
        const std::string key = detail::trim(line.substr(0, eq));
        const std::string value = detail::trim(line.substr(eq + 1));
        if (key.empty()) detail::config_error(filename, lineno, "empty key");
        if (section.empty())
            detail::config_error(filename, lineno, "key outside of any [section]");
        auto [it, inserted] = out.sections[section].emplace(key, ConfigValue{value, lineno});
        if (!inserted) detail::config_error(filename, lineno, "duplicate key '" + key + "'");
    }
    return out;
}

inline ParsedConfig parse_ini_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open config file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_ini_text(buf.str(), path);
}

// ---------------------------------------------------------------------------
// Small spec grammar for laws and rules:  name  or  name(key=value, ...)
// with an optional positional list form  name(v1 v2 v3).
// ---------------------------------------------------------------------------

struct SpecExpr {
    std::string name;
    std::map<std::string, double> args;
    std::vector<double> list;
};

namespace detail {

inline double parse_double(const std::string& file, int line, const std::string& text) {
    try {
        std::size_t pos = 0;
        const double v = std::stod(text, &pos);
        if (pos != text.size()) throw std::invalid_argument(text);
        return v;
    } catch (const std::exception&) {
        config_error(file, line, "expected a number, got '" + text + "'");
    }
}

inline std::int64_t parse_int(const std::string& file, int line, const std::string& text) {
    try {
        std::size_t pos = 0;
        const long long v = std::stoll(text, &pos);
        if (pos != text.size()) throw std::invalid_argument(text);
        return v;
    } catch (const std::exception&) {
        config_error(file, line, "expected an integer, got '" + text + "'");
    }
}

inline std::uint64_t parse_u64(const std::string& file, int line, const std::string& text) {
    try {
        std::size_t pos = 0;
        const unsigned long long v = std::stoull(text, &pos);
        if (pos != text.size()) throw std::invalid_argument(text);
        return v;
    } catch (const std::exception&) {
        config_error(file, line, "expected an unsigned integer, got '" + text + "'");
    }
}

} // namespace detail

inline SpecExpr parse_spec_expr(const std::string& file, int line, const std::string& text) {
    SpecExpr out;
    const auto open = text.find('(');
    if (open == std::string::npos) {
        out.name = detail::trim(text);
        if (out.name.empty()) detail::config_error(file, line, "empty spec");
        return out;
    }
    if (text.back() != ')')
        detail::config_error(file, line, "missing ')' in '" + text + "'");
    out.name = detail::trim(text.substr(0, open));
    const std::string inner = text.substr(open + 1, text.size() - open - 2);
    std::string token;
    std::istringstream in(inner);
    std::vector<std::string> parts;
    while (std::getline(in, token, ',')) parts.push_back(detail::trim(token));
    for (const auto& part : parts) {
        if (part.empty()) continue;
        const auto eq = part.find('=');
        if (eq == std::string::npos) {
            // positional list, possibly space-separated inside one token
            std::istringstream ls(part);
            std::string num;
            while (ls >> num) out.list.push_back(detail::parse_double(file, line, num));
        } else {
            out.args[detail::trim(part.substr(0, eq))] =
                detail::parse_double(file, line, detail::trim(part.substr(eq + 1)));
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// ExperimentConfig
// ---------------------------------------------------------------------------

struct ExperimentConfig {
    ParsedConfig raw;

    // [model]
    SpecExpr offspring_spec;
    std::string family_id = "identity";
    double m = 1.0;
    ScalingRule gamma;
    SpecExpr immigration_spec; // name "default" when absent
    double beta = 1.0;

    // [limit]
    double a = 0.0, b = 0.0;
    std::optional<double> rho0, sigma0; // fall back to family declared limits
    SpecExpr alpha_spec;                // const(c) | affine(c0,c1)
    std::vector<MeasureAtom> mu_atoms, nu_atoms;
    SpecExpr r_spec; // zero | const(c) | propx(c)
    double K = 0.0;

    // [study]
    std::vector<std::int64_t> k_list;
    std::vector<double> lambda_grid;
    double x_max = 20.0;
    std::size_t grid_cap = 2000;
    std::vector<double> t_grid;
    std::int64_t path_count = 1000;
    double dt = 1e-3;
    std::string z0_rule = "k";
    double z0_const = 0.0;
    std::int64_t j_max = 10000;
    std::string process = "cbp"; // for the path dump subcommand
    std::uint64_t seed = 1;
    std::string out_path;

    // [monotone]
    double mono_c = 0.25, mono_d = 0.25;
    int mono_j_max = 4;
    double mono_lambda_max = 5.0;
    int mono_lambda_points = 21;
    double mono_tol = 1e-8;
};

namespace detail {

inline std::vector<double> parse_double_list(const std::string& file, int line,
                                             const std::string& text) {
    std::vector<double> out;
    std::istringstream in(text);
    std::string token;
    while (std::getline(in, token, ',')) {
        token = trim(token);
        if (!token.empty()) out.push_back(parse_double(file, line, token));
    }
    return out;
}

inline std::vector<std::int64_t> parse_int_list(const std::string& file, int line,
                                                const std::string& text) {
    std::vector<std::int64_t> out;
    std::istringstream in(text);
    std::string token;
    while (std::getline(in, token, ',')) {
        token = trim(token);
        if (!token.empty()) out.push_back(parse_int(file, line, token));
    }
    return out;
}

inline double arg_or(const SpecExpr& spec, const std::string& key, double fallback) {
    auto it = spec.args.find(key);
    return it == spec.args.end() ? fallback : it->second;
}

inline double require_arg(const std::string& file, int line, const SpecExpr& spec,
                          const std::string& key) {
    auto it = spec.args.find(key);
    if (it == spec.args.end())
        config_error(file, line, "spec '" + spec.name + "' needs argument '" + key + "'");
    return it->second;
}

inline std::vector<MeasureAtom> parse_atoms(const std::string& file, int line,
                                            const std::string& text) {
    // format: "u:w, u:w, ..." (empty allowed)
    std::vector<MeasureAtom> out;
    std::istringstream in(text);
    std::string token;
    while (std::getline(in, token, ',')) {
        token = trim(token);
        if (token.empty()) continue;
        const auto colon = token.find(':');
        if (colon == std::string::npos)
            config_error(file, line, "atom must be 'size:weight', got '" + token + "'");
        out.push_back(MeasureAtom{parse_double(file, line, trim(token.substr(0, colon))),
                                  parse_double(file, line, trim(token.substr(colon + 1)))});
    }
    return out;
}

} // namespace detail

/// The offspring laws the harness knows how to build. The binary-branching
/// law with parameter b is the critical three-point law
/// [b^2/2, 1-b^2, b^2/2], whose discrete branching mechanism is b^2 l^2 / 2
/// exactly for every k.
inline LatticeLaw build_offspring_law(const SpecExpr& spec, std::int64_t /*k*/) {
    if (spec.name == "dirac") return LatticeLaw(Dirac{std::int64_t(detail::arg_or(spec, "n", 1.0))});
    if (spec.name == "binary") {
        const double b = detail::arg_or(spec, "b", 1.0);
        const double b2 = b * b;
        if (!(b2 <= 1.0)) throw ValidationError("binary offspring requires b^2 <= 1");
        return LatticeLaw(Explicit{{0.5 * b2, 1.0 - b2, 0.5 * b2}});
    }
    if (spec.name == "poisson") return LatticeLaw(Poisson{detail::arg_or(spec, "rate", 1.0)});
    if (spec.name == "bernoulli") return LatticeLaw(Bernoulli{detail::arg_or(spec, "p", 0.5)});
    if (spec.name == "binomial")
        return LatticeLaw(Binomial{std::int64_t(detail::arg_or(spec, "n", 1.0)),
                                   detail::arg_or(spec, "p", 0.5)});
    if (spec.name == "geometric") return LatticeLaw(Geometric{detail::arg_or(spec, "p", 0.5)});
    if (spec.name == "negbin")
        return LatticeLaw(NegBinomial{detail::arg_or(spec, "r", 1.0), detail::arg_or(spec, "p", 0.5)});
    if (spec.name == "explicit") {
        if (spec.list.empty()) throw ValidationError("explicit offspring needs a pmf list");
        return LatticeLaw(Explicit{spec.list});
    }
    throw ValidationError("unknown offspring law '" + spec.name + "'");
}

inline ControlFamily build_family(const ExperimentConfig& cfg) {
    FamilyOptions options;
    options.beta = cfg.beta;
    const auto& imm = cfg.immigration_spec;
    if (imm.name == "default" || imm.name.empty()) {
        // Poisson(beta k / gamma_k)
    } else if (imm.name == "poisson") {
        const double rate = detail::arg_or(imm, "rate", 1.0);
        options.immigration = [rate](std::int64_t, std::int64_t) {
            return LatticeLaw(Poisson{rate});
        };
    } else if (imm.name == "dirac") {
        const auto n = std::int64_t(detail::arg_or(imm, "n", 0.0));
        options.immigration = [n](std::int64_t, std::int64_t) { return LatticeLaw(Dirac{n}); };
    } else if (imm.name == "none") {
        options.immigration = [](std::int64_t, std::int64_t) { return LatticeLaw(Dirac{0}); };
    } else {
        throw ValidationError("unknown immigration spec '" + imm.name + "'");
    }

    if (cfg.family_id == "identity") return identity_control_family(cfg.m, cfg.gamma, options);
    if (cfg.family_id == "poisson") return poisson_control_family(cfg.m, cfg.gamma, options);
    if (cfg.family_id == "binomial")
        return binomial_control_family_instance(cfg.m, cfg.gamma, options);
    if (cfg.family_id == "negbin") return negbin_control_family_instance(cfg.m, cfg.gamma, options);
    throw ValidationError("unknown control family '" + cfg.family_id + "'");
}

inline ScaledModel build_model(const ExperimentConfig& cfg, std::int64_t k) {
    return ScaledModel(k, cfg.gamma.gamma(k), build_offspring_law(cfg.offspring_spec, k),
                       build_family(cfg), cfg.m, cfg.gamma.gamma0);
}

inline LimitParams build_limit(const ExperimentConfig& cfg) {
    LimitParams params;
    params.a = cfg.a;
    params.b = cfg.b;
    params.mu_atoms = cfg.mu_atoms;
    params.nu_atoms = cfg.nu_atoms;
    params.m = cfg.m;
    params.gamma0 = cfg.gamma.gamma0;
    params.K = cfg.K;

    if (cfg.rho0 && cfg.sigma0) {
        params.rho0 = *cfg.rho0;
        params.sigma0 = *cfg.sigma0;
    } else {
        const auto family = build_family(cfg);
        const auto limits = family.declared_limits();
        if (!limits)
            throw ValidationError("limit rho0/sigma0 not given and the family declares none");
        params.rho0 = cfg.rho0.value_or(limits->rho0);
        params.sigma0 = cfg.sigma0.value_or(limits->sigma0);
    }

    const auto& alpha = cfg.alpha_spec;
    if (alpha.name.empty()) {
        // default alpha is the H_k limit implied by the immigration spec:
        // gamma_k * mean(h_k) / k -> alpha
        const auto& imm = cfg.immigration_spec;
        double c = 0.0;
        if (imm.name == "default" || imm.name.empty())
            c = cfg.beta;
        else if (imm.name == "poisson")
            c = detail::arg_or(imm, "rate", 1.0) * cfg.gamma.gamma0;
        else if (imm.name == "dirac")
            c = detail::arg_or(imm, "n", 0.0) * cfg.gamma.gamma0;
        else if (imm.name == "none")
            c = 0.0;
        params.alpha = [c](double) { return c; };
        params.alpha_const = c;
    } else if (alpha.name == "const") {
        const double c = detail::arg_or(alpha, "c", cfg.beta);
        params.alpha = [c](double) { return c; };
        params.alpha_const = c;
    } else if (alpha.name == "affine") {
        const double c0 = detail::arg_or(alpha, "c0", 0.0);
        const double c1 = detail::arg_or(alpha, "c1", 0.0);
        params.alpha = [c0, c1](double x) { return c0 + c1 * x; };
        params.alpha_const = (c1 == 0.0) ? std::optional<double>(c0) : std::nullopt;
    } else {
        throw ValidationError("unknown alpha spec '" + alpha.name + "'");
    }

    const auto& r = cfg.r_spec;
    if (r.name == "zero" || r.name.empty()) {
        params.r = [](double, double) { return 0.0; };
    } else if (r.name == "const") {
        const double c = detail::arg_or(r, "c", 1.0);
        params.r = [c](double, double) { return c; };
    } else if (r.name == "propx") {
        const double c = detail::arg_or(r, "c", 1.0);
        params.r = [c](double x, double) { return c * x; };
    } else {
        throw ValidationError("unknown r spec '" + r.name + "'");
    }

    params.validate(cfg.x_max);
    return params;
}

/// Reads and validates a full experiment configuration.
inline ExperimentConfig load_config(const ParsedConfig& raw) {
    ExperimentConfig cfg;
    cfg.raw = raw;
    const std::string& file = raw.filename;

    auto get = [&](const char* section, const char* key) { return raw.find(section, key); };

    // --- [model] ---------------------------------------------------------
    if (const auto* v = get("model", "offspring"))
        cfg.offspring_spec = parse_spec_expr(file, v->line, v->value);
    else
        cfg.offspring_spec = parse_spec_expr(file, 0, "dirac(n=1)");
    if (const auto* v = get("model", "family")) cfg.family_id = v->value;
    if (const auto* v = get("model", "m")) cfg.m = detail::parse_double(file, v->line, v->value);
    if (!(cfg.m > 0.0)) throw ValidationError(file + ": model m must be positive");

    if (const auto* v = get("model", "gamma")) {
        const SpecExpr spec = parse_spec_expr(file, v->line, v->value);
        if (spec.name == "linear")
            cfg.gamma = linear_scaling(detail::arg_or(spec, "c", 1.0));
        else if (spec.name == "power")
            cfg.gamma = power_scaling(detail::arg_or(spec, "c", 1.0),
                                      detail::require_arg(file, v->line, spec, "p"));
        else
            detail::config_error(file, v->line, "unknown gamma rule '" + spec.name + "'");
    } else {
        cfg.gamma = linear_scaling(1.0);
    }
    if (const auto* v = get("model", "immigration"))
        cfg.immigration_spec = parse_spec_expr(file, v->line, v->value);
    else
        cfg.immigration_spec.name = "default";
    if (const auto* v = get("model", "beta")) cfg.beta = detail::parse_double(file, v->line, v->value);

    // --- [limit] ---------------------------------------------------------
    if (const auto* v = get("limit", "a")) cfg.a = detail::parse_double(file, v->line, v->value);
    if (const auto* v = get("limit", "b")) cfg.b = detail::parse_double(file, v->line, v->value);
    if (const auto* v = get("limit", "rho0")) cfg.rho0 = detail::parse_double(file, v->line, v->value);
    if (const auto* v = get("limit", "sigma0"))
        cfg.sigma0 = detail::parse_double(file, v->line, v->value);
    if (const auto* v = get("limit", "alpha"))
        cfg.alpha_spec = parse_spec_expr(file, v->line, v->value);
    if (const auto* v = get("limit", "mu_atoms"))
        cfg.mu_atoms = detail::parse_atoms(file, v->line, v->value);
    if (const auto* v = get("limit", "nu_atoms"))
        cfg.nu_atoms = detail::parse_atoms(file, v->line, v->value);
    if (const auto* v = get("limit", "r")) cfg.r_spec = parse_spec_expr(file, v->line, v->value);
    if (const auto* v = get("limit", "K")) cfg.K = detail::parse_double(file, v->line, v->value);

    // --- [study] ---------------------------------------------------------
    const auto* kl = get("study", "k_list");
    if (!kl) throw ValidationError(file + ": [study] k_list is required");
    cfg.k_list = detail::parse_int_list(file, kl->line, kl->value);
    if (cfg.k_list.empty()) detail::config_error(file, kl->line, "k_list must be non-empty");
    for (std::size_t i = 0; i < cfg.k_list.size(); ++i) {
        if (cfg.k_list[i] < 1) detail::config_error(file, kl->line, "k values must be positive");
        if (i > 0 && cfg.k_list[i] <= cfg.k_list[i - 1])
            detail::config_error(file, kl->line, "k_list must be strictly increasing");
    }
    if (const auto* v = get("study", "lambda_grid"))
        cfg.lambda_grid = detail::parse_double_list(file, v->line, v->value);
    else
        cfg.lambda_grid = {0.5, 1.0, 2.0};
    if (const auto* v = get("study", "x_max"))
        cfg.x_max = detail::parse_double(file, v->line, v->value);
    if (const auto* v = get("study", "grid_cap"))
        cfg.grid_cap = static_cast<std::size_t>(detail::parse_int(file, v->line, v->value));
    if (const auto* v = get("study", "t_grid")) {
        cfg.t_grid = detail::parse_double_list(file, v->line, v->value);
        if (cfg.t_grid.empty()) detail::config_error(file, v->line, "t_grid must be non-empty");
        for (std::size_t i = 0; i < cfg.t_grid.size(); ++i) {
            if (!(cfg.t_grid[i] > 0.0))
                detail::config_error(file, v->line, "t_grid values must be positive");
            if (i > 0 && cfg.t_grid[i] <= cfg.t_grid[i - 1])
                detail::config_error(file, v->line, "t_grid must be strictly increasing");
        }
    } else {
        cfg.t_grid = {1.0};
    }
    if (const auto* v = get("study", "path_count"))
        cfg.path_count = detail::parse_int(file, v->line, v->value);
    if (cfg.path_count < 1) throw ValidationError(file + ": path_count must be >= 1");
    if (const auto* v = get("study", "dt")) cfg.dt = detail::parse_double(file, v->line, v->value);
    if (!(cfg.dt > 0.0)) throw ValidationError(file + ": dt must be positive");
    if (const auto* v = get("study", "z0")) {
        const SpecExpr spec = parse_spec_expr(file, v->line, v->value);
        if (spec.name == "k") {
            cfg.z0_rule = "k";
        } else if (spec.name == "const") {
            cfg.z0_rule = "const";
            cfg.z0_const = detail::require_arg(file, v->line, spec, "c");
            if (cfg.z0_const < 0.0) detail::config_error(file, v->line, "z0 must be non-negative");
        } else {
            detail::config_error(file, v->line, "unknown z0 rule '" + spec.name + "'");
        }
    }
    if (const auto* v = get("study", "j_max"))
        cfg.j_max = detail::parse_int(file, v->line, v->value);
    if (const auto* v = get("study", "process")) {
        cfg.process = v->value;
        if (cfg.process != "cbp" && cfg.process != "limit")
            detail::config_error(file, v->line, "process must be 'cbp' or 'limit'");
    }
    if (const auto* v = get("study", "seed")) cfg.seed = detail::parse_u64(file, v->line, v->value);
    if (const auto* v = get("study", "out")) cfg.out_path = v->value;

    // --- [monotone] --------------------------------------------------------
    if (const auto* v = get("monotone", "c")) cfg.mono_c = detail::parse_double(file, v->line, v->value);
    if (const auto* v = get("monotone", "d")) cfg.mono_d = detail::parse_double(file, v->line, v->value);
    if (const auto* v = get("monotone", "j_max"))
        cfg.mono_j_max = static_cast<int>(detail::parse_int(file, v->line, v->value));
    if (const auto* v = get("monotone", "lambda_max"))
        cfg.mono_lambda_max = detail::parse_double(file, v->line, v->value);
    if (const auto* v = get("monotone", "lambda_points"))
        cfg.mono_lambda_points = static_cast<int>(detail::parse_int(file, v->line, v->value));
    if (const auto* v = get("monotone", "tol"))
        cfg.mono_tol = detail::parse_double(file, v->line, v->value);

    // Declared gamma0 must be consistent with the gamma rule along k_list.
    double prev = std::numeric_limits<double>::infinity();
    for (std::int64_t k : cfg.k_list) {
        const double dev = std::abs(cfg.gamma.gamma(k) / double(k) - cfg.gamma.gamma0);
        if (dev > prev + 1e-12)
            throw ValidationError(file + ": |gamma_k/k - gamma0| must be non-increasing along k_list");
        prev = dev;
    }

    // Model and offspring specs must build for every k (fail early, not mid-run).
    for (std::int64_t k : cfg.k_list) (void)build_offspring_law(cfg.offspring_spec, k);
    (void)build_family(cfg);
    return cfg;
}

inline ExperimentConfig load_config_file(const std::string& path) {
    return load_config(parse_ini_file(path));
}

} // namespace cbp
