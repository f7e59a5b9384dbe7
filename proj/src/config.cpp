#include "gfspec/config.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>

#include "gfspec/errors.hpp"

namespace gfspec {

namespace {

[[noreturn]] void bad(const std::string& key, const std::string& what)
{
    throw Error(ErrorKind::ConfigError, "config key '" + key + "': " + what);
}

std::string trim(std::string_view s)
{
    const auto a = s.find_first_not_of(" \t\r");
    if (a == std::string_view::npos) return {};
    const auto b = s.find_last_not_of(" \t\r");
    return std::string(s.substr(a, b - a + 1));
}

double to_double(const std::string& key, const std::string& v)
{
    const char* begin = v.c_str();
    char* end = nullptr;
    const double d = std::strtod(begin, &end);
    if (v.empty() || end != begin + v.size() || !std::isfinite(d)) bad(key, "not a finite number: '" + v + "'");
    return d;
}

std::uint64_t to_uint(const std::string& key, const std::string& v)
{
    std::uint64_t u = 0;
    const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), u);
    if (v.empty() || ec != std::errc() || p != v.data() + v.size()) {
        bad(key, "not a non-negative integer: '" + v + "'");
    }
    return u;
}

bool to_bool(const std::string& key, const std::string& v)
{
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    bad(key, "not a boolean: '" + v + "'");
}

std::vector<double> to_list(const std::string& key, const std::string& v)
{
    std::vector<double> out;
    if (v.empty()) return out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(to_double(key, trim(item)));
    return out;
}

std::string fmt(double d)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", d);
    return buf;
}

std::string fmt_list(const std::vector<double>& v)
{
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + fmt(v[i]);
    return s;
}

struct Field {
    const char* section;
    const char* key;
    std::function<void(RunConfig&, const std::string&)> set;
    std::function<std::string(const RunConfig&)> get;
};

template <class T>
Field real(const char* sec, const char* key, T RunConfig::*m)
{
    return {sec, key, [=](RunConfig& c, const std::string& v) { c.*m = to_double(key, v); },
            [=](const RunConfig& c) { return fmt(c.*m); }};
}

template <class T>
Field integer(const char* sec, const char* key, T RunConfig::*m)
{
    return {sec, key,
            [=](RunConfig& c, const std::string& v) { c.*m = static_cast<T>(to_uint(key, v)); },
            [=](const RunConfig& c) { return std::to_string(c.*m); }};
}

Field text(const char* sec, const char* key, std::string RunConfig::*m)
{
    return {sec, key, [=](RunConfig& c, const std::string& v) { c.*m = v; },
            [=](const RunConfig& c) { return c.*m; }};
}

Field list(const char* sec, const char* key, std::vector<double> RunConfig::*m)
{
    return {sec, key, [=](RunConfig& c, const std::string& v) { c.*m = to_list(key, v); },
            [=](const RunConfig& c) { return fmt_list(c.*m); }};
}

const std::vector<Field>& fields()
{
    static const std::vector<Field> f = {
        text("model", "growth", &RunConfig::growth),
        real("model", "growth_c0", &RunConfig::growth_c0),
        real("model", "growth_c1", &RunConfig::growth_c1),
        real("model", "growth_power", &RunConfig::growth_power),
        text("model", "rate", &RunConfig::rate),
        real("model", "rate_k0", &RunConfig::rate_k0),
        real("model", "rate_k1", &RunConfig::rate_k1),
        real("model", "rate_gamma", &RunConfig::rate_gamma),
        text("model", "kernel", &RunConfig::kernel),
        real("model", "kernel_beta", &RunConfig::kernel_beta),
        list("model", "kinks", &RunConfig::kinks),
        {"model", "irreducible",
         [](RunConfig& c, const std::string& v) { c.irreducible = to_bool("irreducible", v); },
         [](const RunConfig& c) { return std::string(c.irreducible ? "true" : "false"); }},
        list("model", "doeblin", &RunConfig::doeblin),
        integer("numerics", "N", &RunConfig::N),
        real("numerics", "x_min", &RunConfig::x_min),
        real("numerics", "x_max", &RunConfig::x_max),
        real("numerics", "dt", &RunConfig::dt),
        real("numerics", "quad_tol", &RunConfig::quad_tol),
        text("numerics", "scheme", &RunConfig::scheme),
        integer("run", "seed", &RunConfig::seed),
        integer("run", "n_paths", &RunConfig::n_paths),
        integer("run", "particles", &RunConfig::particles),
        real("run", "t_end", &RunConfig::t_end),
        integer("run", "checkpoints", &RunConfig::checkpoints),
        real("run", "x0", &RunConfig::x0),
        text("run", "regime", &RunConfig::regime),
        real("run", "alpha", &RunConfig::alpha),
        text("run", "observable", &RunConfig::observable),
        real("run", "f_lo", &RunConfig::f_lo),
        real("run", "f_hi", &RunConfig::f_hi),
        real("run", "burn_in", &RunConfig::burn_in),
        real("run", "fit_burn_in", &RunConfig::fit_burn_in),
        integer("run", "eta_particles", &RunConfig::eta_particles),
        real("run", "t_probe", &RunConfig::t_probe),
    };
    return f;
}

void one_of(const char* key, const std::string& v, std::initializer_list<const char*> allowed)
{
    for (const char* a : allowed) {
        if (v == a) return;
    }
    std::string list;
    for (const char* a : allowed) list += std::string(list.empty() ? "" : ", ") + a;
    bad(key, "'" + v + "' is not one of " + list);
}

void validate(const RunConfig& c)
{
    one_of("growth", c.growth, {"constant", "linear", "power", "affine"});
    one_of("rate", c.rate, {"constant", "power", "affine"});
    one_of("kernel", c.kernel, {"uniform", "mitosis", "power"});
    one_of("scheme", c.scheme, {"euler", "heun"});
    one_of("regime", c.regime, {"auto", "pseudo-entrance", "lnx", "K-constant", "entrance"});
    one_of("observable", c.observable, {"one", "id", "indicator"});
    if (c.growth == "constant" && !(c.growth_c0 > 0.0)) bad("growth_c0", "must be positive");
    if (c.growth == "linear" && !(c.growth_c1 > 0.0)) bad("growth_c1", "must be positive");
    if (c.growth == "power" && !(c.growth_c0 > 0.0)) bad("growth_c0", "must be positive");
    if (c.growth == "affine" && !(c.growth_c0 >= 0.0 && c.growth_c1 >= 0.0 && c.growth_c0 + c.growth_c1 > 0.0)) {
        bad("growth_c0", "affine speed needs c0, c1 >= 0, not both zero");
    }
    if (c.kernel == "power" && !(c.kernel_beta > -1.0)) bad("kernel_beta", "must exceed -1");
    if (!c.doeblin.empty() && (c.doeblin.size() != 3 || !(c.doeblin[0] < c.doeblin[1]) || !(c.doeblin[2] > 0.0))) {
        bad("doeblin", "expected lo, hi, a with lo < hi and a > 0");
    }
    if (c.N < 2) bad("N", "must be at least 2");
    if (!(c.x_min > 0.0)) bad("x_min", "must be positive");
    if (!(c.x_min < 1.0 && 1.0 < c.x_max)) bad("x_max", "domain must satisfy x_min < 1 < x_max");
    if (!(c.dt >= 0.0)) bad("dt", "must be non-negative (0 selects the default)");
    if (!(c.quad_tol > 0.0)) bad("quad_tol", "must be positive");
    if (c.n_paths == 0) bad("n_paths", "must be positive");
    if (c.particles == 0) bad("particles", "must be positive");
    if (!(c.t_end > 0.0)) bad("t_end", "must be positive");
    if (c.checkpoints == 0) bad("checkpoints", "must be positive");
    if (!(c.x0 > c.x_min && c.x0 < c.x_max)) bad("x0", "must lie inside (x_min, x_max)");
    if (!(c.alpha > 1.0)) bad("alpha", "must exceed 1");
    if (!(c.f_lo < c.f_hi)) bad("f_hi", "must exceed f_lo");
    if (!(c.burn_in >= 0.0 && c.burn_in < 1.0)) bad("burn_in", "must lie in [0, 1)");
    if (!(c.fit_burn_in >= 0.0 && c.fit_burn_in < 1.0)) bad("fit_burn_in", "must lie in [0, 1)");
    if (!(c.t_probe > 0.0)) bad("t_probe", "must be positive");
}

void write_value(std::string& out, const nlohmann::ordered_json& j, int indent, int depth)
{
    const std::string pad = indent > 0 ? "\n" + std::string(static_cast<std::size_t>(indent * (depth + 1)), ' ') : "";
    const std::string close = indent > 0 ? "\n" + std::string(static_cast<std::size_t>(indent * depth), ' ') : "";
    const char* colon = indent > 0 ? ": " : ":";
    switch (j.type()) {
    case nlohmann::ordered_json::value_t::object: {
        if (j.empty()) {
            out += "{}";
            return;
        }
        out += '{';
        bool first = true;
        for (const auto& [k, v] : j.items()) {
            if (!first) out += ',';
            first = false;
            out += pad + nlohmann::ordered_json(k).dump() + colon;
            write_value(out, v, indent, depth + 1);
        }
        out += close + '}';
        return;
    }
    case nlohmann::ordered_json::value_t::array: {
        if (j.empty()) {
            out += "[]";
            return;
        }
        out += '[';
        bool first = true;
        for (const auto& v : j) {
            if (!first) out += ',';
            first = false;
            out += pad;
            write_value(out, v, indent, depth + 1);
        }
        out += close + ']';
        return;
    }
    case nlohmann::ordered_json::value_t::number_float: {
        const double d = j.get<double>();
        if (!std::isfinite(d)) throw Error(ErrorKind::DomainError, "non-finite number in JSON output");
        out += fmt(d);
        return;
    }
    default:
        out += j.dump();
    }
}

}  // namespace

std::string RunConfig::canonical() const
{
    std::string out;
    const char* section = "";
    for (const auto& f : fields()) {
        if (std::string_view(section) != f.section) {
            section = f.section;
            out += std::string("[") + section + "]\n";
        }
        out += std::string(f.key) + "=" + f.get(*this) + "\n";
    }
    return out;
}

std::uint64_t fnv1a(std::string_view bytes)
{
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::uint64_t RunConfig::hash() const { return fnv1a(canonical()); }

std::string RunConfig::hash_hex() const
{
    char buf[24];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(hash()));
    return buf;
}

RunConfig parse_config(std::istream& is)
{
    RunConfig cfg;
    std::string section;
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']') {
                throw Error(ErrorKind::ConfigError, "line " + std::to_string(lineno) + ": unterminated section header");
            }
            section = trim(std::string_view(line).substr(1, line.size() - 2));
            if (section != "model" && section != "numerics" && section != "run") {
                throw Error(ErrorKind::ConfigError, "line " + std::to_string(lineno) + ": unknown section [" + section + "]");
            }
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw Error(ErrorKind::ConfigError, "line " + std::to_string(lineno) + ": expected key = value");
        }
        const std::string key = trim(std::string_view(line).substr(0, eq));
        const std::string value = trim(std::string_view(line).substr(eq + 1));
        if (section.empty()) bad(key, "appears before any section header");
        bool found = false;
        for (const auto& f : fields()) {
            if (f.section == section && f.key == key) {
                f.set(cfg, value);
                found = true;
                break;
            }
        }
        if (!found) bad(key, "unknown key in [" + section + "]");
    }
    validate(cfg);
    return cfg;
}

RunConfig load_config(const std::string& path)
{
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::ConfigError, "cannot open config file '" + path + "'");
    return parse_config(in);
}

ModelSpec build_model(const RunConfig& c)
{
    GrowthSpec growth;
    if (c.growth == "constant") {
        const double c0 = c.growth_c0;
        growth = GrowthSpec::from_scale([c0](double x) { return (x - 1.0) / c0; },
                                        [c0](double v) { return 1.0 + c0 * v; },
                                        [c0](double) { return c0; });
    } else if (c.growth == "linear" || (c.growth == "power" && c.growth_power == 1.0)) {
        const double c1 = c.growth == "linear" ? c.growth_c1 : c.growth_c0;
        growth = GrowthSpec::from_scale([c1](double x) { return std::log(x) / c1; },
                                        [c1](double v) { return std::exp(c1 * v); },
                                        [c1](double x) { return c1 * x; });
    } else if (c.growth == "power") {
        const double c0 = c.growth_c0, a = c.growth_power;
        growth = GrowthSpec::from_speed([c0, a](double x) { return c0 * std::pow(x, a); });
    } else {
        const double c0 = c.growth_c0, c1 = c.growth_c1;
        growth = GrowthSpec::from_speed([c0, c1](double x) { return c0 + c1 * x; });
    }

    ScalarFn K;
    const double k0 = c.rate_k0, k1 = c.rate_k1, g = c.rate_gamma;
    if (c.rate == "constant") {
        K = [k0](double) { return k0; };
    } else if (c.rate == "power") {
        K = [k0, g](double x) { return k0 * std::pow(x, g); };
    } else {
        K = [k0, k1](double x) { return k0 + k1 * x; };
    }

    RelativeMeasure p = c.kernel == "uniform"   ? RelativeMeasure::uniform()
                        : c.kernel == "mitosis" ? RelativeMeasure::mitosis()
                                                : RelativeMeasure::power(c.kernel_beta + 2.0, c.kernel_beta);

    Declarations decl;
    decl.irreducible = c.irreducible;
    if (!c.doeblin.empty()) decl.doeblin = DoeblinInterval{{c.doeblin[0], c.doeblin[1]}, c.doeblin[2]};
    ModelOptions mo;
    mo.rel_tol = c.quad_tol;
    return make_model(std::move(growth), FragmentationKernel::relative(std::move(p), std::move(K), c.kinks),
                      {c.x_min, c.x_max}, decl, mo);
}

ScalarFn build_observable(const RunConfig& c)
{
    if (c.observable == "one") return [](double) { return 1.0; };
    if (c.observable == "id") return [](double x) { return x; };
    const double lo = c.f_lo, hi = c.f_hi;
    return [lo, hi](double x) { return x >= lo && x <= hi ? 1.0 : 0.0; };
}

SolveOptions solve_options(const RunConfig& c)
{
    SolveOptions o;
    o.scheme = c.scheme == "heun" ? TimeScheme::Heun : TimeScheme::Euler;
    o.dt = c.dt;
    return o;
}

std::string format_json(const nlohmann::ordered_json& j, int indent)
{
    std::string out;
    write_value(out, j, indent, 0);
    return out;
}

}  // namespace gfspec
