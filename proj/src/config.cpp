#include <charconv>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>

#include "lorentz/cli.hpp"
#include "lorentz/errors.hpp"

namespace lorentz {

namespace {

std::string_view trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::vector<std::string_view> split(std::string_view s, char sep) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = s.find(sep, start);
        out.push_back(trim(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

struct Entry {
    std::string value;
    int line = 0;
};

double to_double(const Entry& e, std::string_view key) {
    const std::string_view v = trim(e.value);
    double out = 0.0;
    const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || ptr != v.data() + v.size()) {
        throw ParseError(e.line, "line " + std::to_string(e.line) + ": '" + std::string(key) +
                                     "' expects a number, got '" + std::string(v) + "'");
    }
    return out;
}

std::uint64_t to_uint(const Entry& e, std::string_view key) {
    const std::string_view v = trim(e.value);
    std::uint64_t out = 0;
    const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || ptr != v.data() + v.size()) {
        throw ParseError(e.line, "line " + std::to_string(e.line) + ": '" + std::string(key) +
                                     "' expects a non-negative integer, got '" + std::string(v) + "'");
    }
    return out;
}

bool to_bool(const Entry& e, std::string_view key) {
    const std::string_view v = trim(e.value);
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw ParseError(e.line, "line " + std::to_string(e.line) + ": '" + std::string(key) + "' expects true or false");
}

[[noreturn]] void bad_choice(const Entry& e, std::string_view key, std::string_view choices) {
    throw ParseError(e.line, "line " + std::to_string(e.line) + ": '" + std::string(key) + "' must be one of " +
                                 std::string(choices) + ", got '" + e.value + "'");
}

}  // namespace

ExperimentConfig parse_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ParseError(0, "cannot read config file " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config_text(ss.str());
}

ExperimentConfig parse_config_text(std::string_view text) {
    ExperimentConfig cfg;
    std::map<std::string, Entry, std::less<>> kv;
    std::vector<Entry> scatterer_lines;

    static const std::vector<std::string> known{
        "force.kind", "force.epsilon", "force.e1", "force.e2", "force.modulation", "force.potential",
        "force.field", "twist.kind", "twist.delta", "twist.delta2", "twist.epsilon", "twist.parity",
        "integrator.rel_tol", "integrator.abs_tol", "integrator.event_tol", "integrator.max_time",
        "integrator.grazing_tol", "integrator.tangential_tol", "integrator.analytic_zero_force", "run.n",
        "run.burn_in", "run.eps_list", "run.K", "run.W", "run.m", "run.orbit_length", "run.n_mc",
        "run.chain_length", "run.n_offsets", "run.samples", "run.tol", "run.kernel", "run.n_orbits", "run.h0",
        "seed", "threads", "output.thin"};

    int line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const auto nl = text.find('\n', pos);
        std::string_view line = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
        pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string_view::npos) {
            throw ParseError(line_no, "line " + std::to_string(line_no) + ": expected 'key = value'");
        }
        const std::string key(trim(line.substr(0, eq)));
        const std::string value(trim(line.substr(eq + 1)));
        if (key.empty()) throw ParseError(line_no, "line " + std::to_string(line_no) + ": empty key");
        if (key == "scatterer") {
            scatterer_lines.push_back({value, line_no});
            continue;
        }
        if (std::find(known.begin(), known.end(), key) == known.end()) {
            throw ParseError(line_no, "line " + std::to_string(line_no) + ": unknown key '" + key + "'");
        }
        if (kv.count(key)) {
            throw ParseError(line_no, "line " + std::to_string(line_no) + ": duplicate key '" + key + "'");
        }
        kv[key] = {value, line_no};
    }

    auto get = [&](std::string_view key) -> const Entry* {
        const auto it = kv.find(key);
        return it == kv.end() ? nullptr : &it->second;
    };
    auto num = [&](std::string_view key, double def) {
        const Entry* e = get(key);
        return e ? to_double(*e, key) : def;
    };
    auto count = [&](std::string_view key, std::size_t def) {
        const Entry* e = get(key);
        return e ? static_cast<std::size_t>(to_uint(*e, key)) : def;
    };

    // Table.
    if (scatterer_lines.empty()) throw ParseError(line_no, "missing required key 'scatterer'");
    for (const Entry& e : scatterer_lines) {
        const auto parts = split(e.value, ',');
        if (parts.size() != 3) {
            throw ParseError(e.line, "line " + std::to_string(e.line) + ": scatterer expects 'cx,cy,r'");
        }
        Scatterer sc;
        sc.center.x = to_double({std::string(parts[0]), e.line}, "scatterer");
        sc.center.y = to_double({std::string(parts[1]), e.line}, "scatterer");
        sc.radius = to_double({std::string(parts[2]), e.line}, "scatterer");
        cfg.scatterers.push_back(sc);
    }
    cfg.table = GeometryTable::build(cfg.scatterers);

    // Force.
    const Entry* kind = get("force.kind");
    if (!kind) throw ParseError(line_no, "missing required key 'force.kind'");
    const double eps = num("force.epsilon", 0.0);
    if (eps < 0.0) throw RangeError("force.epsilon must be non-negative");
    const double e1 = num("force.e1", 1.0), e2 = num("force.e2", 0.0), mod = num("force.modulation", 0.0);
    if (kind->value == "zero") {
        cfg.force = ForceModel::zero();
    } else if (kind->value == "conservative") {
        Potential pot;
        if (const Entry* p = get("force.potential")) {
            const auto parts = split(p->value, ':');
            if (parts.size() != 2) {
                throw ParseError(p->line, "line " + std::to_string(p->line) + ": force.potential expects 'shape:amplitude'");
            }
            if (parts[0] == "constant") pot.shape = Potential::Shape::Constant;
            else if (parts[0] == "cosine2d") pot.shape = Potential::Shape::Cosine2d;
            else bad_choice(*p, "force.potential", "constant, cosine2d");
            pot.amplitude = to_double({std::string(parts[1]), p->line}, "force.potential");
        }
        cfg.force = ForceModel::conservative(pot, eps);
    } else if (kind->value == "isokinetic") {
        IsokineticField f;
        f.e1 = e1;
        f.e2 = e2;
        f.modulation = mod;
        if (const Entry* p = get("force.field")) {
            if (p->value == "magnetic") f.shape = IsokineticField::Shape::Magnetic;
            else if (p->value == "odd_harmonic") f.shape = IsokineticField::Shape::OddHarmonic;
            else bad_choice(*p, "force.field", "magnetic, odd_harmonic");
        }
        cfg.force = ForceModel::isokinetic(f, eps);
    } else if (kind->value == "thermostatted_field") {
        cfg.force = ForceModel::thermostatted_field(e1, e2, mod, eps);
    } else if (kind->value == "constant_thermostatted") {
        cfg.force = ForceModel::constant_thermostatted(e1, e2, eps);
    } else {
        bad_choice(*kind, "force.kind", "zero, conservative, isokinetic, thermostatted_field, constant_thermostatted");
    }

    // Twist.
    if (const Entry* t = get("twist.kind")) {
        const double delta = num("twist.delta", 0.0);
        if (t->value == "identity") {
            cfg.twist = TwistModel::identity();
        } else if (t->value == "slip") {
            auto parity = TwistModel::Parity::Odd;
            if (const Entry* p = get("twist.parity")) {
                if (p->value == "odd") parity = TwistModel::Parity::Odd;
                else if (p->value == "even") parity = TwistModel::Parity::Even;
                else bad_choice(*p, "twist.parity", "odd, even");
            }
            cfg.twist = TwistModel::slip(delta, parity);
        } else if (t->value == "general") {
            const double d2 = num("twist.delta2", 0.0);
            const double te = num("twist.epsilon", std::max(std::abs(delta), std::abs(d2)));
            cfg.twist = TwistModel::general(delta, d2, te);
        } else {
            bad_choice(*t, "twist.kind", "identity, slip, general");
        }
    }

    // Integrator.
    IntegratorConfig& ic = cfg.integrator;
    ic.rel_tol = num("integrator.rel_tol", ic.rel_tol);
    ic.abs_tol = num("integrator.abs_tol", ic.abs_tol);
    ic.event_tol = num("integrator.event_tol", ic.event_tol);
    ic.max_time = num("integrator.max_time", ic.max_time);
    ic.grazing_tol = num("integrator.grazing_tol", ic.grazing_tol);
    ic.tangential_tol = num("integrator.tangential_tol", ic.tangential_tol);
    if (const Entry* e = get("integrator.analytic_zero_force")) ic.analytic_zero_force = to_bool(*e, "integrator.analytic_zero_force");
    if (!(ic.rel_tol > 0 && ic.abs_tol > 0 && ic.event_tol > 0 && ic.max_time > 0 && ic.grazing_tol >= 0)) {
        throw RangeError("integrator tolerances and max_time must be positive");
    }

    // Run parameters.
    RunParams& r = cfg.run;
    r.n = count("run.n", r.n);
    r.burn_in = count("run.burn_in", r.burn_in);
    if (const Entry* e = get("run.eps_list")) {
        r.eps_list.clear();
        for (std::string_view part : split(e->value, ',')) r.eps_list.push_back(to_double({std::string(part), e->line}, "run.eps_list"));
    }
    r.max_lag = count("run.K", r.max_lag);
    r.max_window = count("run.W", r.max_window);
    r.m = count("run.m", r.m);
    r.orbit_length = count("run.orbit_length", r.orbit_length);
    r.n_mc = count("run.n_mc", r.n_mc);
    r.chain_length = count("run.chain_length", r.chain_length);
    r.n_offsets = count("run.n_offsets", r.n_offsets);
    r.samples = count("run.samples", r.samples);
    r.tol = num("run.tol", r.tol);
    r.n_orbits = count("run.n_orbits", r.n_orbits);
    r.h0 = num("run.h0", r.h0);
    if (const Entry* e = get("run.kernel")) {
        if (e->value == "exact") r.kernel = HKernel::Exact;
        else if (e->value == "linearized") r.kernel = HKernel::Linearized;
        else if (e->value == "thermostat") r.kernel = HKernel::ThermostatForm;
        else bad_choice(*e, "run.kernel", "exact, linearized, thermostat");
    }
    if (r.n < 1) throw RangeError("run.n must be at least 1");
    if (r.max_lag > 200 || r.max_window > 200) throw RangeError("run.K and run.W are capped at 200");

    if (const Entry* e = get("seed")) cfg.seed = to_uint(*e, "seed");
    if (const Entry* e = get("threads")) cfg.threads = static_cast<unsigned>(to_uint(*e, "threads"));
    cfg.thin = std::max<std::size_t>(1, count("output.thin", 1));

    // Model validation.
    const ForceValidation fv = validate_force(cfg.force, cfg.table);
    if (!fv.ok) throw ValidationError("force model: " + fv.message);
    const TwistValidation tv = validate_twist(cfg.twist, cfg.table);
    if (!tv.ok) throw ValidationError("twist model: " + tv.message);
    return cfg;
}

std::string format_double(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

void Summary::add(std::string key, double v) { lines_.emplace_back(std::move(key), format_double(v)); }
void Summary::add(std::string key, std::size_t v) { lines_.emplace_back(std::move(key), std::to_string(v)); }
void Summary::add(std::string key, bool v) { lines_.emplace_back(std::move(key), v ? "true" : "false"); }
void Summary::add(std::string key, std::string v) { lines_.emplace_back(std::move(key), std::move(v)); }

std::string Summary::get(std::string_view key) const {
    for (const auto& [k, v] : lines_)
        if (k == key) return v;
    return {};
}

void Summary::write(std::ostream& os) const {
    for (const auto& [k, v] : lines_) os << k << '=' << v << '\n';
}

int exit_code_for(const std::exception& e) {
    if (dynamic_cast<const ValidationError*>(&e)) return 2;
    return 3;
}

}  // namespace lorentz
