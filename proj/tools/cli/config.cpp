#include "cli/config.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include <lepkit/errors.hpp>

namespace lep::cli {

namespace {

[[noreturn]] void fail(const std::string& key, const std::string& what) { throw ConfigError(key + ": " + what); }

double as_number(const std::string& key, const nlohmann::json& v) {
    if (!v.is_number()) fail(key, "expected a number, got " + v.dump());
    const double x = v.get<double>();
    if (!std::isfinite(x)) fail(key, "must be finite");
    return x;
}

std::vector<double> linspace(const std::string& key, const ConfigReader::Range& r) {
    if (r.n < 1) fail(key, "n must be at least 1");
    if (r.n == 1) {
        if (r.min != r.max) fail(key, "a single-point range needs min == max");
        return {r.min};
    }
    if (!(r.max > r.min)) fail(key, "empty range: max must exceed min");
    std::vector<double> v(static_cast<std::size_t>(r.n));
    const double h = (r.max - r.min) / static_cast<double>(r.n - 1);
    for (std::int64_t i = 0; i < r.n; ++i) v[static_cast<std::size_t>(i)] = r.min + h * static_cast<double>(i);
    v.back() = r.max;
    return v;
}

} // namespace

double physical_time_factor(double omega_khz) { return 2.0 * std::numbers::pi * omega_khz * 1e-3; }

ConfigReader::ConfigReader(nlohmann::json doc) : doc_(std::move(doc)) {
    if (doc_.is_null()) doc_ = nlohmann::json::object();
    if (!doc_.is_object()) throw ConfigError("config: top level must be an object");
    const std::string u = choice("units", {"normalized", "physical"}, std::string("normalized"));
    units_ = u == "physical" ? Units::Physical : Units::Normalized;
    if (units_ == Units::Physical) {
        omega_khz_ = number("omega", kDefaultOmegaKhz);
        if (!(omega_khz_ > 0.0)) fail("omega", "must be positive");
    } else if (has("omega")) {
        fail("omega", "only meaningful with units = physical (normalized configs fix omega = 1)");
    }
}

bool ConfigReader::has(const std::string& key) const { return doc_.contains(key); }

const nlohmann::json* ConfigReader::lookup(const std::string& key) {
    used_.insert(key);
    auto it = doc_.find(key);
    return it == doc_.end() ? nullptr : &*it;
}

double ConfigReader::number(const std::string& key, std::optional<double> def) {
    const auto* v = lookup(key);
    if (!v) {
        if (!def) fail(key, "required");
        effective_[key] = *def;
        return *def;
    }
    const double x = as_number(key, *v);
    effective_[key] = x;
    return x;
}

std::int64_t ConfigReader::integer(const std::string& key, std::optional<std::int64_t> def, std::int64_t min) {
    const auto* v = lookup(key);
    std::int64_t x;
    if (!v) {
        if (!def) fail(key, "required");
        x = *def;
    } else {
        if (!v->is_number_integer()) fail(key, "expected an integer, got " + v->dump());
        x = v->get<std::int64_t>();
    }
    if (x < min) fail(key, "must be at least " + std::to_string(min));
    effective_[key] = x;
    return x;
}

bool ConfigReader::boolean(const std::string& key, std::optional<bool> def) {
    const auto* v = lookup(key);
    if (!v) {
        if (!def) fail(key, "required");
        effective_[key] = *def;
        return *def;
    }
    if (!v->is_boolean()) fail(key, "expected true or false");
    effective_[key] = v->get<bool>();
    return v->get<bool>();
}

std::string ConfigReader::choice(const std::string& key, std::initializer_list<const char*> choices,
                                 std::optional<std::string> def) {
    const auto* v = lookup(key);
    std::string s;
    if (!v) {
        if (!def) fail(key, "required");
        s = *def;
    } else {
        if (!v->is_string()) fail(key, "expected a string, got " + v->dump());
        s = v->get<std::string>();
    }
    bool ok = false;
    std::ostringstream allowed;
    for (const char* c : choices) {
        ok = ok || s == c;
        allowed << (allowed.tellp() > 0 ? ", " : "") << c;
    }
    if (!ok) fail(key, "expected one of " + allowed.str() + ", got '" + s + "'");
    effective_[key] = s;
    return s;
}

double ConfigReader::fraction(const std::string& key, std::optional<double> def, double lo, double hi) {
    const double x = number(key, def);
    if (x < lo || x > hi) {
        std::ostringstream os;
        os << "must lie in [" << lo << ", " << hi << "], got " << x;
        fail(key, os.str());
    }
    return x;
}

double ConfigReader::scaled(const std::string& key, std::optional<double> def, double to_normalized, double lo) {
    const auto* v = lookup(key);
    double raw;
    if (!v) {
        if (!def) fail(key, "required");
        raw = *def / to_normalized;
    } else {
        raw = as_number(key, *v);
    }
    if (raw < lo) fail(key, "must be non-negative");
    effective_[key] = raw;
    return raw * to_normalized;
}

double ConfigReader::frequency(const std::string& key, std::optional<double> def) {
    return scaled(key, def, units_ == Units::Physical ? 1.0 / omega_khz_ : 1.0,
                  -std::numeric_limits<double>::infinity());
}

double ConfigReader::rate(const std::string& key, std::optional<double> def) {
    return scaled(key, def, units_ == Units::Physical ? 1.0 / omega_khz_ : 1.0, 0.0);
}

double ConfigReader::time(const std::string& key, std::optional<double> def) {
    return scaled(key, def, units_ == Units::Physical ? physical_time_factor(omega_khz_) : 1.0, 0.0);
}

std::vector<double> ConfigReader::values(const std::string& key, std::optional<Range> def, double lo, double hi) {
    auto v = scaled_values(key, def, 1.0, -std::numeric_limits<double>::infinity());
    for (double x : v) {
        if (x < lo || x > hi) {
            std::ostringstream os;
            os << "values must lie in [" << lo << ", " << hi << "], got " << x;
            fail(key, os.str());
        }
    }
    return v;
}

std::vector<double> ConfigReader::scaled_values(const std::string& key, std::optional<Range> def,
                                                double to_normalized, double lo) {
    const auto* v = lookup(key);
    std::vector<double> raw;
    if (!v) {
        if (!def) fail(key, "required");
        const Range r{def->min / to_normalized, def->max / to_normalized, def->n};
        effective_[key] = {{"min", r.min}, {"max", r.max}, {"n", r.n}};
        raw = linspace(key, r);
    } else if (v->is_number()) {
        raw = {as_number(key, *v)};
        effective_[key] = raw.front();
    } else if (v->is_array()) {
        if (v->empty()) fail(key, "empty list");
        for (const auto& e : *v) raw.push_back(as_number(key, e));
        effective_[key] = raw;
    } else if (v->is_object()) {
        for (const auto& [k, _] : v->items())
            if (k != "min" && k != "max" && k != "n") fail(key + "." + k, "unknown field");
        Range r;
        if (!v->contains("min")) fail(key + ".min", "required");
        if (!v->contains("max")) fail(key + ".max", "required");
        if (!v->contains("n")) fail(key + ".n", "required");
        r.min = as_number(key + ".min", v->at("min"));
        r.max = as_number(key + ".max", v->at("max"));
        if (!v->at("n").is_number_integer()) fail(key + ".n", "expected an integer");
        r.n = v->at("n").get<std::int64_t>();
        raw = linspace(key, r);
        effective_[key] = {{"min", r.min}, {"max", r.max}, {"n", r.n}};
    } else {
        fail(key, "expected a number, a list, or {min, max, n}");
    }
    for (double& x : raw) {
        if (x < lo) fail(key, "values must be non-negative");
        x *= to_normalized;
    }
    return raw;
}

std::vector<double> ConfigReader::rate_values(const std::string& key, std::optional<Range> def) {
    return scaled_values(key, def, units_ == Units::Physical ? 1.0 / omega_khz_ : 1.0, 0.0);
}

std::vector<double> ConfigReader::frequency_values(const std::string& key, std::optional<Range> def) {
    return scaled_values(key, def, units_ == Units::Physical ? 1.0 / omega_khz_ : 1.0,
                         -std::numeric_limits<double>::infinity());
}

std::vector<double> ConfigReader::time_values(const std::string& key, std::optional<Range> def) {
    return scaled_values(key, def, units_ == Units::Physical ? physical_time_factor(omega_khz_) : 1.0, 0.0);
}

std::uint64_t ConfigReader::seed() {
    const auto* v = lookup("seed");
    if (!v) fail("seed", "required for stochastic commands (pass --seed or set it in the config)");
    if (!v->is_number_unsigned() && !(v->is_number_integer() && v->get<std::int64_t>() >= 0))
        fail("seed", "expected a non-negative integer");
    const auto s = v->get<std::uint64_t>();
    effective_["seed"] = s;
    return s;
}

void ConfigReader::ignore(const std::string& key) { used_.insert(key); }

void ConfigReader::finish() const {
    for (const auto& [k, _] : doc_.items())
        if (!used_.count(k)) fail(k, "unknown field for this command");
}

std::pair<std::string, nlohmann::json> parse_assignment(const std::string& s) {
    const auto eq = s.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError("--set: expected key=value, got '" + s + "'");
    const std::string key = s.substr(0, eq);
    const std::string text = s.substr(eq + 1);
    auto parsed = nlohmann::json::parse(text, nullptr, false);
    if (parsed.is_discarded()) parsed = text;
    return {key, parsed};
}

} // namespace lep::cli
