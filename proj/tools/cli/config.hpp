// config.hpp: run configuration with unit handling and field-level validation
#pragma once

#include <cstdint>
#include <initializer_list>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

namespace lep::cli {

enum class Units { Normalized, Physical };

// Default drive strength for physical configs: omega / 2pi in kHz.
inline constexpr double kDefaultOmegaKhz = 40.0;

// Reads a flat JSON object. Every key consumed is recorded, together with
// the default when the key was absent, so the effective configuration can
// be echoed; finish() rejects keys nobody asked for.
//
// Physical configs give omega, delta and gamma as value / 2pi in kHz and
// times in microseconds. All accessors below return dimensionless numbers
// (frequencies and rates over omega, times multiplied by omega).
class ConfigReader {
public:
    explicit ConfigReader(nlohmann::json doc);

    Units units() const { return units_; }
    double omega_khz() const { return omega_khz_; }

    bool has(const std::string& key) const;

    double number(const std::string& key, std::optional<double> def = {});
    std::int64_t integer(const std::string& key, std::optional<std::int64_t> def = {}, std::int64_t min = 0);
    bool boolean(const std::string& key, std::optional<bool> def = {});
    std::string choice(const std::string& key, std::initializer_list<const char*> choices,
                       std::optional<std::string> def = {});
    // Dimensionless quantity in [lo, hi].
    double fraction(const std::string& key, std::optional<double> def = {}, double lo = 0.0, double hi = 1.0);

    // Dimensioned scalars; defaults are given in normalized units.
    double frequency(const std::string& key, std::optional<double> def = {});
    double rate(const std::string& key, std::optional<double> def = {});
    double time(const std::string& key, std::optional<double> def = {});

    // A range is a number, an array of numbers, or {"min", "max", "n"}
    // (n evenly spaced points including both ends).
    struct Range {
        double min = 0.0;
        double max = 0.0;
        std::int64_t n = 1;
    };
    std::vector<double> values(const std::string& key, std::optional<Range> def = {}, double lo = -1e300,
                               double hi = 1e300);
    std::vector<double> rate_values(const std::string& key, std::optional<Range> def = {});
    std::vector<double> frequency_values(const std::string& key, std::optional<Range> def = {});
    std::vector<double> time_values(const std::string& key, std::optional<Range> def = {});

    // "seed" is mandatory for stochastic commands.
    std::uint64_t seed();

    // Keys that are read elsewhere (runtime flags) and never echoed.
    void ignore(const std::string& key);
    void finish() const;

    const nlohmann::json& effective() const { return effective_; }

private:
    const nlohmann::json* lookup(const std::string& key);
    std::vector<double> scaled_values(const std::string& key, std::optional<Range> def, double to_normalized,
                                      double lo);
    double scaled(const std::string& key, std::optional<double> def, double to_normalized, double lo);

    nlohmann::json doc_;
    nlohmann::json effective_ = nlohmann::json::object();
    std::set<std::string> used_;
    Units units_ = Units::Normalized;
    double omega_khz_ = 1.0;
};

// Time factor: omega * t for t in microseconds at omega / 2pi in kHz.
double physical_time_factor(double omega_khz);

// Parses "key=value"; the value is read as JSON when possible, otherwise
// kept as a string.
std::pair<std::string, nlohmann::json> parse_assignment(const std::string& s);

} // namespace lep::cli
