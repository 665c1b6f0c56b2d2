#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "hpfr/sim.hpp"

namespace hpfr {

/// Plain-text run configuration: one `key = value` per line, `#` starts a
/// comment, lists are comma-separated. Relative paths are resolved against the
/// directory of the config file. See docs/config.md for the key reference.
class RunConfig {
public:
    RunConfig() = default;

    static RunConfig parse(std::istream& in, const std::string& source = "<config>",
                           std::filesystem::path base_dir = {});
    static RunConfig load(const std::filesystem::path& path);

    void set(const std::string& key, const std::string& value);
    bool has(const std::string& key) const;
    const std::map<std::string, std::string>& entries() const { return values_; }

    std::string get(const std::string& key, const std::string& fallback = "") const;
    std::string require(const std::string& key) const;
    double get_double(const std::string& key, double fallback) const;
    int get_int(const std::string& key, int fallback) const;
    std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const;
    bool get_bool(const std::string& key, bool fallback) const;
    std::vector<std::string> get_list(const std::string& key) const;
    std::vector<double> get_doubles(const std::string& key, const std::vector<double>& fallback) const;
    std::filesystem::path get_path(const std::string& key) const;

private:
    std::map<std::string, std::string> values_;
    std::filesystem::path base_dir_;
};

ColumnRoles roles_from(const RunConfig& cfg);
/// basis.lo / basis.hi default to the data's time range.
BasisConfig basis_from(const RunConfig& cfg, const Dataset& ds);
/// `family` is a list of N, T, SL, CN. Degrees are estimated unless
/// nu_fixed / gamma_fixed say otherwise; nu / gamma give starting values.
std::vector<MixingFamily> families_from(const RunConfig& cfg);
FitConfig fit_config_from(const RunConfig& cfg);
PredictOptions predict_options_from(const RunConfig& cfg);
SchemeConfig scheme_config_from(const RunConfig& cfg);

} // namespace hpfr
