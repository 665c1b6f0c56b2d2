#include "hpfr/config.hpp"

#include <charconv>
#include <fstream>
#include <set>
#include <sstream>

#include "hpfr/error.hpp"

namespace hpfr {

namespace {

const std::set<std::string>& known_keys() {
    static const std::set<std::string> keys{
        "data", "out", "seed", "threads",
        "u", "v", "w", "x", "u_intercept", "v_intercept", "w_intercept",
        "basis.degree", "basis.interior_knots", "basis.lo", "basis.hi",
        "family", "nu", "gamma", "nu_fixed", "gamma_fixed",
        "fit.max_outer_iters", "fit.param_tol", "fit.loglik_tol", "fit.psi_optimizer_budget",
        "fit.nu_grid_points", "fit.cm_sweeps", "fit.information",
        "diagnostics.alpha", "diagnostics.refit",
        "predict.targets", "predict.grid", "predict.kind", "predict.include_noise", "predict.ncl",
        "predict.methods", "predict.pl1_draws", "predict.bts_J", "predict.bts_B", "predict.keep_draws",
        "sim.scheme", "sim.M", "sim.n", "sim.reps", "sim.families", "sim.random_terms", "sim.new_subject",
        "sim.ncl", "sim.methods", "sim.pl1_draws", "sim.bts_J", "sim.bts_B", "sim.interior_knots",
    };
    return keys;
}

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

template <class T>
T parse_value(const std::string& key, const std::string& v) {
    T out{};
    const auto* end = v.data() + v.size();
    const auto [p, ec] = std::from_chars(v.data(), end, out);
    if (ec != std::errc() || p != end) throw ConfigError("config key '" + key + "': cannot parse '" + v + "'");
    return out;
}

} // namespace

RunConfig RunConfig::parse(std::istream& in, const std::string& source, std::filesystem::path base_dir) {
    RunConfig cfg;
    cfg.base_dir_ = std::move(base_dir);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError(source + ":" + std::to_string(line_no) + ": expected 'key = value'");
        const std::string key = trim(line.substr(0, eq));
        if (!known_keys().count(key))
            throw ConfigError(source + ":" + std::to_string(line_no) + ": unknown key '" + key + "'");
        cfg.values_[key] = trim(line.substr(eq + 1));
    }
    return cfg;
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path.string());
    return parse(in, path.string(), path.parent_path());
}

void RunConfig::set(const std::string& key, const std::string& value) {
    if (!known_keys().count(key)) throw ConfigError("unknown config key '" + key + "'");
    values_[key] = value;
}

bool RunConfig::has(const std::string& key) const { return values_.count(key) > 0; }

std::string RunConfig::get(const std::string& key, const std::string& fallback) const {
    const auto it = values_.find(key);
    return it == values_.end() ? fallback : it->second;
}

std::string RunConfig::require(const std::string& key) const {
    const auto it = values_.find(key);
    if (it == values_.end() || it->second.empty()) throw ConfigError("missing config key '" + key + "'");
    return it->second;
}

double RunConfig::get_double(const std::string& key, double fallback) const {
    return has(key) ? parse_value<double>(key, get(key)) : fallback;
}

int RunConfig::get_int(const std::string& key, int fallback) const {
    return has(key) ? parse_value<int>(key, get(key)) : fallback;
}

std::uint64_t RunConfig::get_u64(const std::string& key, std::uint64_t fallback) const {
    return has(key) ? parse_value<std::uint64_t>(key, get(key)) : fallback;
}

bool RunConfig::get_bool(const std::string& key, bool fallback) const {
    if (!has(key)) return fallback;
    const std::string v = get(key);
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw ConfigError("config key '" + key + "': expected true/false, got '" + v + "'");
}

std::vector<std::string> RunConfig::get_list(const std::string& key) const {
    std::vector<std::string> out;
    std::stringstream ss(get(key));
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

std::vector<double> RunConfig::get_doubles(const std::string& key, const std::vector<double>& fallback) const {
    if (!has(key)) return fallback;
    std::vector<double> out;
    for (const auto& s : get_list(key)) out.push_back(parse_value<double>(key, s));
    return out;
}

std::filesystem::path RunConfig::get_path(const std::string& key) const {
    std::filesystem::path p = require(key);
    if (p.is_relative() && !base_dir_.empty()) p = base_dir_ / p;
    return p;
}

ColumnRoles roles_from(const RunConfig& cfg) {
    ColumnRoles r;
    r.u = cfg.get_list("u");
    r.v = cfg.get_list("v");
    r.w = cfg.get_list("w");
    r.x = cfg.get_list("x");
    r.u_intercept = cfg.get_bool("u_intercept", true);
    r.v_intercept = cfg.get_bool("v_intercept", false);
    r.w_intercept = cfg.get_bool("w_intercept", false);
    return r;
}

BasisConfig basis_from(const RunConfig& cfg, const Dataset& ds) {
    BasisConfig b;
    b.degree = cfg.get_int("basis.degree", 3);
    b.interior_knots = cfg.get_int("basis.interior_knots", 18);
    b.lo = cfg.get_double("basis.lo", ds.t_min());
    b.hi = cfg.get_double("basis.hi", ds.t_max());
    b.validate();
    return b;
}

std::vector<MixingFamily> families_from(const RunConfig& cfg) {
    std::vector<MixingFamily> out;
    const auto labels = cfg.has("family") ? cfg.get_list("family") : std::vector<std::string>{"N"};
    if (labels.empty()) throw ConfigError("config key 'family' is empty");
    const bool nu_fixed = cfg.get_bool("nu_fixed", false);
    const bool gamma_fixed = cfg.get_bool("gamma_fixed", false);
    for (const auto& l : labels) {
        MixingFamily f;
        f.kind = parse_family_kind(l);
        if (f.kind != FamilyKind::Gaussian) {
            f.nu = cfg.get_double("nu", 0.0);
            f.nu_fixed = nu_fixed;
            if (f.kind == FamilyKind::ContaminatedNormal) {
                f.gamma = cfg.get_double("gamma", 0.0);
                f.gamma_fixed = gamma_fixed;
            }
            f = with_default_start(f);
        }
        f.validate();
        out.push_back(f);
    }
    return out;
}

FitConfig fit_config_from(const RunConfig& cfg) {
    FitConfig f;
    f.max_outer_iters = cfg.get_int("fit.max_outer_iters", f.max_outer_iters);
    f.param_tol = cfg.get_double("fit.param_tol", f.param_tol);
    f.loglik_tol = cfg.get_double("fit.loglik_tol", f.loglik_tol);
    f.psi_optimizer_budget = cfg.get_int("fit.psi_optimizer_budget", f.psi_optimizer_budget);
    f.nu_grid_points = cfg.get_int("fit.nu_grid_points", f.nu_grid_points);
    f.cm_sweeps = cfg.get_int("fit.cm_sweeps", f.cm_sweeps);
    f.compute_information = cfg.get_bool("fit.information", true);
    f.seed = cfg.get_u64("seed", f.seed);
    f.validate();
    return f;
}

PredictOptions predict_options_from(const RunConfig& cfg) {
    PredictOptions p;
    p.ncl = cfg.get_doubles("predict.ncl", {80, 90, 95});
    for (double& c : p.ncl) c /= 100.0;
    if (cfg.has("predict.methods")) {
        p.methods.clear();
        for (const auto& m : cfg.get_list("predict.methods")) p.methods.push_back(parse_interval_method(m));
    }
    p.pl1_draws = cfg.get_int("predict.pl1_draws", p.pl1_draws);
    p.bts_J = cfg.get_int("predict.bts_J", p.bts_J);
    p.bts_B = cfg.get_int("predict.bts_B", p.bts_B);
    p.keep_draws = cfg.get_bool("predict.keep_draws", false);
    p.seed = cfg.get_u64("seed", p.seed);
    p.validate();
    return p;
}

SchemeConfig scheme_config_from(const RunConfig& cfg) {
    SchemeConfig s;
    s.scheme = parse_scheme(cfg.get("sim.scheme", "I"));
    s.M = cfg.get_int("sim.M", s.M);
    s.n = cfg.get_int("sim.n", s.n);
    s.reps = cfg.get_int("sim.reps", s.reps);
    s.seed = cfg.get_u64("seed", s.seed);
    const auto fams = cfg.has("sim.families") ? cfg.get_list("sim.families") : std::vector<std::string>{"N", "T"};
    for (const auto& f : fams) s.families.push_back(parse_fit_spec(f));
    s.ncl = cfg.get_doubles("sim.ncl", {80, 90, 95});
    for (double& c : s.ncl) c /= 100.0;
    if (cfg.has("sim.methods")) {
        s.methods.clear();
        for (const auto& m : cfg.get_list("sim.methods")) s.methods.push_back(parse_interval_method(m));
    }
    s.random_terms = cfg.get_bool("sim.random_terms", s.scheme != Scheme::VI);
    s.new_subject = cfg.get_bool("sim.new_subject", false);
    s.pl1_draws = cfg.get_int("sim.pl1_draws", s.pl1_draws);
    s.bts_J = cfg.get_int("sim.bts_J", s.bts_J);
    s.bts_B = cfg.get_int("sim.bts_B", s.bts_B);
    s.interior_knots = cfg.get_int("sim.interior_knots", s.interior_knots);
    s.fit = fit_config_from(cfg);
    s.threads = cfg.get_int("threads", 0);
    s.validate();
    return s;
}

} // namespace hpfr
