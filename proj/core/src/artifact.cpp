#include "hpfr/artifact.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "hpfr/error.hpp"

namespace hpfr {

namespace {

std::string num(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string join(const std::vector<std::string>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + v[i];
    return s.empty() ? "-" : s;
}

std::vector<std::string> split_names(const std::string& s) {
    std::vector<std::string> out;
    if (s == "-") return out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(item);
    return out;
}

void vec_line(std::ostream& out, const char* key, const Vector& v) {
    out << key << ' ' << v.size();
    for (Eigen::Index i = 0; i < v.size(); ++i) out << ' ' << num(v(i));
    out << '\n';
}

void mat_lines(std::ostream& out, const std::string& key, const Matrix& m) {
    out << key << ".size " << m.rows() << '\n';
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        out << key << ".row " << i;
        for (Eigen::Index j = 0; j < m.cols(); ++j) out << ' ' << num(m(i, j));
        out << '\n';
    }
}

class Records {
public:
    Records(std::istream& in, std::string source) : source_(std::move(source)) {
        std::string line;
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            std::istringstream ls(line);
            std::string key;
            ls >> key;
            std::vector<std::string> toks;
            std::string t;
            while (ls >> t) toks.push_back(t);
            if (key == "config") {
                const auto sp = line.find(' ', 7);
                config[toks.empty() ? "" : toks[0]] = sp == std::string::npos ? "" : line.substr(sp + 1);
                continue;
            }
            if (key == "information.row" || key == "covariance.row") {
                rows_[key].push_back(toks);
                continue;
            }
            map_[key] = toks;
        }
    }

    const std::vector<std::string>& at(const std::string& key) const {
        const auto it = map_.find(key);
        if (it == map_.end() || it->second.empty())
            throw SchemaError(source_ + ": artifact is missing '" + key + "'");
        return it->second;
    }
    bool has(const std::string& key) const { return map_.count(key) > 0; }
    std::string str(const std::string& key) const { return at(key)[0]; }
    double real(const std::string& key, std::size_t i = 0) const { return parse(at(key).at(i), key); }
    long integer(const std::string& key) const { return static_cast<long>(real(key)); }

    Vector vec(const std::string& key) const {
        const auto& t = at(key);
        const auto n = static_cast<std::size_t>(parse(t[0], key));
        if (t.size() != n + 1) throw SchemaError(source_ + ": '" + key + "' has the wrong number of values");
        Vector v(static_cast<Eigen::Index>(n));
        for (std::size_t i = 0; i < n; ++i) v(static_cast<Eigen::Index>(i)) = parse(t[i + 1], key);
        return v;
    }

    Matrix mat(const std::string& key) const {
        const auto n = static_cast<Eigen::Index>(integer(key + ".size"));
        Matrix m = Matrix::Zero(n, n);
        const auto it = rows_.find(key + ".row");
        const std::size_t have = it == rows_.end() ? 0 : it->second.size();
        if (have != static_cast<std::size_t>(n)) throw SchemaError(source_ + ": '" + key + "' rows incomplete");
        if (n == 0) return m;
        for (const auto& r : it->second) {
            if (r.size() != static_cast<std::size_t>(n) + 1)
                throw SchemaError(source_ + ": '" + key + "' row has the wrong width");
            const auto i = static_cast<Eigen::Index>(parse(r[0], key));
            if (i < 0 || i >= n) throw SchemaError(source_ + ": '" + key + "' row index out of range");
            for (Eigen::Index j = 0; j < n; ++j) m(i, j) = parse(r[static_cast<std::size_t>(j) + 1], key);
        }
        return m;
    }

    std::map<std::string, std::string> config;

private:
    double parse(const std::string& s, const std::string& key) const {
        double v = 0.0;
        const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
        if (ec != std::errc() || p != s.data() + s.size())
            throw SchemaError(source_ + ": bad number '" + s + "' for '" + key + "'");
        return v;
    }

    std::string source_;
    std::map<std::string, std::vector<std::string>> map_;
    std::map<std::string, std::vector<std::vector<std::string>>> rows_;
};

} // namespace

ParamLayout FitArtifact::layout() const {
    return ParamLayout(theta.beta.size(), theta.cov, psi_free, theta.family);
}

FitArtifact make_artifact(const FitResult& fit, const ColumnRoles& roles,
                          const std::map<std::string, std::string>& config) {
    FitArtifact a;
    a.roles = roles;
    a.basis = fit.basis;
    a.theta = fit.theta_hat;
    a.psi_free = fit.info.layout.psi_free();
    a.info = fit.info;
    a.loglik = fit.loglik;
    a.bic = fit.bic;
    a.converged = fit.converged;
    a.iterations = fit.iterations;
    a.config = config;
    return a;
}

void write_artifact(std::ostream& out, const FitArtifact& a) {
    out << "hpfr-fit-artifact " << kArtifactVersion << '\n';
    out << "roles.u " << join(a.roles.u) << '\n';
    out << "roles.v " << join(a.roles.v) << '\n';
    out << "roles.w " << join(a.roles.w) << '\n';
    out << "roles.x " << join(a.roles.x) << '\n';
    out << "roles.intercepts " << a.roles.u_intercept << ' ' << a.roles.v_intercept << ' ' << a.roles.w_intercept
        << '\n';
    out << "basis " << a.basis.degree << ' ' << a.basis.interior_knots << ' ' << num(a.basis.lo) << ' '
        << num(a.basis.hi) << '\n';
    const MixingFamily& f = a.theta.family;
    out << "family " << to_string(f.kind) << ' ' << num(f.nu) << ' ' << num(f.gamma) << ' ' << f.nu_fixed << ' '
        << f.gamma_fixed << '\n';
    vec_line(out, "beta", a.theta.beta);
    out << "v0 " << num(a.theta.cov.theta.v0) << '\n';
    vec_line(out, "w", a.theta.cov.theta.w);
    vec_line(out, "phi_b", a.theta.cov.phi_b);
    out << "phi_eps " << num(a.theta.cov.phi_eps) << '\n';
    out << "psi_free " << a.psi_free.size();
    for (bool b : a.psi_free) out << ' ' << (b ? 1 : 0);
    out << '\n';
    out << "loglik " << num(a.loglik) << '\n';
    out << "bic " << num(a.bic) << '\n';
    out << "converged " << a.converged << '\n';
    out << "iterations " << a.iterations << '\n';
    out << "pd_projected " << a.info.pd_projected << '\n';
    mat_lines(out, "information", a.info.J);
    mat_lines(out, "covariance", a.info.covariance);
    for (const auto& [k, v] : a.config) out << "config " << k << ' ' << v << '\n';
    out << "end\n";
}

FitArtifact read_artifact(std::istream& in, const std::string& source) {
    std::string magic;
    int version = 0;
    if (!(in >> magic >> version) || magic != "hpfr-fit-artifact")
        throw SchemaError(source + ": not an hpfr fit artifact");
    if (version != kArtifactVersion)
        throw SchemaError(source + ": artifact version " + std::to_string(version) + " is not supported (expected " +
                          std::to_string(kArtifactVersion) + ")");
    const Records r(in, source);
    if (!r.has("end")) throw SchemaError(source + ": truncated artifact");

    FitArtifact a;
    a.roles.u = split_names(r.str("roles.u"));
    a.roles.v = split_names(r.str("roles.v"));
    a.roles.w = split_names(r.str("roles.w"));
    a.roles.x = split_names(r.str("roles.x"));
    a.roles.u_intercept = r.real("roles.intercepts", 0) != 0.0;
    a.roles.v_intercept = r.real("roles.intercepts", 1) != 0.0;
    a.roles.w_intercept = r.real("roles.intercepts", 2) != 0.0;
    a.basis.degree = static_cast<int>(r.real("basis", 0));
    a.basis.interior_knots = static_cast<int>(r.real("basis", 1));
    a.basis.lo = r.real("basis", 2);
    a.basis.hi = r.real("basis", 3);
    a.basis.validate();

    MixingFamily& f = a.theta.family;
    f.kind = parse_family_kind(r.str("family"));
    f.nu = r.real("family", 1);
    f.gamma = r.real("family", 2);
    f.nu_fixed = r.real("family", 3) != 0.0;
    f.gamma_fixed = r.real("family", 4) != 0.0;
    a.theta.beta = r.vec("beta");
    a.theta.cov.theta.v0 = r.real("v0");
    a.theta.cov.theta.w = r.vec("w");
    a.theta.cov.phi_b = r.vec("phi_b");
    a.theta.cov.phi_eps = r.real("phi_eps");
    const Vector pf = r.vec("psi_free");
    for (Eigen::Index i = 0; i < pf.size(); ++i) a.psi_free.push_back(pf(i) != 0.0);
    if (static_cast<Eigen::Index>(a.psi_free.size()) != a.theta.cov.component_count())
        throw SchemaError(source + ": psi_free does not match the covariance components");
    a.theta.validate();

    a.loglik = r.real("loglik");
    a.bic = r.real("bic");
    a.converged = r.real("converged") != 0.0;
    a.iterations = static_cast<int>(r.integer("iterations"));
    a.info.layout = a.layout();
    a.info.pd_projected = r.real("pd_projected") != 0.0;
    a.info.J = r.mat("information");
    a.info.covariance = r.mat("covariance");
    // Size 0: the fit ran without the observed information (no BTS intervals).
    if (a.info.covariance.rows() != 0 && a.info.covariance.rows() != a.info.layout.size())
        throw SchemaError(source + ": information matrix does not match the parameter layout");
    a.config = r.config;
    return a;
}

void save_artifact(const std::filesystem::path& path, const FitArtifact& a) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path.string());
    write_artifact(out, a);
    if (!out) throw Error("write failed: " + path.string());
}

FitArtifact load_artifact(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open fit artifact " + path.string());
    return read_artifact(in, path.string());
}

} // namespace hpfr
