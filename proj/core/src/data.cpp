#include "hpfr/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <unordered_map>

#include "hpfr/error.hpp"

namespace hpfr {

namespace {

std::string trim(const std::string& s) {
    auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    cur.push_back('"');
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                cur.push_back(c);
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            out.push_back(trim(cur));
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    out.push_back(trim(cur));
    return out;
}

double parse_number(const std::string& cell, const std::string& column, std::size_t line) {
    double value = 0.0;
    const char* first = cell.data();
    const char* last = cell.data() + cell.size();
    if (!cell.empty() && *first == '+') ++first;
    auto [ptr, ec] = std::from_chars(first, last, value);
    if (cell.empty() || ec != std::errc() || ptr != last || !std::isfinite(value)) {
        std::ostringstream os;
        os << "line " << line << ": column '" << column << "' holds non-numeric or non-finite value '" << cell << "'";
        throw ParseError(os.str(), line);
    }
    return value;
}

bool all_finite(const Matrix& m) { return m.allFinite(); }

} // namespace

void validate_subject(const Subject& s, bool allow_empty) {
    const Eigen::Index n = s.t.size();
    const std::string who = "subject '" + s.id + "': ";
    if (n == 0 && !allow_empty) throw DataError(who + "no observations");
    if (s.y.size() != n || s.V.rows() != n || s.W.rows() != n || s.X.rows() != n)
        throw DataError(who + "row counts differ between t, y, V, W, X");
    for (Eigen::Index i = 1; i < n; ++i)
        if (!(s.t(i) > s.t(i - 1))) throw DataError(who + "times are not strictly increasing");
    if (!s.t.allFinite() || !s.y.allFinite() || !s.u.allFinite() || !all_finite(s.V) || !all_finite(s.W) ||
        !all_finite(s.X))
        throw DataError(who + "non-finite value");
}

Dataset::Dataset(std::vector<Subject> subjects, ColumnRoles roles)
    : subjects_(std::move(subjects)), roles_(std::move(roles)) {
    if (subjects_.empty()) throw DataError("dataset has no subjects");
    const Subject& first = subjects_.front();
    p_u_ = static_cast<int>(first.u.size());
    p_v_ = static_cast<int>(first.V.cols());
    p_w_ = static_cast<int>(first.W.cols());
    p_x_ = static_cast<int>(first.X.cols());
    std::set<std::string> ids;
    for (const auto& s : subjects_) {
        validate_subject(s);
        if (s.u.size() != p_u_ || s.V.cols() != p_v_ || s.W.cols() != p_w_ || s.X.cols() != p_x_)
            throw DataError("subject '" + s.id + "': covariate dimensions differ from the first subject");
        if (!ids.insert(s.id).second) throw DataError("duplicate subject id '" + s.id + "'");
    }
}

Eigen::Index Dataset::total_observations() const {
    Eigen::Index n = 0;
    for (const auto& s : subjects_) n += s.size();
    return n;
}

double Dataset::t_min() const {
    double v = std::numeric_limits<double>::infinity();
    for (const auto& s : subjects_) v = std::min(v, s.t.minCoeff());
    return v;
}

double Dataset::t_max() const {
    double v = -std::numeric_limits<double>::infinity();
    for (const auto& s : subjects_) v = std::max(v, s.t.maxCoeff());
    return v;
}

Dataset parse_dataset(std::istream& in, const ColumnRoles& roles, const std::string& source, bool response_required) {
    std::string line;
    if (!std::getline(in, line)) throw SchemaError(source + ": empty file, header row required");
    if (line.size() >= 3 && static_cast<unsigned char>(line[0]) == 0xEF) line = line.substr(3);  // UTF-8 BOM
    const auto header = split_csv_line(line);
    std::unordered_map<std::string, std::size_t> col;
    for (std::size_t i = 0; i < header.size(); ++i) col[header[i]] = i;

    auto require = [&](const std::string& name) {
        auto it = col.find(name);
        if (it == col.end()) throw SchemaError(source + ": missing column '" + name + "'");
        return it->second;
    };
    const std::size_t id_col = require("id");
    const std::size_t t_col = require("t");
    const bool has_y = response_required || col.count("y") > 0;
    const std::size_t y_col = has_y ? require("y") : 0;
    auto resolve = [&](const std::vector<std::string>& names) {
        std::vector<std::size_t> idx;
        for (const auto& nm : names) idx.push_back(require(nm));
        return idx;
    };
    const auto u_idx = resolve(roles.u);
    const auto v_idx = resolve(roles.v);
    const auto w_idx = resolve(roles.w);
    const auto x_idx = resolve(roles.x);

    struct Row {
        double t, y;
        std::vector<double> u, v, w, x;
        std::size_t line;
    };
    std::vector<std::string> order;
    std::map<std::string, std::vector<Row>> groups;

    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        const auto cells = split_csv_line(line);
        if (cells.size() != header.size()) {
            std::ostringstream os;
            os << source << ": line " << line_no << " has " << cells.size() << " cells, header has " << header.size();
            throw ParseError(os.str(), line_no);
        }
        Row r;
        r.line = line_no;
        r.t = parse_number(cells[t_col], "t", line_no);
        r.y = has_y ? parse_number(cells[y_col], "y", line_no) : 0.0;
        auto take = [&](const std::vector<std::size_t>& idx, std::vector<double>& dst) {
            for (auto i : idx) dst.push_back(parse_number(cells[i], header[i], line_no));
        };
        take(u_idx, r.u);
        take(v_idx, r.v);
        take(w_idx, r.w);
        take(x_idx, r.x);
        const std::string& id = cells[id_col];
        if (id.empty()) throw ParseError(source + ": empty id on line " + std::to_string(line_no), line_no);
        auto [it, inserted] = groups.try_emplace(id);
        if (inserted) order.push_back(id);
        it->second.push_back(std::move(r));
    }
    if (order.empty()) throw DataError(source + ": no data rows");

    std::vector<Subject> subjects;
    subjects.reserve(order.size());
    for (const auto& id : order) {
        auto& rows = groups[id];
        std::stable_sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) { return a.t < b.t; });
        for (std::size_t i = 1; i < rows.size(); ++i) {
            if (rows[i].t == rows[i - 1].t) {
                std::ostringstream os;
                os << source << ": duplicate (id, t) = (" << id << ", " << rows[i].t << ") on lines " << rows[i - 1].line
                   << " and " << rows[i].line;
                throw DataError(os.str());
            }
        }
        const auto n = static_cast<Eigen::Index>(rows.size());
        Subject s;
        s.id = id;
        s.t.resize(n);
        s.y.resize(n);
        s.V.resize(n, roles.p_v());
        s.W.resize(n, roles.p_w());
        s.X.resize(n, roles.p_x());
        s.u.resize(roles.p_u());
        const int u0 = roles.u_intercept ? 1 : 0;
        const int v0 = roles.v_intercept ? 1 : 0;
        const int w0 = roles.w_intercept ? 1 : 0;
        if (u0) s.u(0) = 1.0;
        for (std::size_t k = 0; k < roles.u.size(); ++k) s.u(u0 + static_cast<Eigen::Index>(k)) = rows[0].u[k];
        for (Eigen::Index i = 0; i < n; ++i) {
            const Row& r = rows[static_cast<std::size_t>(i)];
            s.t(i) = r.t;
            s.y(i) = r.y;
            if (v0) s.V(i, 0) = 1.0;
            if (w0) s.W(i, 0) = 1.0;
            for (std::size_t k = 0; k < r.v.size(); ++k) s.V(i, v0 + static_cast<Eigen::Index>(k)) = r.v[k];
            for (std::size_t k = 0; k < r.w.size(); ++k) s.W(i, w0 + static_cast<Eigen::Index>(k)) = r.w[k];
            for (std::size_t k = 0; k < r.x.size(); ++k) s.X(i, static_cast<Eigen::Index>(k)) = r.x[k];
            for (std::size_t k = 0; k < r.u.size(); ++k) {
                if (r.u[k] != rows[0].u[k])
                    throw DataError(source + ": u column '" + roles.u[k] + "' is not constant within subject '" + id +
                                    "' (line " + std::to_string(r.line) + ")");
            }
        }
        subjects.push_back(std::move(s));
    }
    return Dataset(std::move(subjects), roles);
}

Dataset load_dataset(const std::filesystem::path& path, const ColumnRoles& roles, bool response_required) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open data file '" + path.string() + "'");
    return parse_dataset(in, roles, path.string(), response_required);
}

void write_dataset(std::ostream& out, const Dataset& ds) {
    const ColumnRoles& roles = ds.roles();
    // Each named column once, with the block and column it is read back from.
    struct Source {
        std::string name;
        char block;
        Eigen::Index col;
    };
    std::vector<Source> cols;
    std::set<std::string> seen{"id", "t", "y"};
    auto add = [&](const std::vector<std::string>& names, char block, int offset) {
        for (std::size_t k = 0; k < names.size(); ++k)
            if (seen.insert(names[k]).second) cols.push_back({names[k], block, offset + static_cast<Eigen::Index>(k)});
    };
    add(roles.u, 'u', roles.u_intercept ? 1 : 0);
    add(roles.v, 'v', roles.v_intercept ? 1 : 0);
    add(roles.w, 'w', roles.w_intercept ? 1 : 0);
    add(roles.x, 'x', 0);

    out << "id,t,y";
    for (const auto& c : cols) out << ',' << c.name;
    out << '\n';
    out << std::setprecision(std::numeric_limits<double>::max_digits10);
    for (const auto& s : ds.subjects()) {
        for (Eigen::Index i = 0; i < s.size(); ++i) {
            out << s.id << ',' << s.t(i) << ',' << s.y(i);
            for (const auto& c : cols) {
                double v = 0.0;
                switch (c.block) {
                case 'u': v = s.u(c.col); break;
                case 'v': v = s.V(i, c.col); break;
                case 'w': v = s.W(i, c.col); break;
                default: v = s.X(i, c.col); break;
                }
                out << ',' << v;
            }
            out << '\n';
        }
    }
}

void write_dataset(const std::filesystem::path& path, const Dataset& ds) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write '" + path.string() + "'");
    write_dataset(out, ds);
}

Matrix design_rows(const BSplineBasis& basis, const Vector& u, const Vector& t, const Matrix& V) {
    const Eigen::Index n = t.size();
    const Eigen::Index D = basis.size();
    const Eigen::Index p_u = u.size();
    if (V.rows() != n) throw DimensionError("design_rows: V row count differs from t");
    Matrix A(n, D * p_u + V.cols());
    if (p_u > 0 && n > 0) {
        const Matrix phi = basis.evaluate(t);
        for (Eigen::Index j = 0; j < p_u; ++j) A.middleCols(j * D, D) = u(j) * phi;
    }
    if (V.cols() > 0) A.rightCols(V.cols()) = V;
    return A;
}

DesignMatrices assemble_design(const Dataset& ds, const BSplineBasis& basis) {
    DesignMatrices dm;
    dm.basis_size = basis.size();
    dm.p_u = ds.p_u();
    dm.p_v = ds.p_v();
    const Eigen::Index q = dm.columns();
    Matrix gram = Matrix::Zero(q, q);
    for (const auto& s : ds.subjects()) {
        Matrix phi = dm.p_u > 0 ? basis.evaluate(s.t) : Matrix(s.size(), 0);
        Matrix A(s.size(), q);
        for (Eigen::Index j = 0; j < dm.p_u; ++j) A.middleCols(j * dm.basis_size, dm.basis_size) = s.u(j) * phi;
        if (dm.p_v > 0) A.rightCols(dm.p_v) = s.V;
        gram.noalias() += A.transpose() * A;
        dm.A.push_back(std::move(A));
        dm.Phi.push_back(std::move(phi));
    }
    if (q > 0) {
        Eigen::SelfAdjointEigenSolver<Matrix> es(gram, Eigen::EigenvaluesOnly);
        const double lmax = es.eigenvalues().maxCoeff();
        dm.rank_deficient = !(es.eigenvalues().minCoeff() > 1e-12 * std::max(lmax, 1e-300));
    }
    return dm;
}

DesignMatrices assemble_design(const Dataset& ds, const BasisConfig& cfg) {
    return assemble_design(ds, BSplineBasis(cfg));
}

Vector mean_from_blocks(const Matrix& Phi, const Matrix& B, const Vector& u, const Matrix& V, const Vector& gamma) {
    Vector mu = Vector::Zero(Phi.rows() > 0 ? Phi.rows() : V.rows());
    if (B.size() > 0) mu += Phi * (B * u);
    if (gamma.size() > 0) mu += V * gamma;
    return mu;
}

BasisConfig basis_for(const Dataset& ds, int degree, int interior_knots) {
    BasisConfig cfg;
    cfg.degree = degree;
    cfg.interior_knots = interior_knots;
    cfg.lo = ds.t_min();
    cfg.hi = ds.t_max();
    if (!(cfg.hi > cfg.lo)) cfg.hi = cfg.lo + 1.0;
    return cfg;
}

} // namespace hpfr
