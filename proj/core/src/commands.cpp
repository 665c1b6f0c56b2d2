#include "hpfr/commands.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <set>
#include <sstream>

#include <boost/math/distributions/chi_squared.hpp>

#include "hpfr/error.hpp"

namespace hpfr {

namespace fs = std::filesystem;

namespace {

std::string num(double v, const char* f = "%.10g") {
    char buf[48];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

std::ofstream open_out(const fs::path& p) {
    std::ofstream out(p);
    if (!out) throw Error("cannot write " + p.string());
    return out;
}

fs::path output_dir(const RunConfig& cfg) {
    const fs::path dir = cfg.has("out") ? cfg.get_path("out") : fs::path("hpfr-out");
    fs::create_directories(dir);
    return dir;
}

/// Names of the beta entries: B[k,u] for the functional part, gamma[v] for V.
std::vector<std::string> beta_names(const ColumnRoles& roles, int D) {
    std::vector<std::string> u, v, out;
    if (roles.u_intercept) u.push_back("(intercept)");
    u.insert(u.end(), roles.u.begin(), roles.u.end());
    if (roles.v_intercept) v.push_back("(intercept)");
    v.insert(v.end(), roles.v.begin(), roles.v.end());
    for (const auto& un : u)
        for (int k = 0; k < D; ++k) out.push_back("B[" + std::to_string(k) + "," + un + "]");
    for (const auto& vn : v) out.push_back("gamma[" + vn + "]");
    return out;
}

struct NamedValue {
    std::string name;
    double estimate;
    double se;  // NaN when not estimated
};

std::vector<NamedValue> natural_parameters(const FitResult& fr, const ColumnRoles& roles, int D) {
    const ModelParams& th = fr.theta_hat;
    const ParamLayout& lay = fr.info.layout;
    Vector se = Vector::Constant(lay.size(), std::nan(""));
    if (fr.info.covariance.rows() == lay.size()) se = standard_errors(fr.info, th);

    std::vector<NamedValue> out;
    const auto bn = beta_names(roles, D);
    for (Eigen::Index i = 0; i < th.beta.size(); ++i)
        out.push_back({bn[static_cast<std::size_t>(i)], th.beta(i), se(i)});

    std::vector<std::string> cn{"v0"};
    for (const auto& x : roles.x) cn.push_back("w[" + x + "]");
    std::vector<std::string> wn;
    if (roles.w_intercept) wn.push_back("(intercept)");
    wn.insert(wn.end(), roles.w.begin(), roles.w.end());
    for (const auto& w : wn) cn.push_back("phi_b[" + w + "]");
    cn.push_back("phi_eps");
    const Vector comps = th.cov.components();
    for (Eigen::Index c = 0; c < comps.size(); ++c) {
        double s = std::nan("");
        const auto& idx = lay.psi_index();
        const auto it = std::find(idx.begin(), idx.end(), static_cast<int>(c));
        if (it != idx.end()) s = se(lay.psi_offset() + (it - idx.begin()));
        out.push_back({cn[static_cast<std::size_t>(c)], comps(c), s});
    }
    Eigen::Index off = lay.family_offset();
    if (th.family.kind != FamilyKind::Gaussian) out.push_back({"nu", th.family.nu, lay.nu_free() ? se(off++) : std::nan("")});
    if (th.family.kind == FamilyKind::ContaminatedNormal)
        out.push_back({"gamma", th.family.gamma, lay.gamma_free() ? se(off) : std::nan("")});
    return out;
}

/// RMSE of y against the fitted subject curves mu-hat + tau-hat.
double fitted_rmse(const ModelData& md, const ModelParams& th) {
    double ss = 0.0;
    for (std::size_t m = 0; m < md.size(); ++m) {
        const Subject& s = md.data()[m];
        const Vector tau = conditional_mean(target_at_observed(s, TargetKind::RandomTerm, false), md.basis(), th);
        ss += (s.y - md.design().A[m] * th.beta - tau).squaredNorm();
    }
    return std::sqrt(ss / static_cast<double>(md.data().total_observations()));
}

std::vector<bool> chi_square_outliers(const ModelData& md, const FitResult& fr, double alpha,
                                      std::vector<double>* cutoffs) {
    std::vector<bool> flag(md.size());
    if (cutoffs) cutoffs->resize(md.size());
    for (std::size_t m = 0; m < md.size(); ++m) {
        const boost::math::chi_squared chi(static_cast<double>(md.data()[m].size()));
        const double c = boost::math::quantile(chi, 1.0 - alpha);
        if (cutoffs) (*cutoffs)[m] = c;
        flag[m] = fr.mahalanobis[m] > c;
    }
    return flag;
}

std::string degree_cell(const MixingFamily& f) {
    switch (f.kind) {
    case FamilyKind::Gaussian: return "/";
    case FamilyKind::ContaminatedNormal: return "nu=" + num(f.nu, "%.3f") + ";gamma=" + num(f.gamma, "%.3f");
    default: return "nu=" + num(f.nu, "%.3f");
    }
}

void write_fit_files(const fs::path& dir, const std::string& label, const ModelData& md, const FitResult& fr,
                     const ColumnRoles& roles, const RunConfig& cfg, double alpha) {
    save_artifact(dir / ("fit_" + label + ".hpfr"), make_artifact(fr, roles, cfg.entries()));

    auto params = open_out(dir / ("params_" + label + ".csv"));
    params << "name,estimate,se\n";
    for (const auto& p : natural_parameters(fr, roles, md.basis().size()))
        params << p.name << ',' << num(p.estimate) << ',' << (std::isnan(p.se) ? "" : num(p.se)) << '\n';
    params << "loglik," << num(fr.loglik) << ",\n";
    params << "bic," << num(fr.bic) << ",\n";
    params << "free_parameters," << fr.free_parameters << ",\n";

    std::vector<double> cut;
    const auto flags = chi_square_outliers(md, fr, alpha, &cut);
    auto subj = open_out(dir / ("subjects_" + label + ".csv"));
    subj << "id,n,mahalanobis,weight,chi2_cutoff,outlier\n";
    for (std::size_t m = 0; m < md.size(); ++m)
        subj << md.data()[m].id << ',' << md.data()[m].size() << ',' << num(fr.mahalanobis[m]) << ','
             << num(fr.weights[m]) << ',' << num(cut[m]) << ',' << (flags[m] ? 1 : 0) << '\n';

    auto trace = open_out(dir / ("trace_" + label + ".csv"));
    trace << "iteration,loglik\n";
    for (std::size_t i = 0; i < fr.loglik_trace.size(); ++i) trace << i << ',' << num(fr.loglik_trace[i], "%.17g") << '\n';
}

std::vector<Subject> subset(const Dataset& ds, const std::vector<bool>& drop) {
    std::vector<Subject> keep;
    for (std::size_t m = 0; m < ds.size(); ++m)
        if (!drop[m]) keep.push_back(ds[m]);
    return keep;
}

double interp_column(const Vector& t, const Matrix& M, Eigen::Index col, double at) {
    const Eigen::Index n = t.size();
    if (at <= t(0)) return M(0, col);
    if (at >= t(n - 1)) return M(n - 1, col);
    const auto it = std::upper_bound(t.data(), t.data() + n, at);
    const Eigen::Index hi = it - t.data();
    const Eigen::Index lo = hi - 1;
    const double a = (at - t(lo)) / (t(hi) - t(lo));
    return (1.0 - a) * M(lo, col) + a * M(hi, col);
}

Matrix grid_block(const Subject& s, const Matrix& M, const std::vector<std::string>& names, bool intercept,
                  const Vector& grid) {
    Matrix out(grid.size(), M.cols());
    for (Eigen::Index j = 0; j < M.cols(); ++j) {
        const Eigen::Index named = j - (intercept ? 1 : 0);
        const bool is_time = named >= 0 && names[static_cast<std::size_t>(named)] == "t";
        for (Eigen::Index i = 0; i < grid.size(); ++i)
            out(i, j) = is_time ? grid(i) : (s.size() > 0 ? interp_column(s.t, M, j, grid(i)) : 0.0);
    }
    return out;
}

} // namespace

int cmd_fit(const RunConfig& cfg, std::ostream& log) {
    const ColumnRoles roles = roles_from(cfg);
    const Dataset ds = load_dataset(cfg.get_path("data"), roles);
    const BasisConfig basis = basis_from(cfg, ds);
    const auto families = families_from(cfg);
    const FitConfig fc = fit_config_from(cfg);
    const double alpha = cfg.get_double("diagnostics.alpha", 0.01);
    const bool refit = cfg.get_bool("diagnostics.refit", true);
    const fs::path dir = output_dir(cfg);
    const ModelData md(ds, basis);
    log << "data: " << ds.size() << " subjects, " << ds.total_observations() << " observations; basis D = "
        << basis.size() << ", beta size " << md.beta_size() << '\n';

    // Outlier screen under the Gaussian model, as in the usual diagnostic
    // workflow; the change ratios compare fits with and without them.
    FitConfig diag_cfg = fc;
    diag_cfg.compute_information = false;
    std::vector<bool> outliers(ds.size(), false);
    {
        const FitResult gauss = fit(md, MixingFamily::gaussian(), diag_cfg);
        outliers = chi_square_outliers(md, gauss, alpha, nullptr);
    }
    const auto n_out = std::count(outliers.begin(), outliers.end(), true);
    log << "chi-square screen (alpha = " << alpha << ") under N: " << n_out << " potential outlier subject(s)";
    for (std::size_t m = 0; m < ds.size(); ++m)
        if (outliers[m]) log << ' ' << ds[m].id;
    log << '\n';
    const bool do_refit = refit && n_out > 0 && static_cast<std::size_t>(n_out) < ds.size();

    struct Row {
        std::string label;
        FitResult fr;
        double rmse;
        Vector beta_drop;
    };
    std::vector<Row> rows;
    bool all_converged = true;
    std::set<std::string> used;
    for (const auto& fam : families) {
        std::string label = fam.label();
        while (used.count(label)) label += "'";
        used.insert(label);
        log << "fitting " << label << " ..." << std::flush;
        FitResult fr = fit(md, fam, fc);
        log << (fr.converged ? " converged" : " NOT converged") << " after " << fr.iterations
            << " cycles, loglik " << num(fr.loglik, "%.4f") << ", BIC " << num(fr.bic, "%.2f") << '\n';
        for (const auto& w : fr.warnings) log << "  warning: " << w << '\n';
        all_converged = all_converged && fr.converged;
        write_fit_files(dir, label, md, fr, roles, cfg, alpha);
        Row r{label, fr, fitted_rmse(md, fr.theta_hat), Vector()};
        if (do_refit) {
            FitConfig rc = fc;
            rc.compute_information = false;
            const ModelData reduced(Dataset(subset(ds, outliers), roles), basis);
            r.beta_drop = fit(reduced, fam, rc).theta_hat.beta;
        }
        rows.push_back(std::move(r));
    }

    // Comparison table: fixed-effect coefficients (gamma) when the
    // model has V columns, otherwise none beyond the summary columns.
    const auto names = beta_names(roles, basis.size());
    const Eigen::Index first = md.beta_size() - ds.p_v();
    auto txt = open_out(dir / "report.txt");
    auto csv = open_out(dir / "report.csv");
    csv << "model,degree,bic,loglik,rmse,coefficient,estimate,se,change_pct\n";
    txt << "Model comparison (" << ds.size() << " subjects, " << ds.total_observations() << " observations)\n";
    txt << "Coefficient cells: estimate/se/change% after removing " << n_out << " chi-square outlier subject(s)\n\n";
    char line[256];
    std::snprintf(line, sizeof line, "%-6s %-26s %10s %8s", "Model", "Degree", "BIC", "RMSE");
    txt << line;
    for (Eigen::Index i = first; i < md.beta_size(); ++i) {
        std::snprintf(line, sizeof line, "  %-26s", names[static_cast<std::size_t>(i)].c_str());
        txt << line;
    }
    txt << '\n';
    for (const auto& r : rows) {
        const auto nat = natural_parameters(r.fr, roles, basis.size());
        std::snprintf(line, sizeof line, "%-6s %-26s %10.1f %8.3f", r.label.c_str(),
                      degree_cell(r.fr.theta_hat.family).c_str(), r.fr.bic, r.rmse);
        txt << line;
        for (Eigen::Index i = first; i < md.beta_size(); ++i) {
            const double est = r.fr.theta_hat.beta(i);
            const double se = nat[static_cast<std::size_t>(i)].se;
            const double change =
                r.beta_drop.size() > 0 && est != 0.0 ? 100.0 * (r.beta_drop(i) - est) / std::abs(est) : std::nan("");
            std::string cell = num(est, "%.3f") + "/" + (std::isnan(se) ? "-" : num(se, "%.3f")) + "/" +
                               (std::isnan(change) ? "-" : num(change, "%.1f"));
            std::snprintf(line, sizeof line, "  %-26s", cell.c_str());
            txt << line;
            csv << r.label << ',' << degree_cell(r.fr.theta_hat.family) << ',' << num(r.fr.bic) << ','
                << num(r.fr.loglik) << ',' << num(r.rmse) << ',' << names[static_cast<std::size_t>(i)] << ','
                << num(est) << ',' << (std::isnan(se) ? "" : num(se)) << ','
                << (std::isnan(change) ? "" : num(change)) << '\n';
        }
        if (first == md.beta_size())
            csv << r.label << ',' << degree_cell(r.fr.theta_hat.family) << ',' << num(r.fr.bic) << ','
                << num(r.fr.loglik) << ',' << num(r.rmse) << ",,,,\n";
        txt << '\n';
    }
    std::vector<const Row*> order;
    for (const auto& r : rows) order.push_back(&r);
    std::stable_sort(order.begin(), order.end(), [](const Row* a, const Row* b) { return a->fr.bic < b->fr.bic; });
    txt << "\nBIC ranking:";
    for (const Row* r : order) txt << ' ' << r->label;
    txt << '\n';
    log << "wrote " << (dir / "report.txt").string() << '\n';
    return all_converged ? kExitOk : kExitNotConverged;
}

std::vector<PredictionTarget> targets_from(const RunConfig& cfg, const Dataset& data, const FitArtifact& fit) {
    const std::string kind_s = cfg.get("predict.kind", "response");
    TargetKind kind;
    if (kind_s == "response")
        kind = TargetKind::Response;
    else if (kind_s == "random_term")
        kind = TargetKind::RandomTerm;
    else
        throw ConfigError("predict.kind must be 'response' or 'random_term'");
    const bool noise = cfg.get_bool("predict.include_noise", kind == TargetKind::Response);

    auto observed_for = [&](const std::string& id, const Vector& u, const Dataset& schema) {
        for (const auto& s : data.subjects())
            if (s.id == id) return s;
        Subject s;
        s.id = id;
        s.u = u;
        s.t = Vector(0);
        s.y = Vector(0);
        s.V = Matrix(0, schema.p_v());
        s.W = Matrix(0, schema.p_w());
        s.X = Matrix(0, schema.p_x());
        return s;
    };

    std::vector<PredictionTarget> out;
    if (cfg.has("predict.targets")) {
        const Dataset tg = load_dataset(cfg.get_path("predict.targets"), fit.roles, false);
        for (const auto& s : tg.subjects()) {
            PredictionTarget t;
            t.observed = observed_for(s.id, s.u, tg);
            t.points = {s.t, s.X, s.W};
            t.V = s.V;
            t.kind = kind;
            t.include_noise = noise;
            out.push_back(std::move(t));
        }
    } else if (cfg.has("predict.grid")) {
        const auto g = cfg.get_doubles("predict.grid", {});
        if (g.size() != 3 || g[2] < 1 || !(g[1] >= g[0])) throw ConfigError("predict.grid must be lo,hi,count");
        const int count = static_cast<int>(g[2]);
        Vector grid(count);
        for (int i = 0; i < count; ++i) grid(i) = count == 1 ? g[0] : g[0] + (g[1] - g[0]) * i / (count - 1);
        for (const auto& s : data.subjects()) {
            PredictionTarget t;
            t.observed = s;
            t.points = {grid, grid_block(s, s.X, fit.roles.x, false, grid),
                        grid_block(s, s.W, fit.roles.w, fit.roles.w_intercept, grid)};
            t.V = grid_block(s, s.V, fit.roles.v, fit.roles.v_intercept, grid);
            t.kind = kind;
            t.include_noise = noise;
            out.push_back(std::move(t));
        }
    } else {
        throw ConfigError("predict needs predict.targets or predict.grid");
    }
    for (auto& t : out) t.validate(data);
    return out;
}

int cmd_predict(const RunConfig& cfg, const fs::path& artifact_path, std::ostream& log) {
    const FitArtifact art = load_artifact(artifact_path);
    const Dataset data = load_dataset(cfg.get_path("data"), art.roles);
    const BSplineBasis basis(art.basis);
    const PredictOptions opt = predict_options_from(cfg);
    const auto targets = targets_from(cfg, data, art);
    const fs::path dir = output_dir(cfg);

    auto out = open_out(dir / "predictions.csv");
    out << "id,t,mean,variance";
    for (IntervalMethod m : opt.methods)
        for (double c : opt.ncl) {
            const std::string tag = std::string(to_string(m)) + "_" + num(100.0 * c, "%g");
            out << ',' << tag << "_lo," << tag << "_hi";
        }
    out << '\n';
    int skipped = 0;
    for (std::size_t k = 0; k < targets.size(); ++k) {
        const PredictionTarget& t = targets[k];
        PredictOptions o = opt;
        Rng r = substream(opt.seed, {k});
        o.seed = r();
        const PredictionResult pr = predict(t, basis, art.theta, art.info, o);
        skipped += pr.bts_skipped;
        for (Eigen::Index i = 0; i < t.points.size(); ++i) {
            out << t.observed.id << ',' << num(t.points.t(i), "%.17g") << ',' << num(pr.mean(i)) << ','
                << num(pr.variance(i));
            for (IntervalMethod m : opt.methods)
                for (double c : opt.ncl) {
                    const Interval* iv = pr.find(m, c);
                    out << ',' << num(iv->lower(i)) << ',' << num(iv->upper(i));
                }
            out << '\n';
        }
    }
    log << "predicted " << targets.size() << " subject(s); wrote " << (dir / "predictions.csv").string() << '\n';
    if (skipped > 0) log << "warning: " << skipped << " bootstrap parameter draw(s) skipped\n";
    if (!art.converged) log << "warning: the fit artifact comes from a non-converged fit\n";
    return kExitOk;
}

int cmd_simulate(const RunConfig& cfg, std::ostream& log) {
    const SchemeConfig sc = scheme_config_from(cfg);
    const fs::path dir = output_dir(cfg);
    log << "scheme " << to_string(sc.scheme) << ", n = " << sc.n << ", M = " << sc.M << ", " << sc.reps
        << " replication(s)\n";
    const BenchReport rep = run_benchmark(sc, [&](int done, int total) {
        log << "  replication " << done << "/" << total << " done\n" << std::flush;
    });
    {
        auto txt = open_out(dir / "report.txt");
        write_report_text(txt, rep);
    }
    {
        auto csv = open_out(dir / "report.csv");
        write_report_csv(csv, rep);
    }
    {
        auto reps = open_out(dir / "replications.csv");
        write_replications_csv(reps, rep);
    }
    write_report_text(log, rep);
    log << "wrote " << (dir / "report.txt").string() << ", report.csv, replications.csv\n";
    return kExitOk;
}

} // namespace hpfr
