#include "hpfr/sim.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <exception>
#include <mutex>
#include <ostream>
#include <thread>

#include "hpfr/error.hpp"

namespace hpfr {

namespace {

constexpr double kV0 = 0.04;
constexpr double kW = 1.0;
constexpr double kPhiB = 0.01;
constexpr double kPhiEps = 0.01;
constexpr double kPhiEpsTest = 0.05;
constexpr std::size_t kCurveSubject = 4;    // 5th subject
constexpr std::size_t kOutlierSubject = 9;  // 10th subject

std::string upper(std::string s) {
    for (char& c : s) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    return s;
}

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

} // namespace

Scheme parse_scheme(const std::string& s) {
    const std::string u = upper(s);
    if (u == "I" || u == "1") return Scheme::I;
    if (u == "II" || u == "2") return Scheme::II;
    if (u == "III" || u == "3") return Scheme::III;
    if (u == "IV" || u == "4") return Scheme::IV;
    if (u == "V" || u == "5") return Scheme::V;
    if (u == "VI" || u == "6") return Scheme::VI;
    throw ConfigError("unknown scheme '" + s + "' (expected I..VI)");
}

std::string to_string(Scheme s) {
    static const char* names[] = {"I", "II", "III", "IV", "V", "VI"};
    return names[static_cast<int>(s)];
}

FitSpec parse_fit_spec(const std::string& label) {
    const std::string u = upper(label);
    if (u == "N") return {"N", MixingFamily::gaussian()};
    if (u == "T") return {"T", MixingFamily::student_t(4.0, true)};
    if (u == "T1") return {"T1", MixingFamily::student_t(4.0, false)};
    if (u == "SL") return {"SL", MixingFamily::slash(1.3, true)};
    if (u == "SL1") return {"SL1", MixingFamily::slash(2.0, false)};
    if (u == "CN") return {"CN", MixingFamily::contaminated_normal(0.1, 0.5, true)};
    if (u == "CN1") return {"CN1", MixingFamily::contaminated_normal(0.1, 0.5, false)};
    throw ConfigError("unknown family label '" + label + "' (expected N, T, T1, SL, SL1, CN, CN1)");
}

void SchemeConfig::validate() const {
    if (M < 1 || n < 4 || reps < 1) throw ConfigError("scheme needs M >= 1, n >= 4, reps >= 1");
    if (families.empty()) throw ConfigError("no families to fit");
    if ((scheme == Scheme::III || scheme == Scheme::V) && M <= static_cast<int>(kCurveSubject))
        throw ConfigError("schemes III and V perturb subject 5; M must be >= 5");
    if ((scheme == Scheme::IV || scheme == Scheme::V) && M <= static_cast<int>(kOutlierSubject))
        throw ConfigError("schemes IV and V perturb subject 10; M must be >= 10");
    if (interior_knots < 0) throw ConfigError("interior_knots must be >= 0");
    PredictOptions po;
    po.ncl = ncl;
    po.pl1_draws = pl1_draws;
    po.bts_J = bts_J;
    po.bts_B = bts_B;
    po.validate();
    fit.validate();
}

double true_mean(double t) {
    const double h = 0.5 * t;
    return 0.8 * std::sin(h * h * h);
}

SimData generate_scheme(const SchemeConfig& cfg, int rep) {
    const int total = cfg.M + (cfg.new_subject_mode() ? 1 : 0);
    SimData sd;
    sd.grid.resize(cfg.n);
    for (int i = 0; i < cfg.n; ++i) sd.grid(i) = -4.0 + 8.0 * i / (cfg.n - 1);
    const Vector x = 2.5 * sd.grid;
    const Vector w = 0.5 * sd.grid;

    SqExpParams theta{kV0, Vector::Constant(1, kW)};
    Eigen::SelfAdjointEigenSolver<Matrix> es(cov_matrix(Matrix(x), theta));
    const Matrix root = es.eigenvectors() * es.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();

    ColumnRoles roles;
    roles.x = {"x"};
    roles.w = {"w"};
    std::vector<Subject> subjects;
    sd.perturbed.assign(static_cast<std::size_t>(total), false);
    for (int m = 0; m < total; ++m) {
        Rng rng = substream(cfg.seed, {static_cast<std::uint64_t>(rep), static_cast<std::uint64_t>(m)});
        std::normal_distribution<double> nd;
        const bool test = cfg.new_subject_mode() && m == cfg.M;
        const double phi_eps = cfg.scheme == Scheme::VI && test ? kPhiEpsTest : kPhiEps;

        const double b = std::sqrt(kPhiB) * nd(rng);
        Vector z(cfg.n), eps(cfg.n);
        for (int i = 0; i < cfg.n; ++i) z(i) = nd(rng);
        for (int i = 0; i < cfg.n; ++i) eps(i) = std::sqrt(phi_eps) * nd(rng);
        Vector tau = root * z + w * b;
        if (cfg.scheme == Scheme::II) {
            std::gamma_distribution<double> gd(2.0, 0.5);
            const double scale = 1.0 / std::sqrt(gd(rng));
            tau *= scale;
            eps *= scale;
        }

        const auto mu = static_cast<std::size_t>(m);
        double amplitude = 0.8;
        if ((cfg.scheme == Scheme::III || cfg.scheme == Scheme::V) && mu == kCurveSubject) {
            amplitude = 4.0;
            sd.perturbed[mu] = true;
        }
        Subject s;
        s.id = "s" + std::to_string(m + 1);
        s.t = sd.grid;
        s.y.resize(cfg.n);
        for (int i = 0; i < cfg.n; ++i) s.y(i) = amplitude / 0.8 * true_mean(sd.grid(i)) + tau(i) + eps(i);
        if ((cfg.scheme == Scheme::IV || cfg.scheme == Scheme::V) && mu == kOutlierSubject) {
            for (int i = 0; i < cfg.n; ++i)
                if (sd.grid(i) >= -1.0 && sd.grid(i) <= 1.0) s.y(i) += 2.0;
            sd.perturbed[mu] = true;
        }
        s.u = Vector::Ones(1);
        s.V = Matrix(cfg.n, 0);
        s.W = w;
        s.X = x;
        subjects.push_back(std::move(s));
        sd.tau.push_back(std::move(tau));
    }
    sd.data = Dataset(std::move(subjects), roles);
    return sd;
}

double score_mean_rmse(const BSplineBasis& basis, const Vector& beta, const Vector& grid) {
    const Matrix Phi = basis.evaluate(grid);
    const Vector fitted = Phi * beta.head(Phi.cols());
    double ss = 0.0;
    for (Eigen::Index i = 0; i < grid.size(); ++i) ss += std::pow(fitted(i) - true_mean(grid(i)), 2);
    return std::sqrt(ss / static_cast<double>(grid.size()));
}

double score_tau_rmse(const std::vector<Vector>& predicted, const std::vector<Vector>& truth,
                      const std::vector<bool>& include) {
    double ss = 0.0, cnt = 0.0;
    for (std::size_t m = 0; m < predicted.size(); ++m) {
        if (!include[m]) continue;
        ss += (predicted[m] - truth[m]).squaredNorm();
        cnt += static_cast<double>(predicted[m].size());
    }
    return cnt > 0.0 ? std::sqrt(ss / cnt) : 0.0;
}

IntervalScore score_intervals(const Interval& iv, const Vector& truth) {
    IntervalScore s;
    s.method = iv.method;
    s.ncl = iv.ncl;
    for (Eigen::Index i = 0; i < truth.size(); ++i) {
        if (truth(i) >= iv.lower(i) && truth(i) <= iv.upper(i)) s.covered += 1.0;
        s.length += iv.upper(i) - iv.lower(i);
        s.points += 1.0;
    }
    return s;
}

void accumulate(std::vector<IntervalScore>& into, const std::vector<IntervalScore>& add) {
    for (const auto& a : add) {
        auto it = std::find_if(into.begin(), into.end(),
                               [&](const IntervalScore& s) { return s.method == a.method && s.ncl == a.ncl; });
        if (it == into.end()) {
            into.push_back(a);
        } else {
            it->covered += a.covered;
            it->length += a.length;
            it->points += a.points;
        }
    }
}

const IntervalScore* FamilySummary::find(const std::vector<IntervalScore>& v, IntervalMethod m, double ncl) const {
    for (const auto& s : v)
        if (s.method == m && std::abs(s.ncl - ncl) < 1e-12) return &s;
    return nullptr;
}

namespace {

std::uint64_t draw_seed(const SchemeConfig& cfg, int rep, std::size_t fam, std::uint64_t slot) {
    Rng r = substream(cfg.seed, {static_cast<std::uint64_t>(rep), 1000 + fam, slot});
    return r();
}

std::vector<IntervalScore> score_all(const PredictionResult& pr, const Vector& truth) {
    std::vector<IntervalScore> out;
    for (const auto& iv : pr.intervals) out.push_back(score_intervals(iv, truth));
    return out;
}

Subject take_rows(const Subject& s, const std::vector<Eigen::Index>& rows) {
    Subject o;
    o.id = s.id;
    o.u = s.u;
    const auto n = static_cast<Eigen::Index>(rows.size());
    o.t.resize(n);
    o.y.resize(n);
    o.V.resize(n, s.V.cols());
    o.W.resize(n, s.W.cols());
    o.X.resize(n, s.X.cols());
    for (Eigen::Index i = 0; i < n; ++i) {
        const Eigen::Index r = rows[static_cast<std::size_t>(i)];
        o.t(i) = s.t(r);
        o.y(i) = s.y(r);
        o.V.row(i) = s.V.row(r);
        o.W.row(i) = s.W.row(r);
        o.X.row(i) = s.X.row(r);
    }
    return o;
}

} // namespace

std::vector<RepOutcome> run_replication(const SchemeConfig& cfg, int rep) {
    const SimData sd = generate_scheme(cfg, rep);
    const bool ns = cfg.new_subject_mode();
    std::vector<Subject> train(sd.data.subjects().begin(), sd.data.subjects().begin() + cfg.M);
    const ModelData md(Dataset(std::move(train), sd.data.roles()), BasisConfig{3, cfg.interior_knots, -4.0, 4.0});

    const bool need_info =
        std::find(cfg.methods.begin(), cfg.methods.end(), IntervalMethod::BTS) != cfg.methods.end();

    // Held-out splits of the test subject: random half (redrawn per
    // replication) and the terminal block t >= 0.
    std::vector<Eigen::Index> interp_test, extrap_test;
    if (ns) {
        const Eigen::Index n = cfg.n;
        const Eigen::Index n_test = n - n / 2;
        std::vector<Eigen::Index> idx(static_cast<std::size_t>(n));
        for (Eigen::Index i = 0; i < n; ++i) idx[static_cast<std::size_t>(i)] = i;
        Rng rng = substream(cfg.seed, {static_cast<std::uint64_t>(rep), 999});
        for (Eigen::Index i = n - 1; i > 0; --i) {
            std::uniform_int_distribution<Eigen::Index> pick(0, i);
            std::swap(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(pick(rng))]);
        }
        interp_test.assign(idx.begin(), idx.begin() + n_test);
        std::sort(interp_test.begin(), interp_test.end());
        for (Eigen::Index i = 0; i < n; ++i)
            if (sd.grid(i) >= 0.0) extrap_test.push_back(i);
    }

    std::vector<RepOutcome> outs;
    for (std::size_t f = 0; f < cfg.families.size(); ++f) {
        const FitSpec& spec = cfg.families[f];
        FitConfig fc = cfg.fit;
        fc.compute_information = need_info;
        const FitResult fr = fit(md, spec.family, fc);

        RepOutcome o;
        o.rep = rep;
        o.family = spec.label;
        o.converged = fr.converged;
        o.iterations = fr.iterations;
        o.loglik = fr.loglik;
        o.nu = fr.theta_hat.family.nu;
        o.mean_rmse = score_mean_rmse(md.basis(), fr.theta_hat.beta, sd.grid);

        PredictOptions po;
        po.ncl = cfg.ncl;
        po.methods = cfg.methods;
        po.pl1_draws = cfg.pl1_draws;
        po.bts_J = cfg.bts_J;
        po.bts_B = cfg.bts_B;

        if (cfg.random_terms) {
            std::vector<Vector> pred(md.size());
            std::vector<bool> include(md.size());
            for (std::size_t m = 0; m < md.size(); ++m) {
                const Subject& s = md.data()[m];
                po.seed = draw_seed(cfg, rep, f, m);
                const PredictionResult pr = predict_random_terms(md, fr, m, {s.t, s.X, s.W}, po);
                pred[m] = pr.mean;
                include[m] = !sd.perturbed[m];
                if (include[m]) accumulate(o.tau_intervals, score_all(pr, sd.tau[m]));
            }
            o.tau_rmse = score_tau_rmse(pred, sd.tau, include);
        }
        if (ns) {
            const Subject& test = sd.data[static_cast<std::size_t>(cfg.M)];
            auto run_split = [&](const std::vector<Eigen::Index>& held, std::uint64_t slot, double& rmse,
                                 std::vector<IntervalScore>& scores) {
                std::vector<Eigen::Index> kept;
                for (Eigen::Index i = 0; i < test.size(); ++i)
                    if (!std::binary_search(held.begin(), held.end(), i)) kept.push_back(i);
                const Subject obs = take_rows(test, kept);
                const Subject tgt = take_rows(test, held);
                po.seed = draw_seed(cfg, rep, f, slot);
                const PredictionResult pr =
                    predict_new_subject(obs, {tgt.t, tgt.X, tgt.W}, tgt.V, md.basis(), fr, po);
                rmse = std::sqrt((pr.mean - tgt.y).squaredNorm() / static_cast<double>(tgt.size()));
                scores = score_all(pr, tgt.y);
            };
            run_split(interp_test, 100000, o.interp_rmse, o.interp_intervals);
            run_split(extrap_test, 100001, o.extrap_rmse, o.extrap_intervals);
        }
        outs.push_back(std::move(o));
    }
    return outs;
}

BenchReport run_benchmark(const SchemeConfig& cfg, const ProgressFn& progress) {
    cfg.validate();
    std::vector<std::vector<RepOutcome>> per_rep(static_cast<std::size_t>(cfg.reps));
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(cfg.reps));
    std::atomic<int> next{0};
    int done = 0;
    std::mutex mu;

    auto worker = [&] {
        for (int r = next++; r < cfg.reps; r = next++) {
            try {
                per_rep[static_cast<std::size_t>(r)] = run_replication(cfg, r);
            } catch (...) {
                errors[static_cast<std::size_t>(r)] = std::current_exception();
            }
            std::lock_guard<std::mutex> lock(mu);
            ++done;
            if (progress) progress(done, cfg.reps);
        }
    };
    int threads = cfg.threads > 0 ? cfg.threads : static_cast<int>(std::thread::hardware_concurrency());
    threads = std::clamp(threads, 1, cfg.reps);
    if (threads == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int i = 0; i < threads; ++i) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    for (const auto& e : errors)
        if (e) std::rethrow_exception(e);

    BenchReport rep;
    rep.config = cfg;
    for (const auto& spec : cfg.families) {
        FamilySummary s;
        s.label = spec.label;
        rep.families.push_back(s);
    }
    for (const auto& outs : per_rep) {
        for (std::size_t f = 0; f < outs.size(); ++f) {
            const RepOutcome& o = outs[f];
            FamilySummary& s = rep.families[f];
            s.reps += 1;
            s.nonconverged += o.converged ? 0 : 1;
            s.mean_rmse += o.mean_rmse;
            s.tau_rmse += o.tau_rmse;
            s.interp_rmse += o.interp_rmse;
            s.extrap_rmse += o.extrap_rmse;
            accumulate(s.tau_intervals, o.tau_intervals);
            accumulate(s.interp_intervals, o.interp_intervals);
            accumulate(s.extrap_intervals, o.extrap_intervals);
            rep.outcomes.push_back(o);
        }
    }
    for (auto& s : rep.families) {
        const double k = s.reps > 0 ? 1.0 / s.reps : 0.0;
        s.mean_rmse *= k;
        s.tau_rmse *= k;
        s.interp_rmse *= k;
        s.extrap_rmse *= k;
    }
    return rep;
}

namespace {

void table_row(std::ostream& out, const std::string& head, const std::vector<std::string>& cells) {
    out << head;
    for (std::size_t i = head.size(); i < 16; ++i) out << ' ';
    for (const auto& c : cells) {
        for (std::size_t i = c.size(); i < 9; ++i) out << ' ';
        out << c;
    }
    out << '\n';
}

void interval_table(std::ostream& out, const BenchReport& r,
                    const std::vector<IntervalScore> FamilySummary::*field, const char* title) {
    const auto& cfg = r.config;
    std::vector<std::string> labels;
    for (const auto& f : r.families) labels.push_back(f.label);
    out << '\n' << title << " CP (%)\n";
    table_row(out, "NCL  method", labels);
    for (double c : cfg.ncl)
        for (IntervalMethod m : cfg.methods) {
            std::vector<std::string> cells;
            for (const auto& f : r.families) {
                const IntervalScore* s = f.find(f.*field, m, c);
                cells.push_back(s ? fmt("%.1f", s->cp()) : "-");
            }
            table_row(out, fmt("%.0f", 100.0 * c) + "   " + to_string(m), cells);
        }
    out << '\n' << title << " mean length\n";
    table_row(out, "NCL  method", labels);
    for (double c : cfg.ncl)
        for (IntervalMethod m : cfg.methods) {
            std::vector<std::string> cells;
            for (const auto& f : r.families) {
                const IntervalScore* s = f.find(f.*field, m, c);
                cells.push_back(s ? fmt("%.3f", s->mean_length()) : "-");
            }
            table_row(out, fmt("%.0f", 100.0 * c) + "   " + to_string(m), cells);
        }
}

} // namespace

void write_report_text(std::ostream& out, const BenchReport& r) {
    const auto& cfg = r.config;
    out << "Scheme " << to_string(cfg.scheme) << ", n_m = " << cfg.n << ", M = " << cfg.M << ", " << cfg.reps
        << " replications, seed " << cfg.seed << '\n';
    std::vector<std::string> labels, cells;
    for (const auto& f : r.families) labels.push_back(f.label);

    out << "\nMean-curve RMSE\n";
    table_row(out, "", labels);
    for (const auto& f : r.families) cells.push_back(fmt("%.3f", f.mean_rmse));
    table_row(out, "RMSE", cells);

    if (cfg.random_terms) {
        out << "\nRandom-term RMSE (perturbed subjects excluded)\n";
        table_row(out, "", labels);
        cells.clear();
        for (const auto& f : r.families) cells.push_back(fmt("%.3f", f.tau_rmse));
        table_row(out, "RMSE", cells);
        interval_table(out, r, &FamilySummary::tau_intervals, "Random-term PI");
    }
    if (cfg.new_subject_mode()) {
        out << "\nNew-subject response RMSE\n";
        table_row(out, "", labels);
        cells.clear();
        for (const auto& f : r.families) cells.push_back(fmt("%.3f", f.interp_rmse));
        table_row(out, "interpolation", cells);
        cells.clear();
        for (const auto& f : r.families) cells.push_back(fmt("%.3f", f.extrap_rmse));
        table_row(out, "extrapolation", cells);
        interval_table(out, r, &FamilySummary::interp_intervals, "Interpolation PI");
        interval_table(out, r, &FamilySummary::extrap_intervals, "Extrapolation PI");
    }
    out << "\nNon-converged fits\n";
    table_row(out, "", labels);
    cells.clear();
    for (const auto& f : r.families) cells.push_back(std::to_string(f.nonconverged));
    table_row(out, "count", cells);
}

void write_report_csv(std::ostream& out, const BenchReport& r) {
    const auto& cfg = r.config;
    const std::string head = to_string(cfg.scheme) + "," + std::to_string(cfg.n) + ",";
    out << "scheme,n,family,section,method,ncl,metric,value\n";
    auto rec = [&](const std::string& fam, const char* section, const std::string& method, double ncl,
                   const char* metric, double v) {
        out << head << fam << ',' << section << ',' << method << ',' << (ncl > 0 ? fmt("%.2f", ncl) : "") << ','
            << metric << ',' << fmt("%.10g", v) << '\n';
    };
    auto intervals = [&](const FamilySummary& f, const char* section, const std::vector<IntervalScore>& v) {
        for (const auto& s : v) {
            rec(f.label, section, to_string(s.method), s.ncl, "cp", s.cp());
            rec(f.label, section, to_string(s.method), s.ncl, "length", s.mean_length());
        }
    };
    for (const auto& f : r.families) {
        rec(f.label, "mean", "", 0, "rmse", f.mean_rmse);
        rec(f.label, "fit", "", 0, "nonconverged", f.nonconverged);
        if (cfg.random_terms) {
            rec(f.label, "tau", "", 0, "rmse", f.tau_rmse);
            intervals(f, "tau", f.tau_intervals);
        }
        if (cfg.new_subject_mode()) {
            rec(f.label, "interp", "", 0, "rmse", f.interp_rmse);
            intervals(f, "interp", f.interp_intervals);
            rec(f.label, "extrap", "", 0, "rmse", f.extrap_rmse);
            intervals(f, "extrap", f.extrap_intervals);
        }
    }
}

void write_replications_csv(std::ostream& out, const BenchReport& r) {
    out << "rep,family,converged,iterations,loglik,nu,mean_rmse,tau_rmse,interp_rmse,extrap_rmse\n";
    for (const auto& o : r.outcomes) {
        out << o.rep << ',' << o.family << ',' << (o.converged ? 1 : 0) << ',' << o.iterations << ','
            << fmt("%.10g", o.loglik) << ',' << fmt("%.10g", o.nu) << ',' << fmt("%.10g", o.mean_rmse) << ','
            << fmt("%.10g", o.tau_rmse) << ',' << fmt("%.10g", o.interp_rmse) << ',' << fmt("%.10g", o.extrap_rmse)
            << '\n';
    }
}

} // namespace hpfr
