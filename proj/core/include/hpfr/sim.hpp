#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "hpfr/predict.hpp"

namespace hpfr {

/// I: Gaussian process. II: t-process (nu = 4, one r_m per subject).
/// III: subject 5 mean amplitude 4. IV: subject 10 shifted +2 on t in [-1, 1].
/// V: III and IV together. VI: Gaussian, test subject noise variance 0.05.
enum class Scheme { I, II, III, IV, V, VI };
Scheme parse_scheme(const std::string& s);
std::string to_string(Scheme s);

/// A family to fit together with its table label:
/// N; T (nu = 4 fixed); T1 (nu estimated); SL (nu = 1.3 fixed); SL1;
/// CN ((0.1, 0.5) fixed); CN1.
struct FitSpec {
    std::string label;
    MixingFamily family;
};
FitSpec parse_fit_spec(const std::string& label);

struct SchemeConfig {
    Scheme scheme = Scheme::I;
    int M = 20;
    int n = 31;
    int reps = 50;
    std::uint64_t seed = 20170101;
    std::vector<FitSpec> families;
    std::vector<double> ncl{0.80, 0.90, 0.95};
    std::vector<IntervalMethod> methods{IntervalMethod::PL0, IntervalMethod::PL1, IntervalMethod::BTS};
    /// Random-term RMSE and intervals on the observed subjects.
    bool random_terms = true;
    /// Held-out responses of an extra (M+1)-th subject. Always on for VI.
    bool new_subject = false;
    int pl1_draws = 10000;
    int bts_J = 50;
    int bts_B = 20;
    int interior_knots = 18;
    FitConfig fit;
    /// Worker threads over replications; 0 = hardware concurrency.
    int threads = 0;

    bool new_subject_mode() const { return new_subject || scheme == Scheme::VI; }
    void validate() const;
};

/// mu(t) = 0.8 sin((0.5 t)^3).
double true_mean(double t);

struct SimData {
    Dataset data;           // M subjects, or M + 1 with the test subject last
    Vector grid;            // common observation times
    std::vector<Vector> tau;   // noise-free random terms per subject
    std::vector<bool> perturbed;  // subjects altered by Schemes III-V
};

SimData generate_scheme(const SchemeConfig& cfg, int rep);

/// RMSE of the fitted mean function against true_mean on the grid.
double score_mean_rmse(const BSplineBasis& basis, const Vector& beta, const Vector& grid);
/// RMSE pooled over the included subjects and their grid points.
double score_tau_rmse(const std::vector<Vector>& predicted, const std::vector<Vector>& truth,
                      const std::vector<bool>& include);

struct IntervalScore {
    IntervalMethod method = IntervalMethod::PL0;
    double ncl = 0.0;
    double covered = 0.0;  // count of covered points
    double length = 0.0;   // summed lengths
    double points = 0.0;

    double cp() const { return points > 0.0 ? 100.0 * covered / points : 0.0; }
    double mean_length() const { return points > 0.0 ? length / points : 0.0; }
};

/// CP (%) and mean length of one interval band against the truth.
IntervalScore score_intervals(const Interval& iv, const Vector& truth);
void accumulate(std::vector<IntervalScore>& into, const std::vector<IntervalScore>& add);

struct RepOutcome {
    int rep = 0;
    std::string family;
    bool converged = true;
    int iterations = 0;
    double loglik = 0.0;
    double nu = 0.0;
    double mean_rmse = 0.0;
    double tau_rmse = 0.0;
    double interp_rmse = 0.0;
    double extrap_rmse = 0.0;
    std::vector<IntervalScore> tau_intervals;
    std::vector<IntervalScore> interp_intervals;
    std::vector<IntervalScore> extrap_intervals;
};

struct FamilySummary {
    std::string label;
    int reps = 0;
    int nonconverged = 0;
    double mean_rmse = 0.0;
    double tau_rmse = 0.0;
    double interp_rmse = 0.0;
    double extrap_rmse = 0.0;
    std::vector<IntervalScore> tau_intervals;
    std::vector<IntervalScore> interp_intervals;
    std::vector<IntervalScore> extrap_intervals;

    const IntervalScore* find(const std::vector<IntervalScore>& v, IntervalMethod m, double ncl) const;
};

struct BenchReport {
    SchemeConfig config;
    std::vector<FamilySummary> families;
    std::vector<RepOutcome> outcomes;  // ordered by (rep, family)
};

/// One replication for every configured family.
std::vector<RepOutcome> run_replication(const SchemeConfig& cfg, int rep);

using ProgressFn = std::function<void(int done, int total)>;
BenchReport run_benchmark(const SchemeConfig& cfg, const ProgressFn& progress = {});

/// Plain-text tables: one block per metric, families as columns.
void write_report_text(std::ostream& out, const BenchReport& r);
/// One record per (section, family, method, NCL, metric):
/// scheme,n,family,section,method,ncl,metric,value
void write_report_csv(std::ostream& out, const BenchReport& r);
/// Per-replication outcomes: rep,family,converged,iterations,loglik,nu,mean_rmse,tau_rmse,interp_rmse,extrap_rmse
void write_replications_csv(std::ostream& out, const BenchReport& r);

} // namespace hpfr
