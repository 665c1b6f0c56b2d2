#pragma once

#include <filesystem>
#include <iosfwd>

#include "hpfr/artifact.hpp"
#include "hpfr/config.hpp"

namespace hpfr {

/// Exit codes shared by the commands and the CLI.
inline constexpr int kExitOk = 0;
inline constexpr int kExitError = 1;
inline constexpr int kExitNotConverged = 2;

/// Fit every configured family and write, per family label L, into `out`:
/// fit_L.hpfr, params_L.csv, subjects_L.csv, trace_L.csv; plus report.txt /
/// report.csv comparing the families (BIC, RMSE, coefficient estimate / SE /
/// change ratio after dropping chi-square outliers).
int cmd_fit(const RunConfig& cfg, std::ostream& log);

/// Predict the configured targets from a fit artifact; writes predictions.csv.
int cmd_predict(const RunConfig& cfg, const std::filesystem::path& artifact, std::ostream& log);

/// Run a simulation benchmark; writes report.txt, report.csv, replications.csv.
int cmd_simulate(const RunConfig& cfg, std::ostream& log);

/// Targets for cmd_predict: either predict.targets (CSV rows id,t and the
/// role columns) or predict.grid = lo,hi,count for every subject in the data.
/// Grid covariates are linear interpolations over the subject's rows, except
/// columns named t, which take the grid time.
std::vector<PredictionTarget> targets_from(const RunConfig& cfg, const Dataset& data, const FitArtifact& fit);

} // namespace hpfr
