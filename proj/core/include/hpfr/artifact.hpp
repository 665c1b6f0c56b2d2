#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>

#include "hpfr/fit.hpp"

namespace hpfr {

inline constexpr int kArtifactVersion = 1;

/// Everything `predict` needs from a fit: roles, basis, Theta-hat, the
/// free-parameter layout and the observed information, plus a config echo.
///
/// Text format, one record per line: `key value...`. The first line is
/// `hpfr-fit-artifact <version>`; readers reject any other version. Matrices
/// are written row by row (`information.row <i> <values>`), doubles with 17
/// significant digits so they round-trip exactly.
struct FitArtifact {
    ColumnRoles roles;
    BasisConfig basis;
    ModelParams theta;
    std::vector<bool> psi_free;
    InformationMatrix info;
    double loglik = 0.0;
    double bic = 0.0;
    bool converged = false;
    int iterations = 0;
    std::map<std::string, std::string> config;

    ParamLayout layout() const;
};

FitArtifact make_artifact(const FitResult& fit, const ColumnRoles& roles,
                          const std::map<std::string, std::string>& config = {});

void write_artifact(std::ostream& out, const FitArtifact& a);
FitArtifact read_artifact(std::istream& in, const std::string& source = "<artifact>");
void save_artifact(const std::filesystem::path& path, const FitArtifact& a);
FitArtifact load_artifact(const std::filesystem::path& path);

} // namespace hpfr
