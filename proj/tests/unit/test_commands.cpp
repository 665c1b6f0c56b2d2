#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "hpfr/commands.hpp"
#include "hpfr/error.hpp"
#include "toy_data.hpp"

using namespace hpfr;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("hpfr_cmd_" + name + "_" + std::to_string(::getpid()));
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

RunConfig toy_config(const fs::path& dir) {
    toy::Options o;
    o.shared_grid = false;
    write_dataset(dir / "toy.csv", toy::make(o));
    RunConfig c;
    c.set("data", (dir / "toy.csv").string());
    c.set("out", (dir / "out").string());
    c.set("v", "z");
    c.set("x", "t");
    c.set("w_intercept", "true");
    c.set("basis.interior_knots", "3");
    c.set("family", "N, T");
    return c;
}

} // namespace

TEST(Commands, FitThenPredictOnGrid) {
    const fs::path dir = scratch("fit");
    RunConfig c = toy_config(dir);
    std::ostringstream log;
    ASSERT_EQ(cmd_fit(c, log), kExitOk) << log.str();
    for (const char* f : {"fit_N.hpfr", "fit_T.hpfr", "params_T.csv", "subjects_T.csv", "trace_T.csv", "report.txt",
                          "report.csv"})
        EXPECT_TRUE(fs::exists(dir / "out" / f)) << f;
    const std::string report = slurp(dir / "out" / "report.csv");
    EXPECT_NE(report.find("model,degree,bic"), std::string::npos);
    EXPECT_NE(report.find("\nT,"), std::string::npos);

    c.set("predict.grid", "0,1,5");
    c.set("predict.methods", "PL0,BTS");
    c.set("predict.ncl", "95");
    c.set("predict.bts_J", "5");
    c.set("predict.bts_B", "5");
    ASSERT_EQ(cmd_predict(c, dir / "out" / "fit_T.hpfr", log), kExitOk) << log.str();
    std::ifstream in(dir / "out" / "predictions.csv");
    std::string header, row;
    std::getline(in, header);
    EXPECT_EQ(header, "id,t,mean,variance,PL0_95_lo,PL0_95_hi,BTS_95_lo,BTS_95_hi");
    int rows = 0;
    while (std::getline(in, row)) ++rows;
    EXPECT_EQ(rows, 6 * 5);
    fs::remove_all(dir);
}

TEST(Commands, PredictFromTargetFile) {
    const fs::path dir = scratch("targets");
    RunConfig c = toy_config(dir);
    c.set("family", "T");
    c.set("fit.information", "false");
    std::ostringstream log;
    ASSERT_EQ(cmd_fit(c, log), kExitOk) << log.str();
    std::ofstream(dir / "targets.csv") << "id,t,z\ns0,0.5,0.1\nnew,0.25,0\nnew,0.75,0\n";
    c.set("predict.targets", (dir / "targets.csv").string());
    c.set("predict.methods", "PL0");
    ASSERT_EQ(cmd_predict(c, dir / "out" / "fit_T.hpfr", log), kExitOk) << log.str();
    const std::string p = slurp(dir / "out" / "predictions.csv");
    EXPECT_NE(p.find("\nnew,0.25,"), std::string::npos);
    fs::remove_all(dir);
}

TEST(Commands, NonConvergedFitExitsTwo) {
    const fs::path dir = scratch("budget");
    RunConfig c = toy_config(dir);
    c.set("family", "T");
    c.set("fit.max_outer_iters", "1");
    std::ostringstream log;
    EXPECT_EQ(cmd_fit(c, log), kExitNotConverged);
    fs::remove_all(dir);
}

TEST(Commands, MissingColumnIsASchemaError) {
    const fs::path dir = scratch("schema");
    RunConfig c = toy_config(dir);
    c.set("v", "dose");
    std::ostringstream log;
    EXPECT_THROW(cmd_fit(c, log), SchemaError);
    fs::remove_all(dir);
}

TEST(Commands, SimulateIsDeterministic) {
    const fs::path dir = scratch("sim");
    RunConfig c;
    c.set("sim.scheme", "V");
    c.set("sim.M", "10");
    c.set("sim.n", "15");
    c.set("sim.reps", "2");
    c.set("sim.methods", "PL0");
    c.set("threads", "1");
    c.set("out", (dir / "a").string());
    std::ostringstream log;
    ASSERT_EQ(cmd_simulate(c, log), kExitOk);
    c.set("out", (dir / "b").string());
    c.set("threads", "2");
    ASSERT_EQ(cmd_simulate(c, log), kExitOk);
    for (const char* f : {"report.txt", "report.csv", "replications.csv"})
        EXPECT_EQ(slurp(dir / "a" / f), slurp(dir / "b" / f)) << f;
    fs::remove_all(dir);
}
