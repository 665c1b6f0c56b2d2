#include <gtest/gtest.h>

#include <sstream>

#include "hpfr/data.hpp"
#include "hpfr/error.hpp"

using namespace hpfr;

namespace {

Dataset parse(const std::string& csv, const ColumnRoles& roles = {}) {
    std::istringstream in(csv);
    return parse_dataset(in, roles, "test.csv");
}

} // namespace

TEST(Data, GroupsAndSortsRows) {
    const Dataset ds = parse("id,t,y\nb,2,20\na,1,1\nb,1,10\na,3,3\na,2,2\nb,3,30\n");
    ASSERT_EQ(ds.size(), 2u);
    EXPECT_EQ(ds[0].id, "b");
    EXPECT_EQ(ds[1].id, "a");
    EXPECT_EQ(ds[0].size(), 3);
    EXPECT_DOUBLE_EQ(ds[0].t(0), 1.0);
    EXPECT_DOUBLE_EQ(ds[0].y(0), 10.0);
    EXPECT_DOUBLE_EQ(ds[1].y(2), 3.0);
    EXPECT_EQ(ds.total_observations(), 6);
    EXPECT_EQ(ds.p_u(), 1);  // intercept only
}

TEST(Data, NanCellIsParseErrorWithRow) {
    try {
        parse("id,t,y\na,1,1\na,2,nan\n");
        FAIL() << "expected ParseError";
    } catch (const ParseError& e) {
        EXPECT_EQ(e.row(), 3u);
    }
    EXPECT_THROW(parse("id,t,y\na,1,abc\n"), ParseError);
}

TEST(Data, MissingColumnIsSchemaError) {
    EXPECT_THROW(parse("id,t\na,1\n"), SchemaError);
    ColumnRoles r;
    r.x = {"dose"};
    EXPECT_THROW(parse("id,t,y\na,1,1\n", r), SchemaError);
}

TEST(Data, DuplicateTimeIsDataError) {
    EXPECT_THROW(parse("id,t,y\na,1,1\na,1,2\n"), DataError);
}

TEST(Data, RenalStyleSchema) {
    ColumnRoles r;
    r.u_intercept = false;
    r.v = {"t", "dose", "dose2"};
    r.v_intercept = true;
    r.w_intercept = true;
    r.x = {"t", "dose"};
    const Dataset ds = parse("id,t,y,dose,dose2\np1,1,11,0.5,0.25\np1,2,11.5,0.7,0.49\np2,1,12,0,0\n", r);
    EXPECT_EQ(ds.p_v(), 4);
    EXPECT_EQ(ds.p_u(), 0);
    EXPECT_EQ(ds.p_w(), 1);
    EXPECT_EQ(ds.p_x(), 2);
    EXPECT_DOUBLE_EQ(ds[0].V(1, 0), 1.0);
    EXPECT_DOUBLE_EQ(ds[0].V(1, 1), 2.0);
    EXPECT_DOUBLE_EQ(ds[0].V(1, 3), 0.49);
    EXPECT_DOUBLE_EQ(ds[0].X(0, 1), 0.5);
}

TEST(Data, DesignBlockStructure) {
    ColumnRoles r;
    r.u = {"g"};
    r.v = {"z"};
    const Dataset ds = parse("id,t,y,g,z\na,0,1,2,5\na,0.5,2,2,6\na,1,3,2,7\nb,0,1,-1,1\nb,1,1,-1,2\n", r);
    const BasisConfig cfg{2, 1, 0.0, 1.0};
    const BSplineBasis basis(cfg);
    const DesignMatrices d = assemble_design(ds, basis);
    ASSERT_EQ(d.columns(), cfg.size() * 2 + 1);
    // A = [u^T (x) Phi, V]: rebuild block by block.
    for (std::size_t m = 0; m < ds.size(); ++m) {
        const Subject& s = ds[m];
        const Matrix Phi = basis.evaluate(s.t);
        Matrix A(s.size(), d.columns());
        for (Eigen::Index j = 0; j < s.u.size(); ++j) A.middleCols(j * Phi.cols(), Phi.cols()) = s.u(j) * Phi;
        A.rightCols(1) = s.V;
        EXPECT_TRUE(A.isApprox(d.A[m], 0.0) || (A - d.A[m]).norm() == 0.0);
    }
    // mu = A beta equals Phi B u + V gamma.
    Vector beta = Vector::LinSpaced(d.columns(), -1.0, 2.0);
    const Matrix B = Eigen::Map<const Matrix>(beta.data(), cfg.size(), 2);
    const Vector gamma = beta.tail(1);
    const Vector direct = mean_from_blocks(d.Phi[0], B, ds[0].u, ds[0].V, gamma);
    EXPECT_LT((direct - d.A[0] * beta).norm(), 1e-13);
}

TEST(Data, RankDeficiencyFlagged) {
    ColumnRoles r;
    r.v_intercept = true;  // duplicates the partition of unity
    const Dataset ds = parse("id,t,y\na,0,1\na,0.5,2\na,1,3\n", r);
    EXPECT_TRUE(assemble_design(ds, BasisConfig{1, 0, 0.0, 1.0}).rank_deficient);
    ColumnRoles ok;
    const Dataset ds2 = parse("id,t,y\na,0,1\na,0.5,2\na,1,3\n", ok);
    EXPECT_FALSE(assemble_design(ds2, BasisConfig{1, 0, 0.0, 1.0}).rank_deficient);
}

TEST(Data, UMustBeConstantWithinSubject) {
    ColumnRoles r;
    r.u = {"g"};
    EXPECT_THROW(parse("id,t,y,g\na,0,1,1\na,1,1,2\n", r), DataError);
}

TEST(Data, WriteReadRoundTrip) {
    ColumnRoles r;
    r.x = {"t", "dose"};
    r.w = {"dose"};
    const Dataset ds = parse("id,t,y,dose\na,0.1,1.0000000000000002,3\na,0.2,2.5,4\nb,0.3,-1e-300,5\n", r);
    std::ostringstream out;
    write_dataset(out, ds);
    const Dataset back = parse(out.str(), r);
    ASSERT_EQ(back.size(), ds.size());
    for (std::size_t m = 0; m < ds.size(); ++m) {
        EXPECT_EQ(back[m].y, ds[m].y);
        EXPECT_EQ(back[m].X, ds[m].X);
        EXPECT_EQ(back[m].W, ds[m].W);
    }
}

TEST(Data, ValidateSubject) {
    Subject s;
    s.t = Vector::LinSpaced(3, 0, 1);
    s.y = Vector::Zero(3);
    s.u = Vector::Ones(1);
    s.V = Matrix(3, 0);
    s.W = Matrix(3, 0);
    s.X = Matrix(3, 0);
    EXPECT_NO_THROW(validate_subject(s));
    s.t(2) = 0.5;
    EXPECT_THROW(validate_subject(s), DataError);
    Subject empty = s;
    empty.t.resize(0);
    empty.y.resize(0);
    empty.V.resize(0, 0);
    empty.W.resize(0, 0);
    empty.X.resize(0, 0);
    EXPECT_THROW(validate_subject(empty), DataError);
    EXPECT_NO_THROW(validate_subject(empty, true));
}
