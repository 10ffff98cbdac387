#include "test_util.hpp"

#include <gtest/gtest.h>

#include <sstream>

using namespace mgarch;

namespace {

std::string error_of(const std::string& csv) {
    std::istringstream in(csv);
    try {
        io::read_panel_csv(in);
    } catch (const data_error& e) {
        return e.what();
    }
    return "";
}

bool contains(const std::string& s, const std::string& part) { return s.find(part) != std::string::npos; }

}  // namespace

TEST(PanelCsv, ReadsWellFormedFile) {
    std::istringstream in(
        "time,row,col,value\n"
        "2,1,1,5\n2,2,1,6\n2,1,2,7\n2,2,2,8\n"
        "1,1,1,1\n1,2,1,2\n1,1,2,3\n1,2,2,4\n");
    const MatrixPanel p = io::read_panel_csv(in);
    ASSERT_EQ(p.size(), 2u);
    EXPECT_EQ(p.rows(), 2);
    EXPECT_EQ(p.cols(), 2);
    EXPECT_EQ(p[0](0, 0), 1.0);
    EXPECT_EQ(p[0](1, 0), 2.0);
    EXPECT_EQ(p[0](0, 1), 3.0);
    EXPECT_EQ(p[1](1, 1), 8.0);
    EXPECT_EQ(p.time_labels()[1], "2");
}

TEST(PanelCsv, NumericTimesSortNumerically) {
    std::istringstream in("time,row,col,value\n10,1,1,2\n9,1,1,1\n");
    const MatrixPanel p = io::read_panel_csv(in);
    EXPECT_EQ(p[0](0, 0), 1.0);
    EXPECT_EQ(p.time_labels()[0], "9");
}

TEST(PanelCsv, Demean) {
    std::istringstream in("time,row,col,value\n1,1,1,1\n2,1,1,3\n");
    const MatrixPanel p = io::read_panel_csv(in, true);
    EXPECT_DOUBLE_EQ(p[0](0, 0), -1.0);
    EXPECT_DOUBLE_EQ(p[1](0, 0), 1.0);
}

TEST(PanelCsv, MissingCellIsNamed) {
    const std::string e = error_of(
        "time,row,col,value\n"
        "1,1,1,1\n1,1,2,3\n1,2,2,4\n"
        "2,1,1,5\n2,2,1,6\n2,1,2,7\n2,2,2,8\n");
    EXPECT_TRUE(contains(e, "missing cell (time=1, row=2, col=1)")) << e;
}

TEST(PanelCsv, MalformedLinesCiteLineNumbers) {
    EXPECT_TRUE(contains(error_of("time,row,col,value\n1,1,1,1\n1,1,1,2\n"), "line 3: duplicate cell"));
    EXPECT_TRUE(contains(error_of("time,row,col,value\n1,1,1,abc\n"), "line 2: non-numeric value 'abc'"));
    EXPECT_TRUE(contains(error_of("time,row,col,value\n1,1,1,1\n1,2,1\n"), "line 3: expected 4 fields"));
    EXPECT_TRUE(contains(error_of("time,row,col,value\n1,0,1,1\n"), "line 2: row"));
    EXPECT_TRUE(contains(error_of("time,row,col,value\n1,1,x,1\n"), "line 2: col"));
    EXPECT_TRUE(contains(error_of("t,r,c,v\n1,1,1,1\n"), "line 1: header"));
    EXPECT_TRUE(contains(error_of(""), "empty"));
    EXPECT_TRUE(contains(error_of("time,row,col,value\n"), "no data rows"));
}

TEST(PanelCsv, RoundTripsAtFullPrecision) {
    Rng rng = make_rng(71);
    const MatrixPanel p = fixtures::gaussian_panel(rng, 3, 2, 25, 1.0 / 3.0);
    std::ostringstream out;
    io::write_panel_csv(out, p);
    std::istringstream in(out.str());
    const MatrixPanel q = io::read_panel_csv(in);
    ASSERT_EQ(q.size(), p.size());
    for (std::size_t t = 0; t < p.size(); ++t) {
        EXPECT_EQ((p[t] - q[t]).cwiseAbs().maxCoeff(), 0.0);
    }
    std::ostringstream again;
    io::write_panel_csv(again, q);
    EXPECT_EQ(again.str(), out.str());
}

TEST(ThetaJson, RoundTrip) {
    Rng rng = make_rng(72);
    for (Structure s : {Structure::diagonal, Structure::full}) {
        const Theta th = fixtures::random_theta(rng, 3, 2, s, {2, 1});
        const Theta back = io::theta_from_json(nlohmann::json::parse(io::theta_to_json(th).dump()));
        EXPECT_EQ((to_natural(th) - to_natural(back)).cwiseAbs().maxCoeff(), 0.0);
        EXPECT_EQ(back.row.structure, s);
    }
}

TEST(ThetaJson, RejectsInvalid) {
    nlohmann::json j = io::theta_to_json(designs::estimation_design());
    j["w"] = -1.0;
    EXPECT_THROW(io::theta_from_json(j), invalid_input);
    j.erase("w");
    EXPECT_THROW(io::theta_from_json(j), invalid_input);
}

TEST(FitJson, NonFiniteValuesBecomeNull) {
    FitResult f;
    f.theta_hat = designs::estimation_design();
    const auto p = static_cast<Eigen::Index>(to_natural(f.theta_hat).size());
    f.std_errors = Vector::Constant(p, std::numeric_limits<double>::quiet_NaN());
    f.active.assign(static_cast<std::size_t>(p), true);
    f.has_sandwich = false;
    f.sandwich_error = "singular";
    const nlohmann::json j = io::fit_to_json(f);
    EXPECT_TRUE(j["std_errors"][0].is_null());
    EXPECT_EQ(j["param_names"].size(), static_cast<std::size_t>(p));
    EXPECT_EQ(j["sandwich_error"], "singular");
    const Theta back = io::theta_from_json(j);
    EXPECT_EQ((to_natural(back) - to_natural(f.theta_hat)).norm(), 0.0);
}
