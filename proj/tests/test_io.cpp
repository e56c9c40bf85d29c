#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "bicoclust/io.hpp"
#include "test_support.hpp"

using namespace bicoclust;
namespace bt = bicoclust::testing;

namespace {

CsvTable parse(const std::string& text) {
    std::istringstream in(text);
    return parse_csv(in, "t.csv");
}

std::size_t count_of(const std::string& s, const std::string& needle) {
    std::size_t n = 0;
    for (auto pos = s.find(needle); pos != std::string::npos; pos = s.find(needle, pos + 1)) {
        ++n;
    }
    return n;
}

}  // namespace

TEST(Csv, PlainNumbers) {
    const CsvTable t = parse("1,2,3\n4,5,6\n");
    EXPECT_EQ(t.values.rows(), 2);
    EXPECT_EQ(t.values.cols(), 3);
    EXPECT_EQ(t.values(1, 2), 6.0);
    EXPECT_TRUE(t.col_names.empty());
    EXPECT_TRUE(t.row_names.empty());
    EXPECT_FALSE(t.any_missing());
    EXPECT_EQ(column_name(t, 0), "V1");
}

TEST(Csv, HeaderAndRowNames) {
    const CsvTable t = parse("\"\",a,b\nr1,1,2\nr2,3,4\n");
    EXPECT_EQ(t.col_names, (std::vector<std::string>{"a", "b"}));
    EXPECT_EQ(t.row_names, (std::vector<std::string>{"r1", "r2"}));
    EXPECT_EQ(t.values(1, 0), 3.0);
    const CsvTable u = parse("a,b\nr1,1,2\nr2,3,4\n");
    EXPECT_EQ(u.col_names, (std::vector<std::string>{"a", "b"}));
    EXPECT_EQ(u.row_names.size(), 2U);
}

TEST(Csv, MissingTokensAndBlankLines) {
    const CsvTable t = parse("x,y\n1,NA\n\n,2\nna,3\n");
    ASSERT_EQ(t.values.rows(), 3);
    EXPECT_TRUE(t.any_missing());
    EXPECT_FALSE(t.observed(0, 1));
    EXPECT_FALSE(t.observed(1, 0));
    EXPECT_FALSE(t.observed(2, 0));
    EXPECT_TRUE(t.observed(2, 1));
    EXPECT_EQ(t.data().num_missing(), 3);
}

TEST(Csv, ErrorsCarryLineAndColumn) {
    try {
        parse("a,b\n1,2\n3,x\n");
        FAIL() << "expected ParseError";
    } catch (const ParseError& e) {
        EXPECT_EQ(e.line(), 3U);
        EXPECT_EQ(e.column(), 2U);
        EXPECT_NE(std::string(e.what()).find("t.csv:3:2"), std::string::npos);
    }
    try {
        parse("1,2\n\n3\n");
        FAIL() << "expected ParseError";
    } catch (const ParseError& e) {
        EXPECT_EQ(e.line(), 3U);
        EXPECT_EQ(e.column(), 0U);
    }
    EXPECT_THROW(parse(""), ParseError);
    EXPECT_THROW(parse("a,b\n"), ParseError);
    EXPECT_THROW(parse("a,b,c\n1,2\n"), ParseError);
    EXPECT_THROW(parse("1,2\n3,inf\n"), ParseError);
    EXPECT_THROW(read_csv("/nonexistent/file.csv"), ParseError);
}

TEST(Csv, AcceptsSignsExponentsAndCrLf) {
    const CsvTable t = parse("+1.5,-2e-3\r\n 3 , 4E2\r\n");
    EXPECT_EQ(t.values(0, 0), 1.5);
    EXPECT_EQ(t.values(0, 1), -2e-3);
    EXPECT_EQ(t.values(1, 1), 400.0);
}

TEST(Csv, RoundTripIsExact) {
    Rng rng = make_rng(70);
    const Matrix M = bt::random_matrix(rng, 7, 5, 1e3);
    std::ostringstream os;
    write_matrix_csv(os, M, {"a", "b", "c", "d", "e"}, {"r1", "r2", "r3", "r4", "r5", "r6", "r7"});
    const CsvTable t = parse(os.str());
    EXPECT_EQ(t.values, M);
    EXPECT_EQ(t.row_names.size(), 7U);
    EXPECT_EQ(t.col_names.size(), 5U);
}

TEST(FormatDouble, ShortestRoundTrip) {
    EXPECT_EQ(format_double(0.1), "0.1");
    EXPECT_EQ(format_double(1.0), "1");
    EXPECT_EQ(format_double(-2.5e-10), "-2.5e-10");
    Rng rng = make_rng(71);
    for (int i = 0; i < 1000; ++i) {
        const double v = standard_normal(rng) * std::pow(10.0, uniform(rng, -30.0, 30.0));
        EXPECT_EQ(std::stod(format_double(v)), v);
    }
}

TEST(Config, Parse) {
    std::istringstream in("# comment\ngamma = 2.5\n\n  k-row=3   # trailing\nadaptive = true\n");
    const auto kv = parse_config(in);
    EXPECT_EQ(kv.size(), 3U);
    EXPECT_EQ(kv.at("gamma"), "2.5");
    EXPECT_EQ(kv.at("k-row"), "3");
    EXPECT_EQ(kv.at("adaptive"), "true");
}

TEST(Config, Errors) {
    std::istringstream a("gamma 2\n");
    try {
        parse_config(a, "c.cfg");
        FAIL() << "expected ParseError";
    } catch (const ParseError& e) {
        EXPECT_EQ(e.line(), 1U);
    }
    std::istringstream b("ok = 1\n = 2\n");
    EXPECT_THROW(parse_config(b), ParseError);
}

TEST(Json, NonFiniteBecomesNull) {
    EXPECT_TRUE(json_number(std::nan("")).is_null());
    EXPECT_TRUE(json_number(std::numeric_limits<double>::infinity()).is_null());
    EXPECT_EQ(json_number(1.5).get<double>(), 1.5);
    FitState st;
    st.objective_trace = {2.0, 1.0};
    st.final_objective = 0.5;
    st.iterations = 1;
    st.diagnostics.push_back(IterationRecord{});
    const auto j = to_json(st);
    EXPECT_EQ(j["objective_trace"].size(), 2U);
    EXPECT_EQ(j["diagnostics"].size(), 1U);
    EXPECT_EQ(j["final_objective"].get<double>(), 0.5);
}

TEST(PathCsv, GammaRowsAndSelection) {
    GammaSelection sel;
    sel.path = {{0.1, 3.0, true, 2, ""}, {1.0, 2.0, true, 3, ""}, {10.0, std::nan(""), false, 0, "boom"}};
    sel.index = 1;
    sel.gamma = 1.0;
    const std::string csv = gamma_path_csv(sel);
    EXPECT_EQ(count_of(csv, "\n"), 4U);
    EXPECT_NE(csv.find("1,2,1,3,1,\"\""), std::string::npos);
    EXPECT_NE(csv.find("10,NA,0,0,0,\"boom\""), std::string::npos);
}

TEST(StudyCsv, QuotedSettings) {
    std::vector<StudyRecord> recs{{"1", "n=p=30,sigma=2", 0, 7, "fixed", "bicluster_ari", 0.5}};
    const std::string csv = study_results_csv(recs);
    EXPECT_EQ(csv, "study,setting,replicate,seed,method,metric,value\n1,\"n=p=30,sigma=2\",0,7,fixed,bicluster_ari,0.5\n");
    const std::string row = csv.substr(csv.find('\n') + 1);
    EXPECT_EQ(detail::split_csv_line(row.substr(0, row.size() - 1)).size(), 7U);
}

TEST(Heatmap, Structure) {
    Matrix M(3, 2);
    M << 1, -1, 0, 2, -2, 0;
    const std::string svg = heatmap_svg(M, {1, 0, 1}, {0, 1}, 5.0);
    EXPECT_EQ(svg.rfind("<svg", 0), 0U);
    EXPECT_NE(svg.find("</svg>"), std::string::npos);
    EXPECT_EQ(count_of(svg, "<rect"), 6U);
    EXPECT_EQ(count_of(svg, "<line"), 2U);
    EXPECT_NE(svg.find("width=\"10\" height=\"15\""), std::string::npos);
    EXPECT_NE(svg.find("#ff0000"), std::string::npos);  // +2 is the largest magnitude
    EXPECT_NE(svg.find("#0000ff"), std::string::npos);
}

TEST(Heatmap, ZeroMatrixIsWhite) {
    const std::string svg = heatmap_svg(Matrix::Zero(2, 2), {0, 0}, {0, 0});
    EXPECT_EQ(count_of(svg, "#ffffff"), 4U);
    EXPECT_EQ(count_of(svg, "<line"), 0U);
}
