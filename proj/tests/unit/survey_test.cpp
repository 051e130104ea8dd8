#include "debtmine/error.hpp"
#include "debtmine/survey.hpp"
#include "debtmine/synth.hpp"

#include "../support.hpp"

#include <doctest.h>

#include <sstream>

using namespace debtmine;
using namespace debtmine::survey;

namespace {

const char* kSchema = R"(# test schema
Marital | categorical | demographic | Married;Single;Prefer not to answer | Prefer not to answer
Income | numeric-band | financial | Low;High;Don't know;Prefer not to answer | Don't know;Prefer not to answer
House | categorical | financial | Own outright;Rent;Don't know | Don't know
Q1 | likert | psychological | 1;2;3;4;5 |
Debt | categorical | target | None;Small;Large |
)";

std::shared_ptr<const SurveySchema> schema() {
    std::istringstream in(kSchema);
    return std::make_shared<const SurveySchema>(parse_schema(in));
}

Dataset sample() {
    std::istringstream in("id,Marital,Income,House,Q1,Debt\n"
                          "a,Married,Low,Own outright,1,None\n"
                          "b,Prefer not to answer,Don't know,Don't know,3,Small\n"
                          "c,Single,Prefer not to answer,Rent,5,Large\n"
                          "d,Single,High,Rent,2,Small\n"
                          "e,Married,Prefer not to answer,Don't know,4,None\n");
    return read_dataset(schema(), in);
}

} // namespace

TEST_CASE("schema parsing and lookup") {
    const auto s = schema();
    CHECK(s->size() == 5);
    CHECK(s->target_index() == 4);
    CHECK(s->index_of("House") == 2);
    CHECK_FALSE(s->find("Nope"));
    CHECK_THROWS_AS(s->index_of("Nope"), ValidationError);
    CHECK(s->group_indices(VariableGroup::financial) == std::vector<std::size_t>{1, 2});
    CHECK(s->variable(1).is_uncertain(2));
    CHECK_FALSE(s->variable(1).is_uncertain(0));

    std::ostringstream out;
    write_schema(*s, out);
    std::istringstream back(out.str());
    const auto again = parse_schema(back);
    REQUIRE(again.size() == s->size());
    for (std::size_t v = 0; v < s->size(); ++v) {
        CHECK(again.variable(v).name == s->variable(v).name);
        CHECK(again.variable(v).categories == s->variable(v).categories);
        CHECK(again.variable(v).uncertain_codes == s->variable(v).uncertain_codes);
    }
}

TEST_CASE("schema validation") {
    auto parse = [](const std::string& text) {
        std::istringstream in(text);
        return parse_schema(in);
    };
    CHECK_THROWS_AS(parse("A | categorical | demographic | x;y | z\nT | categorical | target | n;y |\n"),
                    ValidationError);
    CHECK_THROWS_AS(parse("A | categorical | demographic | x;y |\n"), ValidationError);
    CHECK_THROWS_AS(parse("A | categorical | demographic | x;y |\nA | categorical | target | n;y |\n"),
                    ValidationError);
    CHECK_THROWS_AS(parse("A | likert | psychological | 1 |\nT | categorical | target | n;y |\n"), ValidationError);
}

TEST_CASE("dataset read errors name row and column") {
    std::istringstream in("id,Marital,Income,House,Q1,Debt\na,Married,Low,Castle,1,None\n");
    try {
        read_dataset(schema(), in);
        FAIL("expected a validation error");
    } catch (const ValidationError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("House") != std::string::npos);
        CHECK(msg.find("1") != std::string::npos);
    }
    std::istringstream missing("id,Marital,Income,Q1,Debt\n");
    CHECK_THROWS_AS(read_dataset(schema(), missing), ValidationError);
}

TEST_CASE("dataset round trip through csv") {
    const auto d = sample();
    std::ostringstream out;
    write_dataset(d, out);
    std::istringstream in(out.str());
    CHECK(read_dataset(d.schema_ptr(), in) == d);
    CHECK(d.label(1, 0) == "Prefer not to answer");
}

TEST_CASE("uncertain counts and systematic non-response removal") {
    const auto d = sample();
    const auto counts = uncertain_counts(d);
    CHECK(counts == std::vector<std::size_t>{1, 3, 2, 0, 0});

    const std::vector<std::string> watch{"Marital", "Income", "House"};
    const auto cleaned = drop_systematic_nonresponse(d, watch, 2);
    CHECK(cleaned.report.removed == 2);
    CHECK(cleaned.report.removed_ids == std::vector<std::string>{"b", "e"});
    CHECK(cleaned.data.row_ids() == std::vector<std::string>{"a", "c", "d"});
    CHECK(cleaned.report.uncertain_before == std::vector<std::size_t>{1, 3, 2});
    CHECK(cleaned.report.uncertain_after == std::vector<std::size_t>{0, 1, 0});

    const auto none = drop_systematic_nonresponse(d, std::vector<std::string>{}, 1);
    CHECK(none.data == d);
    CHECK_THROWS_AS(drop_systematic_nonresponse(d, std::vector<std::string>{"Nope"}, 1), ValidationError);
}

TEST_CASE("encodings") {
    const auto d = sample();
    const std::vector<std::size_t> vars{0, 2};
    const auto full = encode(d, vars, Encoding::full_indicator);
    CHECK(full.values.cols() == 6);
    CHECK(full.values.rowwise().sum().isApprox(Eigen::VectorXd::Constant(5, 2.0)));
    const auto ref = encode(d, vars, Encoding::reference_dropped);
    CHECK(ref.values.cols() == 4);
    CHECK(ref.names.front() == "MaritalSingle");
    CHECK(ref.names.back() == "HouseDon.t.know");

    const std::vector<std::size_t> q{3};
    const auto lik = encode(d, q, Encoding::likert_numeric);
    CHECK(lik.values.col(0).sum() == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(lik.values(0, 0) == doctest::Approx(-2.0));
    CHECK_THROWS_AS(encode(d, vars, Encoding::likert_numeric), ValidationError);
}

TEST_CASE("dummy names follow make.names") {
    CHECK(dummy_name("House_Status", "Own outright") == "House_StatusOwn.outright");
    CHECK(dummy_name("Emp_Status", "retired") == "Emp_Statusretired");
    CHECK(dummy_name("Income", "10k-20k") == "Income10k.20k");
}

TEST_CASE("target labelling") {
    const auto d = sample();
    const auto two = label_target(d, ClassMode::two_class);
    CHECK(two.labels == std::vector<int>{0, 1, 1, 1, 0});
    CHECK(two.counts() == std::vector<std::size_t>{2, 3});
    const auto three = label_target(d, ClassMode::three_class);
    CHECK(three.split_category == 1);
    CHECK(three.labels == std::vector<int>{0, 1, 2, 1, 0});
    const auto explicit_split = label_target(d, ClassMode::three_class, "Large");
    CHECK(explicit_split.labels == std::vector<int>{0, 1, 1, 1, 0});
    CHECK_THROWS_AS(label_target(d, ClassMode::three_class, "None"), ValidationError);
    CHECK(parse_class_mode(to_string(ClassMode::three_class)) == ClassMode::three_class);
}

TEST_CASE("synthetic survey is reproducible and planted") {
    synth::SyntheticConfig cfg;
    cfg.n = 400;
    const auto a = synth::generate_synthetic_survey(cfg, 7);
    const auto b = synth::generate_synthetic_survey(cfg, 7);
    const auto c = synth::generate_synthetic_survey(cfg, 8);
    CHECK(a.data == b.data);
    CHECK_FALSE(a.data == c.data);
    CHECK(a.data.rows() == 400);
    CHECK(a.loadings.rows() == 28);
    CHECK(a.loadings.cols() == 5);
    CHECK(a.data.schema().group_indices(VariableGroup::psychological).size() == 28);

    // Non-responders carry the uncertain answers on the watched variables.
    const auto& s = a.data.schema();
    std::size_t hits_nr = 0, hits_rest = 0, nr = 0;
    for (std::size_t i = 0; i < a.data.rows(); ++i) {
        std::size_t h = 0;
        for (const auto& w : a.watch_list) {
            const auto v = s.index_of(w);
            h += s.variable(v).is_uncertain(static_cast<std::size_t>(a.data.value(i, v)));
        }
        if (a.systematic_nonresponder[i]) {
            hits_nr += h;
            ++nr;
        } else {
            hits_rest += h;
        }
    }
    CHECK(nr > 100);
    CHECK(static_cast<double>(hits_nr) / nr > 3.0);
    CHECK(static_cast<double>(hits_rest) / (a.data.rows() - nr) < 0.1);
}

TEST_CASE("implied latent correlation has unit diagonal") {
    Eigen::MatrixXd l(3, 1);
    l << 0.8, 0.6, 0.5;
    const auto r = synth::implied_latent_correlation(l);
    CHECK(r.diagonal().isApprox(Eigen::VectorXd::Ones(3)));
    CHECK(r(0, 1) == doctest::Approx(0.48));
}
