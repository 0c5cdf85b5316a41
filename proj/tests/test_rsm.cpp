#include "doctest.h"

#include "hra/ann.hpp"
#include "hra/dataset.hpp"
#include "hra/error.hpp"
#include "hra/rsm/anova.hpp"
#include "hra/rsm/coding.hpp"
#include "hra/rsm/model.hpp"
#include "hra/rsm/screening.hpp"
#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <numeric>
#include <random>
#include <sstream>

using namespace hra;
using namespace hra::rsm;
using hra::testing::normal_equations;
using hra::testing::oracle_matrix;
using hra::testing::term_value;

namespace {

constexpr PsfId A = PsfId::AvailableTime;
constexpr PsfId B = PsfId::Stress;
constexpr PsfId C = PsfId::Complexity;
constexpr PsfId D = PsfId::ExperienceTraining;
constexpr PsfId E = PsfId::Procedures;

Design random_design(std::mt19937_64& rng, const std::vector<PsfId>& factors, std::size_t n) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<DesignRow> rows;
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<double> levels;
        for (std::size_t j = 0; j < factors.size(); ++j) levels.push_back(u(rng));
        rows.push_back(DesignRow{static_cast<int>(i + 1), static_cast<int>(i + 1), levels, 50.0 + 40.0 * u(rng)});
    }
    return Design(factors, rows);
}

// Random hierarchical model over `factors`.
ModelSpec random_spec(std::mt19937_64& rng, const std::vector<PsfId>& factors, double power) {
    const auto full = ModelSpec::full_quadratic(factors, power);
    std::vector<ModelTerm> terms;
    std::bernoulli_distribution keep(0.6);
    for (const auto& t : full.terms())
        if (t.kind != ModelTerm::Kind::Main && t.kind != ModelTerm::Kind::Intercept && keep(rng)) terms.push_back(t);
    terms.push_back(ModelTerm::intercept());
    for (PsfId f : factors) terms.push_back(ModelTerm::main(f));
    return ModelSpec(terms, power);
}

Design with_response(const Design& d, const std::function<double(const std::vector<double>&)>& f) {
    std::vector<double> y;
    for (const auto& r : d.rows()) y.push_back(f(r.levels));
    return d.with_responses(y);
}

class ConstantPredictor {
public:
    static ann::TrainedPredictor make(std::vector<PsfId> active, double hep) {
        const auto t = ann::Topology::for_inputs(active.size());
        auto w = ann::WeightSet::zeros(t);
        w.output_bias = std::log(hep / (1.0 - hep));
        return ann::TrainedPredictor(t, {ann::EnsembleMember{1, w, 0.0}}, std::move(active), PsfVector::nominal());
    }
};

}  // namespace

// ---------------------------------------------------------------------------
// Terms and specs

TEST_CASE("model terms") {
    CHECK(ModelTerm::interaction(D, A).label() == "AD");
    CHECK(ModelTerm::quadratic(C).label() == "C^2");
    CHECK(ModelTerm::intercept().label() == "1");
    for (const char* s : {"1", "A", "AD", "C^2", "H"}) CHECK(ModelTerm::parse(s).label() == s);
    CHECK(ModelTerm::parse("DA") == ModelTerm::interaction(A, D));
    CHECK(ModelTerm::parse("AA") == ModelTerm::quadratic(A));
    CHECK_THROWS_AS(ModelTerm::parse("Z"), InputError);
    CHECK(ModelTerm::interaction(A, D).involves(D));
    CHECK_FALSE(ModelTerm::intercept().involves(A));
}

TEST_CASE("model specs enforce hierarchy") {
    CHECK_THROWS_AS(ModelSpec::parse("1, A, AD"), InputError);
    CHECK_THROWS_AS(ModelSpec::parse("A, B"), InputError);
    CHECK_THROWS_AS(ModelSpec({ModelTerm::intercept()}, 0.0), InputError);
    const auto ref = reference_reduced_model();
    CHECK(ref.terms().size() == 16);
    CHECK(ref.response_power() == 3.0);
    CHECK(ModelSpec::parse(ref.to_string()) == ref);
    CHECK_FALSE(ref.removable(ModelTerm::main(D)));
    CHECK(ref.removable(ModelTerm::interaction(A, D)));
    CHECK(ref.without(ModelTerm::interaction(B, PsfId::FitnessForDuty)).terms().size() == 15);
}

// ---------------------------------------------------------------------------
// Designs and coding

TEST_CASE("central composite designs") {
    const auto two = generate_ccd({A, B}, FactorCoding::uniform({A, B}), 4);
    CHECK(two.size() == 12);
    CHECK_FALSE(two.fully_evaluated());

    const std::vector<PsfId> eight(kAllPsfs.begin(), kAllPsfs.end());
    const auto coding = FactorCoding::uniform(eight, {0.5, 0.3}, 5.0 / 3.0);
    const auto big = generate_ccd(eight, coding, 6);
    std::vector<double> a_levels;
    for (const auto& r : big.rows()) a_levels.push_back(r.levels[0]);
    CHECK(*std::min_element(a_levels.begin(), a_levels.end()) == doctest::Approx(0.0).scale(1.0).epsilon(1e-12));
    CHECK(*std::max_element(a_levels.begin(), a_levels.end()) == doctest::Approx(1.0).epsilon(1e-12));

    const std::map<std::size_t, std::size_t> factorial_runs = {{2, 4}, {3, 8}, {4, 16}, {5, 16}, {6, 32}, {7, 64}, {8, 64}};
    for (const auto& [k, n_factorial] : factorial_runs) {
        const std::vector<PsfId> fs(kAllPsfs.begin(), kAllPsfs.begin() + static_cast<std::ptrdiff_t>(k));
        const auto cod = FactorCoding::uniform(fs);
        const auto d = generate_ccd(fs, cod, 3);
        CHECK(d.size() == n_factorial + 2 * k + 3);
        std::vector<std::vector<double>> factorial;
        for (const auto& r : d.rows()) {
            std::vector<double> coded;
            for (std::size_t j = 0; j < k; ++j) coded.push_back(cod.coded(fs[j], r.levels[j]));
            const auto unit = std::count_if(coded.begin(), coded.end(), [](double c) { return std::fabs(std::fabs(c) - 1.0) < 1e-9; });
            const auto zero = std::count_if(coded.begin(), coded.end(), [](double c) { return std::fabs(c) < 1e-9; });
            const auto axial = std::count_if(coded.begin(), coded.end(), [&](double c) { return std::fabs(std::fabs(c) - cod.axial()) < 1e-9; });
            const bool is_factorial = unit == static_cast<long>(k);
            const bool is_axial = axial == 1 && zero == static_cast<long>(k) - 1;
            const bool is_center = zero == static_cast<long>(k);
            CHECK((is_factorial || is_axial || is_center));
            if (is_factorial) {
                for (double& c : coded) c = std::round(c);
                factorial.push_back(coded);
            }
        }
        CHECK(factorial.size() == n_factorial);
        // Resolution V: mains and two-factor interactions are mutually orthogonal.
        std::vector<std::vector<double>> cols;
        for (std::size_t i = 0; i < k; ++i) {
            std::vector<double> c;
            for (const auto& r : factorial) c.push_back(r[i]);
            cols.push_back(c);
            for (std::size_t j = i + 1; j < k; ++j) {
                std::vector<double> cij;
                for (const auto& r : factorial) cij.push_back(r[i] * r[j]);
                cols.push_back(cij);
            }
        }
        for (std::size_t i = 0; i < cols.size(); ++i)
            for (std::size_t j = i + 1; j < cols.size(); ++j)
                CHECK(std::inner_product(cols[i].begin(), cols[i].end(), cols[j].begin(), 0.0) == 0.0);
    }
    CHECK_THROWS_AS(generate_ccd({A}, FactorCoding::uniform({A}), 2), InputError);
}

TEST_CASE("coding inferred from the bundled design") {
    const auto d = bundled_table4();
    const auto c = infer_coding(d);
    CHECK(c.factors() == d.factors());
    CHECK(c.scale(A).center == doctest::Approx(0.5));
    CHECK(c.scale(A).half_range == doctest::Approx(0.3));
    CHECK(c.coded(A, 0.2) == doctest::Approx(-1.0));
    CHECK(c.coded(A, 0.8) == doctest::Approx(1.0));
    CHECK(c.actual(A, c.coded(A, 0.37)) == doctest::Approx(0.37));
    CHECK(c.axial() >= 5.0 / 3.0 - 1e-9);
    for (PsfId f : d.factors()) CHECK(c.scale(f).half_range > 0.0);
    const auto sub = c.restricted_to(std::vector<PsfId>{A, C});
    CHECK(sub.factors() == std::vector<PsfId>{A, C});
    CHECK(sub.scale(C) == c.scale(C));
}

TEST_CASE("design evaluation through a predictor") {
    const std::vector<PsfId> fs = {A, C};
    const auto d = generate_ccd(fs, FactorCoding::uniform(fs), 2);
    const auto evaluated = evaluate_design(d, ConstantPredictor::make(fs, 0.2));
    for (double r : evaluated.responses()) CHECK(r == doctest::Approx(80.0).epsilon(1e-12));
    CHECK(evaluated.rows()[d.size() - 1].response == evaluated.rows()[d.size() - 2].response);

    CHECK_THROWS_AS(evaluate_design(d, ConstantPredictor::make({A, B}, 0.2)), InputError);
    const Design outside({A, C}, {DesignRow{1, 1, {1.2, 0.5}, std::nullopt}});
    CHECK_THROWS_AS(evaluate_design(outside, ConstantPredictor::make(fs, 0.2)), InputError);
}

// ---------------------------------------------------------------------------
// Fitting

TEST_CASE("intercept-only fit of a constant response") {
    const std::vector<PsfId> fs = {A, B};
    const auto d = with_response(generate_ccd(fs, FactorCoding::uniform(fs), 3), [](const auto&) { return 1.0; });
    const auto f = fit(d, ModelSpec({ModelTerm::intercept()}, 3.0), FactorCoding::uniform(fs));
    CHECK(f.coded_coefficients[0] == doctest::Approx(1.0));
    for (double r : f.residuals) CHECK(std::fabs(r) < 1e-12);
}

TEST_CASE("noise-free quadratic is recovered exactly") {
    const std::vector<PsfId> fs = {A, B, C};
    const auto coding = FactorCoding::uniform(fs);
    // Response^2 is a known quadratic in coded units.
    auto truth = [&](const std::vector<double>& x) {
        const double a = coding.coded(A, x[0]), b = coding.coded(B, x[1]), c = coding.coded(C, x[2]);
        return 900.0 + 120.0 * a - 45.0 * b + 10.0 * c + 30.0 * a * b - 8.0 * b * c + 25.0 * a * a + 12.0 * c * c;
    };
    const auto d = with_response(generate_ccd(fs, coding, 4), [&](const auto& x) { return std::sqrt(truth(x)); });
    const auto spec = ModelSpec::parse("1, A, B, C, AB, BC, A^2, C^2; power=2");
    const auto f = fit(d, spec, coding);
    const std::map<std::string, double> expected = {{"1", 900}, {"A", 120}, {"B", -45}, {"C", 10},
                                                    {"AB", 30}, {"BC", -8}, {"A^2", 25}, {"C^2", 12}};
    for (const auto& [label, value] : expected)
        CHECK(*f.coefficient(ModelTerm::parse(label)) == doctest::Approx(value).epsilon(1e-8));
    CHECK(f.r_squared == doctest::Approx(1.0));

    // Off-design points.
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> u(0.1, 0.9);
    for (int i = 0; i < 50; ++i) {
        const std::vector<double> x = {u(rng), u(rng), u(rng)};
        const auto pr = predict_response(f, x);
        CHECK(pr.transformed == doctest::Approx(truth(x)).epsilon(1e-6));
        CHECK_FALSE(pr.clamped);
    }
}

TEST_CASE("prediction at design rows equals the fitted value") {
    const auto d = bundled_table4();
    const auto f = fit(d, reference_reduced_model(), infer_coding(d));
    for (std::size_t i = 0; i < d.size(); ++i) {
        const auto pr = predict_response(f, d.rows()[i].levels);
        CHECK(pr.transformed == doctest::Approx(f.fitted[i]).epsilon(1e-12));
        CHECK(pr.value == doctest::Approx(std::cbrt(f.fitted[i])).epsilon(1e-12));
        CHECK(pr.value >= 0.0);
        CHECK(pr.value <= 100.0);
        CHECK_FALSE(pr.extrapolated);
    }
}

TEST_CASE("OLS agrees with a normal-equations solve; residuals are orthogonal") {
    std::mt19937_64 rng(2718);
    for (int trial = 0; trial < 40; ++trial) {
        const std::size_t k = 2 + static_cast<std::size_t>(trial % 3);
        const std::vector<PsfId> fs(kAllPsfs.begin(), kAllPsfs.begin() + static_cast<std::ptrdiff_t>(k));
        const auto spec = random_spec(rng, fs, trial % 2 == 0 ? 1.0 : 2.0);
        const auto d = random_design(rng, fs, spec.terms().size() + 6);
        const auto coding = FactorCoding::uniform(fs, {0.45, 0.35});
        const auto f = fit(d, spec, coding);
        const auto x = oracle_matrix(d, spec, coding);
        const auto b = normal_equations(x, f.response);
        for (std::size_t j = 0; j < b.size(); ++j)
            CHECK(f.coded_coefficients[j] == doctest::Approx(b[j]).epsilon(1e-8).scale(1e-8 * std::fabs(b[0])));
        for (std::size_t j = 0; j < b.size(); ++j) {
            double dot = 0.0, norm = 0.0;
            for (std::size_t i = 0; i < x.size(); ++i) {
                dot += x[i][j] * f.residuals[i];
                norm += std::fabs(x[i][j] * f.response[i]);
            }
            CHECK(std::fabs(dot) <= 1e-10 * norm);
        }
    }
}

TEST_CASE("coded and actual coefficients describe the same surface") {
    std::mt19937_64 rng(31);
    const std::vector<PsfId> fs = {A, B, C};
    const auto d = random_design(rng, fs, 30);
    const auto spec = ModelSpec::full_quadratic(fs, 1.0);
    const auto f1 = fit(d, spec, FactorCoding::uniform(fs, {0.5, 0.3}));
    const auto f2 = fit(d, spec, FactorCoding::uniform(fs, {0.2, 0.9}));
    for (std::size_t i = 0; i < d.size(); ++i) CHECK(f1.fitted[i] == doctest::Approx(f2.fitted[i]).epsilon(1e-9));
    for (std::size_t j = 0; j < spec.terms().size(); ++j)
        CHECK(f1.actual_coefficients[j] == doctest::Approx(f2.actual_coefficients[j]).epsilon(1e-7));
    CHECK(f1.residual_ss() == doctest::Approx(f2.residual_ss()).epsilon(1e-9));
    // Evaluate the actual-unit polynomial directly.
    const auto& row = d.rows()[3];
    double y = 0.0;
    for (std::size_t j = 0; j < spec.terms().size(); ++j)
        y += f1.actual_coefficients[j] * term_value(spec.terms()[j], fs, row.levels);
    CHECK(y == doctest::Approx(f1.fitted[3]).epsilon(1e-9));
}

TEST_CASE("rank deficiency and too few runs") {
    std::vector<DesignRow> rows;
    for (int i = 0; i < 12; ++i) {
        const double v = 0.1 + 0.07 * i;
        rows.push_back(DesignRow{i + 1, i + 1, {v, v, 0.5 + 0.3 * std::sin(i)}, 50.0 + i});
    }
    const Design d({A, B, C}, rows);
    const auto coding = FactorCoding::uniform({A, B, C});
    try {
        fit(d, ModelSpec::parse("1, A, B, C"), coding);
        FAIL("expected RankDeficientError");
    } catch (const RankDeficientError& e) {
        CHECK_FALSE(e.collinear_terms().empty());
        CHECK(std::string(e.what()).find("B") != std::string::npos);
    }
    CHECK_THROWS_AS(fit(Design({A}, {rows[0], rows[1]}), ModelSpec::parse("1, A"), FactorCoding::uniform({A})),
                    InputError);
}

// ---------------------------------------------------------------------------
// ANOVA

TEST_CASE("ANOVA of the bundled design under the reported reduced model") {
    const auto d = bundled_table4();
    const auto f = fit(d, reference_reduced_model(), infer_coding(d));
    const auto t = anova(f, d);
    CHECK(t.row(AnovaSource::Model).df == 15);
    CHECK(t.row(AnovaSource::Residual).df == 44);
    CHECK(t.row(AnovaSource::LackOfFit).df == 39);
    CHECK(t.row(AnovaSource::PureError).df == 5);
    CHECK(t.row(AnovaSource::CorTotal).df == 59);
    CHECK(std::fabs(*t.row(AnovaSource::Model).f_value / 4.65 - 1.0) <= 0.05);
    CHECK(std::fabs(*t.row(AnovaSource::LackOfFit).f_value / 0.38 - 1.0) <= 0.25);
    CHECK(std::fabs(t.row(AnovaSource::CorTotal).sum_of_squares / 1.31493e12 - 1.0) <= 0.01);
    CHECK(std::fabs(f.r_squared - 8.0622e11 / 1.31493e12) <= 0.02);
    // Hierarchy keeps D although its own test is weak.
    CHECK(*t.term_row(ModelTerm::main(D))->p_value > 0.05);
    CHECK(*t.term_row(ModelTerm::interaction(A, D))->p_value < 0.05);
}

TEST_CASE("ANOVA identities hold") {
    std::mt19937_64 rng(99);
    for (int trial = 0; trial < 20; ++trial) {
        const std::vector<PsfId> fs = {A, B, C};
        const auto spec = random_spec(rng, fs, 1.0);
        auto d = random_design(rng, fs, 24);
        // Replicate a few runs so pure error exists.
        auto rows = d.rows();
        for (int r = 0; r < 4; ++r) {
            auto copy = rows[static_cast<std::size_t>(r)];
            copy.response = *copy.response + (r % 2 == 0 ? 1.5 : -0.7);
            copy.std_order = copy.run_order = static_cast<int>(rows.size()) + 1;
            rows.push_back(copy);
        }
        d = Design(fs, rows);
        const auto f = fit(d, spec, FactorCoding::uniform(fs));
        const auto t = anova(f, d);
        const auto& model = t.row(AnovaSource::Model);
        const auto& resid = t.row(AnovaSource::Residual);
        const auto& total = t.row(AnovaSource::CorTotal);
        CHECK(model.sum_of_squares + resid.sum_of_squares == doctest::Approx(total.sum_of_squares).epsilon(1e-6));
        CHECK(model.df + resid.df == total.df);
        const auto& lof = t.row(AnovaSource::LackOfFit);
        const auto& pure = t.row(AnovaSource::PureError);
        CHECK(lof.sum_of_squares + pure.sum_of_squares == doctest::Approx(resid.sum_of_squares).epsilon(1e-6));
        CHECK(lof.df + pure.df == resid.df);
        CHECK(pure.df == 4);
        // A term's partial SS is the residual increase from dropping it.
        for (const auto& term : spec.terms()) {
            if (term.kind == ModelTerm::Kind::Intercept || !spec.removable(term)) continue;
            const auto reduced = fit(d, spec.without(term), FactorCoding::uniform(fs));
            CHECK(t.term_row(term)->sum_of_squares ==
                  doctest::Approx(reduced.residual_ss() - f.residual_ss()).epsilon(1e-6).scale(1e-9 * total.sum_of_squares));
        }
    }
}

TEST_CASE("ANOVA without replicates omits pure error") {
    std::mt19937_64 rng(1);
    const auto d = random_design(rng, {A, B}, 12);
    const auto t = anova(fit(d, ModelSpec::full_quadratic(std::vector<PsfId>{A, B}, 1.0), FactorCoding::uniform({A, B})), d);
    CHECK(t.find(AnovaSource::PureError) == nullptr);
    CHECK_FALSE(t.lack_of_fit_available());
    std::ostringstream out;
    write_anova_csv(t, out);
    CHECK(out.str().rfind("source,sum_of_squares,df,mean_square,f_value,p_value\n", 0) == 0);
}

// ---------------------------------------------------------------------------
// Elimination and screening

TEST_CASE("backward elimination keeps only a planted main effect") {
    const std::vector<PsfId> fs = {A, B, C};
    const auto coding = FactorCoding::uniform(fs);
    const auto base = generate_ccd(fs, coding, 4);
    const auto full = ModelSpec::full_quadratic(fs, 1.0);
    // Noise with no component along any model column.
    std::mt19937_64 rng(12);
    std::normal_distribution<double> z(0.0, 1.0);
    std::vector<double> noise(base.size());
    for (double& v : noise) v = z(rng);
    const auto x = oracle_matrix(base, full, coding);
    const auto proj = normal_equations(x, noise);
    std::vector<double> y;
    for (std::size_t i = 0; i < base.size(); ++i) {
        double fitted = 0.0;
        for (std::size_t j = 0; j < proj.size(); ++j) fitted += x[i][j] * proj[j];
        y.push_back(60.0 + 12.0 * coding.coded(A, base.rows()[i].levels[0]) + (noise[i] - fitted));
    }
    const auto d = base.with_responses(y);
    const auto r = backward_eliminate(d, full, 0.05, coding);
    CHECK(r.spec == ModelSpec::parse("1, A; power=1"));
    for (std::size_t s = 0; s < r.steps.size(); ++s) {
        CHECK(r.steps[s].p_value > 0.05);
        if (s > 0) CHECK(r.steps[s].residual_ss_after >= r.steps[s - 1].residual_ss_after * (1 - 1e-12));
    }
    // With the raw noise left in, every term has p < 1, so an alpha just
    // above the largest p removes nothing.
    std::vector<double> raw;
    for (std::size_t i = 0; i < base.size(); ++i)
        raw.push_back(60.0 + 12.0 * coding.coded(A, base.rows()[i].levels[0]) + noise[i]);
    const auto noisy = base.with_responses(raw);
    const auto full_table = anova(fit(noisy, full, coding), noisy);
    double max_p = 0.0;
    for (const auto& row : full_table.rows)
        if (row.p_value) max_p = std::max(max_p, *row.p_value);
    REQUIRE(max_p < 0.999);
    const auto nothing = backward_eliminate(noisy, full, 0.999, coding);
    CHECK(nothing.spec == full);
    CHECK(nothing.steps.empty());
    CHECK_THROWS_AS(backward_eliminate(d, full, 0.0, coding), InputError);
}

TEST_CASE("elimination on the bundled design drops every Procedures term") {
    const auto d = bundled_table4();
    const auto r = backward_eliminate(d, ModelSpec::full_quadratic(d.factors(), 3.0), 0.05, infer_coding(d));
    for (const auto& t : r.spec.terms()) CHECK_FALSE(t.involves(E));
    for (std::size_t s = 1; s < r.steps.size(); ++s)
        CHECK(r.steps[s].residual_ss_after >= r.steps[s - 1].residual_ss_after * (1 - 1e-12));
    // Hierarchy: a main effect leaves only after all of its higher terms.
    for (const auto& t : r.spec.terms()) {
        if (t.kind == ModelTerm::Kind::Interaction || t.kind == ModelTerm::Kind::Quadratic) {
            CHECK(r.spec.contains(ModelTerm::main(t.first)));
            CHECK(r.spec.contains(ModelTerm::main(t.second)));
        }
    }
}

TEST_CASE("screening") {
    const std::vector<PsfId> all(kAllPsfs.begin(), kAllPsfs.end());
    const auto ref = screen_psfs(reference_reduced_model(), all);
    CHECK(ref.eliminated == std::vector<PsfId>{E});
    CHECK(ref.retained.size() == 7);

    const auto none = screen_psfs(ModelSpec({ModelTerm::intercept()}), all);
    CHECK(none.eliminated == all);
    CHECK(none.retained.empty());

    const auto full = screen_psfs(ModelSpec::full_quadratic(all, 3.0), all);
    CHECK(full.eliminated.empty());

    const auto d = bundled_table4();
    const auto f = fit(d, reference_reduced_model(), infer_coding(d));
    const auto t = anova(f, d);
    const auto with_p = screen_psfs(reference_reduced_model(), all, &t);
    REQUIRE(with_p.evidence.size() == 8);
    const auto& a_terms = with_p.evidence[0].terms;
    CHECK(a_terms.size() == 3);  // A, AD, AF
    for (const auto& te : a_terms) CHECK(te.p_value.has_value());
    std::ostringstream out;
    write_screening_csv(with_p, out);
    CHECK(out.str().find("Procedures,E,eliminated") != std::string::npos);
}
