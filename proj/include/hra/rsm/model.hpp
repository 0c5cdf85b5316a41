#pragma once

// Polynomial response-surface models fitted by least squares in coded units.

#include "hra/dataset.hpp"
#include "hra/rsm/coding.hpp"

#include <compare>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace hra::rsm {

struct ModelTerm {
    enum class Kind : std::uint8_t { Intercept, Main, Interaction, Quadratic };

    Kind kind = Kind::Intercept;
    PsfId first = PsfId::AvailableTime;
    PsfId second = PsfId::AvailableTime;

    static ModelTerm intercept() { return {}; }
    static ModelTerm main(PsfId f) { return {Kind::Main, f, f}; }
    static ModelTerm interaction(PsfId a, PsfId b);  // canonical letter order; a != b
    static ModelTerm quadratic(PsfId f) { return {Kind::Quadratic, f, f}; }

    bool involves(PsfId f) const noexcept { return kind != Kind::Intercept && (first == f || second == f); }
    std::string label() const;  // "1", "A", "AD", "C^2"
    static ModelTerm parse(std::string_view label);

    // Intercept, mains, interactions, quadratics; letters within each.
    friend auto operator<=>(const ModelTerm&, const ModelTerm&) = default;
};

class ModelSpec {
public:
    // Sorts and de-duplicates; requires the intercept, hierarchy, and a
    // positive response power.
    explicit ModelSpec(std::vector<ModelTerm> terms, double response_power = 1.0);

    static ModelSpec full_quadratic(std::span<const PsfId> factors, double response_power);

    const std::vector<ModelTerm>& terms() const noexcept { return terms_; }
    double response_power() const noexcept { return response_power_; }
    bool contains(const ModelTerm& t) const noexcept;
    // A term can be dropped without breaking hierarchy.
    bool removable(const ModelTerm& t) const noexcept;
    ModelSpec without(const ModelTerm& t) const;
    std::vector<PsfId> factors() const;

    // "1, A, B, AD, C^2; power=3"
    std::string to_string() const;
    static ModelSpec parse(std::string_view text);

    friend bool operator==(const ModelSpec&, const ModelSpec&) = default;

private:
    std::vector<ModelTerm> terms_;
    double response_power_;
};

// The reduced quadratic reported for the bundled design (no term involves E).
ModelSpec reference_reduced_model();

// Dense row-major matrix.
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> values;

    double operator()(std::size_t r, std::size_t c) const { return values[r * cols + c]; }
    double& operator()(std::size_t r, std::size_t c) { return values[r * cols + c]; }
};

// Columns in ModelSpec term order, evaluated at coded levels.
Matrix model_matrix(const Design& design, const ModelSpec& spec, const FactorCoding& coding);

struct FitResult {
    ModelSpec spec;
    FactorCoding coding;
    std::vector<PsfId> factors;               // design factor order
    std::vector<double> coded_coefficients;   // per term
    std::vector<double> actual_coefficients;  // same terms, in actual units
    std::vector<double> response;             // transformed (response^power)
    std::vector<double> fitted;
    std::vector<double> residuals;
    std::vector<double> inverse_gram_diagonal;  // diag((X'X)^-1)
    double r_squared = 0.0;

    double residual_ss() const;
    double total_ss() const;
    std::optional<double> coefficient(const ModelTerm& t, bool actual_units = false) const;
};

// Throws RankDeficientError naming the collinear terms, InputError when there
// are not more runs than terms.
FitResult fit(const Design& design, const ModelSpec& spec, const FactorCoding& coding);

struct ResponsePrediction {
    double value = 0.0;         // back-transformed, clamped to [0, 100]
    double transformed = 0.0;   // polynomial value before the inverse transform
    bool clamped = false;       // negative transformed value or outside [0, 100]
    bool extrapolated = false;  // some coded level beyond the axial distance
};

// `point` holds actual-unit levels in design factor order.
ResponsePrediction predict_response(const FitResult& fit, std::span<const double> point);

// "Reliability^3 = +8.21E+05 +7.00E+05 * Available Time ..." in actual units.
std::string actual_equation(const FitResult& fit);

}  // namespace hra::rsm
