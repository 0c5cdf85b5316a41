#include "hra/rsm/model.hpp"

#include "hra/error.hpp"
#include "hra/format.hpp"
#include "text.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <numeric>

namespace hra::rsm {

ModelTerm ModelTerm::interaction(PsfId a, PsfId b) {
    if (a == b) throw InputError(std::string("interaction needs two distinct factors, got ") + psf_letter(a) + psf_letter(b));
    if (b < a) std::swap(a, b);
    return {Kind::Interaction, a, b};
}

std::string ModelTerm::label() const {
    switch (kind) {
        case Kind::Intercept: return "1";
        case Kind::Main: return std::string(1, psf_letter(first));
        case Kind::Interaction: return std::string{psf_letter(first), psf_letter(second)};
        case Kind::Quadratic: return std::string(1, psf_letter(first)) + "^2";
    }
    return {};
}

ModelTerm ModelTerm::parse(std::string_view label) {
    const auto s = detail::trim(label);
    auto letter = [&](char c) {
        auto id = psf_from_letter(c);
        if (!id || c < 'A') throw InputError("unknown model term '" + std::string(s) + "'");
        return *id;
    };
    if (s == "1") return intercept();
    if (s.size() == 1) return main(letter(s[0]));
    if (s.size() == 3 && s.substr(1) == "^2") return quadratic(letter(s[0]));
    if (s.size() == 2) {
        const auto a = letter(s[0]);
        const auto b = letter(s[1]);
        return a == b ? quadratic(a) : interaction(a, b);
    }
    throw InputError("unknown model term '" + std::string(s) + "'");
}

// ---------------------------------------------------------------------------

ModelSpec::ModelSpec(std::vector<ModelTerm> terms, double response_power)
    : terms_(std::move(terms)), response_power_(response_power) {
    std::sort(terms_.begin(), terms_.end());
    terms_.erase(std::unique(terms_.begin(), terms_.end()), terms_.end());
    if (terms_.empty() || terms_.front().kind != ModelTerm::Kind::Intercept)
        throw InputError("model must contain the intercept");
    if (!(response_power > 0.0) || !std::isfinite(response_power))
        throw InputError("response power must be positive");
    for (const auto& t : terms_) {
        if (t.kind == ModelTerm::Kind::Interaction || t.kind == ModelTerm::Kind::Quadratic) {
            for (PsfId parent : {t.first, t.second}) {
                if (!contains(ModelTerm::main(parent)))
                    throw InputError("model is not hierarchical: " + t.label() + " needs " +
                                     ModelTerm::main(parent).label());
            }
        }
    }
}

ModelSpec ModelSpec::full_quadratic(std::span<const PsfId> factors, double response_power) {
    std::vector<PsfId> f(factors.begin(), factors.end());
    std::sort(f.begin(), f.end());
    std::vector<ModelTerm> terms{ModelTerm::intercept()};
    for (PsfId a : f) terms.push_back(ModelTerm::main(a));
    for (std::size_t i = 0; i < f.size(); ++i) {
        for (std::size_t j = i + 1; j < f.size(); ++j) terms.push_back(ModelTerm::interaction(f[i], f[j]));
    }
    for (PsfId a : f) terms.push_back(ModelTerm::quadratic(a));
    return ModelSpec(std::move(terms), response_power);
}

bool ModelSpec::contains(const ModelTerm& t) const noexcept {
    return std::binary_search(terms_.begin(), terms_.end(), t);
}

bool ModelSpec::removable(const ModelTerm& t) const noexcept {
    if (t.kind == ModelTerm::Kind::Intercept || !contains(t)) return false;
    if (t.kind != ModelTerm::Kind::Main) return true;
    return std::none_of(terms_.begin(), terms_.end(), [&](const ModelTerm& u) {
        return u.kind != ModelTerm::Kind::Main && u.involves(t.first);
    });
}

ModelSpec ModelSpec::without(const ModelTerm& t) const {
    std::vector<ModelTerm> kept;
    std::copy_if(terms_.begin(), terms_.end(), std::back_inserter(kept), [&](const ModelTerm& u) { return !(u == t); });
    return ModelSpec(std::move(kept), response_power_);
}

std::vector<PsfId> ModelSpec::factors() const {
    std::vector<PsfId> out;
    for (const auto& t : terms_) {
        if (t.kind == ModelTerm::Kind::Main) out.push_back(t.first);
    }
    return out;
}

std::string ModelSpec::to_string() const {
    std::string s;
    for (const auto& t : terms_) {
        if (!s.empty()) s += ", ";
        s += t.label();
    }
    return s + "; power=" + format_full(response_power_);
}

ModelSpec ModelSpec::parse(std::string_view text) {
    const auto semi = text.find(';');
    double power = 1.0;
    if (semi != std::string_view::npos) {
        const auto tail = detail::trim(text.substr(semi + 1));
        if (tail.substr(0, 6) != "power=") throw InputError("model spec: expected 'power=<value>' after ';'");
        auto v = detail::parse_double(tail.substr(6));
        if (!v) throw InputError("model spec: bad power '" + std::string(tail.substr(6)) + "'");
        power = *v;
        text = text.substr(0, semi);
    }
    std::vector<ModelTerm> terms;
    for (const auto& label : detail::split(text, ',')) {
        if (!label.empty()) terms.push_back(ModelTerm::parse(label));
    }
    return ModelSpec(std::move(terms), power);
}

ModelSpec reference_reduced_model() {
    return ModelSpec::parse("1, A, B, C, D, F, G, H, AD, AF, BD, BF, BG, DF, C^2, D^2; power=3");
}

// ---------------------------------------------------------------------------

namespace {

double term_value(const ModelTerm& t, std::span<const double> z, const std::vector<std::size_t>& position) {
    switch (t.kind) {
        case ModelTerm::Kind::Intercept: return 1.0;
        case ModelTerm::Kind::Main: return z[position[psf_index(t.first)]];
        case ModelTerm::Kind::Interaction: return z[position[psf_index(t.first)]] * z[position[psf_index(t.second)]];
        case ModelTerm::Kind::Quadratic: {
            const double v = z[position[psf_index(t.first)]];
            return v * v;
        }
    }
    return 0.0;
}

// Index of each PSF within the design factors (npos when absent).
std::vector<std::size_t> factor_positions(const std::vector<PsfId>& factors, const ModelSpec& spec) {
    std::vector<std::size_t> position(kPsfCount, static_cast<std::size_t>(-1));
    for (std::size_t j = 0; j < factors.size(); ++j) position[psf_index(factors[j])] = j;
    for (PsfId f : spec.factors()) {
        if (position[psf_index(f)] == static_cast<std::size_t>(-1))
            throw InputError(std::string("model term references factor ") + psf_letter(f) + " absent from the design");
    }
    return position;
}

std::vector<double> coded_levels(const std::vector<PsfId>& factors, const FactorCoding& coding,
                                 std::span<const double> actual) {
    std::vector<double> z(actual.size());
    for (std::size_t j = 0; j < actual.size(); ++j) z[j] = coding.coded(factors[j], actual[j]);
    return z;
}

Eigen::MatrixXd to_eigen(const Matrix& m) {
    Eigen::MatrixXd out(static_cast<Eigen::Index>(m.rows), static_cast<Eigen::Index>(m.cols));
    for (std::size_t r = 0; r < m.rows; ++r) {
        for (std::size_t c = 0; c < m.cols; ++c) out(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = m(r, c);
    }
    return out;
}

constexpr double kRankThreshold = 1e-10;

Eigen::Index numeric_rank(const Eigen::MatrixXd& x) {
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(x);
    qr.setThreshold(kRankThreshold);
    return qr.rank();
}

}  // namespace

Matrix model_matrix(const Design& design, const ModelSpec& spec, const FactorCoding& coding) {
    const auto position = factor_positions(design.factors(), spec);
    Matrix m{design.size(), spec.terms().size(), {}};
    m.values.reserve(m.rows * m.cols);
    for (const auto& row : design.rows()) {
        const auto z = coded_levels(design.factors(), coding, row.levels);
        for (const auto& t : spec.terms()) m.values.push_back(term_value(t, z, position));
    }
    return m;
}

double FitResult::residual_ss() const {
    return std::inner_product(residuals.begin(), residuals.end(), residuals.begin(), 0.0);
}

double FitResult::total_ss() const {
    const double mean = std::accumulate(response.begin(), response.end(), 0.0) / static_cast<double>(response.size());
    double ss = 0.0;
    for (double y : response) ss += (y - mean) * (y - mean);
    return ss;
}

std::optional<double> FitResult::coefficient(const ModelTerm& t, bool actual_units) const {
    const auto& terms = spec.terms();
    auto it = std::lower_bound(terms.begin(), terms.end(), t);
    if (it == terms.end() || !(*it == t)) return std::nullopt;
    const auto k = static_cast<std::size_t>(it - terms.begin());
    return actual_units ? actual_coefficients[k] : coded_coefficients[k];
}

FitResult fit(const Design& design, const ModelSpec& spec, const FactorCoding& coding) {
    const auto m = model_matrix(design, spec, coding);
    const auto p = m.cols;
    if (m.rows <= p)
        throw InputError("fit needs more runs (" + std::to_string(m.rows) + ") than model terms (" + std::to_string(p) + ")");

    FitResult result{spec, coding, design.factors(), {}, {}, {}, {}, {}, {}, 0.0};
    for (double r : design.responses()) {
        const double y = std::pow(r, spec.response_power());
        if (!std::isfinite(y)) throw InputError("transformed response is not finite");
        result.response.push_back(y);
    }

    const Eigen::MatrixXd x = to_eigen(m);
    const Eigen::Map<const Eigen::VectorXd> y(result.response.data(), static_cast<Eigen::Index>(result.response.size()));
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(x);
    qr.setThreshold(kRankThreshold);
    if (qr.rank() < static_cast<Eigen::Index>(p)) {
        // Walk the columns in term order; a column that adds no rank is
        // collinear with the terms before it.
        std::vector<std::string> collinear;
        std::vector<Eigen::Index> kept;
        for (std::size_t k = 0; k < p; ++k) {
            Eigen::MatrixXd sub(x.rows(), static_cast<Eigen::Index>(kept.size() + 1));
            for (std::size_t c = 0; c < kept.size(); ++c) sub.col(static_cast<Eigen::Index>(c)) = x.col(kept[c]);
            sub.col(static_cast<Eigen::Index>(kept.size())) = x.col(static_cast<Eigen::Index>(k));
            if (numeric_rank(sub) > static_cast<Eigen::Index>(kept.size())) {
                kept.push_back(static_cast<Eigen::Index>(k));
            } else {
                collinear.push_back(spec.terms()[k].label());
            }
        }
        std::string names;
        for (const auto& c : collinear) names += (names.empty() ? "" : ", ") + c;
        throw RankDeficientError("model matrix is rank deficient; collinear terms: " + names, collinear);
    }

    const Eigen::VectorXd beta = qr.solve(y);
    const Eigen::VectorXd fitted = x * beta;

    // diag((X'X)^-1) = diag(P (R'R)^-1 P')
    const auto pi = static_cast<Eigen::Index>(p);
    const Eigen::MatrixXd r = qr.matrixR().topLeftCorner(pi, pi).triangularView<Eigen::Upper>();
    const Eigen::MatrixXd r_inv =
        r.triangularView<Eigen::Upper>().solve(Eigen::MatrixXd::Identity(pi, pi));
    const Eigen::MatrixXd gram_inv = r_inv * r_inv.transpose();
    result.inverse_gram_diagonal.assign(p, 0.0);
    const auto& perm = qr.colsPermutation().indices();
    for (Eigen::Index i = 0; i < pi; ++i) result.inverse_gram_diagonal[static_cast<std::size_t>(perm[i])] = gram_inv(i, i);

    result.coded_coefficients.assign(beta.data(), beta.data() + beta.size());
    result.fitted.assign(fitted.data(), fitted.data() + fitted.size());
    for (std::size_t i = 0; i < result.response.size(); ++i) result.residuals.push_back(result.response[i] - result.fitted[i]);
    const double sst = result.total_ss();
    result.r_squared = sst > 0.0 ? 1.0 - result.residual_ss() / sst : 1.0;

    // Expand each coded term into actual units: z = a x + b with a = 1/h,
    // b = -c/h. Hierarchy guarantees every lower-order monomial is a term.
    std::map<ModelTerm, double> actual;
    for (const auto& t : spec.terms()) actual[t] = 0.0;
    auto slope = [&](PsfId f) { return 1.0 / coding.scale(f).half_range; };
    auto offset = [&](PsfId f) { return -coding.scale(f).center / coding.scale(f).half_range; };
    for (std::size_t k = 0; k < p; ++k) {
        const auto& t = spec.terms()[k];
        const double b = result.coded_coefficients[k];
        switch (t.kind) {
            case ModelTerm::Kind::Intercept: actual[t] += b; break;
            case ModelTerm::Kind::Main:
                actual[t] += b * slope(t.first);
                actual[ModelTerm::intercept()] += b * offset(t.first);
                break;
            case ModelTerm::Kind::Interaction: {
                const double ai = slope(t.first), bi = offset(t.first);
                const double aj = slope(t.second), bj = offset(t.second);
                actual[t] += b * ai * aj;
                actual[ModelTerm::main(t.first)] += b * ai * bj;
                actual[ModelTerm::main(t.second)] += b * bi * aj;
                actual[ModelTerm::intercept()] += b * bi * bj;
                break;
            }
            case ModelTerm::Kind::Quadratic: {
                const double a = slope(t.first), o = offset(t.first);
                actual[t] += b * a * a;
                actual[ModelTerm::main(t.first)] += 2.0 * b * a * o;
                actual[ModelTerm::intercept()] += b * o * o;
                break;
            }
        }
    }
    for (const auto& t : spec.terms()) result.actual_coefficients.push_back(actual[t]);
    return result;
}

ResponsePrediction predict_response(const FitResult& f, std::span<const double> point) {
    if (point.size() != f.factors.size()) throw InputError("prediction point has the wrong number of levels");
    const auto position = factor_positions(f.factors, f.spec);

    ResponsePrediction out;
    for (std::size_t k = 0; k < f.spec.terms().size(); ++k)
        out.transformed += f.actual_coefficients[k] * term_value(f.spec.terms()[k], point, position);
    for (std::size_t j = 0; j < point.size(); ++j) {
        if (std::fabs(f.coding.coded(f.factors[j], point[j])) > f.coding.axial() + 1e-9) out.extrapolated = true;
    }
    if (out.transformed < 0.0) {
        out.value = 0.0;
        out.clamped = true;
        return out;
    }
    out.value = std::pow(out.transformed, 1.0 / f.spec.response_power());
    if (out.value > 100.0) {
        out.value = 100.0;
        out.clamped = true;
    }
    return out;
}

std::string actual_equation(const FitResult& f) {
    auto name = [](PsfId id) { return std::string(psf_name(id)); };
    std::string s = "Reliability^" + format_full(f.spec.response_power()) + " =";
    for (std::size_t k = 0; k < f.spec.terms().size(); ++k) {
        const auto& t = f.spec.terms()[k];
        char buf[32];
        std::snprintf(buf, sizeof buf, " %+.5E", f.actual_coefficients[k]);
        s += buf;
        switch (t.kind) {
            case ModelTerm::Kind::Intercept: break;
            case ModelTerm::Kind::Main: s += " * " + name(t.first); break;
            case ModelTerm::Kind::Interaction: s += " * " + name(t.first) + " * " + name(t.second); break;
            case ModelTerm::Kind::Quadratic: s += " * " + name(t.first) + "^2"; break;
        }
    }
    return s;
}

}  // namespace hra::rsm
