#include "hra/rsm/coding.hpp"

#include "hra/ann.hpp"
#include "hra/error.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace hra::rsm {

FactorCoding::FactorCoding(std::vector<PsfId> factors, std::vector<FactorScale> scales, double axial)
    : factors_(std::move(factors)), scales_(std::move(scales)), axial_(axial) {
    if (factors_.size() != scales_.size()) throw InputError("coding needs one scale per factor");
    if (!std::is_sorted(factors_.begin(), factors_.end()) ||
        std::adjacent_find(factors_.begin(), factors_.end()) != factors_.end())
        throw InputError("coding factors must be distinct and in A..H order");
    for (std::size_t i = 0; i < scales_.size(); ++i) {
        if (!std::isfinite(scales_[i].center) || !(scales_[i].half_range > 0.0) || !std::isfinite(scales_[i].half_range))
            throw InputError(std::string("coding for factor ") + psf_letter(factors_[i]) + " needs a positive half range");
    }
    if (!(axial_ > 0.0) || !std::isfinite(axial_)) throw InputError("axial distance must be positive");
}

FactorCoding FactorCoding::uniform(std::vector<PsfId> factors, FactorScale scale, double axial) {
    std::vector<FactorScale> scales(factors.size(), scale);
    return FactorCoding(std::move(factors), std::move(scales), axial);
}

const FactorScale& FactorCoding::scale(PsfId psf) const {
    auto it = std::find(factors_.begin(), factors_.end(), psf);
    if (it == factors_.end()) throw InputError(std::string("coding has no factor ") + psf_letter(psf));
    return scales_[static_cast<std::size_t>(it - factors_.begin())];
}

double FactorCoding::coded(PsfId psf, double actual) const {
    const auto& s = scale(psf);
    return (actual - s.center) / s.half_range;
}

double FactorCoding::actual(PsfId psf, double coded) const {
    const auto& s = scale(psf);
    return s.center + coded * s.half_range;
}

FactorCoding FactorCoding::restricted_to(std::span<const PsfId> factors) const {
    std::vector<PsfId> ids(factors.begin(), factors.end());
    std::sort(ids.begin(), ids.end());
    std::vector<FactorScale> scales;
    for (PsfId f : ids) scales.push_back(scale(f));
    return FactorCoding(std::move(ids), std::move(scales), axial_);
}

FactorCoding infer_coding(const Design& design) {
    const auto& factors = design.factors();
    const auto& rows = design.rows();
    if (rows.empty()) throw InputError("cannot infer coding from an empty design");

    std::map<std::vector<double>, int> counts;
    for (const auto& r : rows) ++counts[r.levels];
    const std::vector<double>* center = nullptr;
    int best = 1;
    for (const auto& [levels, n] : counts) {
        if (n > best) {
            best = n;
            center = &levels;
        }
    }

    std::vector<FactorScale> scales(factors.size());
    for (std::size_t j = 0; j < factors.size(); ++j) {
        double lo = INFINITY;
        double hi = -INFINITY;
        for (const auto& r : rows) {
            bool factorial = true;
            if (center != nullptr) {
                for (std::size_t i = 0; i < r.levels.size() && factorial; ++i)
                    factorial = std::fabs(r.levels[i] - (*center)[i]) > 1e-12;
            }
            if (!factorial) continue;
            lo = std::min(lo, r.levels[j]);
            hi = std::max(hi, r.levels[j]);
        }
        if (!(hi > lo))
            throw InputError(std::string("cannot infer coding: factor ") + psf_letter(factors[j]) +
                             " has no two-level factorial portion");
        scales[j] = FactorScale{(lo + hi) / 2.0, (hi - lo) / 2.0};
    }

    double axial = 1.0;
    for (const auto& r : rows) {
        for (std::size_t j = 0; j < factors.size(); ++j) {
            axial = std::max(axial, std::fabs((r.levels[j] - scales[j].center) / scales[j].half_range));
        }
    }
    return FactorCoding(factors, std::move(scales), axial);
}

namespace {

// Generator words for the fractional factorials, as bit masks over the base
// factors (bit 0 = first factor).
struct Fraction {
    int base_factors;
    std::vector<unsigned> generators;
};

Fraction fraction_for(std::size_t k) {
    switch (k) {
        case 2: return {2, {}};
        case 3: return {3, {}};
        case 4: return {4, {}};
        case 5: return {4, {0b1111}};                 // E = ABCD
        case 6: return {5, {0b11111}};                // F = ABCDE
        case 7: return {6, {0b111111}};               // G = ABCDEF
        case 8: return {6, {0b001111, 0b110011}};     // G = ABCD, H = ABEF
        default: throw InputError("central composite designs support 2 to 8 factors, got " + std::to_string(k));
    }
}

}  // namespace

Design generate_ccd(const std::vector<PsfId>& factors, const FactorCoding& coding, int n_center) {
    const auto fraction = fraction_for(factors.size());
    if (n_center < 0) throw InputError("center point count must be non-negative");
    std::vector<PsfId> sorted = factors;
    std::sort(sorted.begin(), sorted.end());
    const std::size_t k = sorted.size();
    const double alpha = coding.axial();

    std::vector<std::vector<double>> coded;
    const unsigned n_factorial = 1u << fraction.base_factors;
    for (unsigned run = 0; run < n_factorial; ++run) {
        std::vector<double> z(k);
        for (int b = 0; b < fraction.base_factors; ++b) z[static_cast<std::size_t>(b)] = (run >> b) & 1u ? 1.0 : -1.0;
        for (std::size_t g = 0; g < fraction.generators.size(); ++g) {
            double product = 1.0;
            for (int b = 0; b < fraction.base_factors; ++b) {
                if ((fraction.generators[g] >> b) & 1u) product *= z[static_cast<std::size_t>(b)];
            }
            z[static_cast<std::size_t>(fraction.base_factors) + g] = product;
        }
        coded.push_back(std::move(z));
    }
    for (std::size_t j = 0; j < k; ++j) {
        for (double sign : {-1.0, 1.0}) {
            std::vector<double> z(k, 0.0);
            z[j] = sign * alpha;
            coded.push_back(std::move(z));
        }
    }
    for (int c = 0; c < n_center; ++c) coded.emplace_back(k, 0.0);

    std::vector<DesignRow> rows;
    int order = 0;
    for (const auto& z : coded) {
        DesignRow r;
        r.std_order = r.run_order = ++order;
        for (std::size_t j = 0; j < k; ++j) r.levels.push_back(coding.actual(sorted[j], z[j]));
        rows.push_back(std::move(r));
    }
    return Design(std::move(sorted), std::move(rows));
}

Design evaluate_design(const Design& design, const ann::TrainedPredictor& predictor) {
    if (design.factors() != predictor.active_psfs())
        throw InputError("design factors " + psf_letters(design.factors()) + " do not match predictor inputs " +
                         psf_letters(predictor.active_psfs()));
    constexpr double kSlack = 1e-9;
    std::vector<double> responses;
    responses.reserve(design.size());
    for (const auto& r : design.rows()) {
        std::vector<double> x = r.levels;
        for (std::size_t j = 0; j < x.size(); ++j) {
            if (x[j] < -kSlack || x[j] > 1.0 + kSlack)
                throw InputError("design run " + std::to_string(r.run_order) + ": level of factor " +
                                 psf_letter(design.factors()[j]) + " outside [0, 1]");
            x[j] = std::clamp(x[j], 0.0, 1.0);
        }
        responses.push_back(100.0 * (1.0 - predictor.predict_normalized(x)));
    }
    return design.with_responses(responses);
}

}  // namespace hra::rsm
