#pragma once

#include "hra/dataset.hpp"
#include "hra/psf.hpp"

#include <span>
#include <vector>

namespace hra::ann {
class TrainedPredictor;
}

namespace hra::rsm {

// Axial distance of the bundled design (levels 0.00/1.00 around 0.50 +- 0.30).
inline constexpr double kDefaultAxial = 5.0 / 3.0;

struct FactorScale {
    double center = 0.5;
    double half_range = 0.3;

    friend bool operator==(const FactorScale&, const FactorScale&) = default;
};

// coded = (actual - center) / half_range, per factor.
class FactorCoding {
public:
    FactorCoding(std::vector<PsfId> factors, std::vector<FactorScale> scales, double axial = kDefaultAxial);

    static FactorCoding uniform(std::vector<PsfId> factors, FactorScale scale = {}, double axial = kDefaultAxial);

    const std::vector<PsfId>& factors() const noexcept { return factors_; }
    const std::vector<FactorScale>& scales() const noexcept { return scales_; }
    double axial() const noexcept { return axial_; }

    const FactorScale& scale(PsfId psf) const;
    double coded(PsfId psf, double actual) const;
    double actual(PsfId psf, double coded) const;

    // Same scales for a subset of the factors.
    FactorCoding restricted_to(std::span<const PsfId> factors) const;

    friend bool operator==(const FactorCoding&, const FactorCoding&) = default;

private:
    std::vector<PsfId> factors_;
    std::vector<FactorScale> scales_;
    double axial_;
};

// Reads the coding off a central composite design: the factorial runs (no
// coordinate at the replicated center) give each factor's low/high levels,
// which map to -1/+1. The axial distance is the largest |coded| level.
// Without replicated center runs the column range maps to [-1, 1].
FactorCoding infer_coding(const Design& design);

// Two-level resolution-V (or full) factorial at +-1, two axial runs per factor
// at +-axial, then `n_center` center runs. Run order equals standard order;
// responses are unset. Supports 2..8 factors.
Design generate_ccd(const std::vector<PsfId>& factors, const FactorCoding& coding, int n_center);

// Fills every response with 100 * (1 - ensemble HEP). Design factors must
// match the predictor's active PSFs and levels must lie in [0, 1].
Design evaluate_design(const Design& design, const ann::TrainedPredictor& predictor);

}  // namespace hra::rsm
