#pragma once

#include "hra/rsm/anova.hpp"
#include "hra/rsm/model.hpp"

#include <iosfwd>
#include <span>
#include <vector>

namespace hra::rsm {

struct EliminationStep {
    ModelTerm removed;
    double p_value = 0.0;
    double residual_ss_after = 0.0;
};

struct EliminationResult {
    ModelSpec spec;
    std::vector<EliminationStep> steps;
};

// Repeatedly drops the removable term with the largest p-value above `alpha`
// and refits. Main effects stay while any interaction or quadratic of theirs
// survives. Ties on p-value go to the later term in canonical order.
EliminationResult backward_eliminate(const Design& design, const ModelSpec& full_spec, double alpha,
                                     const FactorCoding& coding);

struct TermEvidence {
    ModelTerm term;
    std::optional<double> p_value;
};

struct FactorEvidence {
    PsfId psf;
    std::vector<TermEvidence> terms;
};

struct ScreeningReport {
    std::vector<PsfId> eliminated;
    std::vector<PsfId> retained;
    std::vector<FactorEvidence> evidence;  // one entry per active PSF
};

// A PSF is eliminated iff no surviving term involves it. P-values are filled
// from `table` when given.
ScreeningReport screen_psfs(const ModelSpec& reduced, std::span<const PsfId> active,
                            const AnovaTable* table = nullptr);

// psf,letter,status,terms  (terms as "AD:0.0069 D^2:0.001")
void write_screening_csv(const ScreeningReport& report, std::ostream& out);

}  // namespace hra::rsm
