#include "hra/rsm/screening.hpp"

#include "hra/error.hpp"
#include "hra/format.hpp"

#include <algorithm>
#include <ostream>

namespace hra::rsm {

EliminationResult backward_eliminate(const Design& design, const ModelSpec& full_spec, double alpha,
                                     const FactorCoding& coding) {
    if (!(alpha > 0.0 && alpha < 1.0)) throw InputError("alpha must lie in (0, 1)");
    EliminationResult result{full_spec, {}};
    while (true) {
        const auto f = fit(design, result.spec, coding);
        const auto table = anova(f, design);

        std::optional<ModelTerm> worst;
        double worst_p = alpha;
        for (const auto& t : result.spec.terms()) {
            if (!result.spec.removable(t)) continue;
            const auto* row = table.term_row(t);
            if (row == nullptr || !row->p_value) continue;
            // Terms iterate in canonical order, so >= hands ties to the later one.
            if (*row->p_value > alpha && *row->p_value >= worst_p) {
                worst = t;
                worst_p = *row->p_value;
            }
        }
        if (!worst) return result;

        result.spec = result.spec.without(*worst);
        const auto refit = fit(design, result.spec, coding);
        result.steps.push_back(EliminationStep{*worst, worst_p, refit.residual_ss()});
    }
}

ScreeningReport screen_psfs(const ModelSpec& reduced, std::span<const PsfId> active, const AnovaTable* table) {
    ScreeningReport report;
    std::vector<PsfId> sorted(active.begin(), active.end());
    std::sort(sorted.begin(), sorted.end());
    for (PsfId psf : sorted) {
        FactorEvidence evidence{psf, {}};
        for (const auto& t : reduced.terms()) {
            if (!t.involves(psf)) continue;
            std::optional<double> p;
            if (table != nullptr) {
                if (const auto* row = table->term_row(t)) p = row->p_value;
            }
            evidence.terms.push_back(TermEvidence{t, p});
        }
        (evidence.terms.empty() ? report.eliminated : report.retained).push_back(psf);
        report.evidence.push_back(std::move(evidence));
    }
    return report;
}

void write_screening_csv(const ScreeningReport& report, std::ostream& out) {
    out << "psf,letter,status,terms\n";
    for (const auto& e : report.evidence) {
        const bool eliminated = std::find(report.eliminated.begin(), report.eliminated.end(), e.psf) != report.eliminated.end();
        out << psf_name(e.psf) << ',' << psf_letter(e.psf) << ',' << (eliminated ? "eliminated" : "retained") << ',';
        for (std::size_t i = 0; i < e.terms.size(); ++i) {
            out << (i ? " " : "") << e.terms[i].term.label() << ':'
                << (e.terms[i].p_value ? format_full(*e.terms[i].p_value) : std::string("NA"));
        }
        out << '\n';
    }
    if (!out) throw InputError("failed writing screening report");
}

}  // namespace hra::rsm
