#include "hra/rsm/anova.hpp"

#include "hra/error.hpp"
#include "hra/format.hpp"
#include "hra/stats.hpp"

#include <map>
#include <numeric>
#include <ostream>

namespace hra::rsm {

std::string AnovaRow::source() const {
    switch (kind) {
        case AnovaSource::Model: return "Model";
        case AnovaSource::Term: return term ? term->label() : "?";
        case AnovaSource::Residual: return "Residual";
        case AnovaSource::LackOfFit: return "Lack of Fit";
        case AnovaSource::PureError: return "Pure Error";
        case AnovaSource::CorTotal: return "Cor Total";
    }
    return {};
}

const AnovaRow* AnovaTable::find(AnovaSource kind) const noexcept {
    for (const auto& r : rows) {
        if (r.kind == kind) return &r;
    }
    return nullptr;
}

const AnovaRow& AnovaTable::row(AnovaSource kind) const {
    const auto* r = find(kind);
    if (r == nullptr) throw InputError("ANOVA table has no such row");
    return *r;
}

const AnovaRow* AnovaTable::term_row(const ModelTerm& term) const noexcept {
    for (const auto& r : rows) {
        if (r.kind == AnovaSource::Term && r.term && *r.term == term) return &r;
    }
    return nullptr;
}

bool AnovaTable::lack_of_fit_available() const noexcept {
    const auto* lof = find(AnovaSource::LackOfFit);
    return lof != nullptr && lof->f_value.has_value();
}

namespace {

// F and p for `ms` against `ms_error`; empty when the ratio is undefined.
// An error mean square at rounding level (relative to the total variance) is
// treated as zero.
void set_test(AnovaRow& row, double ms_error, int df_error, double noise_floor) {
    if (!row.mean_square || df_error <= 0 || !(ms_error > noise_floor)) return;
    row.f_value = *row.mean_square / ms_error;
    row.p_value = stats::f_upper_tail(*row.f_value, row.df, df_error);
}

}  // namespace

AnovaTable anova(const FitResult& fit, const Design& design) {
    const auto n = static_cast<int>(fit.response.size());
    const auto p = static_cast<int>(fit.spec.terms().size());
    if (design.size() != fit.response.size()) throw InputError("ANOVA design does not match the fit");

    const double ss_total = fit.total_ss();
    const double ss_resid = fit.residual_ss();
    const int df_resid = n - p;
    const double ms_resid = df_resid > 0 ? ss_resid / df_resid : 0.0;
    const double floor = n > 1 ? 1e-13 * ss_total / (n - 1) : 0.0;

    AnovaTable table;
    AnovaRow model{AnovaSource::Model, std::nullopt, ss_total - ss_resid, p - 1, std::nullopt, std::nullopt, std::nullopt};
    if (model.df > 0) model.mean_square = model.sum_of_squares / model.df;
    set_test(model, ms_resid, df_resid, floor);
    table.rows.push_back(model);

    for (std::size_t k = 0; k < fit.spec.terms().size(); ++k) {
        const auto& t = fit.spec.terms()[k];
        if (t.kind == ModelTerm::Kind::Intercept) continue;
        const double b = fit.coded_coefficients[k];
        AnovaRow row{AnovaSource::Term, t, b * b / fit.inverse_gram_diagonal[k], 1, std::nullopt, std::nullopt, std::nullopt};
        row.mean_square = row.sum_of_squares;
        set_test(row, ms_resid, df_resid, floor);
        table.rows.push_back(row);
    }

    AnovaRow resid{AnovaSource::Residual, std::nullopt, ss_resid, df_resid, std::nullopt, std::nullopt, std::nullopt};
    if (df_resid > 0) resid.mean_square = ms_resid;
    table.rows.push_back(resid);

    // Pure error: spread of the transformed response within groups of runs at
    // identical levels.
    std::map<std::vector<double>, std::vector<std::size_t>> groups;
    for (std::size_t i = 0; i < design.size(); ++i) groups[design.rows()[i].levels].push_back(i);
    double ss_pure = 0.0;
    int df_pure = 0;
    for (const auto& [levels, members] : groups) {
        if (members.size() < 2) continue;
        double mean = 0.0;
        for (auto i : members) mean += fit.response[i];
        mean /= static_cast<double>(members.size());
        for (auto i : members) ss_pure += (fit.response[i] - mean) * (fit.response[i] - mean);
        df_pure += static_cast<int>(members.size()) - 1;
    }
    if (df_pure > 0) {
        AnovaRow lof{AnovaSource::LackOfFit, std::nullopt, ss_resid - ss_pure, df_resid - df_pure,
                     std::nullopt, std::nullopt, std::nullopt};
        AnovaRow pure{AnovaSource::PureError, std::nullopt, ss_pure, df_pure, ss_pure / df_pure, std::nullopt, std::nullopt};
        if (lof.df > 0) {
            lof.mean_square = lof.sum_of_squares / lof.df;
            set_test(lof, *pure.mean_square, df_pure, floor);
        }
        table.rows.push_back(lof);
        table.rows.push_back(pure);
    }

    table.rows.push_back(AnovaRow{AnovaSource::CorTotal, std::nullopt, ss_total, n - 1, std::nullopt, std::nullopt, std::nullopt});
    return table;
}

void write_anova_csv(const AnovaTable& table, std::ostream& out) {
    auto opt = [](const std::optional<double>& v) { return v ? format_full(*v) : std::string(); };
    out << "source,sum_of_squares,df,mean_square,f_value,p_value\n";
    for (const auto& r : table.rows) {
        out << r.source() << ',' << format_full(r.sum_of_squares) << ',' << r.df << ',' << opt(r.mean_square) << ','
            << opt(r.f_value) << ',' << opt(r.p_value) << '\n';
    }
    if (!out) throw InputError("failed writing ANOVA table");
}

}  // namespace hra::rsm
