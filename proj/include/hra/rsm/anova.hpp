#pragma once

#include "hra/rsm/model.hpp"

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace hra::rsm {

enum class AnovaSource { Model, Term, Residual, LackOfFit, PureError, CorTotal };

struct AnovaRow {
    AnovaSource kind = AnovaSource::Model;
    std::optional<ModelTerm> term;
    double sum_of_squares = 0.0;
    int df = 0;
    std::optional<double> mean_square;
    std::optional<double> f_value;
    std::optional<double> p_value;

    std::string source() const;
};

struct AnovaTable {
    std::vector<AnovaRow> rows;

    const AnovaRow& row(AnovaSource kind) const;  // first row of that kind
    const AnovaRow* find(AnovaSource kind) const noexcept;
    const AnovaRow* term_row(const ModelTerm& term) const noexcept;
    bool lack_of_fit_available() const noexcept;
};

// Model and per-term partial (type III) sums of squares, each term on one df
// and tested against the residual mean square. Pure error pools runs with
// identical level vectors; lack of fit is the remainder of the residual and is
// tested against pure error. Without replicates the pure-error and
// lack-of-fit rows are omitted.
AnovaTable anova(const FitResult& fit, const Design& design);

// source,sum_of_squares,df,mean_square,f_value,p_value
void write_anova_csv(const AnovaTable& table, std::ostream& out);

}  // namespace hra::rsm
