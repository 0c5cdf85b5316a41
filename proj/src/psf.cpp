#include "hra/psf.hpp"

#include "embedded_data.hpp"
#include "hra/error.hpp"
#include "text.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <istream>
#include <numeric>
#include <sstream>

namespace hra {

namespace {

constexpr std::array<std::string_view, kPsfCount> kNames = {
    "Available Time", "Stress",     "Complexity",       "Experience And Training",
    "Procedures",     "Ergonomics", "Fitness For Duty", "Work Process",
};

constexpr std::array<std::string_view, kPsfCount> kColumns = {
    "available_time", "stress",     "complexity",       "experience_training",
    "procedures",     "ergonomics", "fitness_for_duty", "work_process",
};

}  // namespace

std::string_view psf_name(PsfId id) noexcept { return kNames[psf_index(id)]; }
std::string_view psf_column(PsfId id) noexcept { return kColumns[psf_index(id)]; }

std::optional<PsfId> psf_from_letter(char letter) noexcept {
    if (letter >= 'a' && letter <= 'h') letter = static_cast<char>(letter - 'a' + 'A');
    if (letter < 'A' || letter > 'H') return std::nullopt;
    return kAllPsfs[static_cast<std::size_t>(letter - 'A')];
}

std::optional<PsfId> psf_from_column(std::string_view column) noexcept {
    for (PsfId id : kAllPsfs) {
        if (psf_column(id) == column) return id;
    }
    return std::nullopt;
}

std::string psf_letters(std::span<const PsfId> psfs) {
    std::string out;
    for (PsfId id : psfs) out.push_back(psf_letter(id));
    return out;
}

std::vector<PsfId> parse_psf_letters(std::string_view letters) {
    std::vector<PsfId> out;
    for (char c : letters) {
        if (c == ' ' || c == ',') continue;
        auto id = psf_from_letter(c);
        if (!id) throw InputError(std::string("unknown PSF letter '") + c + "'");
        if (std::find(out.begin(), out.end(), *id) != out.end())
            throw InputError(std::string("duplicate PSF letter '") + c + "'");
        out.push_back(*id);
    }
    std::sort(out.begin(), out.end());
    return out;
}

Probability::Probability(double value) : value_(value) {
    if (!(value >= 0.0 && value <= 1.0))
        throw InputError("probability out of [0, 1]: " + std::to_string(value));
}

PsfVector::PsfVector(const std::array<double, kPsfCount>& values) : values_(values) {
    for (PsfId id : kAllPsfs) {
        const double v = values_[psf_index(id)];
        if (!std::isfinite(v) || v <= 0.0) {
            throw InputError("PSF multiplier for " + std::string(psf_name(id)) +
                             " must be positive and finite, got " + std::to_string(v));
        }
    }
}

PsfVector PsfVector::with(PsfId id, double multiplier) const {
    auto values = values_;
    values[psf_index(id)] = multiplier;
    return PsfVector(values);
}

ErrorTally::ErrorTally(std::uint64_t occurred, std::uint64_t potential)
    : occurred_(occurred), potential_(potential) {
    if (potential == 0) throw InputError("error tally needs at least one potential error");
    if (occurred > potential)
        throw InputError("occurred errors (" + std::to_string(occurred) + ") exceed potential errors (" +
                         std::to_string(potential) + ")");
}

Probability nominal_hep(const ErrorTally& tally) {
    return Probability(static_cast<double>(tally.occurred()) / static_cast<double>(tally.potential()));
}

double total_psf_impact(const PsfVector& v) {
    return std::accumulate(v.values().begin(), v.values().end(), 1.0, std::multiplies<>());
}

Probability composite_hep(Probability nominal, double psf_total) {
    if (!std::isfinite(psf_total) || psf_total <= 0.0)
        throw InputError("PSF total must be positive and finite, got " + std::to_string(psf_total));
    const double n = nominal.value();
    const double value = n * psf_total / (n * (psf_total - 1.0) + 1.0);
    // Rounding can push the quotient a hair past 1 when n == 1.
    return Probability(std::min(value, 1.0));
}

// ---------------------------------------------------------------------------

MultiplierTable::MultiplierTable(PsfId psf, std::vector<MultiplierRow> rows)
    : psf_(psf), rows_(std::move(rows)) {
    const std::string table_name = std::string(1, psf_letter(psf)) + " (" + std::string(psf_name(psf)) + ")";
    for (std::size_t i = 0; i < rows_.size(); ++i) {
        auto& row = rows_[i];
        row.label = std::string(detail::trim(row.label));
        if (row.label.empty()) throw InputError("empty level label in table " + table_name);
        for (std::size_t j = 0; j < i; ++j) {
            if (detail::iequals(rows_[j].label, row.label))
                throw InputError("duplicate level '" + row.label + "' in table " + table_name);
        }
        for (const Multiplier* m : {&row.action, &row.diagnosis}) {
            if (const double* v = std::get_if<double>(m); v && !(std::isfinite(*v) && *v > 0.0))
                throw InputError("multiplier for level '" + row.label + "' in table " + table_name +
                                 " must be positive");
        }
    }
    for (const auto& row : rows_) {
        if (!row.alias_of) continue;
        const MultiplierRow* target = find(*row.alias_of);
        if (target == nullptr)
            throw InputError("level '" + row.label + "' in table " + table_name + " aliases unknown level '" +
                             *row.alias_of + "'");
        if (target->alias_of)
            throw InputError("level '" + row.label + "' in table " + table_name + " aliases another alias");
    }
}

const MultiplierRow* MultiplierTable::find(std::string_view label) const noexcept {
    label = detail::trim(label);
    for (const auto& row : rows_) {
        if (detail::iequals(row.label, label)) return &row;
    }
    return nullptr;
}

Multiplier lookup_multiplier(const MultiplierTable& table, std::string_view level_label, MultiplierMode mode) {
    const MultiplierRow* row = table.find(level_label);
    if (row == nullptr) {
        throw LookupError("table " + std::string(1, psf_letter(table.psf())) + " (" +
                          std::string(psf_name(table.psf())) + ") has no level '" + std::string(level_label) + "'");
    }
    if (row->alias_of) row = table.find(*row->alias_of);
    return mode == MultiplierMode::Action ? row->action : row->diagnosis;
}

MultiplierTables load_multiplier_tables(std::istream& in) {
    std::map<PsfId, std::vector<MultiplierRow>> rows;
    detail::LineReader reader(in);
    std::string line;
    while (reader.next(line)) {
        const auto content = detail::trim(line);
        if (content.empty() || content.front() == '#') continue;
        const auto where = "multiplier file line " + std::to_string(reader.line_number());
        const auto fields = detail::split(content, ',');
        if (fields.size() != 4)
            throw InputError(where + ": expected psf_letter,level_label,action_multiplier,diagnosis_multiplier");
        if (fields[0].size() != 1 || !psf_from_letter(fields[0][0]))
            throw InputError(where + ": unknown PSF letter '" + fields[0] + "'");

        MultiplierRow row;
        row.label = fields[1];
        std::optional<std::string> alias;
        auto parse_cell = [&](const std::string& cell) -> Multiplier {
            if (cell == "FAIL") return FailureCertain{};
            if (!cell.empty() && cell.front() == '=') {
                std::string target(detail::trim(std::string_view(cell).substr(1)));
                if (alias && !detail::iequals(*alias, target))
                    throw InputError(where + ": action and diagnosis alias different levels");
                alias = target;
                return 1.0;
            }
            auto v = detail::parse_double(cell);
            if (!v) throw InputError(where + ": bad multiplier '" + cell + "'");
            return *v;
        };
        row.action = parse_cell(fields[2]);
        row.diagnosis = parse_cell(fields[3]);
        row.alias_of = alias;
        rows[*psf_from_letter(fields[0][0])].push_back(std::move(row));
    }

    MultiplierTables tables;
    for (auto& [psf, table_rows] : rows) tables.emplace(psf, MultiplierTable(psf, std::move(table_rows)));
    return tables;
}

MultiplierTables default_multiplier_tables() {
    std::istringstream in{std::string(detail::embedded_file("spar_h_multipliers.csv"))};
    return load_multiplier_tables(in);
}

// ---------------------------------------------------------------------------

NormalizationResult normalize(std::span<const PsfVector> vectors) {
    if (vectors.empty()) throw InputError("cannot normalize an empty list of PSF vectors");
    std::array<double, kPsfCount> maxima = vectors.front().values();
    for (const auto& v : vectors) {
        for (std::size_t j = 0; j < kPsfCount; ++j) maxima[j] = std::max(maxima[j], v.values()[j]);
    }
    NormalizationResult result{{}, PsfVector(maxima)};
    result.normalized.reserve(vectors.size());
    for (const auto& v : vectors) result.normalized.push_back(normalize_with(v, result.maxima));
    return result;
}

PsfVector normalize_with(const PsfVector& v, const PsfVector& maxima) {
    std::array<double, kPsfCount> out{};
    for (std::size_t j = 0; j < kPsfCount; ++j) out[j] = v.values()[j] / maxima.values()[j];
    return PsfVector(out);
}

}  // namespace hra
