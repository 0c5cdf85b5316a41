#include "hra/dataset.hpp"

#include "embedded_data.hpp"
#include "hra/error.hpp"
#include "hra/format.hpp"
#include "text.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>

namespace hra {

namespace {

std::string expected_observation_header() {
    std::string h = "id";
    for (PsfId id : kAllPsfs) h += "," + std::string(psf_column(id));
    return h + ",hep[,trials]";
}

std::string cell_error(std::size_t row, const std::string& column, const std::string& what) {
    return "row " + std::to_string(row) + ", column '" + column + "': " + what;
}

}  // namespace

ObservationSet::ObservationSet(std::vector<Instance> instances) : instances_(std::move(instances)) {
    std::set<std::string> seen;
    for (const auto& inst : instances_) {
        if (inst.id.empty()) throw InputError("instance with empty id");
        if (!seen.insert(inst.id).second) throw InputError("duplicate instance id '" + inst.id + "'");
        if (inst.trials && *inst.trials < 1) throw InputError("instance '" + inst.id + "' has zero trials");
    }
}

std::vector<PsfVector> ObservationSet::psf_vectors() const {
    std::vector<PsfVector> out;
    out.reserve(instances_.size());
    for (const auto& inst : instances_) out.push_back(inst.psfs);
    return out;
}

std::vector<double> ObservationSet::heps() const {
    std::vector<double> out;
    out.reserve(instances_.size());
    for (const auto& inst : instances_) out.push_back(inst.hep.value());
    return out;
}

ObservationSet load_observations(std::istream& in) {
    detail::LineReader reader(in);
    std::string line;
    if (!reader.next(line)) throw InputError("observations: missing header; expected " + expected_observation_header());

    const auto header = detail::split(line, ',');
    bool header_ok = header.size() == kPsfCount + 2 || header.size() == kPsfCount + 3;
    if (header_ok) {
        header_ok = header[0] == "id" && header[kPsfCount + 1] == "hep";
        for (std::size_t j = 0; header_ok && j < kPsfCount; ++j) header_ok = header[j + 1] == psf_column(kAllPsfs[j]);
        if (header_ok && header.size() == kPsfCount + 3) header_ok = header.back() == "trials";
    }
    if (!header_ok) throw InputError("observations: unknown header '" + line + "'; expected " + expected_observation_header());
    const bool with_trials = header.size() == kPsfCount + 3;

    std::vector<Instance> instances;
    std::size_t row = 0;
    while (reader.next(line)) {
        if (detail::trim(line).empty()) continue;
        ++row;
        const auto cells = detail::split(line, ',');
        if (cells.size() != header.size()) {
            throw InputError("row " + std::to_string(row) + ": expected " + std::to_string(header.size()) +
                             " columns, found " + std::to_string(cells.size()));
        }
        std::array<double, kPsfCount> values{};
        for (std::size_t j = 0; j < kPsfCount; ++j) {
            auto v = detail::parse_double(cells[j + 1]);
            if (!v) throw InputError(cell_error(row, header[j + 1], "not a number: '" + cells[j + 1] + "'"));
            if (*v <= 0.0) throw InputError(cell_error(row, header[j + 1], "multiplier must be positive"));
            values[j] = *v;
        }
        auto hep = detail::parse_double(cells[kPsfCount + 1]);
        if (!hep) throw InputError(cell_error(row, "hep", "not a number: '" + cells[kPsfCount + 1] + "'"));
        if (*hep < 0.0 || *hep > 1.0) throw InputError(cell_error(row, "hep", "outside [0, 1]: " + cells[kPsfCount + 1]));

        std::optional<std::uint32_t> trials;
        if (with_trials && !cells.back().empty()) {
            auto t = detail::parse_int(cells.back());
            if (!t || *t < 1 || *t > 0xffffffffLL)
                throw InputError(cell_error(row, "trials", "must be a positive integer"));
            trials = static_cast<std::uint32_t>(*t);
        }
        if (cells[0].empty()) throw InputError(cell_error(row, "id", "empty id"));
        instances.push_back(Instance{cells[0], PsfVector(values), Probability(*hep), trials});
    }
    return ObservationSet(std::move(instances));
}

void save_observations(const ObservationSet& set, std::ostream& out) {
    const bool with_trials = std::any_of(set.instances().begin(), set.instances().end(),
                                         [](const Instance& i) { return i.trials.has_value(); });
    out << "id";
    for (PsfId id : kAllPsfs) out << ',' << psf_column(id);
    out << ",hep" << (with_trials ? ",trials" : "") << '\n';
    for (const auto& inst : set.instances()) {
        out << inst.id;
        for (double v : inst.psfs.values()) out << ',' << format_full(v);
        out << ',' << format_full(inst.hep.value());
        if (with_trials) {
            out << ',';
            if (inst.trials) out << *inst.trials;
        }
        out << '\n';
    }
    if (!out) throw InputError("failed writing observations");
}

// ---------------------------------------------------------------------------

Design::Design(std::vector<PsfId> factors, std::vector<DesignRow> rows)
    : factors_(std::move(factors)), rows_(std::move(rows)) {
    if (factors_.empty()) throw InputError("design has no factors");
    if (!std::is_sorted(factors_.begin(), factors_.end()) ||
        std::adjacent_find(factors_.begin(), factors_.end()) != factors_.end())
        throw InputError("design factors must be distinct and in A..H order");
    std::set<int> std_seen, run_seen;
    for (const auto& r : rows_) {
        if (r.levels.size() != factors_.size())
            throw InputError("design row " + std::to_string(r.run_order) + " has the wrong number of levels");
        if (!std_seen.insert(r.std_order).second)
            throw InputError("duplicate std order " + std::to_string(r.std_order));
        if (!run_seen.insert(r.run_order).second)
            throw InputError("duplicate run order " + std::to_string(r.run_order));
        for (double v : r.levels) {
            if (!std::isfinite(v)) throw InputError("non-finite design level");
        }
        if (r.response && !std::isfinite(*r.response)) throw InputError("non-finite design response");
    }
}

std::size_t Design::factor_position(PsfId psf) const {
    auto it = std::find(factors_.begin(), factors_.end(), psf);
    if (it == factors_.end()) throw InputError(std::string("design has no factor ") + psf_letter(psf));
    return static_cast<std::size_t>(it - factors_.begin());
}

bool Design::has_factor(PsfId psf) const noexcept {
    return std::find(factors_.begin(), factors_.end(), psf) != factors_.end();
}

bool Design::fully_evaluated() const noexcept {
    return std::all_of(rows_.begin(), rows_.end(), [](const DesignRow& r) { return r.response.has_value(); });
}

std::vector<double> Design::responses() const {
    std::vector<double> out;
    out.reserve(rows_.size());
    for (const auto& r : rows_) {
        if (!r.response) throw InputError("design run " + std::to_string(r.run_order) + " has no response");
        out.push_back(*r.response);
    }
    return out;
}

Design Design::with_responses(const std::vector<double>& responses) const {
    if (responses.size() != rows_.size()) throw InputError("response count does not match design rows");
    auto rows = rows_;
    for (std::size_t i = 0; i < rows.size(); ++i) rows[i].response = responses[i];
    return Design(factors_, std::move(rows));
}

Design load_design(std::istream& in) {
    detail::LineReader reader(in);
    std::string line;
    const std::string expected = "std,run,<factor letters A..H>,reliability";
    if (!reader.next(line)) throw InputError("design: missing header; expected " + expected);
    const auto header = detail::split(line, ',');
    if (header.size() < 4 || header[0] != "std" || header[1] != "run" || header.back() != "reliability")
        throw InputError("design: unknown header '" + line + "'; expected " + expected);

    std::vector<PsfId> factors;
    for (std::size_t j = 2; j + 1 < header.size(); ++j) {
        const auto& h = header[j];
        auto id = h.size() == 1 ? psf_from_letter(h[0]) : std::nullopt;
        if (!id || h[0] < 'A') throw InputError("design: unknown factor column '" + h + "'; expected " + expected);
        factors.push_back(*id);
    }

    std::vector<DesignRow> rows;
    std::size_t row = 0;
    while (reader.next(line)) {
        if (detail::trim(line).empty()) continue;
        ++row;
        const auto cells = detail::split(line, ',');
        if (cells.size() != header.size())
            throw InputError("design row " + std::to_string(row) + ": expected " + std::to_string(header.size()) +
                             " columns, found " + std::to_string(cells.size()));
        DesignRow r;
        auto so = detail::parse_int(cells[0]);
        auto ro = detail::parse_int(cells[1]);
        if (!so) throw InputError(cell_error(row, "std", "not an integer: '" + cells[0] + "'"));
        if (!ro) throw InputError(cell_error(row, "run", "not an integer: '" + cells[1] + "'"));
        r.std_order = static_cast<int>(*so);
        r.run_order = static_cast<int>(*ro);
        for (std::size_t j = 2; j + 1 < cells.size(); ++j) {
            auto v = detail::parse_double(cells[j]);
            if (!v) throw InputError(cell_error(row, header[j], "not a number: '" + cells[j] + "'"));
            r.levels.push_back(*v);
        }
        if (!cells.back().empty()) {
            auto v = detail::parse_double(cells.back());
            if (!v) throw InputError(cell_error(row, "reliability", "not a number: '" + cells.back() + "'"));
            r.response = *v;
        }
        rows.push_back(std::move(r));
    }
    return Design(std::move(factors), std::move(rows));
}

void save_design(const Design& design, std::ostream& out) {
    out << "std,run";
    for (PsfId f : design.factors()) out << ',' << psf_letter(f);
    out << ",reliability\n";
    for (const auto& r : design.rows()) {
        out << r.std_order << ',' << r.run_order;
        for (double v : r.levels) out << ',' << format_full(v);
        out << ',';
        if (r.response) out << format_full(*r.response);
        out << '\n';
    }
    if (!out) throw InputError("failed writing design");
}

// ---------------------------------------------------------------------------

namespace {

std::vector<std::vector<std::string>> read_fixture_table(std::string_view name) {
    std::istringstream in{std::string(detail::embedded_file(name))};
    detail::LineReader reader(in);
    std::string line;
    reader.next(line);
    std::vector<std::vector<std::string>> rows;
    while (reader.next(line)) {
        if (!detail::trim(line).empty()) rows.push_back(detail::split(line, ','));
    }
    return rows;
}

double fixture_number(const std::string& cell) {
    auto v = detail::parse_double(cell);
    if (!v) throw std::logic_error("corrupt fixture cell '" + cell + "'");
    return *v;
}

}  // namespace

ObservationSet bundled_table2() {
    std::istringstream in{std::string(detail::embedded_file("case_study_psfs.csv"))};
    return load_observations(in);
}

ObservationSet bundled_case_study() {
    const auto printed = bundled_table2();
    const auto reference = bundled_reference_fit();
    std::vector<Instance> instances = printed.instances();
    for (std::size_t i = 0; i < instances.size(); ++i) instances[i].hep = Probability(reference.observed.at(i));
    return ObservationSet(std::move(instances));
}

ReferenceFit bundled_reference_fit() {
    ReferenceFit fit;
    for (const auto& row : read_fixture_table("case_study_retrained.csv")) {
        fit.ids.push_back(row.at(0));
        fit.observed.push_back(fixture_number(row.at(1)));
        fit.estimated_before.push_back(fixture_number(row.at(2)));
        fit.estimated_after.push_back(fixture_number(row.at(3)));
        fit.se_before.push_back(fixture_number(row.at(4)));
        fit.se_after.push_back(fixture_number(row.at(5)));
    }
    // The first-fit table repeats the "before" columns; keep the two in step.
    const auto first_fit = read_fixture_table("case_study_ann_fit.csv");
    if (first_fit.size() != fit.ids.size()) throw std::logic_error("fixture tables disagree on instance count");
    for (std::size_t i = 0; i < first_fit.size(); ++i) {
        if (fixture_number(first_fit[i].at(1)) != fit.observed[i] ||
            fixture_number(first_fit[i].at(2)) != fit.estimated_before[i])
            throw std::logic_error("fixture tables disagree for " + fit.ids[i]);
    }
    return fit;
}

Design bundled_table4() {
    std::istringstream in{std::string(detail::embedded_file("rsm_design.csv"))};
    return load_design(in);
}

}  // namespace hra
