#pragma once

// Performance shaping factors and the closed-form HEP algebra:
//
//   nominal HEP    = occurred / potential
//   PSF total      = product of the eight multipliers
//   composite HEP  = n * t / (n * (t - 1) + 1)
//   normalized PSF = value / column maximum

#include <array>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace hra {

// Column order of the case-study table; letters A..H follow it.
enum class PsfId : std::uint8_t {
    AvailableTime,
    Stress,
    Complexity,
    ExperienceTraining,
    Procedures,
    Ergonomics,
    FitnessForDuty,
    WorkProcess,
};

inline constexpr std::size_t kPsfCount = 8;

inline constexpr std::array<PsfId, kPsfCount> kAllPsfs = {
    PsfId::AvailableTime, PsfId::Stress,     PsfId::Complexity,     PsfId::ExperienceTraining,
    PsfId::Procedures,    PsfId::Ergonomics, PsfId::FitnessForDuty, PsfId::WorkProcess,
};

constexpr std::size_t psf_index(PsfId id) noexcept { return static_cast<std::size_t>(id); }
constexpr char psf_letter(PsfId id) noexcept { return static_cast<char>('A' + psf_index(id)); }

std::string_view psf_name(PsfId id) noexcept;    // "Available Time"
std::string_view psf_column(PsfId id) noexcept;  // "available_time"
std::optional<PsfId> psf_from_letter(char letter) noexcept;
std::optional<PsfId> psf_from_column(std::string_view column) noexcept;

// Letters of an ordered PSF list, e.g. "ABCDFGH".
std::string psf_letters(std::span<const PsfId> psfs);
std::vector<PsfId> parse_psf_letters(std::string_view letters);

class Probability {
public:
    explicit Probability(double value);

    double value() const noexcept { return value_; }
    Probability complement() const noexcept { return Probability(1.0 - value_); }

    friend bool operator==(const Probability&, const Probability&) = default;

private:
    double value_;
};

// One multiplier per PSF; every multiplier finite and > 0.
class PsfVector {
public:
    explicit PsfVector(const std::array<double, kPsfCount>& values);

    static PsfVector nominal() { return PsfVector(std::array<double, kPsfCount>{1, 1, 1, 1, 1, 1, 1, 1}); }

    double operator[](PsfId id) const noexcept { return values_[psf_index(id)]; }
    const std::array<double, kPsfCount>& values() const noexcept { return values_; }
    PsfVector with(PsfId id, double multiplier) const;

    friend bool operator==(const PsfVector&, const PsfVector&) = default;

private:
    std::array<double, kPsfCount> values_;
};

class ErrorTally {
public:
    ErrorTally(std::uint64_t occurred, std::uint64_t potential);

    std::uint64_t occurred() const noexcept { return occurred_; }
    std::uint64_t potential() const noexcept { return potential_; }

private:
    std::uint64_t occurred_;
    std::uint64_t potential_;
};

Probability nominal_hep(const ErrorTally& tally);
double total_psf_impact(const PsfVector& v);

// Throws InputError when psf_total is not a positive finite number.
Probability composite_hep(Probability nominal, double psf_total);

// ---------------------------------------------------------------------------
// Multiplier tables

// "P(failure) = 1". Callers must short-circuit the HEP to 1 instead of
// multiplying.
struct FailureCertain {
    friend bool operator==(FailureCertain, FailureCertain) = default;
};

using Multiplier = std::variant<double, FailureCertain>;

enum class MultiplierMode { Action, Diagnosis };

struct MultiplierRow {
    std::string label;
    Multiplier action = 1.0;
    Multiplier diagnosis = 1.0;
    // When set, this row resolves to the named row (e.g. "Insufficient
    // information" behaves as "Nominal time").
    std::optional<std::string> alias_of;
};

// Labels are matched case-insensitively with surrounding blanks ignored.
class MultiplierTable {
public:
    MultiplierTable(PsfId psf, std::vector<MultiplierRow> rows);

    PsfId psf() const noexcept { return psf_; }
    const std::vector<MultiplierRow>& rows() const noexcept { return rows_; }

private:
    const MultiplierRow* find(std::string_view label) const noexcept;
    friend Multiplier lookup_multiplier(const MultiplierTable&, std::string_view, MultiplierMode);

    PsfId psf_;
    std::vector<MultiplierRow> rows_;
};

Multiplier lookup_multiplier(const MultiplierTable& table, std::string_view level_label,
                             MultiplierMode mode);

using MultiplierTables = std::map<PsfId, MultiplierTable>;

// Records of `psf_letter,level_label,action,diagnosis`. `FAIL` is the
// certain-failure sentinel and `=<label>` aliases another level of the same
// table. Blank lines and lines starting with '#' are ignored.
MultiplierTables load_multiplier_tables(std::istream& in);
// The bundled available-time table.
MultiplierTables default_multiplier_tables();

// ---------------------------------------------------------------------------
// Normalization

struct NormalizationResult {
    std::vector<PsfVector> normalized;
    PsfVector maxima;
};

// Divides every component by its column maximum over the list.
NormalizationResult normalize(std::span<const PsfVector> vectors);
PsfVector normalize_with(const PsfVector& v, const PsfVector& maxima);

}  // namespace hra
