#pragma once

// The screening loop: train the network on the active PSFs, evaluate a
// response-surface design through it, fit and reduce a quadratic model,
// drop every PSF no surviving term mentions, and repeat until nothing is
// dropped.

#include "hra/ann.hpp"
#include "hra/dataset.hpp"
#include "hra/error.hpp"
#include "hra/rsm/anova.hpp"
#include "hra/rsm/coding.hpp"
#include "hra/rsm/model.hpp"
#include "hra/rsm/screening.hpp"

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace hra::pipeline {

enum class DesignSource {
    Supplied,   // the supplied design for the first iteration, CCD afterwards
    Generated,  // CCD in every iteration
};

struct PipelineConfig {
    ann::TrainingConfig training;
    double alpha = 0.05;
    double response_power = 3.0;
    int max_iterations = 5;
    std::size_t min_psfs = 2;

    DesignSource design_source = DesignSource::Supplied;
    Design supplied_design = bundled_table4();
    // Evaluate the supplied design through the network even when it already
    // carries responses.
    bool reevaluate_supplied = false;

    int center_points = 6;
    double axial = rsm::kDefaultAxial;
    rsm::FactorScale generated_scale{0.5, 0.3};

    // When set, the first iteration uses this reduced model instead of
    // backward elimination.
    std::optional<rsm::ModelSpec> initial_model;

    void validate() const;
};

// Flat key=value file. Accepts the training keys plus alpha, power,
// max_iterations, min_psfs, design (supplied|bundled|generated),
// reevaluate_design, center_points, axial, center, half_range, initial_model.
PipelineConfig load_pipeline_config(std::istream& in);

struct IterationRecord {
    int index = 0;
    std::vector<PsfId> active;
    ann::TrainedPredictor predictor;
    std::vector<double> predicted_hep;  // ensemble output per instance
    ann::MetricReport training_metrics;
    Design design;
    bool design_from_predictor = false;
    rsm::FitResult fit;
    rsm::AnovaTable anova;
    std::vector<rsm::EliminationStep> elimination;
    rsm::ScreeningReport screening;
};

enum class ConvergenceReason { NoElimination, MaxIterations, MinPsfs };
std::string_view to_string(ConvergenceReason reason) noexcept;

struct ComparisonRow {
    std::string id;
    double observed = 0.0;
    double before = 0.0;
    double after = 0.0;
    double se_before = 0.0;
    double se_after = 0.0;
};

struct Comparison {
    std::vector<ComparisonRow> rows;
    double mse_before = 0.0;
    double mse_after = 0.0;
    double delta = 0.0;  // mse_after - mse_before
};

Comparison compare_predictions(const std::vector<std::string>& ids, std::span<const double> observed,
                               std::span<const double> before, std::span<const double> after);
Comparison compare_before_after(const ObservationSet& observations, const ann::TrainedPredictor& before,
                                const ann::TrainedPredictor& after);

struct PipelineResult {
    std::vector<IterationRecord> iterations;
    ann::TrainedPredictor final_predictor;
    std::vector<PsfId> final_retained;
    ConvergenceReason reason = ConvergenceReason::NoElimination;
    Comparison comparison;  // first network vs final network
};

// Carries the iterations completed before the failure.
class PipelineError : public std::runtime_error {
public:
    PipelineError(const std::string& what, bool numerical, std::vector<IterationRecord> partial)
        : std::runtime_error(what), numerical_(numerical), partial_(std::move(partial)) {}

    bool numerical() const noexcept { return numerical_; }
    const std::vector<IterationRecord>& partial() const noexcept { return partial_; }

private:
    bool numerical_;
    std::vector<IterationRecord> partial_;
};

PipelineResult run(const ObservationSet& observations, const PipelineConfig& config);

// iterations/NN/{metrics,members,design,fit,elimination,anova,screening}.csv,
// model.txt and predictor.txt; top-level summary.csv, comparison.csv,
// result.txt and final_predictor.txt. Files are replaced atomically.
void write_result(const PipelineResult& result, const ObservationSet& observations,
                  const std::filesystem::path& dir);
void write_iterations(const std::vector<IterationRecord>& iterations, const ObservationSet& observations,
                      const std::filesystem::path& dir);

void write_comparison_csv(const Comparison& comparison, std::ostream& out);

// Writes `content` to a sibling temporary file, then renames it over `path`.
void write_file_atomic(const std::filesystem::path& path, const std::string& content);

}  // namespace hra::pipeline
