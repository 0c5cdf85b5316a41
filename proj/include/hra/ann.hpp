#pragma once

// Single-hidden-layer feedforward regressor for PSF -> HEP.
//
// Both layers use the logistic function, so every prediction is a valid
// probability. Training is full-batch gradient descent on the mean squared
// error; several independently seeded replications form an ensemble whose
// averaged output is the estimated HEP.

#include "hra/psf.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace hra::ann {

struct Topology {
    std::size_t n_inputs = kPsfCount;
    std::size_t n_hidden = kPsfCount;
    static constexpr std::size_t n_outputs = 1;

    // Hidden width equal to the input width unless overridden.
    static Topology for_inputs(std::size_t n_inputs, std::optional<std::size_t> n_hidden = std::nullopt);

    friend bool operator==(const Topology&, const Topology&) = default;
};

struct WeightSet {
    Topology topology;
    std::vector<double> hidden_weights;  // n_hidden x n_inputs, row-major
    std::vector<double> hidden_bias;     // n_hidden
    std::vector<double> output_weights;  // n_hidden
    double output_bias = 0.0;

    static WeightSet zeros(const Topology& topology);

    std::size_t parameter_count() const noexcept;
    // Flattened view in the order hidden weights, hidden bias, output weights,
    // output bias. Used by gradient checks and serialization.
    std::vector<double> flatten() const;
    static WeightSet unflatten(const Topology& topology, std::span<const double> params);

    friend bool operator==(const WeightSet&, const WeightSet&) = default;
};

// Rows of normalized inputs with their targets.
struct TrainingData {
    std::vector<std::vector<double>> inputs;
    std::vector<double> targets;

    std::size_t size() const noexcept { return targets.size(); }
    std::size_t width() const noexcept { return inputs.empty() ? 0 : inputs.front().size(); }
};

struct TrainingConfig {
    std::uint64_t seed = 1;
    int max_epochs = 12000;
    double learning_rate = 0.5;
    // Stop once the loss improved by less than this over the last 100 epochs.
    double loss_tolerance = 1e-10;
    int n_replications = 10;
    std::optional<std::size_t> hidden_nodes;
    // Worker threads for replications; 0 means hardware concurrency.
    unsigned threads = 0;

    void validate() const;
};

// Flat key=value text: seed, epochs, learning_rate, tolerance, replications,
// hidden_nodes. Unknown keys are rejected.
TrainingConfig load_training_config(std::istream& in);

// Uniform on [-0.5, 0.5], deterministic for (topology, seed).
WeightSet init_weights(const Topology& topology, std::uint64_t seed);

double forward(const WeightSet& weights, std::span<const double> x);

struct LossGradient {
    double loss = 0.0;
    std::vector<double> gradient;  // same layout as WeightSet::flatten()
};

// Mean squared error over `data` and its exact gradient.
LossGradient loss_and_gradient(const WeightSet& weights, const TrainingData& data);
double loss(const WeightSet& weights, const TrainingData& data);

struct TrainingRun {
    WeightSet weights;
    std::vector<double> loss_trace;  // loss before each update, then the final loss
    int epochs = 0;

    double final_loss() const { return loss_trace.back(); }
};

// Throws TrainingDiverged when the loss becomes non-finite.
TrainingRun train_one(const TrainingData& data, const Topology& topology, const TrainingConfig& config,
                      std::uint64_t seed);

struct EnsembleMember {
    std::uint64_t seed = 0;
    WeightSet weights;
    double final_loss = 0.0;

    friend bool operator==(const EnsembleMember&, const EnsembleMember&) = default;
};

class TrainedPredictor {
public:
    TrainedPredictor(Topology topology, std::vector<EnsembleMember> members, std::vector<PsfId> active_psfs,
                     PsfVector maxima, std::vector<std::uint64_t> dropped_seeds = {});

    const Topology& topology() const noexcept { return topology_; }
    const std::vector<EnsembleMember>& members() const noexcept { return members_; }
    const std::vector<PsfId>& active_psfs() const noexcept { return active_psfs_; }
    const PsfVector& maxima() const noexcept { return maxima_; }
    const std::vector<std::uint64_t>& dropped_seeds() const noexcept { return dropped_seeds_; }

    // Mean of the members' outputs for already-normalized active inputs.
    double predict_normalized(std::span<const double> x) const;
    // Normalizes the active components of a raw vector with the training maxima.
    double predict(const PsfVector& raw) const;
    // Active, normalized inputs for a raw vector.
    std::vector<double> encode(const PsfVector& raw) const;

    friend bool operator==(const TrainedPredictor&, const TrainedPredictor&) = default;

private:
    Topology topology_;
    std::vector<EnsembleMember> members_;
    std::vector<PsfId> active_psfs_;
    PsfVector maxima_;
    std::vector<std::uint64_t> dropped_seeds_;
};

// Builds the network inputs for the given active PSFs, normalizing over the
// observations themselves.
struct PreparedData {
    TrainingData data;
    PsfVector maxima;
};
PreparedData prepare(std::span<const PsfVector> psfs, std::span<const double> heps,
                     std::span<const PsfId> active_psfs);

// Trains seeds seed, seed+1, ... Divergent replications are dropped and
// recorded; throws NumericalError when every replication diverges.
TrainedPredictor train_replicated(const TrainingData& data, const Topology& topology, const TrainingConfig& config,
                                  std::vector<PsfId> active_psfs, PsfVector maxima);

// Deterministic split of row indices into (train, holdout).
struct HoldoutSplit {
    std::vector<std::size_t> train;
    std::vector<std::size_t> holdout;
};
HoldoutSplit split_holdout(std::size_t n_rows, double holdout_fraction, std::uint64_t seed);
TrainingData subset(const TrainingData& data, std::span<const std::size_t> rows);

struct MetricReport {
    std::vector<double> squared_errors;
    double mse = 0.0;
    std::optional<double> r_squared;  // empty when the observed values have no variance
};

MetricReport metrics(std::span<const double> predicted, std::span<const double> observed);

// Versioned plain-text format, full precision.
void save_predictor(const TrainedPredictor& predictor, std::ostream& out);
TrainedPredictor load_predictor(std::istream& in);

}  // namespace hra::ann
