#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace hra {

// Malformed or out-of-contract input. The CLI maps this to exit code 2.
class InputError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Unknown label in a multiplier table.
class LookupError : public InputError {
public:
    using InputError::InputError;
};

// Divergence, rank deficiency and similar failures (exit code 4).
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class TrainingDiverged : public NumericalError {
public:
    TrainingDiverged(std::uint64_t seed, int epoch)
        : NumericalError("training diverged (seed " + std::to_string(seed) + ", epoch " +
                         std::to_string(epoch) + ")"),
          seed_(seed), epoch_(epoch) {}

    std::uint64_t seed() const noexcept { return seed_; }
    int epoch() const noexcept { return epoch_; }

private:
    std::uint64_t seed_;
    int epoch_;
};

class RankDeficientError : public NumericalError {
public:
    RankDeficientError(const std::string& what, std::vector<std::string> collinear)
        : NumericalError(what), collinear_(std::move(collinear)) {}

    const std::vector<std::string>& collinear_terms() const noexcept { return collinear_; }

private:
    std::vector<std::string> collinear_;
};

}  // namespace hra
