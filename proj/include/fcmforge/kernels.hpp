#pragma once

#include <cstdint>
#include <vector>

#include "fcmforge/dynamics.hpp"

// Attractor-census kernels. `census_reference` is the plain serial path that
// calls `simulate` once per initial state; `census_parallel` is the OpenMP
// kernel the library uses. Tests hold the two equal.
namespace fcmforge::kernels {

/// Synchronous hard-threshold update over bit-packed states (node i is bit i % 64 of word i / 64).
class BinaryStepper {
public:
    BinaryStepper(const FcmGraph& fcm, double threshold);

    std::size_t nodes() const noexcept { return n_; }
    std::size_t words() const noexcept { return words_; }
    void apply(const std::uint64_t* in, std::uint64_t* out) const;

private:
    struct Incoming {
        std::size_t source;
        double weight;
    };
    std::size_t n_ = 0;
    std::size_t words_ = 0;
    double threshold_ = 0.0;
    std::vector<std::size_t> offsets_;  // CSR over targets
    std::vector<Incoming> incoming_;
};

/// Initial states chosen by a census policy, packed per BinaryStepper layout.
/// Exhaustive enumeration yields state s at index s.
std::vector<std::uint64_t> census_initial_states(std::size_t n, const CensusPolicy& policy, bool& exhaustive,
                                                 std::size_t& count);

/// Step budget per initial state.
std::size_t census_step_budget(std::size_t n);

Census census_reference(const FcmGraph& fcm, const SquashingConfig& squash, const CensusPolicy& policy);
Census census_parallel(const FcmGraph& fcm, const SquashingConfig& squash, const CensusPolicy& policy);

/// Rotates a cycle so its lexicographically smallest state comes first.
std::vector<std::vector<double>> canonical_cycle(std::vector<std::vector<double>> cycle);

}  // namespace fcmforge::kernels
