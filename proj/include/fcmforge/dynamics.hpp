#pragma once

#include <cstddef>
#include <complex>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "fcmforge/fcm.hpp"

namespace fcmforge {

struct StateVector {
    std::vector<double> values;
    std::size_t time = 0;

    bool operator==(const StateVector&) const = default;
};

enum class SquashKind { hard_threshold, logistic };

struct SquashingConfig {
    SquashKind kind = SquashKind::hard_threshold;
    double threshold = 0.0;  // hard: 1 iff x > threshold
    double steepness = 5.0;  // logistic: 1 / (1 + exp(-steepness * x))

    static SquashingConfig hard(double threshold = 0.0) { return {SquashKind::hard_threshold, threshold, 5.0}; }
    static SquashingConfig logistic(double steepness = 5.0) { return {SquashKind::logistic, 0.0, steepness}; }

    double apply(double x) const;
    void validate() const;

    bool operator==(const SquashingConfig&) const = default;
};

struct Pulse {
    std::string node_id;
    double value = 1.0;
    std::size_t step = 0;

    bool operator==(const Pulse&) const = default;
};

/// Clamps hold every step (including t = 0); a pulse overrides one component at one step.
struct ControlSchedule {
    std::map<std::string, double> clamps;  // node id -> value
    std::vector<Pulse> pulses;

    bool empty() const noexcept { return clamps.empty() && pulses.empty(); }
    bool operator==(const ControlSchedule&) const = default;
};

struct Trajectory {
    std::vector<StateVector> states;
    std::size_t transient_length = 0;
};

enum class AttractorKind { fixed_point, limit_cycle, undetected };

std::string to_string(AttractorKind kind);

struct Attractor {
    AttractorKind kind = AttractorKind::undetected;
    std::size_t period = 0;
    std::vector<std::vector<double>> cycle_states;

    bool operator==(const Attractor&) const = default;
};

struct SimulationResult {
    Trajectory trajectory;
    Attractor attractor;
};

inline constexpr std::size_t default_max_steps = 1000;
inline constexpr double continuous_tolerance = 1e-9;

/// Validates controls against the FCM and throws ValidationError on unknown ids,
/// values outside [0, 1], or a pulse on a clamped node.
void validate_controls(const FcmGraph& fcm, const ControlSchedule& controls);

/// All-zero state with clamps and any t = 0 pulses applied.
StateVector initial_state(const FcmGraph& fcm, const ControlSchedule& controls);

StateVector step(const StateVector& state, const FcmGraph& fcm, const SquashingConfig& squash,
                 const ControlSchedule& controls);

/// Iterates `step` from `init` (controls applied at t = 0) until an attractor is
/// found or `max_steps` updates have been made.
SimulationResult simulate(const FcmGraph& fcm, const StateVector& init, const ControlSchedule& controls,
                          const SquashingConfig& squash, std::size_t max_steps = default_max_steps);

/// True when squashing, init and every control value keep states in {0, 1}.
bool is_binary_run(const StateVector& init, const ControlSchedule& controls, const SquashingConfig& squash);

struct CensusPolicy {
    std::size_t exhaustive_limit = 16;  // n at or below this enumerates all 2^n states
    std::size_t sample_size = 4096;
    std::uint64_t seed = 0;
};

struct CensusEntry {
    Attractor attractor;  // cycle rotated to start at its smallest state
    std::size_t basin = 0;
    bool operator==(const CensusEntry&) const = default;
};

struct Census {
    std::vector<CensusEntry> entries;  // basin descending, then by cycle
    std::size_t initial_states = 0;
    bool exhaustive = true;
    bool operator==(const Census&) const = default;
};

/// Groups the attractors reached from the policy's initial states (binary mode only).
/// Runs the OpenMP kernel; see kernels.hpp for the serial reference.
Census attractor_census(const FcmGraph& fcm, const SquashingConfig& squash, const CensusPolicy& policy = {});

struct SpectralSummary {
    std::size_t nonzero_edges = 0;
    std::size_t nonzero_eigenvalues = 0;
};

inline constexpr double default_eigen_tolerance = 1e-8;

/// Eigenvalues of the edge matrix. Strongly connected components are solved
/// separately; acyclic parts contribute exact zeros (or self-loop weights).
std::vector<std::complex<double>> eigenvalues(const EdgeMatrix& matrix);

SpectralSummary spectral_summary(const FcmGraph& fcm, double tol = default_eigen_tolerance);

}  // namespace fcmforge
