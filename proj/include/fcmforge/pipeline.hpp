#pragma once

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "fcmforge/chunker.hpp"
#include "fcmforge/dynamics.hpp"
#include "fcmforge/error.hpp"
#include "fcmforge/llm_backend.hpp"
#include "fcmforge/whatif.hpp"

namespace fcmforge {

inline constexpr int run_manifest_schema = 1;

enum class PosteriorHandling { clip, renormalize };

std::string to_string(PosteriorHandling handling);
PosteriorHandling posterior_handling_from(const std::string& name);
/// Brings an unbounded posterior matrix back into [-1, 1].
EdgeMatrix apply_handling(const EdgeMatrix& raw, PosteriorHandling handling);

struct RunConfig {
    std::filesystem::path input;
    std::size_t d_max = 0;
    std::optional<OverlapSpec> overlap;
    std::optional<std::vector<double>> mix_weights;
    std::optional<std::vector<double>> posterior_mix_weights;
    PosteriorHandling handling = PosteriorHandling::clip;
    double prune_epsilon = 1e-9;
    SquashingConfig squash;
    CensusPolicy census;
    BackendConfig backend;
    std::filesystem::path output_dir;
    std::uint64_t seed = 0;
    std::vector<LabeledControl> clamps;
    std::vector<LabeledControl> pulses;
    std::size_t max_steps = default_max_steps;

    /// Checks weights, factors and controls; throws ValidationError.
    void validate() const;
    std::string label() const;
};

/// JSON mirror of RunConfig. `to_json` omits output_dir and host-specific
/// backend paths so the persisted copy is stable across machines.
nlohmann::json config_to_json(const RunConfig& config);
RunConfig config_from_json(const nlohmann::json& doc, const std::filesystem::path& base_dir = {});

struct RunReport {
    std::string configuration;
    std::size_t chunks = 0;
    std::size_t merged_nodes = 0;
    std::size_t unified_nodes = 0;
    std::size_t semantic_themes = 0;
    std::optional<std::size_t> attractors;  // absent when the run's squashing is not binary
    std::size_t nonzero_edges = 0;
    std::size_t nonzero_eigenvalues = 0;

    bool operator==(const RunReport&) const = default;
};

std::string report_csv(const std::vector<RunReport>& reports);
nlohmann::json report_json(const std::vector<RunReport>& reports);

/// Individual stages. Each reads what earlier stages persisted under
/// config.output_dir and appends non-fatal findings to `warnings`.
namespace stages {
ChunkPlan chunk(const RunConfig& config, std::vector<std::string>& warnings);
void extract(const RunConfig& config, const LlmBackend& backend, std::vector<std::string>& warnings);
void consolidate(const RunConfig& config, const LlmBackend& backend, std::vector<std::string>& warnings);
void mix(const RunConfig& config, std::vector<std::string>& warnings);
void dechunk(const RunConfig& config, std::vector<std::string>& warnings);
void census(const RunConfig& config, std::vector<std::string>& warnings);
/// Returns the names of the FCMs simulated (empty when no clamps or pulses are configured).
std::vector<std::string> simulate(const RunConfig& config, std::vector<std::string>& warnings);
}  // namespace stages

/// Re-raises `e` with "<stage>: " prefixed, keeping its category.
[[noreturn]] void rethrow_tagged(const std::string& stage, const Error& e);

/// chunk -> extract -> consolidate -> mix -> de-chunk -> simulate -> report.
/// Every stage persists its artifacts under config.output_dir; any stage error is
/// rethrown with the stage name prefixed and earlier artifacts left in place.
RunReport run_pipeline(const RunConfig& config);

/// Recomputes the metric table from a run directory's persisted artifacts.
RunReport report(const std::filesystem::path& run_dir);

/// Canonical file names for the FCMs a run simulates, in report order.
std::vector<std::string> simulated_fcm_names(const std::filesystem::path& run_dir);

}  // namespace fcmforge
