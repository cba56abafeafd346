#include <algorithm>
#include <map>

#include "fcmforge/error.hpp"
#include "fcmforge/kernels.hpp"

namespace fcmforge::kernels {

namespace {

std::vector<double> unpack(const std::uint64_t* words, std::size_t n) {
    std::vector<double> x(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) x[i] = static_cast<double>((words[i >> 6] >> (i & 63)) & 1u);
    return x;
}

}  // namespace

Census census_reference(const FcmGraph& fcm, const SquashingConfig& squash, const CensusPolicy& policy) {
    if (squash.kind != SquashKind::hard_threshold) {
        throw ValidationError("attractor census is only defined for hard-threshold (binary) squashing");
    }
    const std::size_t n = fcm.size();
    Census census;
    std::size_t count = 0;
    const auto starts = census_initial_states(n, policy, census.exhaustive, count);
    census.initial_states = count;
    const std::size_t stride = std::max<std::size_t>((n + 63) / 64, 1);
    const std::size_t budget = census_step_budget(n);

    std::map<std::pair<AttractorKind, std::vector<std::vector<double>>>, std::size_t> groups;
    for (std::size_t s = 0; s < count; ++s) {
        StateVector init{n == 0 ? std::vector<double>{} : unpack(&starts[s * stride], n), 0};
        auto result = simulate(fcm, init, {}, squash, budget);
        ++groups[{result.attractor.kind, canonical_cycle(std::move(result.attractor.cycle_states))}];
    }
    for (auto& [key, basin] : groups) {
        census.entries.push_back({{key.first, key.second.size(), key.second}, basin});
    }
    std::stable_sort(census.entries.begin(), census.entries.end(),
                     [](const CensusEntry& a, const CensusEntry& b) { return a.basin > b.basin; });
    return census;
}

}  // namespace fcmforge::kernels
