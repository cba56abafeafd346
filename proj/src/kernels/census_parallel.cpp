#include <algorithm>
#include <cstring>
#include <map>
#include <unordered_set>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "fcmforge/error.hpp"
#include "fcmforge/kernels.hpp"

namespace fcmforge::kernels {

namespace {

using Packed = std::vector<std::uint64_t>;

struct Outcome {
    bool detected = false;
    std::vector<Packed> cycle;  // rotated so the smallest unpacked state is first
};

// Lexicographic order of unpacked 0/1 vectors: node 0 is most significant.
bool unpacked_less(const Packed& a, const Packed& b, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
        const auto ai = (a[i >> 6] >> (i & 63)) & 1u;
        const auto bi = (b[i >> 6] >> (i & 63)) & 1u;
        if (ai != bi) return ai < bi;
    }
    return false;
}

// Walks from `start`, keeping the packed path and a hash set of indices into
// it, until a state repeats. One step per state, no per-state allocation.
class Walker {
public:
    explicit Walker(const BinaryStepper& stepper)
        : stepper_(stepper), w_(std::max<std::size_t>(stepper.words(), 1)),
          seen_(64, Hash{this}, Same{this}) {}

    Outcome run(const std::uint64_t* start, std::size_t budget) {
        path_.assign(start, start + w_);
        seen_.clear();
        seen_.insert(0);
        Outcome out;
        for (std::size_t t = 0; t < budget; ++t) {
            path_.resize(path_.size() + w_);
            const std::size_t next = t + 1;
            stepper_.apply(&path_[t * w_], &path_[next * w_]);
            const auto [it, inserted] = seen_.insert(next);
            if (inserted) continue;
            out.detected = true;
            for (std::size_t k = *it; k < next; ++k) out.cycle.emplace_back(state(k), state(k) + w_);
            const std::size_t n = stepper_.nodes();
            auto smallest = std::min_element(out.cycle.begin(), out.cycle.end(),
                                             [n](const Packed& a, const Packed& b) { return unpacked_less(a, b, n); });
            std::rotate(out.cycle.begin(), smallest, out.cycle.end());
            return out;
        }
        return out;
    }

private:
    const std::uint64_t* state(std::size_t k) const { return &path_[k * w_]; }

    struct Hash {
        const Walker* self;
        std::size_t operator()(std::size_t k) const {
            std::uint64_t h = 0x9e3779b97f4a7c15ull;
            for (std::size_t i = 0; i < self->w_; ++i) {
                h ^= self->state(k)[i] + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2);
            }
            return static_cast<std::size_t>(h);
        }
    };
    struct Same {
        const Walker* self;
        bool operator()(std::size_t a, std::size_t b) const {
            return std::equal(self->state(a), self->state(a) + self->w_, self->state(b));
        }
    };

    const BinaryStepper& stepper_;
    std::size_t w_;
    Packed path_;
    std::unordered_set<std::size_t, Hash, Same> seen_;
};

std::vector<double> unpack(const Packed& p, std::size_t n) {
    std::vector<double> x(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) x[i] = static_cast<double>((p[i >> 6] >> (i & 63)) & 1u);
    return x;
}

}  // namespace

Census census_parallel(const FcmGraph& fcm, const SquashingConfig& squash, const CensusPolicy& policy) {
    if (squash.kind != SquashKind::hard_threshold) {
        throw ValidationError("attractor census is only defined for hard-threshold (binary) squashing");
    }
    squash.validate();
    const std::size_t n = fcm.size();
    const BinaryStepper stepper(fcm, squash.threshold);
    Census census;
    std::size_t count = 0;
    const auto starts = census_initial_states(n, policy, census.exhaustive, count);
    census.initial_states = count;
    const std::size_t stride = std::max<std::size_t>(stepper.words(), 1);
    const std::size_t budget = census_step_budget(n);

    using Key = std::pair<AttractorKind, std::vector<std::vector<double>>>;
    std::map<Key, std::size_t> groups;
    const auto total = static_cast<std::int64_t>(count);

#pragma omp parallel
    {
        // Per-thread grouping on packed cycles, merged once at the end.
        std::map<std::vector<Packed>, std::size_t> local;
        std::size_t local_undetected = 0;
        Walker walker(stepper);
#pragma omp for schedule(dynamic, 256) nowait
        for (std::int64_t s = 0; s < total; ++s) {
            auto outcome = walker.run(&starts[static_cast<std::size_t>(s) * stride], budget);
            if (outcome.detected) {
                ++local[std::move(outcome.cycle)];
            } else {
                ++local_undetected;
            }
        }
#pragma omp critical(fcmforge_census_merge)
        {
            for (auto& [cycle, basin] : local) {
                std::vector<std::vector<double>> states;
                states.reserve(cycle.size());
                for (const auto& p : cycle) states.push_back(unpack(p, n));
                const auto kind = cycle.size() == 1 ? AttractorKind::fixed_point : AttractorKind::limit_cycle;
                groups[{kind, std::move(states)}] += basin;
            }
            if (local_undetected != 0) groups[{AttractorKind::undetected, {}}] += local_undetected;
        }
    }

    for (auto& [key, basin] : groups) {
        const std::size_t period = key.first == AttractorKind::undetected ? 0 : key.second.size();
        census.entries.push_back({{key.first, period, key.second}, basin});
    }
    std::stable_sort(census.entries.begin(), census.entries.end(),
                     [](const CensusEntry& a, const CensusEntry& b) { return a.basin > b.basin; });
    return census;
}

}  // namespace fcmforge::kernels
