#include <algorithm>
#include <random>

#include "fcmforge/error.hpp"
#include "fcmforge/kernels.hpp"

namespace fcmforge::kernels {

BinaryStepper::BinaryStepper(const FcmGraph& fcm, double threshold)
    : n_(fcm.size()), words_((fcm.size() + 63) / 64), threshold_(threshold) {
    offsets_.assign(n_ + 1, 0);
    for (const auto& e : fcm.matrix().edges()) ++offsets_[e.target + 1];
    for (std::size_t j = 0; j < n_; ++j) offsets_[j + 1] += offsets_[j];
    incoming_.resize(fcm.matrix().edge_count());
    std::vector<std::size_t> fill(offsets_.begin(), offsets_.end() - 1);
    // Edges are sorted by source, so each target's list is too; this keeps the
    // summation order identical to the reference update.
    for (const auto& e : fcm.matrix().edges()) incoming_[fill[e.target]++] = {e.source, e.weight};
}

void BinaryStepper::apply(const std::uint64_t* in, std::uint64_t* out) const {
    std::fill(out, out + words_, 0);
    for (std::size_t j = 0; j < n_; ++j) {
        double sum = 0.0;
        for (std::size_t k = offsets_[j]; k < offsets_[j + 1]; ++k) {
            const auto& inc = incoming_[k];
            // branchless: state bits are close to random, so a test here mispredicts
            sum += inc.weight * static_cast<double>((in[inc.source >> 6] >> (inc.source & 63)) & 1u);
        }
        if (sum > threshold_) out[j >> 6] |= std::uint64_t{1} << (j & 63);
    }
}

std::vector<std::uint64_t> census_initial_states(std::size_t n, const CensusPolicy& policy, bool& exhaustive,
                                                 std::size_t& count) {
    const std::size_t words = (n + 63) / 64;
    std::vector<std::uint64_t> states;
    exhaustive = n <= policy.exhaustive_limit && n < 63;
    if (exhaustive) {
        count = std::size_t{1} << n;
        states.resize(count * std::max<std::size_t>(words, 1));
        for (std::size_t s = 0; s < count; ++s) states[s * std::max<std::size_t>(words, 1)] = s;
        if (words == 0) states.assign(count, 0);
        return states;
    }
    count = policy.sample_size;
    states.resize(count * words);
    std::mt19937_64 rng(policy.seed);
    const std::size_t tail = n % 64;
    for (std::size_t s = 0; s < count; ++s) {
        for (std::size_t w = 0; w < words; ++w) {
            std::uint64_t bits = rng();
            if (w + 1 == words && tail != 0) bits &= (std::uint64_t{1} << tail) - 1;
            states[s * words + w] = bits;
        }
    }
    return states;
}

std::size_t census_step_budget(std::size_t n) {
    constexpr std::size_t cap = std::size_t{1} << 20;
    return n < 20 ? (std::size_t{1} << n) + 1 : cap;
}

std::vector<std::vector<double>> canonical_cycle(std::vector<std::vector<double>> cycle) {
    if (cycle.empty()) return cycle;
    auto smallest = std::min_element(cycle.begin(), cycle.end());
    std::rotate(cycle.begin(), smallest, cycle.end());
    return cycle;
}

}  // namespace fcmforge::kernels
