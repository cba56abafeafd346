#include "fcmforge/dynamics.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <unordered_map>

#include "fcmforge/error.hpp"
#include "fcmforge/kernels.hpp"

namespace fcmforge {

namespace {

struct ResolvedControls {
    std::vector<std::pair<std::size_t, double>> clamps;
    std::vector<std::tuple<std::size_t, double, std::size_t>> pulses;  // index, value, step
    std::size_t last_pulse = 0;

    void apply(std::vector<double>& x, std::size_t t) const {
        for (const auto& [i, v] : clamps) x[i] = v;
        for (const auto& [i, v, s] : pulses) {
            if (s == t) x[i] = v;
        }
    }
};

ResolvedControls resolve(const FcmGraph& fcm, const ControlSchedule& controls) {
    validate_controls(fcm, controls);
    ResolvedControls r;
    for (const auto& [id, v] : controls.clamps) r.clamps.emplace_back(*fcm.find_id(id), v);
    for (const auto& p : controls.pulses) {
        r.pulses.emplace_back(*fcm.find_id(p.node_id), p.value, p.step);
        r.last_pulse = std::max(r.last_pulse, p.step);
    }
    return r;
}

std::vector<double> raw_step(const std::vector<double>& x, const EdgeMatrix& m, const SquashingConfig& squash) {
    std::vector<double> input(x.size(), 0.0);
    for (const auto& e : m.edges()) input[e.target] += x[e.source] * e.weight;
    for (auto& v : input) v = squash.apply(v);
    return input;
}

double max_diff(const std::vector<double>& a, const std::vector<double>& b) {
    double d = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a[i] - b[i]));
    return d;
}

std::string binary_key(const std::vector<double>& x) {
    std::string key(x.size(), '0');
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (x[i] != 0.0) key[i] = '1';
    }
    return key;
}

bool is_bit(double v) { return v == 0.0 || v == 1.0; }

constexpr std::size_t continuous_lookback = 4096;

}  // namespace

std::string to_string(AttractorKind kind) {
    switch (kind) {
        case AttractorKind::fixed_point: return "fixed-point";
        case AttractorKind::limit_cycle: return "limit-cycle";
        case AttractorKind::undetected: return "undetected";
    }
    return "undetected";
}

double SquashingConfig::apply(double x) const {
    if (kind == SquashKind::hard_threshold) return x > threshold ? 1.0 : 0.0;
    return 1.0 / (1.0 + std::exp(-steepness * x));
}

void SquashingConfig::validate() const {
    if (kind == SquashKind::hard_threshold && !std::isfinite(threshold)) {
        throw ValidationError("hard-threshold squashing needs a finite threshold");
    }
    if (kind == SquashKind::logistic && !(steepness > 0.0 && std::isfinite(steepness))) {
        throw ValidationError("logistic squashing needs a positive steepness");
    }
}

void validate_controls(const FcmGraph& fcm, const ControlSchedule& controls) {
    auto check_value = [](double v, const std::string& what) {
        if (!(v >= 0.0 && v <= 1.0)) throw ValidationError(fmt::format("{} value {} outside [0, 1]", what, v));
    };
    for (const auto& [id, v] : controls.clamps) {
        if (!fcm.find_id(id)) throw ValidationError("clamp names unknown node '" + id + "'");
        check_value(v, "clamp");
    }
    for (const auto& p : controls.pulses) {
        if (!fcm.find_id(p.node_id)) throw ValidationError("pulse names unknown node '" + p.node_id + "'");
        if (controls.clamps.contains(p.node_id)) {
            throw ValidationError("node '" + p.node_id + "' is both clamped and pulsed");
        }
        check_value(p.value, "pulse");
    }
}

StateVector initial_state(const FcmGraph& fcm, const ControlSchedule& controls) {
    const auto r = resolve(fcm, controls);
    StateVector s{std::vector<double>(fcm.size(), 0.0), 0};
    r.apply(s.values, 0);
    return s;
}

StateVector step(const StateVector& state, const FcmGraph& fcm, const SquashingConfig& squash,
                 const ControlSchedule& controls) {
    squash.validate();
    if (state.values.size() != fcm.size()) {
        throw ValidationError(fmt::format("state has {} components, FCM has {} nodes", state.values.size(), fcm.size()));
    }
    const auto r = resolve(fcm, controls);
    StateVector next{raw_step(state.values, fcm.matrix(), squash), state.time + 1};
    r.apply(next.values, next.time);
    return next;
}

bool is_binary_run(const StateVector& init, const ControlSchedule& controls, const SquashingConfig& squash) {
    if (squash.kind != SquashKind::hard_threshold) return false;
    if (!std::all_of(init.values.begin(), init.values.end(), is_bit)) return false;
    for (const auto& [id, v] : controls.clamps) {
        if (!is_bit(v)) return false;
    }
    for (const auto& p : controls.pulses) {
        if (!is_bit(p.value)) return false;
    }
    return true;
}

SimulationResult simulate(const FcmGraph& fcm, const StateVector& init, const ControlSchedule& controls,
                          const SquashingConfig& squash, std::size_t max_steps) {
    squash.validate();
    if (max_steps == 0) throw ValidationError("max_steps must be at least 1");
    if (init.values.size() != fcm.size()) {
        throw ValidationError(fmt::format("initial state has {} components, FCM has {} nodes", init.values.size(),
                                          fcm.size()));
    }
    for (double v : init.values) {
        if (!(v >= 0.0 && v <= 1.0)) throw ValidationError(fmt::format("initial state value {} outside [0, 1]", v));
    }
    const auto r = resolve(fcm, controls);
    const bool binary = is_binary_run(init, controls, squash);
    // Dynamics are autonomous from the last pulse on; only those states may close a cycle.
    const std::size_t eligible_from = r.last_pulse;

    SimulationResult result;
    auto& states = result.trajectory.states;
    std::vector<double> x0 = init.values;
    r.apply(x0, 0);
    states.push_back({std::move(x0), 0});

    std::unordered_map<std::string, std::size_t> seen;
    if (binary && eligible_from == 0) seen.emplace(binary_key(states[0].values), 0);

    auto finish = [&](std::size_t first, std::size_t last) {
        result.trajectory.transient_length = first;
        auto& a = result.attractor;
        a.period = last - first + 1;
        a.kind = a.period == 1 ? AttractorKind::fixed_point : AttractorKind::limit_cycle;
        for (std::size_t s = first; s <= last; ++s) a.cycle_states.push_back(states[s].values);
        return result;
    };

    for (std::size_t t = 0; t < max_steps; ++t) {
        std::vector<double> next = raw_step(states.back().values, fcm.matrix(), squash);
        r.apply(next, t + 1);
        states.push_back({std::move(next), t + 1});
        const auto& cur = states.back().values;
        if (t + 1 < eligible_from) continue;
        if (binary) {
            auto [it, inserted] = seen.emplace(binary_key(cur), t + 1);
            if (!inserted) return finish(it->second, t);
        } else if (t >= eligible_from) {
            if (max_diff(cur, states[t].values) < continuous_tolerance) {
                result.trajectory.transient_length = t;
                result.attractor = {AttractorKind::fixed_point, 1, {cur}};
                return result;
            }
            const std::size_t floor = std::max(eligible_from, t > continuous_lookback ? t - continuous_lookback : 0);
            for (std::size_t s = t; s-- > floor;) {
                if (max_diff(cur, states[s].values) < continuous_tolerance) return finish(s, t);
            }
        }
    }
    result.trajectory.transient_length = states.size();
    result.attractor = {AttractorKind::undetected, 0, {}};
    return result;
}

Census attractor_census(const FcmGraph& fcm, const SquashingConfig& squash, const CensusPolicy& policy) {
    return kernels::census_parallel(fcm, squash, policy);
}

}  // namespace fcmforge
