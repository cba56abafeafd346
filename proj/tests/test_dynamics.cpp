#include <gtest/gtest.h>

#include <cmath>
#include <map>

#include "fcmforge/dynamics.hpp"
#include "fcmforge/dynamics_io.hpp"
#include "fcmforge/error.hpp"
#include "fcmforge/kernels.hpp"
#include "support.hpp"

using namespace fcmforge;
using fcmforge::testing::random_fcm;
using fcmforge::testing::random_grid_fcm;

namespace {

FcmGraph pair_fcm(double ab, double ba) {
    std::vector<LabeledEdge> edges;
    if (ab != 0.0) edges.push_back({"A", "B", ab});
    if (ba != 0.0) edges.push_back({"B", "A", ba});
    return build_fcm("pair", {"A", "B"}, edges);
}

StateVector zeros(std::size_t n) { return {std::vector<double>(n, 0.0), 0}; }

// Brute-force oracle: the full 2^n transition table, built with plain loops over a dense copy.
struct TransitionTable {
    std::size_t n;
    std::vector<unsigned> next;

    explicit TransitionTable(const FcmGraph& f) : n(f.size()), next(1u << f.size()) {
        std::vector<std::vector<double>> w(n, std::vector<double>(n, 0.0));
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < n; ++j) w[i][j] = f.matrix().at(i, j);
        }
        for (unsigned s = 0; s < next.size(); ++s) {
            unsigned out = 0;
            for (std::size_t j = 0; j < n; ++j) {
                double sum = 0.0;
                for (std::size_t i = 0; i < n; ++i) sum += ((s >> i) & 1u) ? w[i][j] : 0.0;
                if (sum > 0.0) out |= 1u << j;
            }
            next[s] = out;
        }
    }

    // (transient, cycle states in visiting order)
    std::pair<std::size_t, std::vector<unsigned>> orbit(unsigned start) const {
        std::map<unsigned, std::size_t> when;
        std::vector<unsigned> seq;
        unsigned s = start;
        while (!when.count(s)) {
            when[s] = seq.size();
            seq.push_back(s);
            s = next[s];
        }
        return {when[s], std::vector<unsigned>(seq.begin() + static_cast<long>(when[s]), seq.end())};
    }
};

std::vector<double> unpack(unsigned s, std::size_t n) {
    std::vector<double> v(n);
    for (std::size_t i = 0; i < n; ++i) v[i] = (s >> i) & 1u;
    return v;
}

// Number of nonzero roots of the characteristic polynomial of a 3x3 (or smaller) matrix,
// from exact minors. Grid weights are dyadic, so every coefficient is exact in double.
std::size_t nonzero_roots(const FcmGraph& f) {
    const std::size_t n = f.size();
    auto a = [&](std::size_t i, std::size_t j) { return f.matrix().at(i, j); };
    double c[4] = {0, 0, 0, 0};  // c[k] = sum of principal k-minors
    for (std::size_t i = 0; i < n; ++i) c[1] += a(i, i);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) c[2] += a(i, i) * a(j, j) - a(i, j) * a(j, i);
    }
    if (n == 3) {
        c[3] = a(0, 0) * (a(1, 1) * a(2, 2) - a(1, 2) * a(2, 1)) - a(0, 1) * (a(1, 0) * a(2, 2) - a(1, 2) * a(2, 0)) +
               a(0, 2) * (a(1, 0) * a(2, 1) - a(1, 1) * a(2, 0));
    }
    for (std::size_t k = n; k > 0; --k) {
        if (c[k] != 0.0) return k;
    }
    return 0;
}

}  // namespace

TEST(Step, SinglePositiveDrive) {
    const auto f = pair_fcm(1.0, 0.0);
    const auto next = step({{1.0, 0.0}, 0}, f, SquashingConfig::hard(), {});
    EXPECT_EQ(next.values, (std::vector<double>{0.0, 1.0}));
    EXPECT_EQ(next.time, 1u);
}

TEST(Step, ZeroIsAbsorbing) {
    const auto f = pair_fcm(1.0, 1.0);
    EXPECT_EQ(step(zeros(2), f, SquashingConfig::hard(), {}).values, (std::vector<double>{0.0, 0.0}));
}

TEST(Step, DimensionMismatch) {
    EXPECT_THROW(step(zeros(3), pair_fcm(1, 0), SquashingConfig::hard(), {}), ValidationError);
}

TEST(Step, LogisticStaysInUnitInterval) {
    const auto s = SquashingConfig::logistic();
    for (double x : {-1e6, -3.0, 0.0, 0.2, 50.0, 1e6}) {
        EXPECT_GE(s.apply(x), 0.0);
        EXPECT_LE(s.apply(x), 1.0);
    }
    EXPECT_DOUBLE_EQ(s.apply(0.0), 0.5);
    EXPECT_THROW(SquashingConfig::logistic(-1.0).validate(), ValidationError);
}

TEST(Simulate, ClampForcesFixedPointAtStepOne) {
    const auto f = pair_fcm(1.0, 0.0);
    ControlSchedule c;
    c.clamps["n1"] = 1.0;
    const auto r = simulate(f, zeros(2), c, SquashingConfig::hard());
    EXPECT_EQ(r.attractor.kind, AttractorKind::fixed_point);
    EXPECT_EQ(r.attractor.period, 1u);
    EXPECT_EQ(r.attractor.cycle_states[0], (std::vector<double>{1.0, 1.0}));
    EXPECT_EQ(r.trajectory.transient_length, 1u);
    EXPECT_EQ(r.trajectory.states[0].values, (std::vector<double>{1.0, 0.0}));
}

TEST(Simulate, TwoCycle) {
    const auto f = pair_fcm(1.0, 1.0);
    const auto r = simulate(f, {{1.0, 0.0}, 0}, {}, SquashingConfig::hard());
    EXPECT_EQ(r.attractor.kind, AttractorKind::limit_cycle);
    EXPECT_EQ(r.attractor.period, 2u);
    EXPECT_EQ(r.trajectory.transient_length, 0u);
}

TEST(Simulate, BudgetExhaustedIsUndetected) {
    const auto f = pair_fcm(1.0, 1.0);
    const auto r = simulate(f, {{1.0, 0.0}, 0}, {}, SquashingConfig::hard(), 1);
    EXPECT_EQ(r.attractor.kind, AttractorKind::undetected);
    EXPECT_EQ(r.attractor.period, 0u);
}

TEST(Simulate, RejectsBadControls) {
    const auto f = pair_fcm(1.0, 0.0);
    ControlSchedule unknown;
    unknown.clamps["zz"] = 1.0;
    EXPECT_THROW(simulate(f, zeros(2), unknown, SquashingConfig::hard()), ValidationError);
    ControlSchedule range;
    range.clamps["n1"] = 1.5;
    EXPECT_THROW(simulate(f, zeros(2), range, SquashingConfig::hard()), ValidationError);
    ControlSchedule both;
    both.clamps["n1"] = 1.0;
    both.pulses.push_back({"n1", 0.0, 2});
    EXPECT_THROW(simulate(f, zeros(2), both, SquashingConfig::hard()), ValidationError);
}

TEST(Simulate, PulseActsOnceThenDynamicsResume) {
    // A -> B -> C chain: a pulse on A at t=2 travels down and dies out
    const auto f = build_fcm("chain", {"A", "B", "C"}, {{"A", "B", 1.0}, {"B", "C", 1.0}});
    ControlSchedule c;
    c.pulses.push_back({"n1", 1.0, 2});
    const auto r = simulate(f, zeros(3), c, SquashingConfig::hard());
    const auto& s = r.trajectory.states;
    ASSERT_GE(s.size(), 6u);
    EXPECT_EQ(s[1].values, (std::vector<double>{0, 0, 0}));
    EXPECT_EQ(s[2].values, (std::vector<double>{1, 0, 0}));
    EXPECT_EQ(s[3].values, (std::vector<double>{0, 1, 0}));
    EXPECT_EQ(s[4].values, (std::vector<double>{0, 0, 1}));
    EXPECT_EQ(r.attractor.kind, AttractorKind::fixed_point);
    EXPECT_EQ(r.attractor.cycle_states[0], (std::vector<double>{0, 0, 0}));
    // the null state before the pulse does not count as the equilibrium
    EXPECT_EQ(r.trajectory.transient_length, 5u);
}

TEST(Simulate, ContinuousFixedPoint) {
    const auto f = pair_fcm(0.5, -0.5);
    const auto r = simulate(f, {{0.3, 0.9}, 0}, {}, SquashingConfig::logistic(), 1000);
    ASSERT_EQ(r.attractor.kind, AttractorKind::fixed_point);
    const auto& x = r.attractor.cycle_states[0];
    const auto again = step({x, 0}, f, SquashingConfig::logistic(), {});
    for (std::size_t i = 0; i < x.size(); ++i) EXPECT_NEAR(again.values[i], x[i], 1e-9);
}

TEST(Simulate, OracleEquivalenceSmallBinary) {
    std::mt19937_64 rng(31);
    for (int trial = 0; trial < 2000; ++trial) {
        const std::size_t n = 1 + trial % 3;
        const auto f = random_grid_fcm(rng, n);
        const TransitionTable table(f);
        const unsigned start = static_cast<unsigned>(rng() % (1u << n));
        const auto [transient, cycle] = table.orbit(start);
        const auto r = simulate(f, {unpack(start, n), 0}, {}, SquashingConfig::hard(), (1u << n) + 1);
        ASSERT_NE(r.attractor.kind, AttractorKind::undetected);
        EXPECT_EQ(r.trajectory.transient_length, transient);
        ASSERT_EQ(r.attractor.period, cycle.size());
        for (std::size_t k = 0; k < cycle.size(); ++k) EXPECT_EQ(r.attractor.cycle_states[k], unpack(cycle[k], n));
    }
}

TEST(Simulate, PropertyClampDominanceAndDeterminism) {
    std::mt19937_64 rng(37);
    for (int trial = 0; trial < 200; ++trial) {
        const auto f = random_fcm(rng, 5, 0.5);
        ControlSchedule c;
        c.clamps[f.nodes()[trial % 5].id] = (trial % 2) ? 1.0 : 0.0;
        const auto a = simulate(f, zeros(5), c, SquashingConfig::hard());
        const auto b = simulate(f, zeros(5), c, SquashingConfig::hard());
        ASSERT_EQ(a.trajectory.states, b.trajectory.states);
        for (const auto& s : a.trajectory.states) EXPECT_EQ(s.values[trial % 5], (trial % 2) ? 1.0 : 0.0);
    }
}

TEST(Simulate, PropertyPulseLocality) {
    std::mt19937_64 rng(41);
    for (int trial = 0; trial < 200; ++trial) {
        const auto f = random_fcm(rng, 4, 0.5);
        const std::size_t t0 = 1 + trial % 5;
        ControlSchedule with;
        with.pulses.push_back({f.nodes()[0].id, 1.0, t0});
        StateVector init{{0.0, 1.0, 0.0, 1.0}, 0};
        const auto a = simulate(f, init, with, SquashingConfig::hard(), 64);
        const auto b = simulate(f, init, {}, SquashingConfig::hard(), 64);
        const std::size_t common = std::min({a.trajectory.states.size(), b.trajectory.states.size(), t0});
        for (std::size_t t = 0; t < common; ++t) EXPECT_EQ(a.trajectory.states[t], b.trajectory.states[t]);
    }
}

TEST(Simulate, PropertyAttractorVerifies) {
    std::mt19937_64 rng(43);
    for (int trial = 0; trial < 200; ++trial) {
        const auto f = random_fcm(rng, 6, 0.4);
        StateVector init = zeros(6);
        for (auto& v : init.values) v = static_cast<double>(rng() % 2);
        const auto r = simulate(f, init, {}, SquashingConfig::hard(), 65);
        ASSERT_NE(r.attractor.kind, AttractorKind::undetected);
        const auto& cyc = r.attractor.cycle_states;
        for (std::size_t k = 0; k < cyc.size(); ++k) {
            StateVector s{cyc[k], 0};
            for (std::size_t i = 0; i < cyc.size(); ++i) s = step(s, f, SquashingConfig::hard(), {});
            EXPECT_EQ(s.values, cyc[k]);
        }
    }
}

TEST(Census, SingleNodeWithoutEdges) {
    const auto f = build_fcm("one", {"X"}, {});
    const auto c = attractor_census(f, SquashingConfig::hard());
    ASSERT_EQ(c.entries.size(), 1u);
    EXPECT_EQ(c.entries[0].basin, 2u);
    EXPECT_EQ(c.entries[0].attractor.kind, AttractorKind::fixed_point);
}

TEST(Census, TwoCycleFcmHasNullAndCycle) {
    const auto c = attractor_census(pair_fcm(1.0, 1.0), SquashingConfig::hard());
    ASSERT_EQ(c.entries.size(), 3u);  // 00, 11 fixed, and the 01/10 cycle
    std::size_t total = 0;
    bool has_cycle = false, has_null = false;
    for (const auto& e : c.entries) {
        total += e.basin;
        has_cycle |= e.attractor.kind == AttractorKind::limit_cycle && e.attractor.period == 2;
        has_null |= e.attractor.kind == AttractorKind::fixed_point && e.attractor.cycle_states[0] == std::vector<double>{0, 0};
    }
    EXPECT_EQ(total, 4u);
    EXPECT_TRUE(has_cycle);
    EXPECT_TRUE(has_null);
}

TEST(Census, ExhaustiveMatchesTransitionTable) {
    std::mt19937_64 rng(47);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t n = 1 + trial % 3;
        const auto f = random_grid_fcm(rng, n);
        const TransitionTable table(f);
        std::map<std::vector<unsigned>, std::size_t> oracle;
        for (unsigned s = 0; s < (1u << n); ++s) {
            auto cyc = table.orbit(s).second;
            std::rotate(cyc.begin(), std::min_element(cyc.begin(), cyc.end(), [&](unsigned a, unsigned b) {
                            return unpack(a, n) < unpack(b, n);
                        }),
                        cyc.end());
            ++oracle[cyc];
        }
        const auto c = attractor_census(f, SquashingConfig::hard());
        ASSERT_EQ(c.entries.size(), oracle.size());
        for (const auto& e : c.entries) {
            std::vector<unsigned> key;
            for (const auto& s : e.attractor.cycle_states) {
                unsigned bits = 0;
                for (std::size_t i = 0; i < n; ++i) bits |= s[i] == 1.0 ? 1u << i : 0u;
                key.push_back(bits);
            }
            ASSERT_TRUE(oracle.count(key));
            EXPECT_EQ(oracle[key], e.basin);
        }
    }
}

TEST(Census, PropertyTotality) {
    std::mt19937_64 rng(53);
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t n = 2 + trial % 9;
        const auto c = attractor_census(random_fcm(rng, n, 0.4), SquashingConfig::hard());
        std::size_t total = 0;
        for (const auto& e : c.entries) total += e.basin;
        EXPECT_TRUE(c.exhaustive);
        EXPECT_EQ(total, std::size_t{1} << n);
        EXPECT_EQ(c.initial_states, std::size_t{1} << n);
    }
}

TEST(Census, SampledAboveExhaustiveLimit) {
    std::mt19937_64 rng(59);
    const auto f = random_fcm(rng, 20, 0.15);
    CensusPolicy p;
    p.seed = 99;
    const auto a = attractor_census(f, SquashingConfig::hard(), p);
    const auto b = attractor_census(f, SquashingConfig::hard(), p);
    EXPECT_FALSE(a.exhaustive);
    EXPECT_EQ(a.initial_states, 4096u);
    EXPECT_EQ(a, b);
}

TEST(Census, ContinuousModeIsRejected) {
    EXPECT_THROW(attractor_census(pair_fcm(1, 1), SquashingConfig::logistic()), ValidationError);
}

TEST(Census, ParallelKernelEqualsSerialReference) {
    std::mt19937_64 rng(61);
    for (int trial = 0; trial < 40; ++trial) {
        const std::size_t n = 1 + trial % 14;
        const auto f = random_fcm(rng, n, 0.35);
        const auto squash = SquashingConfig::hard(trial % 3 == 0 ? 0.25 : 0.0);
        CensusPolicy p;
        p.seed = static_cast<std::uint64_t>(trial);
        p.exhaustive_limit = trial % 2 ? 16 : 4;  // exercise the sampled path on small n too
        p.sample_size = 300;
        EXPECT_EQ(kernels::census_parallel(f, squash, p), kernels::census_reference(f, squash, p)) << "trial " << trial;
    }
}

TEST(Census, WideStatesSpanSeveralWords) {
    std::mt19937_64 rng(67);
    const auto f = random_fcm(rng, 70, 0.03);
    CensusPolicy p;
    p.sample_size = 64;
    p.seed = 5;
    EXPECT_EQ(kernels::census_parallel(f, SquashingConfig::hard(), p),
              kernels::census_reference(f, SquashingConfig::hard(), p));
}

TEST(Spectral, TriangularHasNoNonzeroEigenvalues) {
    std::mt19937_64 rng(71);
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t n = 2 + trial % 12;
        std::vector<std::string> labels;
        for (std::size_t i = 0; i < n; ++i) labels.push_back("v" + std::to_string(i));
        std::vector<LabeledEdge> edges;
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = i + 1; j < n; ++j) {
                if (rng() % 2) edges.push_back({labels[i], labels[j], 0.9});
            }
        }
        const auto s = spectral_summary(build_fcm("tri", labels, edges));
        EXPECT_EQ(s.nonzero_eigenvalues, 0u);
        EXPECT_EQ(s.nonzero_edges, edges.size());
    }
}

TEST(Spectral, SwapMatrixHasTwo) {
    const auto s = spectral_summary(pair_fcm(1.0, 1.0));
    EXPECT_EQ(s.nonzero_eigenvalues, 2u);
    EXPECT_EQ(s.nonzero_edges, 2u);
}

TEST(Spectral, MatchesCharacteristicPolynomialOnGrid) {
    std::mt19937_64 rng(73);
    for (int trial = 0; trial < 3000; ++trial) {
        const auto f = random_grid_fcm(rng, 1 + trial % 3);
        EXPECT_EQ(spectral_summary(f).nonzero_eigenvalues, nonzero_roots(f)) << "trial " << trial;
    }
}

TEST(DynamicsIo, TrajectoryCsvShapes) {
    const auto f = build_fcm("t", {"A", "Label, with comma"}, {{"A", "Label, with comma", 1.0}});
    ControlSchedule c;
    c.clamps["n1"] = 1.0;
    const auto r = simulate(f, zeros(2), c, SquashingConfig::hard());
    EXPECT_EQ(trajectory_csv(f, r.trajectory, true), "t,A,\"Label, with comma\"\n0,1,0\n1,1,1\n2,1,1\n");
    const auto cont = simulate(f, zeros(2), c, SquashingConfig::logistic(), 3);
    const auto csv = trajectory_csv(f, cont.trajectory, false);
    EXPECT_NE(csv.find("1,1.000000000000,"), std::string::npos) << csv;
}

TEST(DynamicsIo, AttractorJson) {
    const auto r = simulate(pair_fcm(1.0, 1.0), {{1.0, 0.0}, 0}, {}, SquashingConfig::hard());
    const auto doc = attractor_json(r.attractor, r.trajectory.transient_length);
    EXPECT_EQ(doc["kind"], "limit-cycle");
    EXPECT_EQ(doc["period"], 2);
    EXPECT_EQ(doc["cycle"].size(), 2u);
    EXPECT_TRUE(doc["cycle"][0][0].is_number_integer());
}

TEST(DynamicsIo, RasterMarksClampedCells) {
    const auto f = pair_fcm(1.0, 0.0);
    ControlSchedule c;
    c.clamps["n1"] = 1.0;
    const auto r = simulate(f, zeros(2), c, SquashingConfig::hard());
    const auto svg = raster_svg(f, r.trajectory, c);
    EXPECT_NE(svg.find("<svg"), std::string::npos);
    EXPECT_NE(svg.find("class=\"clamped\""), std::string::npos);
    EXPECT_NE(svg.find("class=\"active\""), std::string::npos);
    EXPECT_NE(svg.find("class=\"inactive\""), std::string::npos);
}

TEST(Spectral, DenseRankOneBlocks) {
    // W = u v^T is strongly connected when every entry is nonzero; its only
    // possible nonzero eigenvalue is v.u
    const std::vector<double> u{0.5, -0.25, 0.75, 0.5, -0.5, 0.25};
    const std::vector<double> nil{0.5, 0.5, 0.5, -0.5, 0.75, 0.5};    // v.u = 0
    const std::vector<double> one{0.5, 0.5, 0.25, 0.5, 0.75, 0.5};    // v.u = 0.3125
    auto outer = [&](const std::vector<double>& v) {
        std::vector<std::string> labels;
        for (std::size_t i = 0; i < u.size(); ++i) labels.push_back("r" + std::to_string(i));
        std::vector<LabeledEdge> edges;
        for (std::size_t i = 0; i < u.size(); ++i) {
            for (std::size_t j = 0; j < u.size(); ++j) edges.push_back({labels[i], labels[j], u[i] * v[j]});
        }
        return build_fcm("outer", labels, edges);
    };
    EXPECT_EQ(spectral_summary(outer(nil)).nonzero_eigenvalues, 0u);
    EXPECT_EQ(spectral_summary(outer(one)).nonzero_eigenvalues, 1u);
}
