#ifndef OWPUW_TESTKIT_HPP
#define OWPUW_TESTKIT_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "owpuw/diagnostics.hpp"
#include "owpuw/fractional.hpp"
#include "owpuw/online.hpp"

namespace owpuw::testkit {

struct FuzzShape {
    std::size_t max_n = 6;
    std::size_t max_k = 3;
    std::size_t min_T = 5;
    std::size_t max_T = 50;
};

/// Random instance mixing all three distribution kinds and a skewed or
/// uniform request stream.
Instance random_instance(Rng& rng, const FuzzShape& shape = {});

/// Random instance with every page at the same deterministic weight.
Instance random_unit_instance(Rng& rng, std::size_t max_n, std::size_t max_T);

struct FuzzOutcome {
    std::uint64_t seed = 0;
    Instance instance;
    std::string error;  // unexpected exception, if any
    bool sample_failure = false;
    InvariantTally tally;

    std::size_t conf_monotone = 0;
    std::size_t conf_width = 0;
    std::size_t conf_positive = 0;

    std::size_t feasibility = 0;
    std::size_t eviction_without_deficit = 0;
    std::size_t demand_mismatch = 0;  // SampleDemand not at first request or integral m

    bool good_event = true;
    bool potential_checked = false;
    PotentialReport potential;
    RegretReport regret;
    RoundingCostReport rounding;
};

/// Full pipeline (rational arithmetic) plus every checker, on one instance.
FuzzOutcome fuzz_one(std::uint64_t seed, const FuzzShape& shape = {});

/// Checks of the confidence histories alone; adds to the outcome counters.
void check_conf_history(const RunLog& log, FuzzOutcome& out);

/// Per-request feasibility and demand timing, from a log with snapshots.
void check_fractional_log(const RunLog& log, FuzzOutcome& out);

/// Fixed-step Euler integration of the continuous eviction. The step bounds
/// the largest single-page movement of y per iteration.
struct EulerOracle {
    double step = 1e-7;
    std::vector<std::vector<double>> y_after_request;
};

void euler_replay(const Instance& inst, const std::vector<std::vector<double>>& samples,
                  EulerOracle& oracle);

/// Exact-solver counterpart of euler_replay on the same sample streams.
std::vector<std::vector<double>> exact_replay(const Instance& inst,
                                              const std::vector<std::vector<double>>& samples);

/// Pre-drawn per-page sample streams long enough for any run of the instance.
std::vector<std::vector<double>> draw_streams(const Instance& inst, Rng& rng, std::size_t length);

}  // namespace owpuw::testkit

#endif
