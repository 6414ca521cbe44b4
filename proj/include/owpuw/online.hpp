#ifndef OWPUW_ONLINE_HPP
#define OWPUW_ONLINE_HPP

#include <array>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "owpuw/confbounds.hpp"
#include "owpuw/core.hpp"
#include "owpuw/fractional.hpp"
#include "owpuw/rounding.hpp"

namespace owpuw {

enum class ArithmeticChoice { automatic, rational, floating };

/// Rational arithmetic at desk scale (n <= 8, T <= 200), floating otherwise.
ArithmeticMode choose_arithmetic(const Instance& inst, ArithmeticChoice choice);

ArithmeticChoice parse_arithmetic(const std::string& name);

/// Per-page view of the fractional state right after an event.
struct Snapshot {
    std::vector<double> y;
    std::vector<double> m;
    std::vector<double> lcb;  // 0 before the first sample
    std::vector<double> ucb;  // 1 before the first sample
    std::vector<std::uint32_t> samples;
};

Snapshot take_snapshot(const FractionalState& state);

struct RunEvent {
    std::size_t t = 0;  // round index
    FractionalEvent event;
    double onf = 0.0;      // cumulative, true weights
    double onf_ucb = 0.0;  // cumulative, UCB prices
    double on = 0.0;       // cumulative expected integral cost
    double u = 0.0;        // cumulative regret budget
    std::optional<Snapshot> snapshot;
};

/// Everything a run leaves behind for the checkers.
struct RunLog {
    Instance instance;
    std::string policy = "owpuw";
    LearnerMode learner = LearnerMode::optimistic;
    std::optional<ArithmeticMode> arithmetic;  // absent for fractional-only runs
    double eta = 1.0;
    std::optional<Snapshot> initial;

    std::vector<RunEvent> events;
    std::vector<RebalanceReport> rebalances;
    std::vector<ConfRecord> conf_history;

    double on_cost = 0.0;
    double onf_cost = 0.0;
    double onf_ucb_cost = 0.0;
    double u_term = 0.0;
    bool good_event = true;
    std::array<double, kCostKinds> itemized{};
    double early_sampling_cost = 0.0;
};

/// Invariant failures counted over a run.
struct InvariantTally {
    std::size_t checks = 0;
    std::size_t mass = 0;
    std::size_t consistency = 0;
    std::size_t balance = 0;
    std::size_t validity = 0;
    std::size_t lemma_bound = 0;
    std::size_t cause_bound = 0;
    std::size_t evict_imbalance = 0;  // pre-rebalance imbalance above 2 dy

    std::size_t total() const
    {
        return mass + consistency + balance + validity + lemma_bound + cause_bound +
               evict_imbalance;
    }
};

struct PipelineOptions {
    LearnerMode learner = LearnerMode::optimistic;
    ArithmeticChoice arithmetic = ArithmeticChoice::automatic;
    /// Attach y/m/LCB/UCB snapshots to every logged event.
    bool snapshots = false;
    /// Keep the event list at all (needed by the potential checker).
    bool record_events = false;
    /// Re-verify the rounding invariants after every event.
    bool check_invariants = false;
    InvariantTally* tally = nullptr;
    TrajectoryLog* trajectory = nullptr;
    /// Flag-gated distribution dump, one record per event.
    std::function<void(const nlohmann::json&)> distribution_dump;
};

/// Fractional solver and rounding layer run together on one instance.
RunLog run_pipeline(const Instance& inst, Rng& rng, const PipelineOptions& options = {});

/// The fractional solver alone, fed directly with i.i.d. weight samples.
RunLog run_fractional(const Instance& inst, Rng& rng, LearnerMode learner = LearnerMode::optimistic,
                      bool record_events = false, bool snapshots = false);

// ---------------------------------------------------------------------------
// Run-log JSONL
// ---------------------------------------------------------------------------

void write_run_log(std::ostream& out, const RunLog& log);
RunLog read_run_log(std::istream& in);

nlohmann::json event_to_json(const FractionalEvent& ev);
FractionalEvent event_from_json(const nlohmann::json& j);

}  // namespace owpuw

#endif
