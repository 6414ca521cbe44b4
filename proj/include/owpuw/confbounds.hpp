#ifndef OWPUW_CONFBOUNDS_HPP
#define OWPUW_CONFBOUNDS_HPP

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "owpuw/core.hpp"

namespace owpuw {

/// What the learner knows about one page's mean eviction cost.
struct ConfState {
    std::uint32_t samples = 0;
    long double mean = 0.0L;
    double lcb = 0.0;
    double ucb = 1.0;
};

/// sqrt(ln(4 n^3 T^3) / (2 i)); defined for i >= 2 only.
double confidence_radius(std::uint64_t i, std::size_t n, std::size_t horizon);

/// Folds one sample into the page's confidence state. The first sample sets
/// LCB = sample / (2 n^2 T) and UCB = 1; later samples move LCB up and UCB
/// down monotonically around the running mean.
ConfState update_conf_bounds(const std::optional<ConfState>& state, double sample,
                             std::size_t n, std::size_t horizon);

/// Growth of the regret budget when a page's i-th sample moves its bounds to
/// (lcb, ucb) from a previous lower bound prev_lcb (0 before the first sample).
double regret_increment(double lcb, double ucb, double prev_lcb, double eta);

/// 8 sqrt(nT) ln(nT).
double regret_budget_bound(std::size_t n, std::size_t horizon);

/// One row of the per-update diagnostic dump.
struct ConfRecord {
    std::size_t t = 0;
    PageId page{};
    std::uint32_t i = 0;
    double mean = 0.0;
    double lcb = 0.0;
    double ucb = 0.0;
    std::optional<double> eps;
};

/// True iff every recorded (lcb, ucb) pair brackets the page's true mean.
bool good_event_holds(std::span<const ConfRecord> history, std::span<const double> true_weights);

void write_conf_jsonl(std::ostream& out, std::span<const ConfRecord> history);

}  // namespace owpuw

#endif
