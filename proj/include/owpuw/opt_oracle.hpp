#ifndef OWPUW_OPT_ORACLE_HPP
#define OWPUW_OPT_ORACLE_HPP

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "owpuw/core.hpp"
#include "owpuw/rounding.hpp"

namespace owpuw {

/// Offline optimum with a lazy witness.
struct OptSchedule {
    double cost = 0.0;
    std::vector<PageMask> caches;              // C*_t after round t
    std::vector<std::optional<PageId>> evicted; // page evicted in round t
    std::vector<double> cumulative;             // OPT_t
};

class OracleTooLarge : public std::runtime_error {
public:
    OracleTooLarge() : std::runtime_error("instance too large for exact oracle") {}
};

/// Work limits of the dynamic program: at most `max_pages` pages and at most
/// `max_work` (cache states x rounds).
struct OracleLimits {
    std::size_t max_pages = 16;
    std::size_t max_work = 20'000'000;
};

/// Number of cached sets with at most k of n pages.
std::size_t cache_state_count(std::size_t n, std::size_t k);

bool oracle_fits(const Instance& inst, const OracleLimits& limits = {});

/// Minimum total eviction cost (weights w) over all integral schedules.
/// Throws OracleTooLarge past the limits.
OptSchedule exact_opt(const Instance& inst, std::span<const double> weights,
                      const OracleLimits& limits = {});
OptSchedule exact_opt(const Instance& inst, const OracleLimits& limits = {});

/// Farthest-in-future eviction; returns eviction count times the common
/// weight. Requires all page means to be equal.
double belady(const Instance& inst);
std::size_t belady_evictions(std::span<const PageId> requests, std::size_t k);

/// Feasibility and laziness of a witness for the given requests.
bool witness_is_lazy(const OptSchedule& schedule, std::span<const PageId> requests,
                     std::size_t k);

void write_schedule_jsonl(std::ostream& out, const OptSchedule& schedule,
                          std::span<const PageId> requests);

}  // namespace owpuw

#endif
