#ifndef OWPUW_BASELINES_HPP
#define OWPUW_BASELINES_HPP

#include <string>
#include <vector>

#include "owpuw/core.hpp"

namespace owpuw {

enum class PolicyKind { owpuw, known_weights, lru, random_evict, marking };

PolicyKind parse_policy(const std::string& name);
const char* policy_name(PolicyKind kind);
std::vector<PolicyKind> all_policies();

/// Total eviction cost of a classical integral policy, at the page means.
/// Throws InvariantViolation if the policy ever holds an illegal cache.
double run_lru(const Instance& inst);
double run_random_evict(const Instance& inst, Rng& rng);
double run_marking(const Instance& inst, Rng& rng);

/// The learning pipeline with bounds pinned to the true means.
double run_known_weights(const Instance& inst, Rng& rng);

/// Dispatch; owpuw and known_weights return the pipeline's expected cost.
double run_policy(PolicyKind kind, const Instance& inst, Rng& rng);

}  // namespace owpuw

#endif
