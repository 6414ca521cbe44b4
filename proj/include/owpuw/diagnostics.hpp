#ifndef OWPUW_DIAGNOSTICS_HPP
#define OWPUW_DIAGNOSTICS_HPP

#include <array>
#include <span>
#include <string>
#include <vector>

#include "owpuw/online.hpp"
#include "owpuw/opt_oracle.hpp"

namespace owpuw {

/// Phi for a snapshot and the offline cache C*_t.
double potential(const Snapshot& s, double eta, PageMask opt_cache);

struct PotentialReport {
    bool holds = true;
    double worst_slack = 0.0;  // min over events of rhs - lhs (plus tolerance)
    std::size_t worst_event = 0;
    std::size_t events_checked = 0;
    std::size_t violations = 0;
    double min_phi = 0.0;
    bool u_monotone = true;
    bool m_gap_ok = true;  // n_p - m_p in [0, 1]
    std::string error;
};

/// ONF-bar_t + Phi_t - Phi_0 <= 2 ln(1 + 1/eta) OPT_t + U_t at every event.
PotentialReport check_potential_inequality(const RunLog& log, const OptSchedule& opt);

struct RegretReport {
    double u = 0.0;
    double bound = 0.0;
    bool holds = true;
};

RegretReport check_regret_bound(const RunLog& log);

struct CostItem {
    std::string name;
    double cost = 0.0;
    double bound = 0.0;
    bool holds = true;
};

struct RoundingCostReport {
    double on_cost = 0.0;
    double onf_ucb = 0.0;
    double bound = 0.0;  // 62 ONF-bar + 50 n
    bool holds = true;
    std::vector<CostItem> items;
    CostItem early_sampling;  // first two samples per page, <= 2n
    std::size_t rebalance_calls = 0;
    std::size_t lemma_violations = 0;
    bool all_hold() const;
};

RoundingCostReport check_rounding_cost_bound(const RunLog& log);

bool good_event(const RunLog& log);

nlohmann::json to_json(const PotentialReport& r);
nlohmann::json to_json(const RegretReport& r);
nlohmann::json to_json(const RoundingCostReport& r);

/// Every check the log supports; `passed` false if any one fails.
struct VerifyReport {
    nlohmann::json json;
    bool passed = true;
};

VerifyReport verify_run(const RunLog& log, const OracleLimits& limits = {});

}  // namespace owpuw

#endif
