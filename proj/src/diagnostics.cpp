#include "owpuw/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace owpuw {

double potential(const Snapshot& s, double eta, PageMask opt_cache)
{
    double phi = 0.0;
    for (std::size_t i = 0; i < s.y.size(); ++i) {
        if (!(opt_cache & (PageMask{1} << i)) && s.samples[i] > 0)
            phi -= 2.0 * s.lcb[i] * std::log((s.y[i] + eta) / (1.0 + eta));
        phi += (s.ucb[i] - s.lcb[i]) * (static_cast<double>(s.samples[i]) - s.m[i]);
    }
    return phi;
}

PotentialReport check_potential_inequality(const RunLog& log, const OptSchedule& opt)
{
    PotentialReport rep;
    rep.worst_slack = std::numeric_limits<double>::infinity();
    rep.min_phi = std::numeric_limits<double>::infinity();
    const double eta = log.eta;
    const double opt_factor = 2.0 * std::log1p(1.0 / eta);

    double phi0 = 0.0;
    if (log.initial)
        phi0 = potential(*log.initial, eta, 0);
    else if (!log.events.empty())
        rep.error = "run log has no initial snapshot";

    double prev_u = 0.0;
    for (std::size_t idx = 0; idx < log.events.size(); ++idx) {
        const RunEvent& e = log.events[idx];
        if (!e.snapshot) {
            rep.error = "event " + std::to_string(idx) + " has no state snapshot";
            break;
        }
        if (e.t >= opt.caches.size()) {
            rep.error = "event round beyond the offline schedule";
            break;
        }
        const Snapshot& s = *e.snapshot;
        const double phi = potential(s, eta, opt.caches[e.t]);
        const double lhs = e.onf_ucb + phi - phi0;
        const double rhs = opt_factor * opt.cumulative[e.t] + e.u;
        const double tol =
            1e-7 * (1.0 + std::abs(e.onf_ucb) + std::abs(phi) + std::abs(phi0) + std::abs(rhs));
        const double slack = rhs - lhs;
        if (slack < -tol) {
            ++rep.violations;
            rep.holds = false;
        }
        if (slack < rep.worst_slack) {
            rep.worst_slack = slack;
            rep.worst_event = idx;
        }
        rep.min_phi = std::min(rep.min_phi, phi);
        if (e.u < prev_u)
            rep.u_monotone = false;
        prev_u = e.u;
        for (std::size_t i = 0; i < s.y.size(); ++i) {
            if (s.samples[i] == 0)
                continue;
            const double gap = static_cast<double>(s.samples[i]) - s.m[i];
            if (gap < -1e-9 || gap > 1.0 + 1e-9)
                rep.m_gap_ok = false;
        }
        ++rep.events_checked;
    }
    if (!rep.error.empty())
        rep.holds = false;
    if (rep.events_checked == 0) {
        rep.worst_slack = 0.0;
        rep.min_phi = 0.0;
    }
    return rep;
}

RegretReport check_regret_bound(const RunLog& log)
{
    RegretReport r;
    r.u = log.u_term;
    r.bound = regret_budget_bound(log.instance.n(), log.instance.horizon);
    r.holds = r.u <= r.bound;
    return r;
}

bool RoundingCostReport::all_hold() const
{
    if (!holds || !early_sampling.holds || lemma_violations > 0)
        return false;
    return std::all_of(items.begin(), items.end(), [](const CostItem& c) { return c.holds; });
}

RoundingCostReport check_rounding_cost_bound(const RunLog& log)
{
    RoundingCostReport r;
    const double n = static_cast<double>(log.instance.n());
    const double f = log.onf_ucb_cost;
    auto within = [](double cost, double bound) {
        return cost <= bound + 1e-9 * (1.0 + std::abs(bound));
    };
    r.on_cost = log.on_cost;
    r.onf_ucb = f;
    r.bound = 62.0 * f + 50.0 * n;
    r.holds = within(r.on_cost, r.bound);

    const std::array<double, kCostKinds> bounds{f, f + 2.0 * n, 12.0 * f + 24.0 * n, 24.0 * f,
                                                24.0 * f + 24.0 * n};
    for (std::size_t c = 0; c < kCostKinds; ++c) {
        CostItem item;
        item.name = cost_kind_name(static_cast<CostKind>(c));
        item.cost = log.itemized[c];
        item.bound = bounds[c];
        item.holds = within(item.cost, item.bound);
        r.items.push_back(item);
    }
    r.early_sampling.name = "first_two_samples";
    r.early_sampling.cost = log.early_sampling_cost;
    r.early_sampling.bound = 2.0 * n;
    r.early_sampling.holds = within(r.early_sampling.cost, r.early_sampling.bound);

    r.rebalance_calls = log.rebalances.size();
    for (const auto& rb : log.rebalances)
        r.lemma_violations += !rb.within_lemma_bound;
    return r;
}

bool good_event(const RunLog& log)
{
    return log.good_event && good_event_holds(log.conf_history, log.instance.mean_weights());
}

nlohmann::json to_json(const PotentialReport& r)
{
    nlohmann::json j{{"holds", r.holds},
                     {"worst_slack", r.worst_slack},
                     {"worst_event", r.worst_event},
                     {"events_checked", r.events_checked},
                     {"violations", r.violations},
                     {"min_phi", r.min_phi},
                     {"u_monotone", r.u_monotone},
                     {"m_gap_ok", r.m_gap_ok}};
    if (!r.error.empty())
        j["error"] = r.error;
    return j;
}

nlohmann::json to_json(const RegretReport& r)
{
    return {{"holds", r.holds}, {"u", r.u}, {"bound", r.bound}, {"slack", r.bound - r.u}};
}

nlohmann::json to_json(const RoundingCostReport& r)
{
    nlohmann::json items = nlohmann::json::array();
    for (const auto& c : r.items)
        items.push_back({{"name", c.name}, {"cost", c.cost}, {"bound", c.bound}, {"holds", c.holds}});
    return {{"holds", r.all_hold()},
            {"on_cost", r.on_cost},
            {"onf_ucb_cost", r.onf_ucb},
            {"bound", r.bound},
            {"total_within_bound", r.holds},
            {"worst_slack", r.bound - r.on_cost},
            {"itemized", items},
            {"first_two_samples",
             {{"cost", r.early_sampling.cost},
              {"bound", r.early_sampling.bound},
              {"holds", r.early_sampling.holds}}},
            {"rebalance_calls", r.rebalance_calls},
            {"lemma_violations", r.lemma_violations}};
}

VerifyReport verify_run(const RunLog& log, const OracleLimits& limits)
{
    VerifyReport out;
    const bool ge = good_event(log);
    out.json["good_event"] = ge;
    out.json["policy"] = log.policy;

    if (!ge) {
        // Every bound below is conditioned on the good event.
        out.json["note"] = "good event failed; conditional checks skipped";
        out.json["passed"] = out.passed;
        return out;
    }

    if (!oracle_fits(log.instance, limits)) {
        out.json["potential"] = {{"skipped", "instance too large for exact oracle"}};
    } else {
        const OptSchedule opt = exact_opt(log.instance, limits);
        const bool lazy = witness_is_lazy(opt, log.instance.requests, log.instance.k);
        const PotentialReport pot = check_potential_inequality(log, opt);
        out.json["opt_cost"] = opt.cost;
        out.json["opt_witness_lazy"] = lazy;
        out.json["potential"] = to_json(pot);
        out.passed = out.passed && lazy && pot.holds && pot.u_monotone && pot.m_gap_ok;
    }

    const RegretReport reg = check_regret_bound(log);
    out.json["regret"] = to_json(reg);
    out.passed = out.passed && reg.holds;

    if (log.arithmetic) {
        const RoundingCostReport rc = check_rounding_cost_bound(log);
        out.json["rounding_cost"] = to_json(rc);
        out.passed = out.passed && rc.all_hold();
    }
    out.json["passed"] = out.passed;
    return out;
}

}  // namespace owpuw
