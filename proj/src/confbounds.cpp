#include "owpuw/confbounds.hpp"

#include <cmath>
#include <ostream>
#include <stdexcept>

namespace owpuw {

double confidence_radius(std::uint64_t i, std::size_t n, std::size_t horizon)
{
    if (i < 2)
        throw std::domain_error("confidence radius is undefined before the second sample");
    if (n < 1 || horizon < 1)
        throw std::domain_error("confidence radius needs n >= 1 and T >= 1");
    // ln(4 n^3 T^3) without forming the (possibly huge) product.
    const double log_term = std::log(4.0) + 3.0 * std::log(static_cast<double>(n)) +
                            3.0 * std::log(static_cast<double>(horizon));
    return std::sqrt(log_term / (2.0 * static_cast<double>(i)));
}

ConfState update_conf_bounds(const std::optional<ConfState>& state, double sample,
                             std::size_t n, std::size_t horizon)
{
    if (!(sample > 0.0 && sample <= 1.0))
        throw std::invalid_argument("weight sample must lie in (0,1]");

    if (!state || state->samples == 0) {
        ConfState s;
        s.samples = 1;
        s.mean = sample;
        s.lcb = sample / (2.0 * static_cast<double>(n) * static_cast<double>(n) *
                          static_cast<double>(horizon));
        s.ucb = 1.0;
        return s;
    }

    ConfState s = *state;
    s.samples += 1;
    const long double count = s.samples;
    s.mean = ((count - 1.0L) * s.mean + static_cast<long double>(sample)) / count;
    const double eps = confidence_radius(s.samples, n, horizon);
    const double mean = static_cast<double>(s.mean);
    s.lcb = std::max(s.lcb, mean - eps);
    s.ucb = std::min(s.ucb, mean + eps);
    // mean +- eps rounds separately; pull ucb in by ulps so the width stays <= 2 eps.
    while (s.ucb - s.lcb > 2.0 * eps)
        s.ucb = std::nextafter(s.ucb, 0.0);
    OWPUW_ENSURE(s.lcb <= s.ucb, "confidence bounds crossed");
    return s;
}

double regret_increment(double lcb, double ucb, double prev_lcb, double eta)
{
    return (ucb - lcb) + 2.0 * std::log1p(1.0 / eta) * (lcb - prev_lcb);
}

double regret_budget_bound(std::size_t n, std::size_t horizon)
{
    const double nt = static_cast<double>(n) * static_cast<double>(horizon);
    if (nt < 1.0)
        return 0.0;
    return 8.0 * std::sqrt(nt) * std::log(nt);
}

bool good_event_holds(std::span<const ConfRecord> history, std::span<const double> true_weights)
{
    for (const auto& r : history) {
        const double w = true_weights[index_of(r.page)];
        if (r.lcb > w || r.ucb < w)
            return false;
    }
    return true;
}

void write_conf_jsonl(std::ostream& out, std::span<const ConfRecord> history)
{
    for (const auto& r : history) {
        nlohmann::json j{{"t", r.t},     {"page", index_of(r.page)}, {"i", r.i},
                         {"mean", r.mean}, {"lcb", r.lcb},            {"ucb", r.ucb}};
        j["eps"] = r.eps ? nlohmann::json(*r.eps) : nlohmann::json(nullptr);
        out << j.dump() << '\n';
    }
}

}  // namespace owpuw
