#include "owpuw/opt_oracle.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <ostream>

namespace owpuw {

namespace {

constexpr std::uint8_t kStay = 0xFF;
constexpr std::uint8_t kFill = 0xFE;
constexpr double kInf = std::numeric_limits<double>::infinity();

}  // namespace

std::size_t cache_state_count(std::size_t n, std::size_t k)
{
    // sum_{s <= k} C(n, s), saturating.
    std::size_t total = 0;
    std::size_t binom = 1;
    for (std::size_t s = 0; s <= std::min(n, k); ++s) {
        total += binom;
        if (total > std::numeric_limits<std::size_t>::max() / 64)
            return std::numeric_limits<std::size_t>::max();
        binom = binom * (n - s) / (s + 1);
    }
    return total;
}

bool oracle_fits(const Instance& inst, const OracleLimits& limits)
{
    if (inst.n() > limits.max_pages)
        return false;
    const std::size_t states = cache_state_count(inst.n(), inst.k);
    const std::size_t rounds = std::max<std::size_t>(1, inst.requests.size());
    return states <= limits.max_work / rounds;
}

OptSchedule exact_opt(const Instance& inst, std::span<const double> weights,
                      const OracleLimits& limits)
{
    if (!oracle_fits(inst, limits))
        throw OracleTooLarge();
    const std::size_t n = inst.n();
    const std::size_t k = inst.k;
    const std::size_t T = inst.requests.size();

    std::vector<PageMask> masks;
    for (PageMask s = 0; s < (PageMask{1} << n); ++s)
        if (static_cast<std::size_t>(std::popcount(s)) <= k)
            masks.push_back(s);
    std::vector<std::int32_t> index(std::size_t{1} << n, -1);
    for (std::size_t i = 0; i < masks.size(); ++i)
        index[masks[i]] = static_cast<std::int32_t>(i);

    std::vector<double> cost(masks.size(), kInf);
    std::vector<double> next(masks.size(), kInf);
    cost[index[0]] = 0.0;
    std::vector<std::uint8_t> parent(masks.size() * T, kStay);

    for (std::size_t t = 0; t < T; ++t) {
        const PageMask r = bit(inst.requests[t]);
        std::fill(next.begin(), next.end(), kInf);
        for (std::size_t si = 0; si < masks.size(); ++si) {
            const PageMask s = masks[si];
            if (!(s & r))
                continue;
            double best = cost[si];
            PageMask best_pred = s;
            std::uint8_t how = kStay;
            auto offer = [&](double c, PageMask pred, std::uint8_t tag) {
                if (c < best || (c == best && c < kInf && pred < best_pred)) {
                    best = c;
                    best_pred = pred;
                    how = tag;
                }
            };
            const PageMask rest = s & ~r;
            offer(cost[index[rest]], rest, kFill);
            if (static_cast<std::size_t>(std::popcount(s)) == k) {
                for (std::size_t q = 0; q < n; ++q) {
                    const PageMask qb = PageMask{1} << q;
                    if (s & qb)
                        continue;
                    offer(cost[index[rest | qb]] + weights[q], rest | qb,
                          static_cast<std::uint8_t>(q));
                }
            }
            next[si] = best;
            parent[t * masks.size() + si] = how;
        }
        std::swap(cost, next);
    }

    std::size_t final_index = index[0];
    for (std::size_t si = 0; si < masks.size(); ++si)
        if (cost[si] < cost[final_index])
            final_index = si;

    OptSchedule out;
    out.cost = T == 0 ? 0.0 : cost[final_index];
    out.caches.assign(T, 0);
    out.evicted.assign(T, std::nullopt);
    out.cumulative.assign(T, 0.0);
    PageMask s = masks[final_index];
    for (std::size_t t = T; t-- > 0;) {
        out.caches[t] = s;
        const PageMask r = bit(inst.requests[t]);
        const std::uint8_t how = parent[t * masks.size() + index[s]];
        if (how == kFill) {
            s &= ~r;
        } else if (how != kStay) {
            out.evicted[t] = page_id(how);
            s = (s & ~r) | (PageMask{1} << how);
        }
    }
    double running = 0.0;
    for (std::size_t t = 0; t < T; ++t) {
        if (out.evicted[t])
            running += weights[index_of(*out.evicted[t])];
        out.cumulative[t] = running;
    }
    return out;
}

OptSchedule exact_opt(const Instance& inst, const OracleLimits& limits)
{
    const auto w = inst.mean_weights();
    return exact_opt(inst, w, limits);
}

std::size_t belady_evictions(std::span<const PageId> requests, std::size_t k)
{
    const std::size_t T = requests.size();
    std::size_t n = 0;
    for (PageId p : requests)
        n = std::max(n, index_of(p) + 1);

    // next_use[t] = next round after t requesting the same page.
    std::vector<std::size_t> next_use(T, T);
    std::vector<std::size_t> last(n, T);
    for (std::size_t t = T; t-- > 0;) {
        next_use[t] = last[index_of(requests[t])];
        last[index_of(requests[t])] = t;
    }

    std::vector<std::size_t> upcoming(n, T);  // for cached pages
    std::vector<bool> cached(n, false);
    std::size_t size = 0;
    std::size_t evictions = 0;
    for (std::size_t t = 0; t < T; ++t) {
        const std::size_t p = index_of(requests[t]);
        if (!cached[p]) {
            if (size == k) {
                std::size_t victim = n;
                for (std::size_t q = 0; q < n; ++q)
                    if (cached[q] && (victim == n || upcoming[q] > upcoming[victim]))
                        victim = q;
                cached[victim] = false;
                --size;
                ++evictions;
            }
            cached[p] = true;
            ++size;
        }
        upcoming[p] = next_use[t];
    }
    return evictions;
}

double belady(const Instance& inst)
{
    const auto w = inst.mean_weights();
    for (double x : w)
        if (x != w.front())
            throw std::invalid_argument("belady needs equal page weights");
    return static_cast<double>(belady_evictions(inst.requests, inst.k)) *
           (w.empty() ? 0.0 : w.front());
}

bool witness_is_lazy(const OptSchedule& schedule, std::span<const PageId> requests, std::size_t k)
{
    if (schedule.caches.size() != requests.size())
        return false;
    PageMask prev = 0;
    for (std::size_t t = 0; t < requests.size(); ++t) {
        const PageMask cur = schedule.caches[t];
        const PageMask r = bit(requests[t]);
        if (!(cur & r) || static_cast<std::size_t>(std::popcount(cur)) > k)
            return false;
        if (prev & r) {
            if (cur != prev)
                return false;
        } else {
            const PageMask removed = prev & ~cur;
            const PageMask added = cur & ~prev;
            if (added != r || std::popcount(removed) > 1)
                return false;
            if (removed && static_cast<std::size_t>(std::popcount(prev)) < k)
                return false;
        }
        prev = cur;
    }
    return true;
}

void write_schedule_jsonl(std::ostream& out, const OptSchedule& schedule,
                          std::span<const PageId> requests)
{
    for (std::size_t t = 0; t < schedule.caches.size(); ++t) {
        std::vector<std::size_t> cache;
        for (PageMask s = schedule.caches[t]; s; s &= s - 1)
            cache.push_back(static_cast<std::size_t>(std::countr_zero(s)));
        nlohmann::json j{{"t", t},
                         {"request", index_of(requests[t])},
                         {"cache", cache},
                         {"cumulative_cost", schedule.cumulative[t]}};
        j["evicted"] = schedule.evicted[t] ? nlohmann::json(index_of(*schedule.evicted[t]))
                                           : nlohmann::json(nullptr);
        out << j.dump() << '\n';
    }
}

}  // namespace owpuw
