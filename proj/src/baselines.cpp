#include "owpuw/baselines.hpp"

#include <algorithm>
#include <list>

#include "owpuw/online.hpp"

namespace owpuw {

PolicyKind parse_policy(const std::string& name)
{
    for (PolicyKind k : all_policies())
        if (name == policy_name(k))
            return k;
    throw std::invalid_argument("unknown policy '" + name + "'");
}

const char* policy_name(PolicyKind kind)
{
    switch (kind) {
    case PolicyKind::owpuw: return "owpuw";
    case PolicyKind::known_weights: return "known_weights";
    case PolicyKind::lru: return "lru";
    case PolicyKind::random_evict: return "random";
    case PolicyKind::marking: return "marking";
    }
    return "?";
}

std::vector<PolicyKind> all_policies()
{
    return {PolicyKind::owpuw, PolicyKind::known_weights, PolicyKind::lru,
            PolicyKind::random_evict, PolicyKind::marking};
}

namespace {

// Integral cache with a legality check on every round.
class Cache {
public:
    Cache(std::size_t n, std::size_t k, std::vector<double> w)
        : k_(k), in_(n, false), w_(std::move(w))
    {
    }

    bool has(std::size_t p) const { return in_[p]; }
    bool full() const { return pages_.size() == k_; }
    const std::vector<std::size_t>& pages() const { return pages_; }

    void insert(std::size_t p)
    {
        OWPUW_ENSURE(!full(), "fetch into a full cache");
        in_[p] = true;
        pages_.push_back(p);
    }

    void evict(std::size_t p)
    {
        OWPUW_ENSURE(in_[p], "evicting a page that is not cached");
        in_[p] = false;
        pages_.erase(std::find(pages_.begin(), pages_.end(), p));
        cost_ += w_[p];
    }

    void check(std::size_t requested) const
    {
        OWPUW_ENSURE(pages_.size() <= k_ && in_[requested], "illegal cache after a request");
    }

    double cost() const { return cost_; }

private:
    std::size_t k_;
    std::vector<bool> in_;
    std::vector<std::size_t> pages_;
    std::vector<double> w_;
    double cost_ = 0.0;
};

}  // namespace

double run_lru(const Instance& inst)
{
    Cache cache(inst.n(), inst.k, inst.mean_weights());
    std::list<std::size_t> order;  // front = most recent
    std::vector<std::list<std::size_t>::iterator> where(inst.n());
    for (PageId r : inst.requests) {
        const std::size_t p = index_of(r);
        if (cache.has(p)) {
            order.erase(where[p]);
        } else {
            if (cache.full()) {
                const std::size_t victim = order.back();
                order.pop_back();
                cache.evict(victim);
            }
            cache.insert(p);
        }
        order.push_front(p);
        where[p] = order.begin();
        cache.check(p);
    }
    return cache.cost();
}

double run_random_evict(const Instance& inst, Rng& rng)
{
    Cache cache(inst.n(), inst.k, inst.mean_weights());
    for (PageId r : inst.requests) {
        const std::size_t p = index_of(r);
        if (!cache.has(p)) {
            if (cache.full()) {
                std::uniform_int_distribution<std::size_t> pick(0, cache.pages().size() - 1);
                cache.evict(cache.pages()[pick(rng)]);
            }
            cache.insert(p);
        }
        cache.check(p);
    }
    return cache.cost();
}

double run_marking(const Instance& inst, Rng& rng)
{
    Cache cache(inst.n(), inst.k, inst.mean_weights());
    std::vector<bool> marked(inst.n(), false);
    for (PageId r : inst.requests) {
        const std::size_t p = index_of(r);
        if (!cache.has(p)) {
            if (cache.full()) {
                std::vector<std::size_t> unmarked;
                for (std::size_t q : cache.pages())
                    if (!marked[q])
                        unmarked.push_back(q);
                if (unmarked.empty()) {
                    // New phase.
                    std::fill(marked.begin(), marked.end(), false);
                    unmarked = cache.pages();
                    std::sort(unmarked.begin(), unmarked.end());
                }
                std::uniform_int_distribution<std::size_t> pick(0, unmarked.size() - 1);
                cache.evict(unmarked[pick(rng)]);
            }
            cache.insert(p);
        }
        marked[p] = true;
        cache.check(p);
    }
    return cache.cost();
}

double run_known_weights(const Instance& inst, Rng& rng)
{
    PipelineOptions opt;
    opt.learner = LearnerMode::pinned;
    return run_pipeline(inst, rng, opt).on_cost;
}

double run_policy(PolicyKind kind, const Instance& inst, Rng& rng)
{
    switch (kind) {
    case PolicyKind::owpuw: return run_pipeline(inst, rng).on_cost;
    case PolicyKind::known_weights: return run_known_weights(inst, rng);
    case PolicyKind::lru: return run_lru(inst);
    case PolicyKind::random_evict: return run_random_evict(inst, rng);
    case PolicyKind::marking: return run_marking(inst, rng);
    }
    throw std::invalid_argument("unknown policy");
}

}  // namespace owpuw
