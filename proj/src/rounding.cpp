#include "owpuw/rounding.hpp"

#include <algorithm>
#include <limits>
#include <numeric>

namespace owpuw {

const char* arithmetic_mode_name(ArithmeticMode mode)
{
    return mode == ArithmeticMode::rational ? "rational" : "float";
}

const char* cost_kind_name(CostKind kind)
{
    switch (kind) {
    case CostKind::consistency_eviction: return "consistency_evictions";
    case CostKind::sampling_eviction: return "sampling_evictions";
    case CostKind::sampling_rebalance: return "sampling_rebalances";
    case CostKind::eviction_rebalance: return "eviction_rebalances";
    case CostKind::fetch_rebalance: return "fetch_rebalances";
    }
    return "?";
}

int ucb_class(double ucb)
{
    if (!(ucb > 0.0 && ucb <= 1.0))
        throw std::domain_error("UCB must lie in (0,1] to have a class");
    const mpq_class u(ucb);
    int j = -1;
    mpq_class lower(1, 6);  // 6^j
    while (u <= lower) {
        --j;
        lower /= 6;
    }
    return j;
}

int ClassIndex::min_class() const
{
    return cls.empty() ? -1 : *std::min_element(cls.begin(), cls.end());
}

int ClassIndex::max_class() const
{
    return cls.empty() ? -1 : *std::max_element(cls.begin(), cls.end());
}

PageMask ClassIndex::at_least(int j) const
{
    PageMask s = 0;
    for (std::size_t i = 0; i < cls.size(); ++i)
        if (cls[i] >= j)
            s |= PageMask{1} << i;
    return s;
}

PageMask ClassIndex::exactly(int j) const
{
    PageMask s = 0;
    for (std::size_t i = 0; i < cls.size(); ++i)
        if (cls[i] == j)
            s |= PageMask{1} << i;
    return s;
}

// ---------------------------------------------------------------------------

namespace {

PageMask full_mask(std::size_t n)
{
    return n >= 64 ? ~PageMask{0} : ((PageMask{1} << n) - 1);
}

int lowest_page(PageMask s)
{
    return std::countr_zero(s);
}

}  // namespace

template <class M>
AntiCacheDistribution<M>::AntiCacheDistribution(std::size_t n) : n_(n)
{
    if (n > kMaxRoundingPages)
        throw std::invalid_argument("rounding layer supports at most 64 pages");
    support_.emplace(full_mask(n), M(1));
}

template <class M>
AntiCacheDistribution<M>::AntiCacheDistribution(std::map<PageMask, M> support, std::size_t n)
    : n_(n), support_(std::move(support))
{
    if (n > kMaxRoundingPages)
        throw std::invalid_argument("rounding layer supports at most 64 pages");
}

template <class M>
M AntiCacheDistribution<M>::measure(PageMask s) const
{
    auto it = support_.find(s);
    return it == support_.end() ? M(0) : it->second;
}

template <class M>
M AntiCacheDistribution<M>::total() const
{
    M sum(0);
    for (const auto& [s, x] : support_)
        sum += x;
    return sum;
}

template <class M>
M AntiCacheDistribution<M>::marginal(PageId p) const
{
    M sum(0);
    for (const auto& [s, x] : support_)
        if (s & bit(p))
            sum += x;
    return sum;
}

template <class M>
void AntiCacheDistribution<M>::transfer(PageMask from, PageMask to, const M& amount,
                                        TrajectoryLog* log)
{
    if (Traits::is_zero(amount) || from == to)
        return;
    auto src = support_.find(from);
    OWPUW_ENSURE(src != support_.end(), "transfer from a state outside the support");
    OWPUW_ENSURE(Traits::at_most(amount, src->second), "transfer exceeds the source measure");
    // A dust leftover travels with the rest instead of vanishing.
    const M moved = Traits::positive(M(src->second - amount)) ? amount : src->second;
    if (log) {
        const double prob =
            std::min(1.0, Traits::to_double(M(moved / src->second)));
        log->moves.push_back(Transfer{from, to, prob});
    }
    src->second -= moved;
    if (!Traits::positive(src->second))
        support_.erase(src);
    support_[to] += moved;
}

template <class M>
void AntiCacheDistribution<M>::renormalize()
{
    if constexpr (!Traits::exact) {
        const double sum = total();
        if (sum > 0.0 && std::abs(sum - 1.0) > 1e-12)
            for (auto& [s, x] : support_)
                x /= sum;
    }
}

template <class M>
M imbalance(const AntiCacheDistribution<M>& mu, PageMask at_least, const M& mass)
{
    using T = MeasureTraits<M>;
    const long lo = T::floor(mass);
    const long hi = T::ceil(mass);
    M total(0);
    for (const auto& [s, x] : mu.support()) {
        const long c = popcount(s & at_least);
        const long dev = std::max(c - hi, lo - c);
        if (dev > 0)
            total += x * M(dev);
    }
    return total;
}

template <class M>
M imbalance(const AntiCacheDistribution<M>& mu, const ClassIndex& classes, std::span<const M> y,
            int j)
{
    const PageMask members = classes.at_least(j);
    M mass(0);
    for (std::size_t i = 0; i < y.size(); ++i)
        if (members & (PageMask{1} << i))
            mass += y[i];
    return imbalance(mu, members, mass);
}

// ---------------------------------------------------------------------------

template <class M>
RoundingLayer<M>::RoundingLayer(const Instance& inst, Rng& sample_rng)
    : n_(inst.n()),
      k_(inst.k),
      dists_(inst.pages),
      weights_(inst.mean_weights()),
      y_(inst.n(), M(1)),
      ucb_(inst.n(), 1.0),
      mu_(inst.n()),
      queue_(inst.n()),
      draws_(inst.n(), 0),
      rng_(&sample_rng)
{
    for (double w : weights_)
        weights_m_.push_back(Traits::from_double(w));
    classes_.cls.assign(n_, ucb_class(1.0));
    for (auto& c : costs_)
        c = M(0);
    early_sampling_ = M(0);
}

template <class M>
RoundingLayer<M>::RoundingLayer(const Instance& inst, Rng& sample_rng, AntiCacheDistribution<M> mu,
                                std::vector<M> y, std::vector<double> ucb)
    : RoundingLayer(inst, sample_rng)
{
    if (y.size() != n_ || ucb.size() != n_ || mu.pages() != n_)
        throw std::invalid_argument("resumed rounding state has the wrong page count");
    mu_ = std::move(mu);
    y_ = std::move(y);
    ucb_ = std::move(ucb);
    for (std::size_t i = 0; i < n_; ++i)
        classes_.cls[i] = ucb_class(ucb_[i]);
}

template <class M>
void RoundingLayer<M>::set_trajectory_log(TrajectoryLog* log)
{
    log_ = log;
    if (log_) {
        log_->initial = mu_.support().begin()->first;
        log_->weights = weights_;
    }
}

template <class M>
void RoundingLayer<M>::apply(const FractionalEvent& ev)
{
    if (const auto* e = std::get_if<Fetch>(&ev))
        apply_fetch(e->page, e->amount);
    else if (const auto* e = std::get_if<Evict>(&ev))
        apply_evict(e->page, e->y_after);
    else if (const auto* e = std::get_if<ConfUpdate>(&ev))
        apply_conf_update(e->page, e->ucb);
    else if (const auto* e = std::get_if<RequestEnd>(&ev))
        ensure_sample(e->page);
    // SampleDemand is answered through provide_sample.
}

template <class M>
M RoundingLayer<M>::class_mass(PageMask at_least) const
{
    M mass(0);
    for (std::size_t i = 0; i < n_; ++i)
        if (at_least & (PageMask{1} << i))
            mass += y_[i];
    return mass;
}

template <class M>
void RoundingLayer<M>::apply_fetch(PageId p, double amount)
{
    const std::size_t i = index_of(p);
    const M fetched = y_[i];
    OWPUW_ENSURE(Traits::near(fetched, Traits::from_double(amount)),
                 "fetch amount differs from the page's marginal");
    if (Traits::is_zero(fetched))
        return;
    std::vector<PageMask> holding;
    for (const auto& [s, x] : mu_.support())
        if (s & bit(p))
            holding.push_back(s);
    for (PageMask s : holding)
        mu_.transfer(s, s & ~bit(p), mu_.measure(s), log_);
    y_[i] = M(0);
    rebalance_subsets(CostKind::fetch_rebalance,
                      M(24) * fetched * Traits::from_double(ucb_[i]));
}

template <class M>
void RoundingLayer<M>::apply_evict(PageId p, double y_after)
{
    const std::size_t i = index_of(p);
    const M target = Traits::from_double(y_after);
    M dy = target - y_[i];
    if (!Traits::positive(dy))
        return;
    OWPUW_ENSURE(Traits::at_most(target, M(1)), "eviction beyond y = 1");
    // Floating mode fills up to the target from the actual marginal, which
    // absorbs rounding left by earlier transfers.
    M fill = dy;
    if constexpr (!Traits::exact)
        fill = target - mu_.marginal(p);

    // States without p, largest measure first, then by mask.
    std::vector<std::pair<PageMask, M>> open;
    for (const auto& [s, x] : mu_.support())
        if (!(s & bit(p)))
            open.emplace_back(s, x);
    std::stable_sort(open.begin(), open.end(),
                     [](const auto& a, const auto& b) { return a.second > b.second; });

    M remaining = fill;
    for (const auto& [s, x] : open) {
        if (!Traits::positive(remaining))
            break;
        const M amount = x < remaining ? x : remaining;
        mu_.transfer(s, s | bit(p), amount, log_);
        remaining -= amount;
    }
    OWPUW_ENSURE(Traits::is_zero(remaining) || Traits::at_most(remaining, M(0)),
                 "not enough measure without the evicted page");
    y_[i] = target;
    costs_[static_cast<int>(CostKind::consistency_eviction)] += dy * weights_m_[i];
    rebalance_subsets(CostKind::eviction_rebalance,
                      M(24) * dy * Traits::from_double(ucb_[i]));
}

template <class M>
void RoundingLayer<M>::apply_conf_update(PageId p, double new_ucb)
{
    const std::size_t i = index_of(p);
    OWPUW_ENSURE(new_ucb <= ucb_[i], "UCB increased");
    const int old_class = classes_.cls[i];
    ucb_[i] = new_ucb;
    const int new_class = ucb_class(new_ucb);
    if (new_class == old_class)
        return;
    classes_.cls[i] = new_class;
    rebalance_subsets(CostKind::sampling_rebalance, M(12) * Traits::pow6(old_class));
}

template <class M>
void RoundingLayer<M>::charge_sampling(PageId p)
{
    const std::size_t i = index_of(p);
    costs_[static_cast<int>(CostKind::sampling_eviction)] += weights_m_[i];
    if (draws_[i] < 2)
        early_sampling_ += weights_m_[i];
    ++draws_[i];
    if (log_)
        log_->sampling_costs.emplace_back(log_->moves.size(), weights_[i]);
}

template <class M>
void RoundingLayer<M>::ensure_sample(PageId p_t)
{
    for (const auto& [s, x] : mu_.support())
        OWPUW_ENSURE(!(s & bit(p_t)), "served page is missing from some cache state");
    const std::size_t i = index_of(p_t);
    if (sampling_ && !queue_[i]) {
        queue_[i] = sample_weight(dists_[i], *rng_);
        charge_sampling(p_t);
    }
    mu_.renormalize();
    if (log_)
        log_->request_ends.push_back(log_->moves.size());
}

template <class M>
double RoundingLayer<M>::pop_sample(PageId p)
{
    auto& slot = queue_[index_of(p)];
    if (!slot)
        throw SampleUnavailable("sample demanded for page " + std::to_string(index_of(p)) +
                                " but its slot is empty");
    const double v = *slot;
    slot.reset();
    return v;
}

template <class M>
double RoundingLayer<M>::provide_sample(PageId p)
{
    const std::size_t i = index_of(p);
    if (draws_[i] == 0) {
        // The page was just fetched with probability one, so evicting and
        // refetching it yields the first sample directly.
        for (const auto& [s, x] : mu_.support())
            OWPUW_ENSURE(!(s & bit(p)), "first sample of a page that is not cached");
        const double v = sample_weight(dists_[i], *rng_);
        charge_sampling(p);
        return v;
    }
    return pop_sample(p);
}

template <class M>
RebalanceReport RoundingLayer<M>::rebalance_subsets(CostKind cause, const M& cause_bound)
{
    RebalanceReport report;
    report.cause = cause;

    const int j_lo = classes_.min_class();
    const int j_hi = classes_.max_class();

    // Pre-call imbalance per class, top down.
    int j_max = std::numeric_limits<int>::min();
    std::vector<M> pre(static_cast<std::size_t>(j_hi - j_lo + 1), M(0));
    for (int j = j_hi; j >= j_lo; --j) {
        const PageMask members = classes_.at_least(j);
        pre[j - j_lo] = imbalance(mu_, members, class_mass(members));
        if (j_max == std::numeric_limits<int>::min() && Traits::positive(pre[j - j_lo]))
            j_max = j;
    }
    if (j_max == std::numeric_limits<int>::min()) {
        last_pre_imbalance_ = 0.0;
        report.j_max = j_hi;
        reports_.push_back(report);
        return report;
    }
    M eps(0);
    for (int j = j_max; j >= j_lo; --j)
        if (pre[j - j_lo] > eps)
            eps = pre[j - j_lo];
    last_pre_imbalance_ = Traits::to_double(eps);

    M cost(0);
    M ucb_cost(0);
    std::size_t steps = 0;
    for (int i = j_max; i >= j_lo; --i) {
        const PageMask members = classes_.at_least(i);
        const PageMask own = classes_.exactly(i);
        const M mass = class_mass(members);
        const long lo = Traits::floor(mass);
        const long hi = Traits::ceil(mass);

        for (;;) {
            OWPUW_ENSURE(++steps < 1000000, "rebalance does not terminate");
            // Violating state farthest from the class mass.
            PageMask worst = 0;
            bool found = false;
            M worst_dist(0);
            M worst_measure(0);
            long worst_count = 0;
            for (const auto& [s, x] : mu_.support()) {
                if (!Traits::positive(x))
                    continue;
                const long c = popcount(s & members);
                if (c <= hi && c >= lo)
                    continue;
                M dist = M(c) - mass;
                if (dist < 0)
                    dist = -dist;
                if (!found || dist > worst_dist || (dist == worst_dist && x > worst_measure)) {
                    found = true;
                    worst = s;
                    worst_dist = dist;
                    worst_measure = x;
                    worst_count = c;
                }
            }
            if (!found)
                break;

            const bool upward = worst_count > hi;
            // Opposite side of the mass: strictly below it for an upward
            // violation, strictly above it for a downward one.
            PageMask partner = 0;
            bool have_partner = false;
            M partner_measure(0);
            for (const auto& [s, x] : mu_.support()) {
                if (!Traits::positive(x))
                    continue;
                const long c = popcount(s & members);
                const bool opposite = upward ? (c <= hi - 1) : (c >= lo + 1);
                if (!opposite)
                    continue;
                const PageMask movable = upward ? (own & worst & ~s) : (own & s & ~worst);
                if (!movable)
                    continue;
                if (!have_partner || x > partner_measure) {
                    have_partner = true;
                    partner = s;
                    partner_measure = x;
                }
            }
            if constexpr (!Traits::exact) {
                // Floating drift: Y snapped onto an integer leaves a small
                // state one page outside the window with nothing opposite.
                if (!have_partner && worst_measure <= Traits::drift_limit) {
                    PageMask pool = upward ? (worst & members) : (members & ~worst);
                    if (!upward)
                        for (PageMask b = pool; b; b &= b - 1)
                            if (!Traits::positive(y_[lowest_page(b)]))
                                pool &= ~(b & -b);
                    const PageMask pick = (own & pool) ? (own & pool) : pool;
                    OWPUW_ENSURE(pick != 0, "dust repair found no page to move");
                    const PageMask q = PageMask{1} << lowest_page(pick);
                    mu_.transfer(worst, upward ? (worst & ~q) : (worst | q), worst_measure, log_);
                    continue;
                }
            }
            OWPUW_ENSURE(have_partner, "no destination measure for a violating state (class " +
                                           std::to_string(i) + ", Y " +
                                           nlohmann::json(Traits::to_double(mass)).dump() + ", count " +
                                           std::to_string(worst_count) + ", measure " +
                                           nlohmann::json(Traits::to_double(worst_measure)).dump() + ")");

            const PageMask movable = upward ? (own & worst & ~partner) : (own & partner & ~worst);
            const PageId p = page_id(static_cast<std::size_t>(lowest_page(movable)));
            const M amount = worst_measure < partner_measure ? worst_measure : partner_measure;
            if (upward) {
                mu_.transfer(worst, worst & ~bit(p), amount, log_);
                mu_.transfer(partner, partner | bit(p), amount, log_);
            } else {
                mu_.transfer(partner, partner & ~bit(p), amount, log_);
                mu_.transfer(worst, worst | bit(p), amount, log_);
            }
            cost += amount * weights_m_[index_of(p)];
            ucb_cost += amount * Traits::from_double(ucb_[index_of(p)]);
        }
    }

    costs_[static_cast<int>(cause)] += cost;

    const M lemma_bound = M(12) * eps * Traits::pow6(j_max);
    report.cost = Traits::to_double(cost);
    report.ucb_cost = Traits::to_double(ucb_cost);
    report.max_imbalance = Traits::to_double(eps);
    report.j_max = j_max;
    report.lemma_bound = Traits::to_double(lemma_bound);
    report.within_lemma_bound = Traits::at_most(ucb_cost, lemma_bound);
    report.cause_bound = Traits::to_double(cause_bound);
    report.within_cause_bound = Traits::at_most(ucb_cost, cause_bound);
    report.steps = steps;
    reports_.push_back(report);
    return report;
}

template <class M>
RoundingInvariants RoundingLayer<M>::check_invariants(std::optional<PageId> served) const
{
    RoundingInvariants inv;
    inv.mass_one = Traits::near(mu_.total(), M(1));
    for (std::size_t i = 0; i < n_; ++i)
        if (!Traits::near(mu_.marginal(page_id(i)), y_[i]))
            inv.consistent = false;
    for (int j = classes_.max_class(); j >= classes_.min_class(); --j) {
        const PageMask members = classes_.at_least(j);
        if (Traits::positive(imbalance(mu_, members, class_mass(members))))
            inv.balanced = false;
    }
    if (served) {
        for (const auto& [s, x] : mu_.support()) {
            if (!Traits::positive(x))
                continue;
            if ((s & bit(*served)) || static_cast<std::size_t>(popcount(s)) + k_ < n_)
                inv.valid = false;
        }
    }
    return inv;
}

template <class M>
double RoundingLayer<M>::expected_cost() const
{
    M sum(0);
    for (const auto& c : costs_)
        sum += c;
    return Traits::to_double(sum);
}

template <class M>
nlohmann::json RoundingLayer<M>::describe() const
{
    nlohmann::json classes = nlohmann::json::array();
    for (int j = classes_.max_class(); j >= classes_.min_class(); --j) {
        const PageMask members = classes_.at_least(j);
        const M mass = class_mass(members);
        classes.push_back({{"j", j},
                           {"Y", Traits::to_double(mass)},
                           {"imbalance", Traits::to_double(imbalance(mu_, members, mass))}});
    }
    nlohmann::json costs;
    for (std::size_t c = 0; c < kCostKinds; ++c)
        costs[cost_kind_name(static_cast<CostKind>(c))] = Traits::to_double(costs_[c]);
    return {{"support_size", mu_.support().size()},
            {"classes", classes},
            {"expected_cost", expected_cost()},
            {"costs", costs}};
}

// ---------------------------------------------------------------------------

RealizedTrajectory realize_trajectory(const TrajectoryLog& log, Rng& rng)
{
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    RealizedTrajectory out;
    PageMask cur = log.initial;
    std::size_t next_sample = 0;
    std::size_t next_end = 0;
    for (std::size_t idx = 0; idx <= log.moves.size(); ++idx) {
        while (next_sample < log.sampling_costs.size() &&
               log.sampling_costs[next_sample].first == idx) {
            out.cost += log.sampling_costs[next_sample].second;
            ++next_sample;
        }
        while (next_end < log.request_ends.size() && log.request_ends[next_end] == idx) {
            out.states_at_request_end.push_back(cur);
            ++next_end;
        }
        if (idx == log.moves.size())
            break;
        const Transfer& mv = log.moves[idx];
        if (mv.from != cur)
            continue;
        if (unif(rng) < mv.probability) {
            const PageMask added = mv.to & ~mv.from;
            for (PageMask a = added; a; a &= a - 1)
                out.cost += log.weights[static_cast<std::size_t>(std::countr_zero(a))];
            cur = mv.to;
        }
    }
    out.final_state = cur;
    return out;
}

template class AntiCacheDistribution<mpq_class>;
template class AntiCacheDistribution<double>;
template class RoundingLayer<mpq_class>;
template class RoundingLayer<double>;
template mpq_class imbalance(const AntiCacheDistribution<mpq_class>&, PageMask, const mpq_class&);
template double imbalance(const AntiCacheDistribution<double>&, PageMask, const double&);
template mpq_class imbalance(const AntiCacheDistribution<mpq_class>&, const ClassIndex&,
                             std::span<const mpq_class>, int);
template double imbalance(const AntiCacheDistribution<double>&, const ClassIndex&,
                          std::span<const double>, int);

}  // namespace owpuw
