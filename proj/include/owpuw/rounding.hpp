#ifndef OWPUW_ROUNDING_HPP
#define OWPUW_ROUNDING_HPP

#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <gmpxx.h>

#include "owpuw/core.hpp"

namespace owpuw {

/// Anti-cache set (pages missing from an integral cache) as a bitmask.
using PageMask = std::uint64_t;
inline constexpr std::size_t kMaxRoundingPages = 64;

constexpr PageMask bit(PageId p) noexcept
{
    return PageMask{1} << index_of(p);
}

inline int popcount(PageMask s) noexcept
{
    return std::popcount(s);
}

enum class ArithmeticMode { rational, floating };

const char* arithmetic_mode_name(ArithmeticMode mode);

// ---------------------------------------------------------------------------
// Measure arithmetic
// ---------------------------------------------------------------------------

template <class M>
struct MeasureTraits;

template <>
struct MeasureTraits<mpq_class> {
    static constexpr bool exact = true;
    static constexpr ArithmeticMode mode = ArithmeticMode::rational;
    static mpq_class from_double(double x) { return mpq_class(x); }
    static double to_double(const mpq_class& x) { return x.get_d(); }
    static long floor(const mpq_class& x)
    {
        mpz_class q;
        mpz_fdiv_q(q.get_mpz_t(), x.get_num_mpz_t(), x.get_den_mpz_t());
        return q.get_si();
    }
    static long ceil(const mpq_class& x)
    {
        mpz_class q;
        mpz_cdiv_q(q.get_mpz_t(), x.get_num_mpz_t(), x.get_den_mpz_t());
        return q.get_si();
    }
    static bool positive(const mpq_class& x) { return sgn(x) > 0; }
    static bool is_zero(const mpq_class& x) { return sgn(x) == 0; }
    static bool near(const mpq_class& a, const mpq_class& b) { return a == b; }
    static bool at_most(const mpq_class& a, const mpq_class& b) { return a <= b; }
    static mpq_class pow6(int j)
    {
        mpz_class p;
        mpz_ui_pow_ui(p.get_mpz_t(), 6, static_cast<unsigned long>(j < 0 ? -j : j));
        return j < 0 ? mpq_class(mpz_class(1), p) : mpq_class(p);
    }
};

template <>
struct MeasureTraits<double> {
    static constexpr bool exact = false;
    static constexpr ArithmeticMode mode = ArithmeticMode::floating;
    /// Tolerance on sums, marginals and class masses.
    static constexpr double theta = 1e-9;
    /// Measures at or below this are dropped from the support.
    static constexpr double dust = 1e-15;
    /// Largest stranded measure the rebalance may push into the window alone.
    static constexpr double drift_limit = 1e-9;
    static double from_double(double x) { return x; }
    static double to_double(double x) { return x; }
    /// Class masses this close to an integer count as that integer.
    static constexpr double snap = 1e-12;
    static long floor(double x) { return static_cast<long>(std::floor(x + snap)); }
    static long ceil(double x) { return static_cast<long>(std::ceil(x - snap)); }
    static bool positive(double x) { return x > dust; }
    static bool is_zero(double x) { return !(std::abs(x) > dust); }
    static bool near(double a, double b) { return std::abs(a - b) <= theta; }
    static bool at_most(double a, double b) { return a <= b + theta * (1.0 + std::abs(b)); }
    static double pow6(int j) { return std::pow(6.0, j); }
};

// ---------------------------------------------------------------------------
// Classes by UCB
// ---------------------------------------------------------------------------

/// The unique integer j with ucb in (6^j, 6^{j+1}], evaluated exactly.
int ucb_class(double ucb);

struct ClassIndex {
    std::vector<int> cls;

    int of(PageId p) const { return cls[index_of(p)]; }
    int min_class() const;
    int max_class() const;
    /// P_{>= j}
    PageMask at_least(int j) const;
    /// P_j
    PageMask exactly(int j) const;
};

// ---------------------------------------------------------------------------
// Distribution over anti-cache sets
// ---------------------------------------------------------------------------

/// One primitive measure move, recorded for trajectory realisation.
struct Transfer {
    PageMask from = 0;
    PageMask to = 0;
    /// Moved measure divided by the source's measure just before the move.
    double probability = 0.0;
};

struct TrajectoryLog {
    PageMask initial = 0;
    std::vector<Transfer> moves;
    /// Eviction cost paid in every state (evict-and-refetch sampling).
    std::vector<std::pair<std::size_t, double>> sampling_costs;  // (move index, cost)
    std::vector<std::size_t> request_ends;                       // move index at each request end
    std::vector<double> weights;
};

template <class M>
class AntiCacheDistribution {
public:
    using Traits = MeasureTraits<M>;

    /// Point mass on S = P: the empty cache.
    explicit AntiCacheDistribution(std::size_t n);
    explicit AntiCacheDistribution(std::map<PageMask, M> support, std::size_t n);

    std::size_t pages() const noexcept { return n_; }
    const std::map<PageMask, M>& support() const noexcept { return support_; }
    M measure(PageMask s) const;
    M total() const;
    M marginal(PageId p) const;

    /// Moves `amount` of measure from state `from` to state `to`.
    void transfer(PageMask from, PageMask to, const M& amount, TrajectoryLog* log);

    /// Scales the support back to total mass one (floating mode only).
    void renormalize();

private:
    std::size_t n_;
    std::map<PageMask, M> support_;
};

/// Measure-weighted deviation of |S ∩ at_least| from {floor(Y), ceil(Y)}.
template <class M>
M imbalance(const AntiCacheDistribution<M>& mu, PageMask at_least, const M& mass);

/// Imbalance of class j given the current classes and marginals.
template <class M>
M imbalance(const AntiCacheDistribution<M>& mu, const ClassIndex& classes,
            std::span<const M> y, int j);

// ---------------------------------------------------------------------------
// Rounding layer
// ---------------------------------------------------------------------------

enum class CostKind : int {
    consistency_eviction = 0,
    sampling_eviction,
    sampling_rebalance,
    eviction_rebalance,
    fetch_rebalance,
};
inline constexpr std::size_t kCostKinds = 5;
const char* cost_kind_name(CostKind kind);

/// Outcome of one rebalance call.
struct RebalanceReport {
    CostKind cause = CostKind::eviction_rebalance;
    double cost = 0.0;          // at true weights
    double ucb_cost = 0.0;      // at UCB prices
    double max_imbalance = 0.0; // over classes <= j_max, before the call
    int j_max = 0;
    double lemma_bound = 0.0;   // 12 * max_imbalance * 6^{j_max}
    bool within_lemma_bound = true;
    double cause_bound = 0.0;   // per-trigger bound (24 dy UCB, 12 * 6^i, ...)
    bool within_cause_bound = true;
    std::size_t steps = 0;
};

struct RoundingInvariants {
    bool mass_one = true;
    bool consistent = true;
    bool balanced = true;
    bool valid = true;
};

class SampleUnavailable : public InvariantViolation {
public:
    using InvariantViolation::InvariantViolation;
};

template <class M>
class RoundingLayer {
public:
    using Traits = MeasureTraits<M>;

    RoundingLayer(const Instance& inst, Rng& sample_rng);
    /// Resumes from a given distribution, marginals and UCBs.
    RoundingLayer(const Instance& inst, Rng& sample_rng, AntiCacheDistribution<M> mu,
                  std::vector<M> y, std::vector<double> ucb);

    /// Feeds one fractional event into the distribution.
    void apply(const FractionalEvent& ev);

    void apply_fetch(PageId p, double amount);
    void apply_evict(PageId p, double y_after);
    void apply_conf_update(PageId p, double new_ucb);
    /// Evict-and-refetch p_t if its sample slot is empty.
    void ensure_sample(PageId p_t);
    /// Answers a SampleDemand: the first sample of a page is drawn directly,
    /// later ones come out of the queue.
    double provide_sample(PageId p);
    double pop_sample(PageId p);

    RebalanceReport rebalance_subsets(CostKind cause, const M& cause_bound);

    RoundingInvariants check_invariants(std::optional<PageId> served) const;

    const AntiCacheDistribution<M>& distribution() const noexcept { return mu_; }
    const ClassIndex& classes() const noexcept { return classes_; }
    std::span<const M> marginals() const noexcept { return y_; }
    const std::vector<std::optional<double>>& queue() const noexcept { return queue_; }

    double cost(CostKind kind) const { return Traits::to_double(costs_[static_cast<int>(kind)]); }
    double expected_cost() const;
    /// Cost of the first two sampling evictions of every page.
    double early_sampling_cost() const { return Traits::to_double(early_sampling_); }
    const std::vector<RebalanceReport>& rebalances() const noexcept { return reports_; }
    /// Max class imbalance observed right before the most recent rebalance.
    double last_pre_imbalance() const noexcept { return last_pre_imbalance_; }

    void set_trajectory_log(TrajectoryLog* log);
    /// Off for pinned bounds: nothing ever demands a sample.
    void set_sampling_enabled(bool on) noexcept { sampling_ = on; }

    /// Flag-gated distribution dump record.
    nlohmann::json describe() const;

private:
    M class_mass(PageMask at_least) const;
    void charge_sampling(PageId p);

    std::size_t n_;
    std::size_t k_;
    std::vector<WeightDistribution> dists_;
    std::vector<double> weights_;
    std::vector<M> weights_m_;
    std::vector<M> y_;
    std::vector<double> ucb_;
    ClassIndex classes_;
    AntiCacheDistribution<M> mu_;
    std::vector<std::optional<double>> queue_;
    std::vector<std::uint32_t> draws_;
    std::array<M, kCostKinds> costs_{};
    M early_sampling_{};
    std::vector<RebalanceReport> reports_;
    double last_pre_imbalance_ = 0.0;
    Rng* rng_;
    TrajectoryLog* log_ = nullptr;
    bool sampling_ = true;
};

/// Outcome of replaying one concrete cache trajectory.
struct RealizedTrajectory {
    std::vector<PageMask> states_at_request_end;
    PageMask final_state = 0;
    double cost = 0.0;
};

/// Follows one integral anti-cache through the logged measure moves, taking
/// each move with its conditional probability; the marginal law of the
/// followed state equals the distribution at every point.
RealizedTrajectory realize_trajectory(const TrajectoryLog& log, Rng& rng);

extern template class AntiCacheDistribution<mpq_class>;
extern template class AntiCacheDistribution<double>;
extern template class RoundingLayer<mpq_class>;
extern template class RoundingLayer<double>;

}  // namespace owpuw

#endif
