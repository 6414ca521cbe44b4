#ifndef OWPUW_FRACTIONAL_HPP
#define OWPUW_FRACTIONAL_HPP

#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "owpuw/confbounds.hpp"
#include "owpuw/core.hpp"

namespace owpuw {

/// How the solver obtains its confidence bounds.
///  - optimistic: learns from samples through update_conf_bounds.
///  - pinned: LCB = UCB = true mean from the first request on, no sampling.
enum class LearnerMode { optimistic, pinned };

struct FractionalState {
    std::size_t n = 0;
    std::size_t k = 0;
    std::size_t horizon = 0;
    double eta = 1.0;
    std::vector<double> y;  // anti-server: fraction of p missing from the cache
    std::vector<double> m;  // cumulative fraction of p evicted
    std::vector<std::optional<ConfState>> conf;

    double lcb(PageId p) const { return conf[index_of(p)]->lcb; }
    double ucb(PageId p) const { return conf[index_of(p)] ? conf[index_of(p)]->ucb : 1.0; }
    std::uint32_t samples(PageId p) const
    {
        return conf[index_of(p)] ? conf[index_of(p)]->samples : 0;
    }
};

/// eta = 1/k, every page fully evicted (y = 1), nothing learned.
FractionalState initial_fractional_state(std::size_t n, std::size_t k, std::size_t horizon);

struct EvictionCandidate {
    PageId page;
    double y0;
    double lcb;
};

/// y(tau) = (y0 + eta) e^{tau / lcb} - eta.
double anti_server_at(double y0, double eta, double lcb, double tau);

/// tau at which the trajectory started at y0 reaches `target`.
double time_to_reach(double y0, double target, double eta, double lcb);

/// Root of sum_c y_c(tau) = target over tau in [0, cap], by safeguarded
/// Newton on the convex increasing sum. Returns `cap` when the sum at the cap
/// is still below the target.
double target_time(std::span<const EvictionCandidate> candidates, double eta, double target,
                   double cap = std::numeric_limits<double>::infinity());

enum class Boundary { saturation, m_integer, target };

/// One exact exponential segment of continuous eviction.
struct EvictionStep {
    Boundary kind = Boundary::target;
    PageId page{};
    double tau = 0.0;
    std::vector<PageId> samples_due;  // pages whose m reached the next integer
    std::vector<Evict> evictions;     // one per candidate that moved
};

/// Advances continuous eviction (all pages other than p_t with y < 1) to the
/// earliest of: a page saturating at y = 1, a page's m reaching the next
/// integer, or sum(y) reaching n - k. Ties resolve in that order, then by
/// ascending page id.
EvictionStep advance_eviction(FractionalState& state, PageId p_t);

using SampleSource = std::function<double(PageId)>;
using EventSink = std::function<void(const FractionalEvent&, const FractionalState&)>;

class FractionalSolver {
public:
    FractionalSolver(std::size_t n, std::size_t k, std::size_t horizon,
                     LearnerMode mode = LearnerMode::optimistic,
                     std::vector<double> pinned_weights = {});
    explicit FractionalSolver(FractionalState state, LearnerMode mode = LearnerMode::optimistic,
                              std::vector<double> pinned_weights = {});

    /// Serves one request, pushing every event to `sink` as it happens.
    void serve_request(PageId p_t, const SampleSource& source, const EventSink& sink);
    std::vector<FractionalEvent> serve_request(PageId p_t, const SampleSource& source);

    const FractionalState& state() const noexcept { return state_; }
    LearnerMode mode() const noexcept { return mode_; }

private:
    void absorb_sample(PageId p, const SampleSource& source, const EventSink& sink);

    FractionalState state_;
    LearnerMode mode_;
    std::vector<double> pinned_weights_;
};

}  // namespace owpuw

#endif
