#include "owpuw/fractional.hpp"

#include <algorithm>
#include <cmath>

namespace owpuw {

namespace {

// m and y targets closer than this are treated as the same instant.
constexpr double kCoincide = 1e-12;

}  // namespace

FractionalState initial_fractional_state(std::size_t n, std::size_t k, std::size_t horizon)
{
    if (k < 1 || n <= k)
        throw std::invalid_argument("fractional solver needs n > k >= 1");
    FractionalState s;
    s.n = n;
    s.k = k;
    s.horizon = horizon;
    s.eta = 1.0 / static_cast<double>(k);
    s.y.assign(n, 1.0);
    s.m.assign(n, 0.0);
    s.conf.assign(n, std::nullopt);
    return s;
}

double anti_server_at(double y0, double eta, double lcb, double tau)
{
    return y0 + (y0 + eta) * std::expm1(tau / lcb);
}

double time_to_reach(double y0, double target, double eta, double lcb)
{
    return lcb * std::log1p((target - y0) / (y0 + eta));
}

double target_time(std::span<const EvictionCandidate> candidates, double eta, double target,
                   double cap)
{
    auto g = [&](double tau) {
        double s = -target;
        for (const auto& c : candidates)
            s += anti_server_at(c.y0, eta, c.lcb, tau);
        return s;
    };
    auto dg = [&](double tau) {
        double s = 0.0;
        for (const auto& c : candidates)
            s += (c.y0 + eta) * std::exp(tau / c.lcb) / c.lcb;
        return s;
    };

    if (g(0.0) >= 0.0)
        return 0.0;

    double lo = 0.0;
    double hi = cap;
    if (!std::isfinite(hi)) {
        hi = 1e-300;
        for (const auto& c : candidates)
            hi = std::max(hi, c.lcb);
        while (g(hi) < 0.0)
            hi *= 2.0;
    } else if (g(hi) < 0.0) {
        return cap;
    }

    // g is convex and increasing, so Newton from the left lands at or to the
    // right of the root; keep it bracketed and fall back to bisection.
    double tau = lo;
    for (int iter = 0; iter < 200; ++iter) {
        const double gv = g(tau);
        if (gv < 0.0)
            lo = std::max(lo, tau);
        else
            hi = std::min(hi, tau);
        if (hi - lo <= 1e-17 * std::max(1.0, hi))
            break;
        const double slope = dg(tau);
        double next = tau - gv / slope;
        if (!(next > lo && next < hi))
            next = 0.5 * (lo + hi);
        if (next == tau)
            break;
        tau = next;
    }
    return hi;
}

namespace {

struct PendingBoundary {
    Boundary kind;
    PageId page;
    double tau;
};

bool earlier(const PendingBoundary& a, const PendingBoundary& b)
{
    if (a.tau != b.tau)
        return a.tau < b.tau;
    if (a.kind != b.kind)
        return static_cast<int>(a.kind) < static_cast<int>(b.kind);
    return index_of(a.page) < index_of(b.page);
}

}  // namespace

EvictionStep advance_eviction(FractionalState& state, PageId p_t)
{
    const double eta = state.eta;
    const double feasible_total = static_cast<double>(state.n - state.k);

    std::vector<EvictionCandidate> cands;
    double fixed_sum = 0.0;
    for (std::size_t i = 0; i < state.n; ++i) {
        const PageId p = page_id(i);
        if (p != p_t && state.y[i] < 1.0) {
            OWPUW_ENSURE(state.conf[i].has_value(), "evicting a page that was never sampled");
            cands.push_back({p, state.y[i], state.conf[i]->lcb});
        } else {
            fixed_sum += state.y[i];
        }
    }
    OWPUW_ENSURE(!cands.empty(), "eviction deficit with no page left to evict");

    // Candidate boundaries (a) saturation and (b) next integer of m.
    std::vector<PendingBoundary> bounds;
    for (const auto& c : cands) {
        const std::size_t i = index_of(c.page);
        const double next_int = std::floor(state.m[i]) + 1.0;
        const double y_at_int = c.y0 + (next_int - state.m[i]);
        bounds.push_back({Boundary::saturation, c.page, time_to_reach(c.y0, 1.0, eta, c.lcb)});
        if (y_at_int < 1.0 - kCoincide)
            bounds.push_back({Boundary::m_integer, c.page, time_to_reach(c.y0, y_at_int, eta, c.lcb)});
    }
    const PendingBoundary first = *std::min_element(bounds.begin(), bounds.end(), earlier);

    const double cand_target = feasible_total - fixed_sum;
    double cap_sum = 0.0;
    for (const auto& c : cands)
        cap_sum += anti_server_at(c.y0, eta, c.lcb, first.tau);

    EvictionStep step;
    if (cap_sum > cand_target) {
        step.kind = Boundary::target;
        step.tau = target_time(cands, eta, cand_target, first.tau);
        step.page = cands.front().page;
    } else {
        step.kind = first.kind;
        step.page = first.page;
        step.tau = first.tau;
    }

    std::vector<double> before(state.y);
    for (const auto& c : cands) {
        const std::size_t i = index_of(c.page);
        state.y[i] = std::min(1.0, anti_server_at(c.y0, eta, c.lcb, step.tau));
    }
    if (step.kind == Boundary::saturation) {
        // Every page whose saturation time is bit-identical saturates now.
        for (const auto& b : bounds)
            if (b.kind == Boundary::saturation && b.tau == step.tau)
                state.y[index_of(b.page)] = 1.0;
    } else if (step.kind == Boundary::target) {
        // Close the last few ulps so that sum(y) >= n - k holds exactly.
        for (int guard = 0; compare_exact_sum(state.y, feasible_total) < 0; ++guard) {
            OWPUW_ENSURE(guard < 64, "could not reach the feasibility target");
            std::size_t best = index_of(cands.front().page);
            for (const auto& c : cands) {
                const std::size_t i = index_of(c.page);
                if (state.y[i] < 1.0 && (state.y[best] >= 1.0 || state.y[i] > state.y[best]))
                    best = i;
            }
            double partial = 0.0;
            for (std::size_t i = 0; i < state.n; ++i)
                partial += state.y[i];
            const double gap = std::max(0.0, feasible_total - partial);
            state.y[best] = std::min(1.0, std::nextafter(state.y[best] + gap, 2.0));
        }
    }

    for (const auto& c : cands) {
        const std::size_t i = index_of(c.page);
        const double dy = state.y[i] - before[i];
        if (dy <= 0.0) {
            state.y[i] = before[i];
            continue;
        }
        const double next_int = std::floor(state.m[i]) + 1.0;
        state.m[i] += dy;
        if (state.m[i] >= next_int - kCoincide) {
            state.m[i] = next_int;
            step.samples_due.push_back(c.page);
        }
        step.evictions.push_back(Evict{c.page, dy, state.y[i], dy * state.conf[i]->ucb});
    }
    return step;
}

FractionalSolver::FractionalSolver(std::size_t n, std::size_t k, std::size_t horizon,
                                   LearnerMode mode, std::vector<double> pinned_weights)
    : FractionalSolver(initial_fractional_state(n, k, horizon), mode, std::move(pinned_weights))
{
}

FractionalSolver::FractionalSolver(FractionalState state, LearnerMode mode,
                                   std::vector<double> pinned_weights)
    : state_(std::move(state)), mode_(mode), pinned_weights_(std::move(pinned_weights))
{
    if (mode_ == LearnerMode::pinned && pinned_weights_.size() != state_.n)
        throw std::invalid_argument("pinned learner needs one weight per page");
}

void FractionalSolver::absorb_sample(PageId p, const SampleSource& source, const EventSink& sink)
{
    const std::size_t i = index_of(p);
    sink(SampleDemand{p}, state_);
    const double sample = source(p);
    state_.conf[i] = update_conf_bounds(state_.conf[i], sample, state_.n, state_.horizon);
    const auto& c = *state_.conf[i];
    sink(ConfUpdate{p, c.lcb, c.ucb, c.samples}, state_);
}

void FractionalSolver::serve_request(PageId p_t, const SampleSource& source, const EventSink& sink)
{
    const std::size_t t = index_of(p_t);
    if (t >= state_.n)
        throw std::out_of_range("request for unknown page");

    const double fetched = state_.y[t];
    state_.y[t] = 0.0;
    sink(Fetch{p_t, fetched}, state_);

    if (!state_.conf[t]) {
        state_.m[t] = 0.0;
        if (mode_ == LearnerMode::optimistic) {
            absorb_sample(p_t, source, sink);
        } else {
            const double w = pinned_weights_[t];
            state_.conf[t] = ConfState{1, w, w, w};
            sink(ConfUpdate{p_t, w, w, 1}, state_);
        }
    }

    const double feasible_total = static_cast<double>(state_.n - state_.k);
    while (compare_exact_sum(state_.y, feasible_total) < 0) {
        EvictionStep step = advance_eviction(state_, p_t);
        for (const auto& ev : step.evictions)
            sink(ev, state_);
        if (mode_ == LearnerMode::optimistic)
            for (PageId p : step.samples_due)
                absorb_sample(p, source, sink);
    }

    sink(RequestEnd{p_t}, state_);
}

std::vector<FractionalEvent> FractionalSolver::serve_request(PageId p_t, const SampleSource& source)
{
    std::vector<FractionalEvent> events;
    serve_request(p_t, source,
                  [&](const FractionalEvent& ev, const FractionalState&) { events.push_back(ev); });
    return events;
}

}  // namespace owpuw
