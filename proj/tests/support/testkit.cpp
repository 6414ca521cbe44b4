#include "testkit.hpp"

#include <cmath>
#include <map>

#include "owpuw/opt_oracle.hpp"

namespace owpuw::testkit {

namespace {

WeightDistribution random_distribution(Rng& rng)
{
    std::uniform_real_distribution<double> u(0.05, 1.0);
    switch (std::uniform_int_distribution<int>(0, 2)(rng)) {
    case 0: return WeightDistribution::deterministic(u(rng));
    case 1: {
        double a = u(rng), b = u(rng);
        if (a > b)
            std::swap(a, b);
        return WeightDistribution::two_point(a, b, std::uniform_real_distribution<double>(0, 1)(rng));
    }
    default:
        return WeightDistribution::scaled_beta(std::uniform_real_distribution<double>(0.5, 4)(rng),
                                               std::uniform_real_distribution<double>(0.5, 4)(rng),
                                               u(rng));
    }
}

}  // namespace

Instance random_instance(Rng& rng, const FuzzShape& shape)
{
    Instance inst;
    const std::size_t n = std::uniform_int_distribution<std::size_t>(2, shape.max_n)(rng);
    inst.k = std::uniform_int_distribution<std::size_t>(1, std::min(shape.max_k, n - 1))(rng);
    inst.horizon = std::uniform_int_distribution<std::size_t>(shape.min_T, shape.max_T)(rng);
    for (std::size_t i = 0; i < n; ++i)
        inst.pages.push_back(random_distribution(rng));
    std::vector<double> mass(n, 1.0);
    if (std::bernoulli_distribution(0.5)(rng))
        for (std::size_t i = 0; i < n; ++i)
            mass[i] = std::pow(static_cast<double>(i + 1), -1.2);
    std::discrete_distribution<std::size_t> pick(mass.begin(), mass.end());
    for (std::size_t t = 0; t < inst.horizon; ++t)
        inst.requests.push_back(page_id(pick(rng)));
    return inst;
}

Instance random_unit_instance(Rng& rng, std::size_t max_n, std::size_t max_T)
{
    Instance inst;
    const std::size_t n = std::uniform_int_distribution<std::size_t>(2, max_n)(rng);
    inst.k = std::uniform_int_distribution<std::size_t>(1, n - 1)(rng);
    inst.horizon = std::uniform_int_distribution<std::size_t>(1, max_T)(rng);
    inst.pages.assign(n, WeightDistribution::deterministic(1.0));
    std::uniform_int_distribution<std::size_t> pick(0, n - 1);
    for (std::size_t t = 0; t < inst.horizon; ++t)
        inst.requests.push_back(page_id(pick(rng)));
    return inst;
}

void check_conf_history(const RunLog& log, FuzzOutcome& out)
{
    std::map<std::size_t, ConfRecord> last;
    for (const auto& r : log.conf_history) {
        const std::size_t p = index_of(r.page);
        if (r.i == 1 && !(r.lcb > 0.0))
            ++out.conf_positive;
        if (auto it = last.find(p); it != last.end()) {
            if (r.lcb < it->second.lcb || r.ucb > it->second.ucb)
                ++out.conf_monotone;
        }
        if (r.i >= 2 && r.eps && !(r.ucb - r.lcb <= 2.0 * *r.eps))
            ++out.conf_width;
        last[p] = r;
    }
}

void check_fractional_log(const RunLog& log, FuzzOutcome& out)
{
    const Instance& inst = log.instance;
    const double target = static_cast<double>(inst.n() - inst.k);
    const double n = static_cast<double>(inst.n());
    bool deficit_after_fetch = false;
    bool evicted = false;
    for (const auto& e : log.events) {
        const Snapshot& s = *e.snapshot;
        const PageId pt = inst.requests[e.t];
        if (std::holds_alternative<Fetch>(e.event)) {
            deficit_after_fetch = compare_exact_sum(s.y, target) < 0;
            evicted = false;
        } else if (std::holds_alternative<Evict>(e.event)) {
            evicted = true;
        } else if (const auto* d = std::get_if<SampleDemand>(&e.event)) {
            const std::size_t p = index_of(d->page);
            const bool first = d->page == pt && s.samples[p] == 0;
            const bool integral = s.samples[p] >= 1 && s.m[p] == std::floor(s.m[p]) &&
                                  static_cast<double>(s.samples[p]) == s.m[p];
            if (!first && !integral)
                ++out.demand_mismatch;
        } else if (std::holds_alternative<RequestEnd>(e.event)) {
            double sum = 0.0;
            for (double y : s.y)
                sum += y;
            if (s.y[index_of(pt)] != 0.0 || compare_exact_sum(s.y, target) < 0)
                ++out.feasibility;
            if (evicted && std::abs(sum - target) > 1e-12 * n)
                ++out.feasibility;
            if (evicted && !deficit_after_fetch)
                ++out.eviction_without_deficit;
        }
    }
}

FuzzOutcome fuzz_one(std::uint64_t seed, const FuzzShape& shape)
{
    FuzzOutcome out;
    out.seed = seed;
    Rng gen(seed);
    out.instance = random_instance(gen, shape);
    try {
        PipelineOptions opt;
        opt.arithmetic = ArithmeticChoice::rational;
        opt.record_events = true;
        opt.snapshots = true;
        opt.check_invariants = true;
        opt.tally = &out.tally;
        Rng rng(seed * 7919 + 17);
        const RunLog log = run_pipeline(out.instance, rng, opt);

        check_conf_history(log, out);
        check_fractional_log(log, out);
        out.good_event = good_event(log);
        out.regret = check_regret_bound(log);
        out.rounding = check_rounding_cost_bound(log);
        if (out.good_event) {
            const OptSchedule sched = exact_opt(out.instance);
            out.potential = check_potential_inequality(log, sched);
            out.potential_checked = true;
        }
    } catch (const SampleUnavailable& e) {
        out.sample_failure = true;
        out.error = e.what();
    } catch (const std::exception& e) {
        out.error = e.what();
    }
    return out;
}

// ---------------------------------------------------------------------------

std::vector<std::vector<double>> draw_streams(const Instance& inst, Rng& rng, std::size_t length)
{
    std::vector<std::vector<double>> s(inst.n());
    for (std::size_t i = 0; i < inst.n(); ++i)
        for (std::size_t j = 0; j < length; ++j)
            s[i].push_back(sample_weight(inst.pages[i], rng));
    return s;
}

namespace {

struct StreamSource {
    const std::vector<std::vector<double>>& samples;
    std::vector<std::size_t> used;

    explicit StreamSource(const std::vector<std::vector<double>>& s)
        : samples(s), used(s.size(), 0)
    {
    }

    double next(PageId p)
    {
        const std::size_t i = index_of(p);
        OWPUW_ENSURE(used[i] < samples[i].size(), "sample stream exhausted");
        return samples[i][used[i]++];
    }
};

}  // namespace

std::vector<std::vector<double>> exact_replay(const Instance& inst,
                                              const std::vector<std::vector<double>>& samples)
{
    StreamSource src(samples);
    FractionalSolver solver(inst.n(), inst.k, inst.horizon);
    std::vector<std::vector<double>> out;
    for (PageId p : inst.requests) {
        solver.serve_request(p, [&](PageId q) { return src.next(q); },
                             [](const FractionalEvent&, const FractionalState&) {});
        out.push_back(solver.state().y);
    }
    return out;
}

void euler_replay(const Instance& inst, const std::vector<std::vector<double>>& samples,
                  EulerOracle& oracle)
{
    StreamSource src(samples);
    FractionalState st = initial_fractional_state(inst.n(), inst.k, inst.horizon);
    const double target = static_cast<double>(inst.n() - inst.k);
    const std::size_t n = inst.n();
    auto absorb = [&](std::size_t i) {
        st.conf[i] = update_conf_bounds(st.conf[i], src.next(page_id(i)), n, inst.horizon);
    };

    oracle.y_after_request.clear();
    std::vector<double> rate(n);
    for (PageId pt : inst.requests) {
        const std::size_t t = index_of(pt);
        st.y[t] = 0.0;
        if (!st.conf[t]) {
            st.m[t] = 0.0;
            absorb(t);
        }
        for (;;) {
            double sum = 0.0;
            for (double y : st.y)
                sum += y;
            if (sum >= target - 1e-15)
                break;
            double max_rate = 0.0;
            double total_rate = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                rate[i] = 0.0;
                if (i != t && st.y[i] < 1.0) {
                    rate[i] = (st.y[i] + st.eta) / st.conf[i]->lcb;
                    max_rate = std::max(max_rate, rate[i]);
                    total_rate += rate[i];
                }
            }
            // Time step: largest mover advances by `step`, clipped at the
            // next saturation, integer of m, or the target.
            double h = oracle.step / max_rate;
            h = std::min(h, (target - sum) / total_rate);
            for (std::size_t i = 0; i < n; ++i) {
                if (rate[i] == 0.0)
                    continue;
                h = std::min(h, (1.0 - st.y[i]) / rate[i]);
                h = std::min(h, (std::floor(st.m[i]) + 1.0 - st.m[i]) / rate[i]);
            }
            std::vector<std::size_t> due;
            for (std::size_t i = 0; i < n; ++i) {
                if (rate[i] == 0.0)
                    continue;
                const double dy = rate[i] * h;
                const double next_int = std::floor(st.m[i]) + 1.0;
                st.y[i] = std::min(1.0, st.y[i] + dy);
                if (1.0 - st.y[i] < 1e-15)
                    st.y[i] = 1.0;
                st.m[i] += dy;
                if (st.m[i] >= next_int - 1e-12) {
                    st.m[i] = next_int;
                    due.push_back(i);
                }
            }
            for (std::size_t i : due)
                absorb(i);
        }
        oracle.y_after_request.push_back(st.y);
    }
}

}  // namespace owpuw::testkit
