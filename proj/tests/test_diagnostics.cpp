#include "doctest.h"

#include <cmath>
#include <sstream>

#include "owpuw/diagnostics.hpp"
#include "owpuw/harness.hpp"
#include "testkit.hpp"

using namespace owpuw;

namespace {

RunLog recorded_run(const Instance& inst, std::uint64_t seed,
                    ArithmeticChoice arith = ArithmeticChoice::rational)
{
    Rng rng(seed);
    PipelineOptions opt;
    opt.arithmetic = arith;
    opt.record_events = true;
    opt.snapshots = true;
    return run_pipeline(inst, rng, opt);
}

}  // namespace

TEST_SUITE("diagnostics") {

TEST_CASE("empty request sequence")
{
    Instance inst;
    inst.k = 1;
    inst.pages.assign(2, WeightDistribution::deterministic(1.0));
    const RunLog log = recorded_run(inst, 1);
    const auto rep = check_potential_inequality(log, exact_opt(inst));
    CHECK(rep.holds);
    CHECK(rep.events_checked == 0);
    CHECK(log.on_cost == 0.0);
    CHECK(verify_run(log).passed);
}

TEST_CASE("potential with no samples and an empty offline cache")
{
    Snapshot s{{0.0, 0.0}, {0.0, 0.0}, {0.0, 0.0}, {1.0, 1.0}, {0, 0}};
    CHECK(potential(s, 1.0, 0) == 0.0);
    // One sample with LCB 0.5, y = 1: the log term vanishes; width term 0.5 * (1 - m).
    Snapshot t{{1.0, 0.0}, {0.25, 0.0}, {0.5, 0.0}, {1.0, 1.0}, {1, 0}};
    CHECK(potential(t, 1.0, 0) == doctest::Approx(0.5 * 0.75));
    // y = 0 outside the offline cache: -2 * 0.5 * ln(1/2).
    Snapshot u{{0.0, 0.0}, {0.0, 0.0}, {0.5, 0.0}, {0.5, 1.0}, {1, 0}};
    CHECK(potential(u, 1.0, 0) == doctest::Approx(std::log(2.0)));
    CHECK(potential(u, 1.0, 1) == 0.0);
}

TEST_CASE("alternating pair with deterministic weights")
{
    Instance inst;
    inst.k = 1;
    inst.pages.assign(2, WeightDistribution::deterministic(1.0));
    for (int i = 0; i < 12; ++i)
        inst.requests.push_back(page_id(static_cast<std::size_t>(i % 2)));
    inst.horizon = inst.requests.size();
    const RunLog log = recorded_run(inst, 2);
    const auto opt = exact_opt(inst);
    const auto rep = check_potential_inequality(log, opt);
    CHECK(rep.holds);
    CHECK(rep.u_monotone);
    CHECK(rep.m_gap_ok);
    CHECK(rep.events_checked == log.events.size());
    CHECK(verify_run(log).passed);
}

TEST_CASE("regret budget bound value")
{
    CHECK(regret_budget_bound(5, 100) == doctest::Approx(1111.7).epsilon(1e-4));
    RunLog log;
    log.instance.pages.assign(5, WeightDistribution::deterministic(1.0));
    log.instance.horizon = 100;
    log.u_term = 1111.0;
    CHECK(check_regret_bound(log).holds);
    log.u_term = 1112.0;
    CHECK_FALSE(check_regret_bound(log).holds);
}

TEST_CASE("no eviction keeps the integral cost within the sampling allowance")
{
    Instance inst;
    inst.k = 3;
    inst.pages = {WeightDistribution::two_point(0.1, 1.0, 0.5),
                  WeightDistribution::deterministic(0.4),
                  WeightDistribution::scaled_beta(2, 3, 0.05),
                  WeightDistribution::deterministic(1.0)};
    for (int i = 0; i < 30; ++i)
        inst.requests.push_back(page_id(static_cast<std::size_t>(i % 3)));
    inst.horizon = inst.requests.size();
    const RunLog log = recorded_run(inst, 3);
    CHECK(log.onf_cost == 0.0);
    CHECK(log.on_cost <= 2.0 * 4 + 1e-12);
    CHECK(check_rounding_cost_bound(log).all_hold());
}

TEST_CASE("itemized bounds on an adversarial instance")
{
    Rng gen(4);
    const Instance inst =
        gen_adversarial(3, 150, WeightDistribution::two_point(0.1, 1.0, 0.3), gen);
    for (auto arith : {ArithmeticChoice::rational, ArithmeticChoice::floating}) {
        const RunLog log = recorded_run(inst, 5, arith);
        const auto rc = check_rounding_cost_bound(log);
        CHECK(rc.all_hold());
        CHECK(rc.items.size() == kCostKinds);
        double sum = 0.0;
        for (const auto& c : rc.items)
            sum += c.cost;
        CHECK(sum == doctest::Approx(log.on_cost).epsilon(1e-9));
    }
}

TEST_CASE("run log round trip reproduces the verdict")
{
    Rng gen(6);
    const Instance inst =
        gen_adversarial(2, 60, WeightDistribution::scaled_beta(2.0, 2.0, 0.1), gen);
    const RunLog log = recorded_run(inst, 7);
    std::stringstream buf;
    write_run_log(buf, log);
    const RunLog back = read_run_log(buf);
    CHECK(back.instance == log.instance);
    CHECK(back.events.size() == log.events.size());
    CHECK(back.conf_history.size() == log.conf_history.size());
    CHECK(back.on_cost == log.on_cost);
    const auto a = verify_run(log);
    const auto b = verify_run(back);
    CHECK(a.passed == b.passed);
    CHECK(a.json == b.json);
}

TEST_CASE("missing snapshots are an error, not a pass")
{
    Rng gen(8);
    const Instance inst = gen_adversarial(2, 30, WeightDistribution::deterministic(1.0), gen);
    Rng rng(1);
    PipelineOptions opt;
    opt.record_events = true;
    const RunLog log = run_pipeline(inst, rng, opt);
    REQUIRE_FALSE(log.events.empty());
    const auto rep = check_potential_inequality(log, exact_opt(inst));
    CHECK_FALSE(rep.holds);
    CHECK_FALSE(rep.error.empty());
    CHECK_FALSE(verify_run(log).passed);
}

TEST_CASE("failed good event skips the conditional checks")
{
    Rng gen(9);
    RunLog log = recorded_run(gen_adversarial(2, 20, WeightDistribution::deterministic(1.0), gen), 1);
    log.good_event = false;
    const auto rep = verify_run(log);
    CHECK(rep.json.at("good_event") == false);
    CHECK(rep.json.contains("note"));
    CHECK_FALSE(rep.json.contains("regret"));
}

}
