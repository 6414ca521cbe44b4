#include "doctest.h"

#include "testkit.hpp"

using namespace owpuw;

TEST_SUITE("properties") {

TEST_CASE("randomised pipeline runs keep every invariant")
{
    std::size_t potential_runs = 0;
    for (std::uint64_t seed = 1; seed <= 100; ++seed) {
        CAPTURE(seed);
        const auto o = testkit::fuzz_one(seed);
        REQUIRE(o.error.empty());
        CHECK_FALSE(o.sample_failure);
        CHECK(o.tally.total() == 0);
        CHECK(o.conf_monotone == 0);
        CHECK(o.conf_width == 0);
        CHECK(o.conf_positive == 0);
        CHECK(o.feasibility == 0);
        CHECK(o.eviction_without_deficit == 0);
        CHECK(o.demand_mismatch == 0);
        CHECK(o.regret.holds);
        CHECK(o.rounding.all_hold());
        if (o.potential_checked) {
            ++potential_runs;
            CHECK(o.potential.holds);
        }
    }
    CHECK(potential_runs > 50);
}

TEST_CASE("fractional runs under every weight kind stay feasible")
{
    Rng gen(77);
    for (int rep = 0; rep < 100; ++rep) {
        const Instance inst = testkit::random_instance(gen, {8, 4, 10, 80});
        Rng rng(rep);
        const RunLog log = run_fractional(inst, rng, LearnerMode::optimistic, true, true);
        testkit::FuzzOutcome o;
        testkit::check_conf_history(log, o);
        testkit::check_fractional_log(log, o);
        CHECK(o.conf_monotone == 0);
        CHECK(o.conf_width == 0);
        CHECK(o.feasibility == 0);
        CHECK(o.demand_mismatch == 0);
    }
}

}
