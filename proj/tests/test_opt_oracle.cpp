#include "doctest.h"

#include <functional>
#include <limits>
#include <sstream>

#include "owpuw/opt_oracle.hpp"
#include "testkit.hpp"

using namespace owpuw;

namespace {

Instance make(std::size_t k, std::vector<double> w, std::vector<int> req)
{
    Instance inst;
    inst.k = k;
    for (double x : w)
        inst.pages.push_back(WeightDistribution::deterministic(x));
    for (int r : req)
        inst.requests.push_back(page_id(static_cast<std::size_t>(r)));
    inst.horizon = inst.requests.size();
    return inst;
}

// Exhaustive search over every schedule, lazy or not: after each request the
// cache may be any superset-free choice containing the request.
double brute_force(const Instance& inst)
{
    const auto w = inst.mean_weights();
    const std::size_t n = inst.n();
    double best = std::numeric_limits<double>::infinity();
    std::function<void(std::size_t, PageMask, double)> go = [&](std::size_t t, PageMask cache,
                                                                double cost) {
        if (cost >= best)
            return;
        if (t == inst.requests.size()) {
            best = cost;
            return;
        }
        const PageMask r = bit(inst.requests[t]);
        for (PageMask next = 0; next < (PageMask{1} << n); ++next) {
            if (!(next & r) || static_cast<std::size_t>(std::popcount(next)) > inst.k)
                continue;
            double c = cost;
            for (PageMask gone = cache & ~next; gone; gone &= gone - 1)
                c += w[static_cast<std::size_t>(std::countr_zero(gone))];
            go(t + 1, next, c);
        }
    };
    go(0, 0, 0.0);
    return best;
}

}  // namespace

TEST_SUITE("opt_oracle") {

TEST_CASE("two pages, one slot")
{
    const auto s = exact_opt(make(1, {1.0, 0.5}, {0, 1, 0}));
    CHECK(s.cost == doctest::Approx(1.5));
    CHECK(s.caches == std::vector<PageMask>{1, 2, 1});
    CHECK(s.cumulative.back() == doctest::Approx(1.5));
}

TEST_CASE("cheap page absorbs the evictions")
{
    CHECK(exact_opt(make(2, {1, 1, 0.1}, {0, 1, 2, 0, 1})).cost == doctest::Approx(1.1));
}

TEST_CASE("a single repeated page costs nothing")
{
    for (std::size_t k = 1; k <= 3; ++k)
        CHECK(exact_opt(make(k, {1, 1, 1, 1}, {2, 2, 2, 2, 2})).cost == 0.0);
}

TEST_CASE("farthest-in-future examples")
{
    CHECK(belady_evictions(make(1, {1, 1}, {0, 1, 0, 1}).requests, 1) == 3);
    std::vector<int> distinct;
    for (int i = 0; i < 9; ++i)
        distinct.push_back(i);
    for (std::size_t k = 1; k <= 4; ++k)
        CHECK(belady(make(k, std::vector<double>(9, 1.0), distinct)) == 9.0 - k);
    CHECK_THROWS_AS(belady(make(1, {1, 0.5}, {0, 1})), std::invalid_argument);
}

TEST_CASE("dynamic program agrees with exhaustive search")
{
    Rng rng(3);
    for (int rep = 0; rep < 60; ++rep) {
        testkit::FuzzShape shape{4, 2, 1, 7};
        const Instance inst = testkit::random_instance(rng, shape);
        CHECK(exact_opt(inst).cost == doctest::Approx(brute_force(inst)).epsilon(1e-12));
    }
}

TEST_CASE("witness schedules are lazy and feasible")
{
    Rng rng(4);
    for (int rep = 0; rep < 100; ++rep) {
        const Instance inst = testkit::random_instance(rng);
        const auto s = exact_opt(inst);
        CHECK(witness_is_lazy(s, inst.requests, inst.k));
        double c = 0.0;
        for (std::size_t t = 0; t < inst.requests.size(); ++t) {
            if (s.evicted[t])
                c += inst.mean_weights()[index_of(*s.evicted[t])];
            CHECK(s.cumulative[t] == doctest::Approx(c));
        }
        CHECK(c == doctest::Approx(s.cost));
    }
}

TEST_CASE("unit weights: farthest-in-future is optimal")
{
    Rng rng(6);
    for (int rep = 0; rep < 200; ++rep) {
        const Instance inst = testkit::random_unit_instance(rng, 8, 60);
        CHECK(belady(inst) == exact_opt(inst).cost);
    }
}

TEST_CASE("size guard")
{
    Instance big = make(8, std::vector<double>(17, 1.0), {0});
    CHECK_FALSE(oracle_fits(big));
    CHECK_THROWS_WITH_AS(exact_opt(big), "instance too large for exact oracle", OracleTooLarge);
    CHECK(cache_state_count(12, 5) == 1 + 12 + 66 + 220 + 495 + 792);
    Instance desk = make(5, std::vector<double>(12, 1.0), std::vector<int>(10000, 0));
    CHECK(oracle_fits(desk));
}

TEST_CASE("schedule dump")
{
    const Instance inst = make(1, {1.0, 0.5}, {0, 1, 0});
    std::ostringstream out;
    write_schedule_jsonl(out, exact_opt(inst), inst.requests);
    std::istringstream in(out.str());
    std::string line;
    std::vector<nlohmann::json> rows;
    while (std::getline(in, line))
        rows.push_back(nlohmann::json::parse(line));
    REQUIRE(rows.size() == 3);
    CHECK(rows[0].at("evicted").is_null());
    CHECK(rows[1].at("evicted") == 0);
    CHECK(rows[2].at("cache") == std::vector<int>{0});
}

}
