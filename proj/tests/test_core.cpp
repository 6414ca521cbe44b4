#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <fstream>

#include "owpuw/core.hpp"

using namespace owpuw;

namespace {

std::filesystem::path temp_file(const std::string& name)
{
    return std::filesystem::temp_directory_path() / ("owpuw_core_" + name);
}

void write_text(const std::filesystem::path& p, const std::string& text)
{
    std::ofstream(p) << text;
}

InstanceErrc load_error(const std::string& json)
{
    const auto p = temp_file("bad.json");
    write_text(p, json);
    try {
        load_instance(p);
    } catch (const InstanceError& e) {
        return e.code();
    }
    FAIL("expected an InstanceError");
    return InstanceErrc::io;
}

}  // namespace

TEST_SUITE("core") {

TEST_CASE("mean weights in closed form")
{
    CHECK(mean_weight(WeightDistribution::deterministic(0.3)) == 0.3);
    CHECK(mean_weight(WeightDistribution::two_point(0.1, 1.0, 0.5)) == doctest::Approx(0.55));
    CHECK(mean_weight(WeightDistribution::scaled_beta(1, 1, 0.5)) == doctest::Approx(0.75));
}

TEST_CASE("distribution parameters are validated")
{
    CHECK_THROWS_AS(WeightDistribution::deterministic(0.0), std::invalid_argument);
    CHECK_THROWS_AS(WeightDistribution::deterministic(1.5), std::invalid_argument);
    CHECK_THROWS_AS(WeightDistribution::two_point(0.1, 1.0, 1.2), std::invalid_argument);
    CHECK_THROWS_AS(WeightDistribution::scaled_beta(0, 1, 0.5), std::invalid_argument);
    CHECK_THROWS_AS(WeightDistribution::scaled_beta(1, 1, 0), std::invalid_argument);
}

TEST_CASE("degenerate draws")
{
    Rng rng(42);
    for (int i = 0; i < 100; ++i) {
        CHECK(sample_weight(WeightDistribution::deterministic(0.3), rng) == 0.3);
        CHECK(sample_weight(WeightDistribution::two_point(0.1, 1.0, 0.0), rng) == 0.1);
    }
}

TEST_CASE("empirical means agree within three standard errors")
{
    const std::vector<WeightDistribution> kinds{
        WeightDistribution::two_point(0.1, 1.0, 0.5),
        WeightDistribution::scaled_beta(2.0, 5.0, 0.2),
        WeightDistribution::scaled_beta(0.5, 0.5, 0.05),
        WeightDistribution::deterministic(0.7),
    };
    Rng rng(7);
    for (const auto& d : kinds) {
        const int draws = 100000;
        double sum = 0.0, sq = 0.0;
        for (int i = 0; i < draws; ++i) {
            const double x = sample_weight(d, rng);
            REQUIRE(x > 0.0);
            REQUIRE(x <= 1.0);
            sum += x;
            sq += x * x;
        }
        const double mean = sum / draws;
        const double se = std::sqrt(std::max(0.0, sq / draws - mean * mean) / draws);
        CHECK(std::abs(mean - mean_weight(d)) <= 3.0 * se + 1e-12);
    }
    Rng lln(11);
    double sum = 0.0;
    for (int i = 0; i < 100000; ++i)
        sum += sample_weight(WeightDistribution::two_point(0.1, 1.0, 0.5), lln);
    CHECK(std::abs(sum / 100000 - 0.55) <= 0.01);
}

TEST_CASE("identical seeds give identical streams")
{
    const auto d = WeightDistribution::scaled_beta(1.5, 2.5, 0.1);
    Rng a(99), b(99);
    for (int i = 0; i < 1000; ++i)
        CHECK(sample_weight(d, a) == sample_weight(d, b));
}

TEST_CASE("instance files round-trip")
{
    Instance inst;
    inst.k = 2;
    inst.horizon = 4;
    inst.pages = {WeightDistribution::deterministic(0.3), WeightDistribution::two_point(0.1, 1, 0.25),
                  WeightDistribution::scaled_beta(2, 3, 0.125)};
    inst.requests = {page_id(0), page_id(2), page_id(1), page_id(0)};
    const auto p = temp_file("roundtrip.json");
    save_instance(inst, p);
    CHECK(load_instance(p) == inst);

    // Non-representable decimals survive too.
    inst.pages[0] = WeightDistribution::deterministic(0.1 + 0.2);
    save_instance(inst, p);
    CHECK(load_instance(p) == inst);
}

TEST_CASE("minimal instance loads")
{
    const auto p = temp_file("minimal.json");
    write_text(p, R"({"k":1,"T":1,"pages":[{"id":0,"dist":{"kind":"deterministic","value":1}},
                      {"id":1,"dist":{"kind":"deterministic","value":0.5}}],"requests":[0]})");
    const Instance inst = load_instance(p);
    CHECK(inst.n() == 2);
    CHECK(inst.k == 1);
    CHECK(inst.requests == std::vector<PageId>{page_id(0)});
}

TEST_CASE("structural errors are distinct")
{
    const std::string two_pages =
        R"("pages":[{"id":0,"dist":{"kind":"deterministic","value":1}},{"id":1,"dist":{"kind":"deterministic","value":1}}])";
    CHECK(load_error(R"({"k":2,"T":1,)" + two_pages + R"(,"requests":[0]})") ==
          InstanceErrc::too_few_pages);
    CHECK(load_error(R"({"k":1,"T":1,)" + two_pages + R"(,"requests":[7]})") ==
          InstanceErrc::unknown_page);
    CHECK(load_error(R"({"k":1,"T":2,)" + two_pages + R"(,"requests":[0]})") ==
          InstanceErrc::horizon_mismatch);
    CHECK(load_error(R"({"k":1,"T":1,"pages":[{"id":0,"dist":{"kind":"gaussian"}}],"requests":[0]})") ==
          InstanceErrc::schema);
    CHECK(load_error("{not json") == InstanceErrc::schema);
    CHECK(load_error(R"({"k":1,"T":1,"pages":[{"id":0,"dist":{"kind":"deterministic","value":0}},
                          {"id":1,"dist":{"kind":"deterministic","value":1}}],"requests":[0]})") ==
          InstanceErrc::schema);
    CHECK_THROWS_AS(load_instance(temp_file("does_not_exist.json")), InstanceError);
}

TEST_CASE("error messages name the problem")
{
    Instance inst;
    inst.k = 2;
    inst.horizon = 1;
    inst.pages.assign(2, WeightDistribution::deterministic(1));
    inst.requests = {page_id(0)};
    CHECK_THROWS_WITH(validate_instance(inst), "n must exceed k");
    inst.pages.assign(3, WeightDistribution::deterministic(1));
    inst.requests = {page_id(7)};
    CHECK_THROWS_WITH(validate_instance(inst), "unknown page id 7");
}

TEST_CASE("plain-text traces")
{
    const auto p = temp_file("trace.txt");
    write_text(p, "# header\n0\n\n2\n  1\n");
    CHECK(load_trace(p) == std::vector<PageId>{page_id(0), page_id(2), page_id(1)});
    write_text(p, "0\nx\n");
    CHECK_THROWS_AS(load_trace(p), InstanceError);
}

TEST_CASE("exact sums see past rounding")
{
    const std::vector<double> v{0.1, 0.2};
    CHECK(compare_exact_sum(v, 0.30000000000000004) < 0);  // 0.1 + 0.2 rounds up in doubles
    CHECK(compare_exact_sum(std::vector<double>{0.5, 0.5}, 1.0) == 0);
    CHECK(compare_exact_sum(std::vector<double>{1.0, 1e-300}, 1.0) > 0);
}

TEST_CASE("event helpers")
{
    const FractionalEvent e = Evict{page_id(3), 0.25, 0.5, 0.125};
    CHECK(event_page(e) == page_id(3));
    CHECK(std::string(event_name(e)) == "evict");
    CHECK(std::string(event_name(FractionalEvent{RequestEnd{page_id(0)}})) == "request_end");
}

}
