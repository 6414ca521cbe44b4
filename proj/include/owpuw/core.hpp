#ifndef OWPUW_CORE_HPP
#define OWPUW_CORE_HPP

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "json.hpp"

namespace owpuw {

using Rng = std::mt19937_64;

/// Index of a page in the instance's page table.
enum class PageId : std::uint32_t {};

constexpr std::size_t index_of(PageId p) noexcept
{
    return static_cast<std::size_t>(p);
}

constexpr PageId page_id(std::size_t i) noexcept
{
    return static_cast<PageId>(i);
}

/// Thrown when an internal invariant of the algorithm is broken. These are
/// never expected on valid inputs; tests catch them to count violations.
class InvariantViolation : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

#define OWPUW_ENSURE(cond, msg)                                                \
    do {                                                                       \
        if (!(cond))                                                           \
            throw ::owpuw::InvariantViolation(std::string(msg));               \
    } while (0)

// ---------------------------------------------------------------------------
// Weight distributions
// ---------------------------------------------------------------------------

struct Deterministic {
    double value;
    bool operator==(const Deterministic&) const = default;
};

struct TwoPoint {
    double low;
    double high;
    double p_high;
    bool operator==(const TwoPoint&) const = default;
};

/// floor + (1 - floor) * Beta(alpha, beta); floor > 0 keeps the support
/// away from zero.
struct ScaledBeta {
    double alpha;
    double beta;
    double floor;
    bool operator==(const ScaledBeta&) const = default;
};

/// Eviction-cost distribution of a single page, supported in (0,1].
class WeightDistribution {
public:
    using Kind = std::variant<Deterministic, TwoPoint, ScaledBeta>;

    static WeightDistribution deterministic(double value);
    static WeightDistribution two_point(double low, double high, double p_high);
    static WeightDistribution scaled_beta(double alpha, double beta, double floor);

    const Kind& kind() const noexcept { return kind_; }
    bool is_deterministic() const noexcept
    {
        return std::holds_alternative<Deterministic>(kind_);
    }

    bool operator==(const WeightDistribution&) const = default;

private:
    explicit WeightDistribution(Kind kind) : kind_(kind) {}
    Kind kind_;
};

/// Closed-form mean of the distribution.
double mean_weight(const WeightDistribution& d);

/// One i.i.d. draw from the distribution.
double sample_weight(const WeightDistribution& d, Rng& rng);

// ---------------------------------------------------------------------------
// Instances
// ---------------------------------------------------------------------------

struct Instance {
    std::size_t k = 1;
    std::size_t horizon = 0;
    std::vector<WeightDistribution> pages;
    std::vector<PageId> requests;

    std::size_t n() const noexcept { return pages.size(); }
    std::vector<double> mean_weights() const;

    bool operator==(const Instance&) const = default;
};

enum class InstanceErrc {
    schema,
    too_few_pages,
    unknown_page,
    horizon_mismatch,
    io,
};

class InstanceError : public std::runtime_error {
public:
    InstanceError(InstanceErrc code, const std::string& what)
        : std::runtime_error(what), code_(code)
    {
    }
    InstanceErrc code() const noexcept { return code_; }

private:
    InstanceErrc code_;
};

/// Throws InstanceError if the instance breaks a structural requirement.
void validate_instance(const Instance& inst);

nlohmann::json distribution_to_json(const WeightDistribution& d);
WeightDistribution distribution_from_json(const nlohmann::json& j);

nlohmann::json instance_to_json(const Instance& inst);
Instance instance_from_json(const nlohmann::json& j);

Instance load_instance(const std::filesystem::path& path);
void save_instance(const Instance& inst, const std::filesystem::path& path);

/// Plain-text trace: one page id per line; blank lines and '#' comments
/// are skipped.
std::vector<PageId> load_trace(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Fractional/rounding interface events
// ---------------------------------------------------------------------------

struct Fetch {
    PageId page;
    double amount;
};

struct Evict {
    PageId page;
    double dy;
    double y_after;
    double ucb_cost;
};

struct SampleDemand {
    PageId page;
};

struct ConfUpdate {
    PageId page;
    double lcb;
    double ucb;
    std::uint32_t sample_index;
};

struct RequestEnd {
    PageId page;
};

using FractionalEvent = std::variant<Fetch, Evict, SampleDemand, ConfUpdate, RequestEnd>;

PageId event_page(const FractionalEvent& ev);
const char* event_name(const FractionalEvent& ev);

struct CostLedger {
    double on_cost = 0.0;
    double onf_cost = 0.0;
    double onf_ucb_cost = 0.0;
    double opt_cost = 0.0;
    double u_term = 0.0;
    double phi = 0.0;
    bool good_event = true;
};

// ---------------------------------------------------------------------------
// Numerics
// ---------------------------------------------------------------------------

/// Exact sign of (sum(values) - target), evaluated in rational arithmetic.
int compare_exact_sum(std::span<const double> values, double target);

}  // namespace owpuw

#endif
