#ifndef OWPUW_HARNESS_HPP
#define OWPUW_HARNESS_HPP

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "owpuw/baselines.hpp"
#include "owpuw/core.hpp"
#include "owpuw/online.hpp"

namespace owpuw {

/// Page weights for generated instances: one distribution shared by every
/// page, or per-page deterministic weights drawn uniformly from [lo, hi].
struct UniformWeights {
    double lo;
    double hi;
};
using WeightSpec = std::variant<WeightDistribution, UniformWeights>;

/// "deterministic:V", "two_point:LOW,HIGH,P", "scaled_beta:A,B,FLOOR",
/// "uniform:LO,HI".
WeightSpec parse_weight_spec(const std::string& text);

std::vector<WeightDistribution> draw_pages(std::size_t n, const WeightSpec& spec, Rng& rng);

/// k+1 pages, each request uniform over them.
Instance gen_adversarial(std::size_t k, std::size_t horizon, const WeightSpec& weight, Rng& rng);

/// Requests i.i.d. with P(page i) proportional to (i+1)^(-exponent).
Instance gen_zipf(std::size_t n, std::size_t k, std::size_t horizon, double exponent,
                  const WeightSpec& weight, Rng& rng);

struct ExperimentConfig {
    Instance instance;
    std::string instance_name = "instance";
    std::vector<PolicyKind> policies{PolicyKind::owpuw};
    std::uint64_t base_seed = 1;
    std::size_t replications = 1;
    ArithmeticChoice arithmetic = ArithmeticChoice::automatic;
    bool with_opt = true;
    std::size_t jobs = 1;
};

struct ResultRow {
    std::string instance;
    std::string policy;
    std::uint64_t seed = 0;
    std::size_t k = 0;
    std::size_t n = 0;
    std::size_t horizon = 0;
    double on_cost = 0.0;
    std::optional<double> onf_cost;
    std::optional<double> onf_ucb_cost;
    std::optional<double> opt_cost;
    std::optional<double> u_term;
    std::optional<bool> good_event;

    std::optional<double> ratio_on_opt() const;
};

/// Replication r runs with seed base_seed + r; every policy of a replication
/// starts from a generator seeded identically. Rows come back in
/// (replication, policy) order whatever the job count.
std::vector<ResultRow> run_experiment(const ExperimentConfig& config);

inline constexpr const char* kCsvHeader =
    "instance,policy,seed,k,n,T,on_cost,onf_cost,onf_ucb_cost,opt_cost,u_term,good_event,"
    "ratio_on_opt";

void write_csv(std::ostream& out, const std::vector<ResultRow>& rows, bool header = true);

struct Aggregate {
    std::string policy;
    std::size_t count = 0;
    double mean_on = 0.0;
    double stderr_on = 0.0;
    double good_event_rate = 1.0;
};

std::vector<Aggregate> aggregate(const std::vector<ResultRow>& rows);

struct SweepConfig {
    std::vector<std::size_t> ks{2, 4, 8};
    std::size_t horizon_per_k = 500;
    std::size_t replications = 5;
    std::vector<PolicyKind> policies{PolicyKind::owpuw};
    std::uint64_t base_seed = 1;
    WeightSpec weight = WeightDistribution::deterministic(1.0);
    ArithmeticChoice arithmetic = ArithmeticChoice::automatic;
    std::size_t jobs = 1;
};

SweepConfig sweep_config_from_json(const nlohmann::json& j);

struct SweepPoint {
    std::string policy;
    std::size_t k = 0;
    std::size_t horizon = 0;
    double opt_cost = 0.0;
    double mean_on = 0.0;
    double ratio = 0.0;
};

struct SweepFit {
    std::string policy;
    double c_log = 0.0;     // least-squares c in ratio = c ln k
    double exponent = 0.0;  // slope of ln(ratio) against ln(k)
};

struct SweepResult {
    std::vector<ResultRow> rows;
    std::vector<SweepPoint> points;
    std::vector<SweepFit> fits;
    double seconds = 0.0;
};

SweepResult run_sweep(const SweepConfig& config);

nlohmann::json to_json(const SweepResult& r);

}  // namespace owpuw

#endif
