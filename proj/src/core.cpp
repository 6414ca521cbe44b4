#include "owpuw/core.hpp"

#include <cmath>
#include <fstream>
#include <optional>
#include <sstream>

#include <gmpxx.h>

namespace owpuw {

namespace {

bool in_unit_interval(double x)
{
    return std::isfinite(x) && x > 0.0 && x <= 1.0;
}

template <class... Ts>
struct Overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

}  // namespace

WeightDistribution WeightDistribution::deterministic(double value)
{
    if (!in_unit_interval(value))
        throw std::invalid_argument("deterministic weight must lie in (0,1]");
    return WeightDistribution(Deterministic{value});
}

WeightDistribution WeightDistribution::two_point(double low, double high, double p_high)
{
    if (!in_unit_interval(low) || !in_unit_interval(high))
        throw std::invalid_argument("two_point support must lie in (0,1]");
    if (!(p_high >= 0.0 && p_high <= 1.0))
        throw std::invalid_argument("two_point p_high must lie in [0,1]");
    return WeightDistribution(TwoPoint{low, high, p_high});
}

WeightDistribution WeightDistribution::scaled_beta(double alpha, double beta, double floor)
{
    if (!(alpha > 0.0 && beta > 0.0) || !std::isfinite(alpha) || !std::isfinite(beta))
        throw std::invalid_argument("scaled_beta shape parameters must be positive");
    if (!in_unit_interval(floor))
        throw std::invalid_argument("scaled_beta floor must lie in (0,1]");
    return WeightDistribution(ScaledBeta{alpha, beta, floor});
}

double mean_weight(const WeightDistribution& d)
{
    return std::visit(
        Overloaded{
            [](const Deterministic& x) { return x.value; },
            [](const TwoPoint& x) { return x.low * (1.0 - x.p_high) + x.high * x.p_high; },
            [](const ScaledBeta& x) {
                return x.floor + (1.0 - x.floor) * x.alpha / (x.alpha + x.beta);
            },
        },
        d.kind());
}

double sample_weight(const WeightDistribution& d, Rng& rng)
{
    return std::visit(
        Overloaded{
            [](const Deterministic& x) { return x.value; },
            [&](const TwoPoint& x) {
                std::bernoulli_distribution coin(x.p_high);
                return coin(rng) ? x.high : x.low;
            },
            [&](const ScaledBeta& x) {
                std::gamma_distribution<double> ga(x.alpha, 1.0);
                std::gamma_distribution<double> gb(x.beta, 1.0);
                const double a = ga(rng);
                const double b = gb(rng);
                const double u = (a + b > 0.0) ? a / (a + b) : 0.5;
                return std::min(1.0, x.floor + (1.0 - x.floor) * u);
            },
        },
        d.kind());
}

std::vector<double> Instance::mean_weights() const
{
    std::vector<double> w;
    w.reserve(pages.size());
    for (const auto& d : pages)
        w.push_back(mean_weight(d));
    return w;
}

void validate_instance(const Instance& inst)
{
    if (inst.k < 1)
        throw InstanceError(InstanceErrc::schema, "k must be a positive integer");
    if (inst.n() <= inst.k)
        throw InstanceError(InstanceErrc::too_few_pages, "n must exceed k");
    if (inst.requests.size() != inst.horizon)
        throw InstanceError(InstanceErrc::horizon_mismatch,
                            "T must equal the number of requests");
    for (PageId p : inst.requests) {
        if (index_of(p) >= inst.n())
            throw InstanceError(InstanceErrc::unknown_page,
                                "unknown page id " + std::to_string(index_of(p)));
    }
}

nlohmann::json distribution_to_json(const WeightDistribution& d)
{
    return std::visit(
        Overloaded{
            [](const Deterministic& x) {
                return nlohmann::json{{"kind", "deterministic"}, {"value", x.value}};
            },
            [](const TwoPoint& x) {
                return nlohmann::json{
                    {"kind", "two_point"}, {"low", x.low}, {"high", x.high}, {"p_high", x.p_high}};
            },
            [](const ScaledBeta& x) {
                return nlohmann::json{
                    {"kind", "scaled_beta"}, {"alpha", x.alpha}, {"beta", x.beta}, {"floor", x.floor}};
            },
        },
        d.kind());
}

namespace {

double number_field(const nlohmann::json& j, const char* key)
{
    if (!j.is_object() || !j.contains(key) || !j.at(key).is_number())
        throw InstanceError(InstanceErrc::schema,
                            std::string("distribution field '") + key + "' missing or not a number");
    return j.at(key).get<double>();
}

std::int64_t integer_field(const nlohmann::json& j, const char* key)
{
    if (!j.is_object() || !j.contains(key) || !j.at(key).is_number_integer())
        throw InstanceError(InstanceErrc::schema,
                            std::string("field '") + key + "' missing or not an integer");
    return j.at(key).get<std::int64_t>();
}

}  // namespace

WeightDistribution distribution_from_json(const nlohmann::json& j)
{
    if (!j.is_object() || !j.contains("kind") || !j.at("kind").is_string())
        throw InstanceError(InstanceErrc::schema, "distribution needs a string 'kind'");
    const auto kind = j.at("kind").get<std::string>();
    try {
        if (kind == "deterministic")
            return WeightDistribution::deterministic(number_field(j, "value"));
        if (kind == "two_point")
            return WeightDistribution::two_point(number_field(j, "low"), number_field(j, "high"),
                                                 number_field(j, "p_high"));
        if (kind == "scaled_beta")
            return WeightDistribution::scaled_beta(number_field(j, "alpha"),
                                                   number_field(j, "beta"),
                                                   number_field(j, "floor"));
    } catch (const std::invalid_argument& e) {
        throw InstanceError(InstanceErrc::schema, e.what());
    }
    throw InstanceError(InstanceErrc::schema, "unknown distribution kind '" + kind + "'");
}

nlohmann::json instance_to_json(const Instance& inst)
{
    nlohmann::json pages = nlohmann::json::array();
    for (std::size_t i = 0; i < inst.pages.size(); ++i)
        pages.push_back({{"id", i}, {"dist", distribution_to_json(inst.pages[i])}});
    nlohmann::json requests = nlohmann::json::array();
    for (PageId p : inst.requests)
        requests.push_back(index_of(p));
    return {{"k", inst.k}, {"T", inst.horizon}, {"pages", pages}, {"requests", requests}};
}

Instance instance_from_json(const nlohmann::json& j)
{
    if (!j.is_object())
        throw InstanceError(InstanceErrc::schema, "instance must be a JSON object");
    Instance inst;
    const auto k = integer_field(j, "k");
    const auto horizon = integer_field(j, "T");
    if (k < 1)
        throw InstanceError(InstanceErrc::schema, "k must be a positive integer");
    if (horizon < 1)
        throw InstanceError(InstanceErrc::schema, "T must be a positive integer");
    inst.k = static_cast<std::size_t>(k);
    inst.horizon = static_cast<std::size_t>(horizon);

    if (!j.contains("pages") || !j.at("pages").is_array())
        throw InstanceError(InstanceErrc::schema, "'pages' must be an array");
    const auto& pages = j.at("pages");
    std::vector<std::optional<WeightDistribution>> table(pages.size());
    for (const auto& entry : pages) {
        const auto id = integer_field(entry, "id");
        if (id < 0 || static_cast<std::size_t>(id) >= pages.size())
            throw InstanceError(InstanceErrc::schema,
                                "page ids must be 0..n-1, got " + std::to_string(id));
        if (table[id])
            throw InstanceError(InstanceErrc::schema, "duplicate page id " + std::to_string(id));
        if (!entry.contains("dist"))
            throw InstanceError(InstanceErrc::schema, "page entry needs 'dist'");
        table[id] = distribution_from_json(entry.at("dist"));
    }
    for (auto& d : table)
        inst.pages.push_back(*d);

    if (!j.contains("requests") || !j.at("requests").is_array())
        throw InstanceError(InstanceErrc::schema, "'requests' must be an array");
    for (const auto& r : j.at("requests")) {
        if (!r.is_number_integer())
            throw InstanceError(InstanceErrc::schema, "request ids must be integers");
        const auto id = r.get<std::int64_t>();
        if (id < 0 || static_cast<std::size_t>(id) >= inst.n())
            throw InstanceError(InstanceErrc::unknown_page, "unknown page id " + std::to_string(id));
        inst.requests.push_back(page_id(static_cast<std::size_t>(id)));
    }
    validate_instance(inst);
    return inst;
}

Instance load_instance(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in)
        throw InstanceError(InstanceErrc::io, "cannot open instance file " + path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::parse_error& e) {
        throw InstanceError(InstanceErrc::schema, std::string("malformed JSON: ") + e.what());
    }
    return instance_from_json(j);
}

void save_instance(const Instance& inst, const std::filesystem::path& path)
{
    std::ofstream out(path);
    if (!out)
        throw InstanceError(InstanceErrc::io, "cannot write instance file " + path.string());
    out << instance_to_json(inst).dump(2) << '\n';
}

std::vector<PageId> load_trace(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in)
        throw InstanceError(InstanceErrc::io, "cannot open trace file " + path.string());
    std::vector<PageId> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos || line[first] == '#')
            continue;
        std::istringstream ss(line);
        long long id = -1;
        if (!(ss >> id) || id < 0)
            throw InstanceError(InstanceErrc::schema,
                                "trace line " + std::to_string(lineno) + " is not a page id");
        out.push_back(page_id(static_cast<std::size_t>(id)));
    }
    return out;
}

PageId event_page(const FractionalEvent& ev)
{
    return std::visit([](const auto& e) { return e.page; }, ev);
}

const char* event_name(const FractionalEvent& ev)
{
    return std::visit(Overloaded{
                          [](const Fetch&) { return "fetch"; },
                          [](const Evict&) { return "evict"; },
                          [](const SampleDemand&) { return "sample_demand"; },
                          [](const ConfUpdate&) { return "conf_update"; },
                          [](const RequestEnd&) { return "request_end"; },
                      },
                      ev);
}

int compare_exact_sum(std::span<const double> values, double target)
{
    mpq_class sum(0);
    for (double v : values)
        sum += mpq_class(v);
    return cmp(sum, mpq_class(target));
}

}  // namespace owpuw
