#include "owpuw/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <sstream>
#include <mutex>
#include <thread>

#include "owpuw/opt_oracle.hpp"

namespace owpuw {

namespace {

std::vector<double> parse_numbers(const std::string& text, std::size_t expected,
                                  const std::string& kind)
{
    std::vector<double> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        std::size_t used = 0;
        double v = 0.0;
        try {
            v = std::stod(item, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used == 0 || used != item.size())
            throw std::invalid_argument("bad number '" + item + "' in " + kind + " weight spec");
        out.push_back(v);
    }
    if (out.size() != expected)
        throw std::invalid_argument(kind + " weight spec needs " + std::to_string(expected) +
                                    " parameters");
    return out;
}

}  // namespace

WeightSpec parse_weight_spec(const std::string& text)
{
    const auto colon = text.find(':');
    const std::string kind = text.substr(0, colon);
    const std::string args = colon == std::string::npos ? "" : text.substr(colon + 1);
    if (kind == "deterministic") {
        const auto v = parse_numbers(args, 1, kind);
        return WeightDistribution::deterministic(v[0]);
    }
    if (kind == "two_point") {
        const auto v = parse_numbers(args, 3, kind);
        return WeightDistribution::two_point(v[0], v[1], v[2]);
    }
    if (kind == "scaled_beta") {
        const auto v = parse_numbers(args, 3, kind);
        return WeightDistribution::scaled_beta(v[0], v[1], v[2]);
    }
    if (kind == "uniform") {
        const auto v = parse_numbers(args, 2, kind);
        if (!(v[0] > 0.0 && v[0] <= v[1] && v[1] <= 1.0))
            throw std::invalid_argument("uniform weights need 0 < lo <= hi <= 1");
        return UniformWeights{v[0], v[1]};
    }
    throw std::invalid_argument("unknown weight spec '" + text + "'");
}

std::vector<WeightDistribution> draw_pages(std::size_t n, const WeightSpec& spec, Rng& rng)
{
    std::vector<WeightDistribution> pages;
    pages.reserve(n);
    if (const auto* d = std::get_if<WeightDistribution>(&spec)) {
        pages.assign(n, *d);
        return pages;
    }
    const auto& u = std::get<UniformWeights>(spec);
    std::uniform_real_distribution<double> draw(u.lo, u.hi);
    for (std::size_t i = 0; i < n; ++i)
        pages.push_back(WeightDistribution::deterministic(std::min(1.0, draw(rng))));
    return pages;
}

Instance gen_adversarial(std::size_t k, std::size_t horizon, const WeightSpec& weight, Rng& rng)
{
    if (k < 1 || horizon < 1)
        throw std::invalid_argument("gen_adversarial needs k >= 1 and T >= 1");
    Instance inst;
    inst.k = k;
    inst.horizon = horizon;
    inst.pages = draw_pages(k + 1, weight, rng);
    std::uniform_int_distribution<std::size_t> pick(0, k);
    for (std::size_t t = 0; t < horizon; ++t)
        inst.requests.push_back(page_id(pick(rng)));
    return inst;
}

Instance gen_zipf(std::size_t n, std::size_t k, std::size_t horizon, double exponent,
                  const WeightSpec& weight, Rng& rng)
{
    if (n <= k || k < 1)
        throw std::invalid_argument("gen_zipf needs n > k >= 1");
    if (!(exponent >= 0.0))
        throw std::invalid_argument("zipf exponent must be non-negative");
    Instance inst;
    inst.k = k;
    inst.horizon = horizon;
    inst.pages = draw_pages(n, weight, rng);
    std::vector<double> mass(n);
    for (std::size_t i = 0; i < n; ++i)
        mass[i] = std::pow(static_cast<double>(i + 1), -exponent);
    std::discrete_distribution<std::size_t> pick(mass.begin(), mass.end());
    for (std::size_t t = 0; t < horizon; ++t)
        inst.requests.push_back(page_id(pick(rng)));
    return inst;
}

// ---------------------------------------------------------------------------

std::optional<double> ResultRow::ratio_on_opt() const
{
    if (!opt_cost || *opt_cost <= 0.0)
        return std::nullopt;
    return on_cost / *opt_cost;
}

namespace {

ResultRow run_one(const ExperimentConfig& cfg, PolicyKind policy, std::uint64_t seed)
{
    ResultRow row;
    row.instance = cfg.instance_name;
    row.policy = policy_name(policy);
    row.seed = seed;
    row.k = cfg.instance.k;
    row.n = cfg.instance.n();
    row.horizon = cfg.instance.horizon;

    Rng rng(seed);
    if (policy == PolicyKind::owpuw || policy == PolicyKind::known_weights) {
        PipelineOptions opt;
        opt.learner = policy == PolicyKind::known_weights ? LearnerMode::pinned
                                                          : LearnerMode::optimistic;
        opt.arithmetic = cfg.arithmetic;
        const RunLog log = run_pipeline(cfg.instance, rng, opt);
        row.on_cost = log.on_cost;
        row.onf_cost = log.onf_cost;
        row.onf_ucb_cost = log.onf_ucb_cost;
        row.u_term = log.u_term;
        row.good_event = log.good_event;
    } else {
        row.on_cost = run_policy(policy, cfg.instance, rng);
    }
    return row;
}

// Runs task(i) for i in [0, count) on up to `jobs` threads.
template <class F>
void parallel_for(std::size_t count, std::size_t jobs, F&& task)
{
    jobs = std::max<std::size_t>(1, std::min(jobs, count));
    if (jobs == 1) {
        for (std::size_t i = 0; i < count; ++i)
            task(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    std::vector<std::thread> workers;
    for (std::size_t w = 0; w < jobs; ++w) {
        workers.emplace_back([&] {
            for (std::size_t i; (i = next.fetch_add(1)) < count;) {
                try {
                    task(i);
                } catch (...) {
                    std::lock_guard lock(failure_mutex);
                    if (!failure)
                        failure = std::current_exception();
                }
            }
        });
    }
    for (auto& w : workers)
        w.join();
    if (failure)
        std::rethrow_exception(failure);
}

}  // namespace

std::vector<ResultRow> run_experiment(const ExperimentConfig& config)
{
    validate_instance(config.instance);
    std::optional<double> opt;
    if (config.with_opt)
        opt = exact_opt(config.instance).cost;

    const std::size_t P = config.policies.size();
    std::vector<ResultRow> rows(config.replications * P);
    parallel_for(rows.size(), config.jobs, [&](std::size_t i) {
        const std::size_t r = i / P;
        rows[i] = run_one(config, config.policies[i % P], config.base_seed + r);
        rows[i].opt_cost = opt;
    });
    return rows;
}

namespace {

std::string fmt(double v)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

std::string fmt(const std::optional<double>& v)
{
    return v ? fmt(*v) : std::string();
}

}  // namespace

void write_csv(std::ostream& out, const std::vector<ResultRow>& rows, bool header)
{
    if (header)
        out << kCsvHeader << '\n';
    for (const auto& r : rows) {
        out << r.instance << ',' << r.policy << ',' << r.seed << ',' << r.k << ',' << r.n << ','
            << r.horizon << ',' << fmt(r.on_cost) << ',' << fmt(r.onf_cost) << ','
            << fmt(r.onf_ucb_cost) << ',' << fmt(r.opt_cost) << ',' << fmt(r.u_term) << ','
            << (r.good_event ? (*r.good_event ? "1" : "0") : "") << ','
            << fmt(r.ratio_on_opt()) << '\n';
    }
}

std::vector<Aggregate> aggregate(const std::vector<ResultRow>& rows)
{
    std::vector<Aggregate> out;
    for (const auto& r : rows) {
        auto it = std::find_if(out.begin(), out.end(),
                               [&](const Aggregate& a) { return a.policy == r.policy; });
        if (it == out.end()) {
            out.push_back(Aggregate{r.policy});
            it = std::prev(out.end());
        }
        ++it->count;
    }
    for (auto& a : out) {
        double sum = 0.0;
        double sq = 0.0;
        std::size_t good = 0;
        for (const auto& r : rows) {
            if (r.policy != a.policy)
                continue;
            sum += r.on_cost;
            sq += r.on_cost * r.on_cost;
            good += r.good_event.value_or(true);
        }
        const double cnt = static_cast<double>(a.count);
        a.mean_on = sum / cnt;
        const double var = a.count > 1 ? std::max(0.0, (sq - cnt * a.mean_on * a.mean_on) / (cnt - 1))
                                       : 0.0;
        a.stderr_on = std::sqrt(var / cnt);
        a.good_event_rate = static_cast<double>(good) / cnt;
    }
    return out;
}

// ---------------------------------------------------------------------------

SweepConfig sweep_config_from_json(const nlohmann::json& j)
{
    SweepConfig c;
    if (j.contains("k"))
        j.at("k").get_to(c.ks);
    if (j.contains("T_per_k"))
        c.horizon_per_k = j.at("T_per_k").get<std::size_t>();
    if (j.contains("replications"))
        c.replications = j.at("replications").get<std::size_t>();
    if (j.contains("base_seed"))
        c.base_seed = j.at("base_seed").get<std::uint64_t>();
    if (j.contains("policies")) {
        c.policies.clear();
        for (const auto& p : j.at("policies"))
            c.policies.push_back(parse_policy(p.get<std::string>()));
    }
    if (j.contains("weight"))
        c.weight = parse_weight_spec(j.at("weight").get<std::string>());
    if (j.contains("arithmetic"))
        c.arithmetic = parse_arithmetic(j.at("arithmetic").get<std::string>());
    if (j.contains("jobs"))
        c.jobs = j.at("jobs").get<std::size_t>();
    if (c.ks.empty() || c.replications == 0 || c.policies.empty())
        throw std::invalid_argument("sweep needs k values, policies and replications >= 1");
    return c;
}

SweepResult run_sweep(const SweepConfig& config)
{
    const auto start = std::chrono::steady_clock::now();
    SweepResult out;
    for (std::size_t k : config.ks) {
        Rng gen(config.base_seed ^ (0x9E3779B97F4A7C15ULL * (k + 1)));
        ExperimentConfig exp;
        exp.instance = gen_adversarial(k, config.horizon_per_k * k, config.weight, gen);
        exp.instance_name = "adversarial_k" + std::to_string(k);
        exp.policies = config.policies;
        exp.base_seed = config.base_seed;
        exp.replications = config.replications;
        exp.arithmetic = config.arithmetic;
        exp.with_opt = oracle_fits(exp.instance);
        exp.jobs = config.jobs;
        const auto rows = run_experiment(exp);
        out.rows.insert(out.rows.end(), rows.begin(), rows.end());
        if (!exp.with_opt)
            continue;
        const double opt = rows.front().opt_cost.value_or(0.0);
        for (const auto& a : aggregate(rows)) {
            SweepPoint pt;
            pt.policy = a.policy;
            pt.k = k;
            pt.horizon = exp.instance.horizon;
            pt.opt_cost = opt;
            pt.mean_on = a.mean_on;
            pt.ratio = opt > 0.0 ? a.mean_on / opt : 0.0;
            out.points.push_back(pt);
        }
    }

    for (PolicyKind p : config.policies) {
        double num = 0.0;
        double den = 0.0;
        std::vector<std::pair<double, double>> xy;
        for (const auto& pt : out.points) {
            if (pt.policy != policy_name(p) || pt.ratio <= 0.0 || pt.k < 2)
                continue;
            const double lk = std::log(static_cast<double>(pt.k));
            num += pt.ratio * lk;
            den += lk * lk;
            xy.emplace_back(lk, std::log(pt.ratio));
        }
        SweepFit fit;
        fit.policy = policy_name(p);
        fit.c_log = den > 0.0 ? num / den : 0.0;
        if (xy.size() >= 2) {
            double mx = 0.0, my = 0.0;
            for (auto [x, y] : xy) {
                mx += x;
                my += y;
            }
            mx /= static_cast<double>(xy.size());
            my /= static_cast<double>(xy.size());
            double sxy = 0.0, sxx = 0.0;
            for (auto [x, y] : xy) {
                sxy += (x - mx) * (y - my);
                sxx += (x - mx) * (x - mx);
            }
            fit.exponent = sxx > 0.0 ? sxy / sxx : 0.0;
        }
        out.fits.push_back(fit);
    }
    out.seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return out;
}

nlohmann::json to_json(const SweepResult& r)
{
    nlohmann::json points = nlohmann::json::array();
    for (const auto& p : r.points)
        points.push_back({{"policy", p.policy},
                          {"k", p.k},
                          {"T", p.horizon},
                          {"opt_cost", p.opt_cost},
                          {"mean_on_cost", p.mean_on},
                          {"ratio", p.ratio}});
    nlohmann::json fits = nlohmann::json::array();
    for (const auto& f : r.fits)
        fits.push_back({{"policy", f.policy}, {"c_ln_k", f.c_log}, {"k_exponent", f.exponent}});
    return {{"points", points}, {"fits", fits}, {"seconds", r.seconds}};
}

}  // namespace owpuw
