#include <fstream>
#include <iostream>
#include <optional>

#include "CLI11.hpp"

#include "owpuw/diagnostics.hpp"
#include "owpuw/harness.hpp"
#include "owpuw/opt_oracle.hpp"

using namespace owpuw;

namespace {

struct GenArgs {
    std::string kind = "adversarial";
    std::size_t k = 2;
    std::size_t n = 0;
    std::size_t horizon = 100;
    double exponent = 1.0;
    std::string weight = "deterministic:1";
    std::uint64_t seed = 1;
    std::string out;
};

struct RunArgs {
    std::string instance;
    std::string trace;
    std::size_t trace_k = 0;
    std::size_t trace_n = 0;
    std::string trace_weight = "deterministic:1";
    std::vector<std::string> policies{"owpuw"};
    std::uint64_t seed = 1;
    std::size_t reps = 1;
    std::string arithmetic = "auto";
    bool no_opt = false;
    std::size_t jobs = 1;
    std::string csv;
    std::string dump_events;
    std::string dump_dist;
    std::string dump_conf;
    bool verify = false;
};

struct OptArgs {
    std::string instance;
    bool schedule = false;
};

struct VerifyArgs {
    std::string log;
};

struct SweepArgs {
    std::string config;
    std::string csv;
    std::size_t jobs = 0;
};

std::ostream& open_or_stdout(const std::string& path, std::ofstream& file)
{
    if (path.empty() || path == "-")
        return std::cout;
    file.open(path);
    if (!file)
        throw std::runtime_error("cannot write " + path);
    return file;
}

int cmd_gen(const GenArgs& a)
{
    Rng rng(a.seed);
    const WeightSpec w = parse_weight_spec(a.weight);
    Instance inst;
    if (a.kind == "adversarial")
        inst = gen_adversarial(a.k, a.horizon, w, rng);
    else if (a.kind == "zipf")
        inst = gen_zipf(a.n ? a.n : a.k + 1, a.k, a.horizon, a.exponent, w, rng);
    else
        throw std::invalid_argument("generator must be adversarial or zipf");
    std::ofstream file;
    open_or_stdout(a.out, file) << instance_to_json(inst).dump(2) << '\n';
    return 0;
}

Instance load_run_instance(const RunArgs& a)
{
    if (!a.instance.empty())
        return load_instance(a.instance);
    if (a.trace.empty())
        throw std::invalid_argument("run needs --instance or --trace");
    Instance inst;
    inst.k = a.trace_k;
    inst.requests = load_trace(a.trace);
    inst.horizon = inst.requests.size();
    std::size_t n = a.trace_n;
    for (PageId p : inst.requests)
        n = std::max(n, index_of(p) + 1);
    Rng rng(a.seed);
    inst.pages = draw_pages(n, parse_weight_spec(a.trace_weight), rng);
    validate_instance(inst);
    return inst;
}

int cmd_run(const RunArgs& a)
{
    ExperimentConfig cfg;
    cfg.instance = load_run_instance(a);
    cfg.instance_name = !a.instance.empty() ? std::filesystem::path(a.instance).stem().string()
                                            : std::filesystem::path(a.trace).stem().string();
    cfg.policies.clear();
    for (const auto& p : a.policies)
        cfg.policies.push_back(parse_policy(p));
    cfg.base_seed = a.seed;
    cfg.replications = a.reps;
    cfg.arithmetic = parse_arithmetic(a.arithmetic);
    cfg.with_opt = !a.no_opt && oracle_fits(cfg.instance);
    cfg.jobs = a.jobs;

    const auto rows = run_experiment(cfg);
    std::ofstream file;
    write_csv(open_or_stdout(a.csv, file), rows);

    int status = 0;
    const bool detail = !a.dump_events.empty() || !a.dump_dist.empty() || !a.dump_conf.empty() ||
                        a.verify;
    if (detail) {
        // Replay replication 0 of the learning pipeline with full recording.
        std::ofstream dist_file;
        if (!a.dump_dist.empty()) {
            dist_file.open(a.dump_dist);
            if (!dist_file)
                throw std::runtime_error("cannot write " + a.dump_dist);
        }
        PipelineOptions opt;
        opt.arithmetic = cfg.arithmetic;
        opt.record_events = true;
        opt.snapshots = true;
        if (dist_file.is_open())
            opt.distribution_dump = [&](const nlohmann::json& j) { dist_file << j.dump() << '\n'; };
        Rng rng(cfg.base_seed);
        const RunLog log = run_pipeline(cfg.instance, rng, opt);
        if (!a.dump_events.empty()) {
            std::ofstream ev(a.dump_events);
            write_run_log(ev, log);
        }
        if (!a.dump_conf.empty()) {
            std::ofstream conf(a.dump_conf);
            write_conf_jsonl(conf, log.conf_history);
        }
        if (a.verify) {
            const VerifyReport rep = verify_run(log);
            std::cerr << rep.json.dump(2) << '\n';
            status = rep.passed ? 0 : 1;
        }
    }
    return status;
}

int cmd_opt(const OptArgs& a)
{
    const Instance inst = load_instance(a.instance);
    const OptSchedule s = exact_opt(inst);
    if (a.schedule)
        write_schedule_jsonl(std::cout, s, inst.requests);
    else
        std::cout << nlohmann::json{{"opt_cost", s.cost}}.dump() << '\n';
    return 0;
}

int cmd_verify(const VerifyArgs& a)
{
    std::ifstream in(a.log);
    if (!in)
        throw std::runtime_error("cannot open run log " + a.log);
    const RunLog log = read_run_log(in);
    const VerifyReport rep = verify_run(log);
    std::cout << rep.json.dump(2) << '\n';
    return rep.passed ? 0 : 1;
}

int cmd_sweep(const SweepArgs& a)
{
    std::ifstream in(a.config);
    if (!in)
        throw std::runtime_error("cannot open sweep config " + a.config);
    SweepConfig cfg = sweep_config_from_json(nlohmann::json::parse(in));
    if (a.jobs)
        cfg.jobs = a.jobs;
    const SweepResult res = run_sweep(cfg);
    if (!a.csv.empty()) {
        std::ofstream file(a.csv);
        write_csv(file, res.rows);
    }
    std::cout << to_json(res).dump(2) << '\n';
    return 0;
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Online weighted paging with unknown weights: simulator and checkers"};
    app.require_subcommand(1);

    GenArgs gen;
    auto* g = app.add_subcommand("gen", "emit a generated instance as JSON");
    g->add_option("--kind", gen.kind, "adversarial | zipf")->check(CLI::IsMember({"adversarial", "zipf"}));
    g->add_option("-k", gen.k, "cache slots")->required();
    g->add_option("-n", gen.n, "pages (zipf; default k+1)");
    g->add_option("-T,--horizon", gen.horizon, "number of requests");
    g->add_option("--exponent", gen.exponent, "zipf exponent");
    g->add_option("--weight", gen.weight, "weight spec, e.g. two_point:0.1,1,0.5");
    g->add_option("--seed", gen.seed);
    g->add_option("-o,--out", gen.out, "output file (default stdout)");

    RunArgs run;
    auto* r = app.add_subcommand("run", "run policies on an instance and emit CSV");
    auto* src = r->add_option("--instance", run.instance, "instance JSON");
    r->add_option("--trace", run.trace, "plain-text trace instead of an instance")->excludes(src);
    r->add_option("--trace-k", run.trace_k, "cache slots for a trace");
    r->add_option("--trace-n", run.trace_n, "page count for a trace (default max id + 1)");
    r->add_option("--trace-weight", run.trace_weight, "weight spec for trace pages");
    r->add_option("--policy", run.policies, "owpuw | known_weights | lru | random | marking");
    r->add_option("--seed", run.seed, "base seed; replication r uses seed + r");
    r->add_option("--reps", run.reps, "replications");
    r->add_option("--arithmetic", run.arithmetic)->check(CLI::IsMember({"auto", "rational", "float"}));
    r->add_flag("--no-opt", run.no_opt, "skip the exact oracle");
    r->add_option("--jobs", run.jobs, "parallel replications");
    r->add_option("--csv", run.csv, "CSV output (default stdout)");
    r->add_option("--dump-events", run.dump_events, "run log JSONL of replication 0");
    r->add_option("--dump-dist", run.dump_dist, "distribution dump JSONL of replication 0");
    r->add_option("--dump-conf", run.dump_conf, "confidence-bound JSONL of replication 0");
    r->add_flag("--verify", run.verify, "run the diagnostics on replication 0");

    OptArgs optargs;
    auto* o = app.add_subcommand("opt", "offline optimum of an instance");
    o->add_option("--instance", optargs.instance)->required();
    o->add_flag("--schedule", optargs.schedule, "print the witness schedule as JSONL");

    VerifyArgs ver;
    auto* v = app.add_subcommand("verify", "check a dumped run log");
    v->add_option("log", ver.log, "run log JSONL")->required();

    SweepArgs sw;
    auto* s = app.add_subcommand("sweep", "grid of adversarial runs over k");
    s->add_option("--config", sw.config, "sweep JSON config")->required();
    s->add_option("--csv", sw.csv, "per-row CSV output");
    s->add_option("--jobs", sw.jobs, "override the config's job count");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*g)
            return cmd_gen(gen);
        if (*r)
            return cmd_run(run);
        if (*o)
            return cmd_opt(optargs);
        if (*v)
            return cmd_verify(ver);
        if (*s)
            return cmd_sweep(sw);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    return 0;
}
