#include "owpuw/online.hpp"

#include <cmath>
#include <istream>
#include <ostream>

namespace owpuw {

ArithmeticMode choose_arithmetic(const Instance& inst, ArithmeticChoice choice)
{
    switch (choice) {
    case ArithmeticChoice::rational: return ArithmeticMode::rational;
    case ArithmeticChoice::floating: return ArithmeticMode::floating;
    case ArithmeticChoice::automatic: break;
    }
    return (inst.n() <= 8 && inst.horizon <= 200) ? ArithmeticMode::rational
                                                   : ArithmeticMode::floating;
}

ArithmeticChoice parse_arithmetic(const std::string& name)
{
    if (name == "auto")
        return ArithmeticChoice::automatic;
    if (name == "rational")
        return ArithmeticChoice::rational;
    if (name == "float")
        return ArithmeticChoice::floating;
    throw std::invalid_argument("arithmetic must be auto, rational or float");
}

Snapshot take_snapshot(const FractionalState& state)
{
    Snapshot s;
    s.y = state.y;
    s.m = state.m;
    s.lcb.resize(state.n);
    s.ucb.resize(state.n);
    s.samples.resize(state.n);
    for (std::size_t i = 0; i < state.n; ++i) {
        const auto& c = state.conf[i];
        s.lcb[i] = c ? c->lcb : 0.0;
        s.ucb[i] = c ? c->ucb : 1.0;
        s.samples[i] = c ? c->samples : 0;
    }
    return s;
}

namespace {

// Shared bookkeeping of the fractional side: ONF, ONF-bar, U, good event.
class FractionalAccount {
public:
    FractionalAccount(const Instance& inst, RunLog& log, bool record_events, bool snapshots)
        : weights_(inst.mean_weights()),
          prev_lcb_(inst.n(), 0.0),
          log_(log),
          record_events_(record_events),
          snapshots_(snapshots)
    {
    }

    void on_event(std::size_t t, const FractionalEvent& ev, const FractionalState& state)
    {
        if (const auto* e = std::get_if<Evict>(&ev)) {
            log_.onf_cost += e->dy * weights_[index_of(e->page)];
            log_.onf_ucb_cost += e->ucb_cost;
        } else if (const auto* e = std::get_if<ConfUpdate>(&ev)) {
            const std::size_t i = index_of(e->page);
            log_.u_term += regret_increment(e->lcb, e->ucb, prev_lcb_[i], state.eta);
            prev_lcb_[i] = e->lcb;
            if (e->lcb > weights_[i] || e->ucb < weights_[i])
                log_.good_event = false;
            const auto& c = *state.conf[i];
            ConfRecord r;
            r.t = t;
            r.page = e->page;
            r.i = c.samples;
            r.mean = static_cast<double>(c.mean);
            r.lcb = c.lcb;
            r.ucb = c.ucb;
            if (c.samples >= 2)
                r.eps = confidence_radius(c.samples, state.n, state.horizon);
            log_.conf_history.push_back(r);
        }
    }

    void record(std::size_t t, const FractionalEvent& ev, const FractionalState& state)
    {
        if (!record_events_)
            return;
        RunEvent re;
        re.t = t;
        re.event = ev;
        re.onf = log_.onf_cost;
        re.onf_ucb = log_.onf_ucb_cost;
        re.on = log_.on_cost;
        re.u = log_.u_term;
        if (snapshots_)
            re.snapshot = take_snapshot(state);
        log_.events.push_back(std::move(re));
    }

private:
    std::vector<double> weights_;
    std::vector<double> prev_lcb_;
    RunLog& log_;
    bool record_events_;
    bool snapshots_;
};

template <class M>
void drive(const Instance& inst, Rng& rng, const PipelineOptions& opt, RunLog& log)
{
    using Traits = MeasureTraits<M>;
    RoundingLayer<M> rounding(inst, rng);
    if (opt.trajectory)
        rounding.set_trajectory_log(opt.trajectory);
    rounding.set_sampling_enabled(opt.learner == LearnerMode::optimistic);

    FractionalSolver solver(inst.n(), inst.k, inst.horizon, opt.learner,
                            opt.learner == LearnerMode::pinned ? inst.mean_weights()
                                                               : std::vector<double>{});
    log.eta = solver.state().eta;
    if (opt.snapshots)
        log.initial = take_snapshot(solver.state());
    FractionalAccount account(inst, log, opt.record_events, opt.snapshots);

    InvariantTally* tally = opt.tally;
    std::size_t t = 0;
    const SampleSource source = [&](PageId p) { return rounding.provide_sample(p); };
    const EventSink sink = [&](const FractionalEvent& ev, const FractionalState& state) {
        account.on_event(t, ev, state);
        rounding.apply(ev);
        log.on_cost = rounding.expected_cost();

        if (tally) {
            if (const auto* e = std::get_if<Evict>(&ev); e && e->dy > 0.0) {
                const double pre = rounding.last_pre_imbalance();
                const double allowed = 2.0 * e->dy;
                if (pre > allowed * (1.0 + 1e-9) + (Traits::exact ? 0.0 : 1e-9))
                    ++tally->evict_imbalance;
            }
        }
        if (opt.check_invariants && tally) {
            std::optional<PageId> served;
            if (const auto* e = std::get_if<RequestEnd>(&ev))
                served = e->page;
            const RoundingInvariants inv = rounding.check_invariants(served);
            ++tally->checks;
            tally->mass += !inv.mass_one;
            tally->consistency += !inv.consistent;
            tally->balance += !inv.balanced;
            tally->validity += !inv.valid;
        }
        if (opt.distribution_dump) {
            nlohmann::json rec = rounding.describe();
            rec["t"] = t;
            rec["event"] = event_name(ev);
            rec["page"] = index_of(event_page(ev));
            opt.distribution_dump(rec);
        }
        account.record(t, ev, state);
    };

    for (; t < inst.requests.size(); ++t)
        solver.serve_request(inst.requests[t], source, sink);

    log.rebalances = rounding.rebalances();
    for (std::size_t c = 0; c < kCostKinds; ++c)
        log.itemized[c] = rounding.cost(static_cast<CostKind>(c));
    log.early_sampling_cost = rounding.early_sampling_cost();
    log.on_cost = rounding.expected_cost();
    if (tally) {
        for (const auto& r : log.rebalances) {
            tally->lemma_bound += !r.within_lemma_bound;
            tally->cause_bound += !r.within_cause_bound;
        }
    }
}

}  // namespace

RunLog run_pipeline(const Instance& inst, Rng& rng, const PipelineOptions& options)
{
    validate_instance(inst);
    RunLog log;
    log.instance = inst;
    log.learner = options.learner;
    log.policy = options.learner == LearnerMode::pinned ? "known_weights" : "owpuw";
    const ArithmeticMode mode = choose_arithmetic(inst, options.arithmetic);
    log.arithmetic = mode;
    if (mode == ArithmeticMode::rational)
        drive<mpq_class>(inst, rng, options, log);
    else
        drive<double>(inst, rng, options, log);
    return log;
}

RunLog run_fractional(const Instance& inst, Rng& rng, LearnerMode learner, bool record_events,
                      bool snapshots)
{
    validate_instance(inst);
    RunLog log;
    log.instance = inst;
    log.learner = learner;
    log.policy = "fractional";

    FractionalSolver solver(inst.n(), inst.k, inst.horizon, learner,
                            learner == LearnerMode::pinned ? inst.mean_weights()
                                                           : std::vector<double>{});
    log.eta = solver.state().eta;
    if (snapshots)
        log.initial = take_snapshot(solver.state());
    FractionalAccount account(inst, log, record_events, snapshots);

    std::size_t t = 0;
    const SampleSource source = [&](PageId p) {
        return sample_weight(inst.pages[index_of(p)], rng);
    };
    const EventSink sink = [&](const FractionalEvent& ev, const FractionalState& state) {
        account.on_event(t, ev, state);
        account.record(t, ev, state);
    };
    for (; t < inst.requests.size(); ++t)
        solver.serve_request(inst.requests[t], source, sink);
    return log;
}

// ---------------------------------------------------------------------------

nlohmann::json event_to_json(const FractionalEvent& ev)
{
    nlohmann::json j{{"type", event_name(ev)}, {"page", index_of(event_page(ev))}};
    if (const auto* e = std::get_if<Fetch>(&ev)) {
        j["amount"] = e->amount;
    } else if (const auto* e = std::get_if<Evict>(&ev)) {
        j["dy"] = e->dy;
        j["y_after"] = e->y_after;
        j["ucb_cost"] = e->ucb_cost;
    } else if (const auto* e = std::get_if<ConfUpdate>(&ev)) {
        j["lcb"] = e->lcb;
        j["ucb"] = e->ucb;
        j["i"] = e->sample_index;
    }
    return j;
}

FractionalEvent event_from_json(const nlohmann::json& j)
{
    const auto type = j.at("type").get<std::string>();
    const PageId p = page_id(j.at("page").get<std::size_t>());
    if (type == "fetch")
        return Fetch{p, j.at("amount").get<double>()};
    if (type == "evict")
        return Evict{p, j.at("dy").get<double>(), j.at("y_after").get<double>(),
                     j.at("ucb_cost").get<double>()};
    if (type == "sample_demand")
        return SampleDemand{p};
    if (type == "conf_update")
        return ConfUpdate{p, j.at("lcb").get<double>(), j.at("ucb").get<double>(),
                          j.at("i").get<std::uint32_t>()};
    if (type == "request_end")
        return RequestEnd{p};
    throw std::invalid_argument("unknown event type '" + type + "'");
}

namespace {

nlohmann::json snapshot_to_json(const Snapshot& s)
{
    return {{"y", s.y}, {"m", s.m}, {"lcb", s.lcb}, {"ucb", s.ucb}, {"n", s.samples}};
}

Snapshot snapshot_from_json(const nlohmann::json& j)
{
    Snapshot s;
    j.at("y").get_to(s.y);
    j.at("m").get_to(s.m);
    j.at("lcb").get_to(s.lcb);
    j.at("ucb").get_to(s.ucb);
    j.at("n").get_to(s.samples);
    return s;
}

}  // namespace

void write_run_log(std::ostream& out, const RunLog& log)
{
    nlohmann::json header{{"record", "header"},
                          {"instance", instance_to_json(log.instance)},
                          {"policy", log.policy},
                          {"learner", log.learner == LearnerMode::pinned ? "pinned" : "optimistic"},
                          {"eta", log.eta}};
    header["arithmetic"] =
        log.arithmetic ? nlohmann::json(arithmetic_mode_name(*log.arithmetic)) : nlohmann::json();
    if (log.initial)
        header["initial"] = snapshot_to_json(*log.initial);
    out << header.dump() << '\n';

    for (const auto& e : log.events) {
        nlohmann::json j{{"record", "event"}, {"t", e.t},         {"event", event_to_json(e.event)},
                         {"onf", e.onf},      {"onf_ucb", e.onf_ucb}, {"on", e.on},
                         {"u", e.u}};
        if (e.snapshot)
            j["state"] = snapshot_to_json(*e.snapshot);
        out << j.dump() << '\n';
    }
    for (const auto& r : log.conf_history) {
        nlohmann::json j{{"record", "conf"}, {"t", r.t},     {"page", index_of(r.page)},
                         {"i", r.i},         {"mean", r.mean}, {"lcb", r.lcb},
                         {"ucb", r.ucb}};
        j["eps"] = r.eps ? nlohmann::json(*r.eps) : nlohmann::json(nullptr);
        out << j.dump() << '\n';
    }
    for (const auto& r : log.rebalances) {
        out << nlohmann::json{{"record", "rebalance"},
                              {"cause", cost_kind_name(r.cause)},
                              {"cost", r.cost},
                              {"ucb_cost", r.ucb_cost},
                              {"max_imbalance", r.max_imbalance},
                              {"j_max", r.j_max},
                              {"lemma_bound", r.lemma_bound},
                              {"within_lemma_bound", r.within_lemma_bound},
                              {"cause_bound", r.cause_bound},
                              {"within_cause_bound", r.within_cause_bound},
                              {"steps", r.steps}}
                   .dump()
            << '\n';
    }
    nlohmann::json itemized;
    for (std::size_t c = 0; c < kCostKinds; ++c)
        itemized[cost_kind_name(static_cast<CostKind>(c))] = log.itemized[c];
    out << nlohmann::json{{"record", "summary"},
                          {"on_cost", log.on_cost},
                          {"onf_cost", log.onf_cost},
                          {"onf_ucb_cost", log.onf_ucb_cost},
                          {"u_term", log.u_term},
                          {"good_event", log.good_event},
                          {"itemized", itemized},
                          {"early_sampling_cost", log.early_sampling_cost}}
               .dump()
        << '\n';
}

RunLog read_run_log(std::istream& in)
{
    RunLog log;
    bool have_header = false;
    bool have_summary = false;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty())
            continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::parse_error& e) {
            throw std::runtime_error("run log line " + std::to_string(lineno) +
                                     " is not JSON: " + e.what());
        }
        const auto kind = j.value("record", std::string{});
        if (kind == "header") {
            log.instance = instance_from_json(j.at("instance"));
            log.policy = j.value("policy", std::string("owpuw"));
            log.learner =
                j.value("learner", std::string{}) == "pinned" ? LearnerMode::pinned
                                                              : LearnerMode::optimistic;
            log.eta = j.at("eta").get<double>();
            if (j.contains("arithmetic") && j.at("arithmetic").is_string())
                log.arithmetic = j.at("arithmetic").get<std::string>() == "rational"
                                     ? ArithmeticMode::rational
                                     : ArithmeticMode::floating;
            if (j.contains("initial"))
                log.initial = snapshot_from_json(j.at("initial"));
            have_header = true;
        } else if (kind == "event") {
            RunEvent e;
            e.t = j.at("t").get<std::size_t>();
            e.event = event_from_json(j.at("event"));
            e.onf = j.at("onf").get<double>();
            e.onf_ucb = j.at("onf_ucb").get<double>();
            e.on = j.at("on").get<double>();
            e.u = j.at("u").get<double>();
            if (j.contains("state"))
                e.snapshot = snapshot_from_json(j.at("state"));
            log.events.push_back(std::move(e));
        } else if (kind == "conf") {
            ConfRecord r;
            r.t = j.at("t").get<std::size_t>();
            r.page = page_id(j.at("page").get<std::size_t>());
            r.i = j.at("i").get<std::uint32_t>();
            r.mean = j.at("mean").get<double>();
            r.lcb = j.at("lcb").get<double>();
            r.ucb = j.at("ucb").get<double>();
            if (!j.at("eps").is_null())
                r.eps = j.at("eps").get<double>();
            log.conf_history.push_back(r);
        } else if (kind == "rebalance") {
            RebalanceReport r;
            const auto cause = j.at("cause").get<std::string>();
            for (std::size_t c = 0; c < kCostKinds; ++c)
                if (cause == cost_kind_name(static_cast<CostKind>(c)))
                    r.cause = static_cast<CostKind>(c);
            r.cost = j.at("cost").get<double>();
            r.ucb_cost = j.at("ucb_cost").get<double>();
            r.max_imbalance = j.at("max_imbalance").get<double>();
            r.j_max = j.at("j_max").get<int>();
            r.lemma_bound = j.at("lemma_bound").get<double>();
            r.within_lemma_bound = j.at("within_lemma_bound").get<bool>();
            r.cause_bound = j.at("cause_bound").get<double>();
            r.within_cause_bound = j.at("within_cause_bound").get<bool>();
            r.steps = j.at("steps").get<std::size_t>();
            log.rebalances.push_back(r);
        } else if (kind == "summary") {
            log.on_cost = j.at("on_cost").get<double>();
            log.onf_cost = j.at("onf_cost").get<double>();
            log.onf_ucb_cost = j.at("onf_ucb_cost").get<double>();
            log.u_term = j.at("u_term").get<double>();
            log.good_event = j.at("good_event").get<bool>();
            for (std::size_t c = 0; c < kCostKinds; ++c)
                log.itemized[c] = j.at("itemized")
                                      .at(cost_kind_name(static_cast<CostKind>(c)))
                                      .get<double>();
            log.early_sampling_cost = j.at("early_sampling_cost").get<double>();
            have_summary = true;
        } else {
            throw std::runtime_error("run log line " + std::to_string(lineno) +
                                     " has unknown record type");
        }
    }
    if (!have_header)
        throw std::runtime_error("run log has no header record");
    if (!have_summary)
        throw std::runtime_error("run log has no summary record");
    return log;
}

}  // namespace owpuw
