#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "harmonia/calculus.hpp"
#include "harmonia/core.hpp"
#include "harmonia/exchange.hpp"
#include "harmonia/scenario.hpp"
#include "harmonia/sensory.hpp"
#include "harmonia/transform.hpp"

namespace harmonia {

namespace detail {

// xorshift-free 53-bit uniform; the standard distributions are not
// bit-stable across library implementations, this is.
class DeterministicRng {
public:
    explicit DeterministicRng(std::uint64_t seed) : state_(seed ^ 0x9e3779b97f4a7c15ULL) {
        if (state_ == 0) state_ = 0x9e3779b97f4a7c15ULL;
        next();
        next();
    }

    double uniform(double lo, double hi) {
        const double u = static_cast<double>(next() >> 11) * 0x1.0p-53;
        return lo + (hi - lo) * u;
    }

private:
    std::uint64_t next() {
        // splitmix64
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    std::uint64_t state_;
};

} // namespace detail

class TraceWriter {
public:
    explicit TraceWriter(std::ostream& out) : out_(out) {}

    void write(long tick, const std::string& event, nlohmann::json payload) {
        payload["tick"] = tick;
        payload["event"] = event;
        out_ << payload.dump() << "\n";
    }

private:
    std::ostream& out_;
};

class Engine {
public:
    explicit Engine(Scenario scenario) : scenario_(std::move(scenario)) {
        for (const auto& def : scenario_.systems) {
            RuntimeSystem sys;
            sys.id = def.id;
            sys.policy = def.policy;
            sys.expression = def.expression;
            sys.context = *scenario_.find_context(def.context_id);
            sys.owned = def.compositions;
            sys.memory = def.memory;
            if (def.sensory) {
                sys.sensory = *def.sensory;
                sys.sensory->tau = sys.context.match_threshold;
            }
            systems_.push_back(std::move(sys));
        }
        std::sort(systems_.begin(), systems_.end(),
                  [](const RuntimeSystem& a, const RuntimeSystem& b) { return a.id < b.id; });
        build_observations();
    }

    // Runs the full tick loop, streaming trace records. Returns the final
    // state summary.
    nlohmann::json run(std::ostream& trace_out) {
        TraceWriter trace(trace_out);

        for (auto& sys : systems_)
            sys.last_state = system_state(sys.owned, sys.expression, sys.context);

        if (scenario_.ticks == 0) {
            for (auto& sys : systems_) emit_state(trace, 0, sys, false);
            return summary();
        }

        for (long tick = 0; tick < scenario_.ticks; ++tick) {
            for (auto& sys : systems_) run_sensory(trace, tick, sys);
            for (auto& sys : systems_) emit_state(trace, tick, sys, true);
            for (auto& sys : systems_) run_response(trace, tick, sys);
            if (scenario_.exchange.enabled) run_exchange(trace, tick);
        }

        for (auto& sys : systems_) {
            nlohmann::json payload{{"system", sys.id},
                                   {"from", 0},
                                   {"to", scenario_.ticks - 1},
                                   {"status", harmonic_status(sys.history, 0, scenario_.ticks - 1)}};
            trace.write(scenario_.ticks - 1, "status", std::move(payload));
        }
        return summary();
    }

private:
    struct RuntimeSystem {
        std::string id;
        ResponsePolicy policy = ResponsePolicy::Reactive;
        Expression expression;
        Context context;
        std::vector<Composition> owned;
        std::vector<MemoryPattern> memory;
        std::optional<CycleConfig> sensory;
        PatternMemory patterns;
        StateHistory history;
        std::vector<std::string> reprime;
        double last_state = 0.0;
        double current_state = 0.0;
    };

    struct TickObservation {
        Observation observation;
        std::string system_id;
    };

    void build_observations() {
        for (const auto& so : scenario_.observations) {
            Observation o;
            o.tick = so.tick;
            o.source = so.source;
            if (!so.virtual_pattern.empty()) {
                const ScenarioSystem* def = scenario_.find_system(so.system_id);
                for (const auto& p : def->memory)
                    if (p.id == so.virtual_pattern) {
                        o = virtual_observe(p, so.tick);
                        break;
                    }
            } else {
                o.model = so.model;
            }
            observations_.push_back({std::move(o), so.system_id});
        }
        if (scenario_.random_observations) {
            const auto& r = *scenario_.random_observations;
            detail::DeterministicRng rng(scenario_.seed);
            for (int i = 0; i < r.count; ++i) {
                Observation o;
                o.tick = r.start_tick + i;
                o.source = ObservationSource::Real;
                CharacteristicModel m;
                for (const auto& key : r.keys)
                    m.add(make_characteristic(key, rng.uniform(r.min_value, r.max_value)));
                o.model = std::move(m);
                observations_.push_back({std::move(o), r.system_id});
            }
        }
    }

    std::vector<const Observation*> window(long tick, const std::string& system_id) const {
        std::vector<const Observation*> out;
        for (const auto& to : observations_)
            if (to.observation.tick == tick && to.system_id == system_id)
                out.push_back(&to.observation);
        return out;
    }

    std::vector<Stub> primed_stubs(const RuntimeSystem& sys) const {
        const auto cap = static_cast<std::size_t>(
            std::max(0.0, std::floor(sys.sensory->c_c)));
        std::vector<std::string> order;
        for (const auto& id : sys.reprime)
            if (std::find(order.begin(), order.end(), id) == order.end())
                for (const auto& p : sys.memory)
                    if (p.id == id) {
                        order.push_back(id);
                        break;
                    }
        std::vector<Stub> base = prime(sys.memory, sys.context, sys.memory.size());
        for (const auto& s : base)
            if (std::find(order.begin(), order.end(), s.pattern_id) == order.end())
                order.push_back(s.pattern_id);
        if (order.size() > cap) order.resize(cap);
        std::vector<Stub> out;
        for (const auto& id : order)
            for (const auto& p : sys.memory)
                if (p.id == id) {
                    out.push_back(stub_of(p));
                    break;
                }
        return out;
    }

    void run_sensory(TraceWriter& trace, long tick, RuntimeSystem& sys) {
        if (!sys.sensory) return;
        const auto stubs = primed_stubs(sys);
        nlohmann::json primed = nlohmann::json::array();
        for (const auto& s : stubs) primed.push_back(s.pattern_id);
        trace.write(tick, "priming", {{"system", sys.id}, {"stubs", std::move(primed)}});

        const auto obs = window(tick, sys.id);
        const int f = optimum_frequency(*sys.sensory);
        std::vector<std::string> next_reprime;
        int attempts = 0;
        for (const auto& stub : stubs) {
            for (const Observation* o : obs) {
                if (attempts >= f) break;
                ++attempts;
                const auto score = match_stub(stub, *o, sys.context);
                if (!score) continue;
                const Expansion ex = expand(stub, sys.memory);
                trace.write(tick, "expansion",
                            {{"system", sys.id},
                             {"pattern", ex.pattern.id},
                             {"score", *score},
                             {"source", to_string(o->source)}});
                for (const auto& id : ex.reprime_ids)
                    if (std::find(next_reprime.begin(), next_reprime.end(), id) ==
                        next_reprime.end())
                        next_reprime.push_back(id);
            }
            if (attempts >= f) break;
        }
        std::sort(next_reprime.begin(), next_reprime.end());
        sys.reprime = std::move(next_reprime);
    }

    void emit_state(TraceWriter& trace, long tick, RuntimeSystem& sys, bool record_history) {
        nlohmann::json hv_map = nlohmann::json::object();
        std::vector<double> hvs;
        for (const auto& c : sys.owned) {
            const double v = harmonic_value(c, sys.expression, sys.context).value;
            hv_map[c.id] = v;
            hvs.push_back(v);
        }
        const double state = system_state(sys.owned, sys.expression, sys.context);
        trace.write(tick, "state",
                    {{"system", sys.id}, {"state", state}, {"hv", std::move(hv_map)}});

        const auto selected = select_compositions(sys.owned, sys.expression, sys.context);
        nlohmann::json sel = nlohmann::json::array();
        for (const auto& c : selected) sel.push_back(c.id);
        trace.write(tick, "selection", {{"system", sys.id}, {"selected", std::move(sel)}});

        if (record_history) sys.history.add_sample(tick, std::move(hvs), state);
        sys.current_state = state;
    }

    void run_response(TraceWriter& trace, long tick, RuntimeSystem& sys) {
        StateTransition transition;
        transition.hs_before = sys.last_state;
        transition.hs_after = sys.current_state;
        transition.context_id = sys.context.id;
        transition.expression_id = sys.expression.id;

        SystemSnapshot snapshot{sys.expression, sys.context, sys.owned};
        const auto proposals = respond(snapshot, transition, sys.policy, sys.patterns);

        const Proposal* chosen = nullptr;
        for (const auto& p : proposals) {
            if (p.kind == ProposalKind::ExchangeProbe) continue;
            if (p.predicted_delta_hs < -kHsTolerance) continue;
            chosen = &p;
            break;
        }
        sys.last_state = sys.current_state;
        if (chosen == nullptr) return;

        const double hs_before = sys.current_state;
        apply_proposal(sys, *chosen);
        const double hs_after = system_state(sys.owned, sys.expression, sys.context);
        sys.patterns = record_application(sys.patterns, sys.context.id, sys.expression.id,
                                          *chosen->spec, hs_before, hs_after);
        trace.write(tick, "transform",
                    {{"system", sys.id},
                     {"kind", to_string(chosen->kind)},
                     {"transform", to_string(chosen->spec->kind)},
                     {"target", chosen->target_id},
                     {"hs_before", hs_before},
                     {"hs_after", hs_after}});
        sys.last_state = hs_after;
    }

    void apply_proposal(RuntimeSystem& sys, const Proposal& p) {
        if (!p.spec || p.target_id.empty()) return;
        if (p.kind == ProposalKind::SimplifyExpression) {
            Composition as_comp;
            as_comp.id = sys.expression.id;
            as_comp.model = sys.expression.model;
            auto parts = simplify(as_comp, *p.spec);
            if (parts.size() == 1) sys.expression.model = parts.front().model;
            return;
        }
        auto it = detail::find_owned(sys.owned, p.target_id);
        if (it == sys.owned.end()) return;
        if (p.spec->kind == TransformKind::Enrich) {
            for (const auto& ch : p.spec->add_characteristics)
                if (!it->model.contains(ch.key)) it->model.add(ch);
        } else {
            auto parts = simplify(*it, *p.spec);
            sys.owned.erase(it);
            for (auto& part : parts) {
                part.owner = sys.id;
                sys.owned.push_back(std::move(part));
            }
            detail::sort_owned(sys.owned);
        }
    }

    const Context& exchange_context() const {
        if (!scenario_.exchange.context_id.empty())
            return *scenario_.find_context(scenario_.exchange.context_id);
        return systems_.front().context;
    }

    RuntimeSystem& system_by_id(const std::string& id) {
        return *std::find_if(systems_.begin(), systems_.end(),
                             [&](const RuntimeSystem& s) { return s.id == id; });
    }

    void run_exchange(TraceWriter& trace, long tick) {
        const Context& ctx = exchange_context();

        if (scenario_.exchange.detect_cycles) {
            const TradeGraph graph = possible_trade_graph(ctx);
            const auto cycles = detect_cycles(graph, scenario_.exchange.cycle_max_len);
            nlohmann::json jcycles = nlohmann::json::array();
            for (const auto& c : cycles) {
                nlohmann::json returns = nlohmann::json::object();
                for (const auto& [node, ret] : c.returns) returns[node] = ret;
                jcycles.push_back({{"nodes", c.nodes},
                                   {"returns", std::move(returns)},
                                   {"self_sustaining", c.self_sustaining}});
            }
            trace.write(tick, "exchange", {{"cycles", std::move(jcycles)}});
        }

        std::vector<TradingSystem> traders;
        for (const auto& sys : systems_)
            traders.push_back({sys.id, sys.expression, sys.owned});

        const auto chain = find_chain(traders, ctx, scenario_.exchange.max_depth);
        if (chain) {
            execute_chain(*chain);
            nlohmann::json actions = nlohmann::json::array();
            for (const auto& a : chain->actions) {
                nlohmann::json ja{{"kind", to_string(a.kind)}, {"actor", a.actor}};
                if (!a.counterparty.empty()) ja["counterparty"] = a.counterparty;
                if (!a.give_ids.empty()) ja["give"] = a.give_ids;
                if (!a.take_ids.empty()) ja["take"] = a.take_ids;
                if (!a.composition_id.empty()) ja["composition"] = a.composition_id;
                if (!a.obligation_id.empty()) ja["obligation"] = a.obligation_id;
                if (a.spec) ja["transform"] = to_string(a.spec->kind);
                actions.push_back(std::move(ja));
            }
            double xv = 0.0;
            nlohmann::json returns = nlohmann::json::object();
            for (const auto& [party, ret] : chain->returns) {
                returns[party] = ret;
                if (chain->parties.count(party)) xv += ret;
            }
            xv /= static_cast<double>(chain->parties.size());
            trace.write(tick, "exchange",
                        {{"chain", std::move(actions)},
                         {"returns", std::move(returns)},
                         {"xv", xv},
                         {"efficiency",
                          exchange_efficiency(xv, static_cast<int>(chain->parties.size()))}});
            for (auto& sys : systems_)
                sys.last_state = system_state(sys.owned, sys.expression, sys.context);
        }
    }

    // Graph of every single-composition transfer: edge i -> j for each
    // composition i could hand j, scored by each side's state delta.
    TradeGraph possible_trade_graph(const Context& ctx) const {
        TradeGraph g;
        for (const auto& from : systems_) {
            const double from_state = system_state(from.owned, from.expression, ctx);
            for (const auto& comp : from.owned) {
                std::vector<Composition> without;
                for (const auto& c : from.owned)
                    if (c.id != comp.id) without.push_back(c);
                const double give = system_state(without, from.expression, ctx) - from_state;
                for (const auto& to : systems_) {
                    if (to.id == from.id) continue;
                    const double to_state = system_state(to.owned, to.expression, ctx);
                    std::vector<Composition> with = to.owned;
                    with.push_back(comp);
                    const double take = system_state(with, to.expression, ctx) - to_state;
                    g.edges.push_back({from.id, to.id, give, take});
                }
            }
        }
        return g;
    }

    void execute_chain(const Chain& chain) {
        for (const auto& a : chain.actions) {
            switch (a.kind) {
            case ActionKind::Trade: {
                auto& actor = system_by_id(a.actor);
                auto& cp = system_by_id(a.counterparty);
                for (const auto& id : a.give_ids) move_comp(actor, cp, id);
                for (const auto& id : a.take_ids) move_comp(cp, actor, id);
                break;
            }
            case ActionKind::DeferredObligation: {
                auto& actor = system_by_id(a.actor);
                auto& cp = system_by_id(a.counterparty);
                for (const auto& id : a.take_ids) move_comp(cp, actor, id);
                break;
            }
            case ActionKind::Settle: {
                auto& actor = system_by_id(a.actor);
                auto& cp = system_by_id(a.counterparty);
                for (const auto& id : a.give_ids) move_comp(actor, cp, id);
                break;
            }
            case ActionKind::Transform: {
                auto& actor = system_by_id(a.actor);
                if (!a.spec) break;
                if (a.spec->kind == TransformKind::Simplify) {
                    auto it = detail::find_owned(actor.owned, a.composition_id);
                    auto parts = simplify(*it, *a.spec);
                    actor.owned.erase(it);
                    for (auto& part : parts) {
                        part.owner = actor.id;
                        actor.owned.push_back(std::move(part));
                    }
                } else {
                    std::vector<Composition> merged_sources;
                    for (const auto& id : a.spec->merge_ids) {
                        auto it = detail::find_owned(actor.owned, id);
                        merged_sources.push_back(*it);
                        actor.owned.erase(it);
                    }
                    Composition merged = enrich(merged_sources, *a.spec);
                    merged.owner = actor.id;
                    actor.owned.push_back(std::move(merged));
                }
                detail::sort_owned(actor.owned);
                break;
            }
            }
        }
    }

    void move_comp(RuntimeSystem& from, RuntimeSystem& to, const std::string& id) {
        auto it = detail::find_owned(from.owned, id);
        Composition c = std::move(*it);
        from.owned.erase(it);
        c.owner = to.id;
        to.owned.push_back(std::move(c));
        detail::sort_owned(to.owned);
    }

    nlohmann::json summary() const {
        nlohmann::json out;
        out["ticks"] = scenario_.ticks;
        nlohmann::json systems = nlohmann::json::object();
        for (const auto& sys : systems_) {
            nlohmann::json comps = nlohmann::json::array();
            for (const auto& c : sys.owned) comps.push_back(c.id);
            systems[sys.id] = {{"state", system_state(sys.owned, sys.expression, sys.context)},
                               {"compositions", std::move(comps)}};
        }
        out["systems"] = std::move(systems);
        return out;
    }

    Scenario scenario_;
    std::vector<RuntimeSystem> systems_;
    std::vector<TickObservation> observations_;
};

} // namespace harmonia
