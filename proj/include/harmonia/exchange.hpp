#pragma once

#include <algorithm>
#include <bit>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "harmonia/calculus.hpp"
#include "harmonia/core.hpp"
#include "harmonia/transform.hpp"

namespace harmonia {

class NotOwned : public Error {
public:
    using Error::Error;
};

class InvalidChain : public Error {
public:
    using Error::Error;
};

// A party in an exchange. Value is subjective: every return is measured
// through the party's own expression.
struct TradingSystem {
    std::string id;
    Expression expression;
    std::vector<Composition> owned;
};

enum class ActionKind { Trade, Transform, DeferredObligation, Settle };

inline const char* to_string(ActionKind k) {
    switch (k) {
    case ActionKind::Trade: return "Trade";
    case ActionKind::Transform: return "Transform";
    case ActionKind::DeferredObligation: return "DeferredObligation";
    default: return "Settle";
    }
}

struct ExchangeAction {
    ActionKind kind = ActionKind::Trade;
    std::string actor;
    std::string counterparty;          // Trade, DeferredObligation, Settle
    std::vector<std::string> give_ids; // Trade: actor gives; Settle: payload
    std::vector<std::string> take_ids; // Trade: actor takes; Deferred: payload taken now
    std::string composition_id;        // Transform target
    std::optional<TransformSpec> spec; // Transform
    std::string obligation_id;         // DeferredObligation, Settle
};

struct Chain {
    std::vector<ExchangeAction> actions;
    std::set<std::string> parties;
    std::map<std::string, double> returns;

    bool contains(ActionKind k) const {
        return std::any_of(actions.begin(), actions.end(),
                           [&](const ExchangeAction& a) { return a.kind == k; });
    }
};

struct ExchangeOutcome {
    double xv = 0.0;
    double efficiency = 0.0;
    std::map<std::string, double> motivation;
};

inline double party_return(double before_state, double after_state) {
    return after_state - before_state;
}

inline double exchange_efficiency(double outcome_xv, int n_parties) {
    if (n_parties < 2)
        throw InvalidChain("exchange_efficiency: fewer than two parties");
    return outcome_xv / n_parties;
}

namespace detail {

inline std::vector<Composition>::iterator find_owned(std::vector<Composition>& owned,
                                                     const std::string& id) {
    return std::find_if(owned.begin(), owned.end(),
                        [&](const Composition& c) { return c.id == id; });
}

inline void sort_owned(std::vector<Composition>& owned) {
    std::sort(owned.begin(), owned.end(),
              [](const Composition& a, const Composition& b) { return a.id < b.id; });
}

} // namespace detail

// Swap the listed compositions between two systems and score the outcome.
// xv is the mean of the two returns; motivation is each party's own return.
inline ExchangeOutcome direct_exchange(TradingSystem& s1, TradingSystem& s2,
                                       const std::vector<std::string>& give1,
                                       const std::vector<std::string>& give2,
                                       const Context& ctx) {
    const double before1 = system_state(s1.owned, s1.expression, ctx);
    const double before2 = system_state(s2.owned, s2.expression, ctx);

    std::vector<Composition> moved1, moved2;
    for (const auto& id : give1) {
        auto it = detail::find_owned(s1.owned, id);
        if (it == s1.owned.end())
            throw NotOwned("direct_exchange: '" + s1.id + "' does not own '" + id + "'");
        moved1.push_back(std::move(*it));
        s1.owned.erase(it);
    }
    for (const auto& id : give2) {
        auto it = detail::find_owned(s2.owned, id);
        if (it == s2.owned.end())
            throw NotOwned("direct_exchange: '" + s2.id + "' does not own '" + id + "'");
        moved2.push_back(std::move(*it));
        s2.owned.erase(it);
    }
    for (auto& c : moved1) {
        c.owner = s2.id;
        s2.owned.push_back(std::move(c));
    }
    for (auto& c : moved2) {
        c.owner = s1.id;
        s1.owned.push_back(std::move(c));
    }
    detail::sort_owned(s1.owned);
    detail::sort_owned(s2.owned);

    const double r1 = party_return(before1, system_state(s1.owned, s1.expression, ctx));
    const double r2 = party_return(before2, system_state(s2.owned, s2.expression, ctx));
    ExchangeOutcome out;
    out.xv = (r1 + r2) / 2.0;
    out.efficiency = exchange_efficiency(out.xv, 2);
    out.motivation[s1.id] = r1;
    out.motivation[s2.id] = r2;
    return out;
}

namespace detail {

inline constexpr double kReturnEps = 1e-12;

struct Obligation {
    std::string id;
    std::string debtor;
    std::string creditor;
};

struct SearchNode {
    // system id -> owned compositions, sorted by composition id
    std::map<std::string, std::vector<Composition>> owned;
    std::vector<Obligation> obligations;
    std::set<std::pair<std::string, std::string>> acquired; // (system, comp) gained in-chain
    int obligation_seq = 1;
};

inline std::string model_fingerprint(const CharacteristicModel& m) {
    std::string s;
    for (const auto& c : m) {
        s += c.key;
        s += '=';
        const auto bits = std::bit_cast<std::uint64_t>(c.value);
        s += std::to_string(bits);
        s += ';';
    }
    return s;
}

// Content key: composition ids are irrelevant to what a state can still do,
// so two states owning identical models are interchangeable.
inline std::string state_key(const SearchNode& node) {
    std::string key;
    for (const auto& [sys, comps] : node.owned) {
        key += sys;
        key += '{';
        std::vector<std::string> prints;
        prints.reserve(comps.size());
        for (const auto& c : comps) prints.push_back(model_fingerprint(c.model));
        std::sort(prints.begin(), prints.end());
        for (const auto& p : prints) {
            key += p;
            key += '|';
        }
        key += '}';
    }
    std::vector<std::string> obs;
    for (const auto& ob : node.obligations) obs.push_back(ob.debtor + ">" + ob.creditor);
    std::sort(obs.begin(), obs.end());
    for (const auto& o : obs) {
        key += o;
        key += ',';
    }
    return key;
}

class ChainSearch {
public:
    ChainSearch(const std::vector<TradingSystem>& systems, const Context& ctx, int max_depth)
        : ctx_(ctx), max_depth_(max_depth) {
        for (const auto& s : systems) {
            sys_ids_.push_back(s.id);
            expressions_[s.id] = s.expression;
        }
        std::sort(sys_ids_.begin(), sys_ids_.end());
        for (const auto& s : systems) {
            auto comps = s.owned;
            sort_owned(comps);
            start_.owned[s.id] = std::move(comps);
        }
        for (const auto& id : sys_ids_)
            initial_states_[id] = state_of(start_, id);
    }

    std::optional<Chain> run() {
        std::vector<ExchangeAction> actions;
        return dfs(start_, actions);
    }

private:
    double state_of(const SearchNode& node, const std::string& sys) const {
        return system_state(node.owned.at(sys), expressions_.at(sys), ctx_);
    }

    std::optional<Chain> as_goal(const SearchNode& node,
                                 const std::vector<ExchangeAction>& actions) const {
        if (actions.empty() || !node.obligations.empty()) return std::nullopt;
        std::map<std::string, double> returns;
        bool any_positive = false;
        for (const auto& id : sys_ids_) {
            const double r = state_of(node, id) - initial_states_.at(id);
            if (r < -kReturnEps) return std::nullopt;
            if (r > 1e-9) any_positive = true;
            returns[id] = r;
        }
        if (!any_positive) return std::nullopt;
        Chain chain;
        chain.actions = actions;
        for (const auto& a : actions) {
            chain.parties.insert(a.actor);
            if (!a.counterparty.empty()) chain.parties.insert(a.counterparty);
        }
        chain.returns = std::move(returns);
        return chain;
    }

    struct Child {
        ExchangeAction action;
        SearchNode node;
    };

    void enumerate_trades(const SearchNode& node, const std::map<std::string, double>& states,
                          std::vector<Child>& out) const {
        for (std::size_t i = 0; i < sys_ids_.size(); ++i) {
            for (std::size_t j = i + 1; j < sys_ids_.size(); ++j) {
                const auto& si = sys_ids_[i];
                const auto& sj = sys_ids_[j];
                for (const auto& gi : node.owned.at(si)) {
                    for (const auto& gj : node.owned.at(sj)) {
                        SearchNode next = node;
                        move_comp(next, si, sj, gi.id);
                        move_comp(next, sj, si, gj.id);
                        const double sti = state_of(next, si);
                        const double stj = state_of(next, sj);
                        if (sti < states.at(si) - kReturnEps ||
                            stj < states.at(sj) - kReturnEps)
                            continue;
                        if (!(sti > states.at(si) + kReturnEps ||
                              stj > states.at(sj) + kReturnEps))
                            continue;
                        next.acquired.insert({si, gj.id});
                        next.acquired.insert({sj, gi.id});
                        ExchangeAction a;
                        a.kind = ActionKind::Trade;
                        a.actor = si;
                        a.counterparty = sj;
                        a.give_ids = {gi.id};
                        a.take_ids = {gj.id};
                        out.push_back({std::move(a), std::move(next)});
                    }
                }
            }
        }
    }

    bool split_is_relevant(const CharacteristicModel& whole, const Composition& p1,
                           const Composition& p2) const {
        Composition w;
        w.id = "w";
        w.model = whole;
        for (const auto& id : sys_ids_) {
            const auto& e = expressions_.at(id);
            const double base = harmonic_value(w, e, ctx_).value;
            if (std::abs(harmonic_value(p1, e, ctx_).value - base) > kReturnEps ||
                std::abs(harmonic_value(p2, e, ctx_).value - base) > kReturnEps)
                return true;
        }
        return false;
    }

    bool merge_is_relevant(const Composition& merged, const Composition& a,
                           const Composition& b) const {
        for (const auto& id : sys_ids_) {
            const auto& e = expressions_.at(id);
            const double m = harmonic_value(merged, e, ctx_).value;
            if (std::abs(harmonic_value(a, e, ctx_).value - m) > kReturnEps ||
                std::abs(harmonic_value(b, e, ctx_).value - m) > kReturnEps)
                return true;
        }
        return false;
    }

    // Transforms operate on work-in-progress goods: only compositions acquired
    // earlier in this chain may be reshaped, and only when the pieces are
    // valued differently from the whole by someone.
    void enumerate_transforms(const SearchNode& node, const std::map<std::string, double>& states,
                              std::vector<Child>& out) const {
        for (const auto& sys : sys_ids_) {
            for (const auto& comp : node.owned.at(sys)) {
                if (node.acquired.find({sys, comp.id}) == node.acquired.end()) continue;
                const auto& entries = comp.model.entries();
                for (std::size_t pos = 1; pos < entries.size(); ++pos) {
                    std::vector<std::string> g1, g2;
                    for (std::size_t k = 0; k < entries.size(); ++k)
                        (k < pos ? g1 : g2).push_back(entries[k].key);
                    const TransformSpec spec = simplify_spec({}, {g1, g2});
                    auto parts = simplify(comp, spec);
                    if (!split_is_relevant(comp.model, parts[0], parts[1])) continue;
                    SearchNode next = node;
                    auto& owned = next.owned.at(sys);
                    owned.erase(find_owned(owned, comp.id));
                    for (auto& part : parts) {
                        next.acquired.insert({sys, part.id});
                        owned.push_back(std::move(part));
                    }
                    sort_owned(owned);
                    if (state_of(next, sys) < states.at(sys) - kReturnEps) continue;
                    ExchangeAction a;
                    a.kind = ActionKind::Transform;
                    a.actor = sys;
                    a.composition_id = comp.id;
                    a.spec = spec;
                    out.push_back({std::move(a), std::move(next)});
                }
            }
            // merges of acquired pairs with disjoint keys
            const auto& owned = node.owned.at(sys);
            for (std::size_t i = 0; i < owned.size(); ++i) {
                if (node.acquired.find({sys, owned[i].id}) == node.acquired.end()) continue;
                for (std::size_t j = i + 1; j < owned.size(); ++j) {
                    if (node.acquired.find({sys, owned[j].id}) == node.acquired.end()) continue;
                    bool disjoint = true;
                    for (const auto& ch : owned[j].model)
                        if (owned[i].model.contains(ch.key)) {
                            disjoint = false;
                            break;
                        }
                    if (!disjoint) continue;
                    const TransformSpec spec = enrich_spec({}, {owned[i].id, owned[j].id});
                    Composition merged = enrich({owned[i], owned[j]}, spec);
                    if (!merge_is_relevant(merged, owned[i], owned[j])) continue;
                    SearchNode next = node;
                    auto& no = next.owned.at(sys);
                    no.erase(find_owned(no, owned[i].id));
                    no.erase(find_owned(no, owned[j].id));
                    next.acquired.insert({sys, merged.id});
                    no.push_back(std::move(merged));
                    sort_owned(no);
                    if (state_of(next, sys) < states.at(sys) - kReturnEps) continue;
                    ExchangeAction a;
                    a.kind = ActionKind::Transform;
                    a.actor = sys;
                    a.composition_id = owned[i].id;
                    a.spec = spec;
                    out.push_back({std::move(a), std::move(next)});
                }
            }
        }
    }

    void enumerate_deferred(const SearchNode& node, std::vector<Child>& out) const {
        for (const auto& actor : sys_ids_) {
            for (const auto& cp : sys_ids_) {
                if (actor == cp) continue;
                for (const auto& comp : node.owned.at(cp)) {
                    SearchNode next = node;
                    move_comp(next, cp, actor, comp.id);
                    next.acquired.insert({actor, comp.id});
                    Obligation ob;
                    ob.id = "ob" + std::to_string(next.obligation_seq++);
                    ob.debtor = actor;
                    ob.creditor = cp;
                    next.obligations.push_back(ob);
                    ExchangeAction a;
                    a.kind = ActionKind::DeferredObligation;
                    a.actor = actor;
                    a.counterparty = cp;
                    a.take_ids = {comp.id};
                    a.obligation_id = ob.id;
                    out.push_back({std::move(a), std::move(next)});
                }
            }
        }
    }

    void enumerate_settles(const SearchNode& node, std::vector<Child>& out) const {
        for (const auto& ob : node.obligations) {
            for (const auto& comp : node.owned.at(ob.debtor)) {
                SearchNode next = node;
                move_comp(next, ob.debtor, ob.creditor, comp.id);
                next.acquired.insert({ob.creditor, comp.id});
                next.obligations.erase(
                    std::find_if(next.obligations.begin(), next.obligations.end(),
                                 [&](const Obligation& o) { return o.id == ob.id; }));
                ExchangeAction a;
                a.kind = ActionKind::Settle;
                a.actor = ob.debtor;
                a.counterparty = ob.creditor;
                a.give_ids = {comp.id};
                a.obligation_id = ob.id;
                out.push_back({std::move(a), std::move(next)});
            }
        }
    }

    static void move_comp(SearchNode& node, const std::string& from, const std::string& to,
                          const std::string& comp_id) {
        auto& src = node.owned.at(from);
        auto it = find_owned(src, comp_id);
        Composition c = std::move(*it);
        src.erase(it);
        c.owner = to;
        auto& dst = node.owned.at(to);
        dst.push_back(std::move(c));
        sort_owned(dst);
    }

    std::optional<Chain> dfs(const SearchNode& node, std::vector<ExchangeAction>& actions) {
        if (auto goal = as_goal(node, actions)) return goal;
        const int depth = static_cast<int>(actions.size());
        const int remaining = max_depth_ - depth;
        if (remaining <= 0) return std::nullopt;
        if (static_cast<int>(node.obligations.size()) > remaining) return std::nullopt;

        const std::string key = state_key(node);
        auto it = visited_.find(key);
        if (it != visited_.end() && it->second >= remaining) return std::nullopt;
        visited_[key] = remaining;

        std::map<std::string, double> states;
        for (const auto& id : sys_ids_) states[id] = state_of(node, id);

        std::vector<Child> children;
        enumerate_trades(node, states, children);
        enumerate_transforms(node, states, children);
        enumerate_deferred(node, children);
        enumerate_settles(node, children);

        for (auto& child : children) {
            actions.push_back(child.action);
            if (auto found = dfs(child.node, actions)) return found;
            actions.pop_back();
        }
        return std::nullopt;
    }

    Context ctx_;
    int max_depth_;
    std::vector<std::string> sys_ids_;
    std::map<std::string, Expression> expressions_;
    std::map<std::string, double> initial_states_;
    SearchNode start_;
    std::map<std::string, int> visited_;
};

} // namespace detail

// Bounded depth-first search for the first chain, in deterministic action
// order, that settles every obligation, loses no party, and strictly gains
// at least one. Trades execute only when voluntary at the step they happen:
// neither side's state may drop and at least one must rise.
inline std::optional<Chain> find_chain(const std::vector<TradingSystem>& systems,
                                       const Context& ctx, int max_depth) {
    if (max_depth < 1)
        throw InvalidChain("find_chain: max_depth must be >= 1");
    if (systems.size() < 2) return std::nullopt;
    detail::ChainSearch search(systems, ctx, max_depth);
    return search.run();
}

// Directed trade flow: give_return is the effect on the giver, take_return
// on the receiver.
struct TradeEdge {
    std::string from;
    std::string to;
    double give_return = 0.0;
    double take_return = 0.0;
};

struct TradeGraph {
    std::vector<TradeEdge> edges;

    std::vector<std::string> nodes() const {
        std::vector<std::string> out;
        for (const auto& e : edges) {
            if (std::find(out.begin(), out.end(), e.from) == out.end()) out.push_back(e.from);
            if (std::find(out.begin(), out.end(), e.to) == out.end()) out.push_back(e.to);
        }
        std::sort(out.begin(), out.end());
        return out;
    }
};

struct Cycle {
    std::vector<std::string> nodes; // starts at the lexicographically smallest member
    std::map<std::string, double> returns;
    bool self_sustaining = false;
};

namespace detail {

inline void cycle_dfs(const TradeGraph& g, const std::string& start,
                      std::vector<std::size_t>& edge_path, std::vector<std::string>& node_path,
                      std::size_t max_len, std::vector<Cycle>& out) {
    const std::string& here = node_path.back();
    for (std::size_t ei = 0; ei < g.edges.size(); ++ei) {
        const TradeEdge& e = g.edges[ei];
        if (e.from != here) continue;
        if (e.to == start) {
            if (node_path.size() < 2) continue; // self-loops are not exchange cycles
            Cycle c;
            c.nodes = node_path;
            for (const auto& n : node_path) c.returns[n] = 0.0;
            for (std::size_t k : edge_path) {
                c.returns[g.edges[k].from] += g.edges[k].give_return;
                c.returns[g.edges[k].to] += g.edges[k].take_return;
            }
            c.returns[e.from] += e.give_return;
            c.returns[e.to] += e.take_return;
            c.self_sustaining = std::all_of(c.returns.begin(), c.returns.end(),
                                            [](const auto& kv) { return kv.second >= -kReturnEps; });
            out.push_back(std::move(c));
            continue;
        }
        if (e.to < start) continue; // canonical cycles start at their smallest node
        if (std::find(node_path.begin(), node_path.end(), e.to) != node_path.end()) continue;
        if (node_path.size() + 1 > max_len) continue;
        edge_path.push_back(ei);
        node_path.push_back(e.to);
        cycle_dfs(g, start, edge_path, node_path, max_len, out);
        node_path.pop_back();
        edge_path.pop_back();
    }
}

} // namespace detail

// All simple directed cycles up to max_len, each annotated self-sustaining
// when every member's return over the cycle is non-negative.
inline std::vector<Cycle> detect_cycles(const TradeGraph& graph, std::size_t max_len = 8) {
    std::vector<Cycle> out;
    for (const auto& start : graph.nodes()) {
        std::vector<std::size_t> edge_path;
        std::vector<std::string> node_path{start};
        detail::cycle_dfs(graph, start, edge_path, node_path, max_len, out);
    }
    std::sort(out.begin(), out.end(), [](const Cycle& a, const Cycle& b) {
        if (a.nodes.size() != b.nodes.size()) return a.nodes.size() < b.nodes.size();
        return a.nodes < b.nodes;
    });
    return out;
}

} // namespace harmonia
