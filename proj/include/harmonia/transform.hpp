#pragma once

#include <algorithm>
#include <optional>
#include <string>
#include <vector>

#include "harmonia/calculus.hpp"
#include "harmonia/core.hpp"

namespace harmonia {

class KeyNotFound : public Error {
public:
    using Error::Error;
};

class KeyCollision : public Error {
public:
    using Error::Error;
};

// "Maintained or improved" uses this tolerance everywhere.
inline constexpr double kHsTolerance = 1e-12;

inline bool hs_improved(double hs_before, double hs_after) {
    return hs_after >= hs_before - kHsTolerance;
}

enum class TransformKind { Simplify, Enrich };

inline const char* to_string(TransformKind k) {
    return k == TransformKind::Simplify ? "Simplify" : "Enrich";
}

struct Rename {
    std::string composition_id;
    std::string key;
    std::string new_key;

    friend bool operator==(const Rename&, const Rename&) = default;
};

// Exactly the fields of its kind are populated. For Simplify, drop_keys are
// removed first and decompose_groups must then partition the remaining keys.
struct TransformSpec {
    TransformKind kind = TransformKind::Simplify;
    std::vector<std::string> drop_keys;
    std::vector<std::vector<std::string>> decompose_groups;
    std::vector<Characteristic> add_characteristics;
    std::vector<std::string> merge_ids;
    std::vector<Rename> renames;

    friend bool operator==(const TransformSpec&, const TransformSpec&) = default;
};

inline TransformSpec simplify_spec(std::vector<std::string> drop_keys,
                                   std::vector<std::vector<std::string>> groups = {}) {
    TransformSpec s;
    s.kind = TransformKind::Simplify;
    s.drop_keys = std::move(drop_keys);
    s.decompose_groups = std::move(groups);
    return s;
}

inline TransformSpec enrich_spec(std::vector<Characteristic> add,
                                 std::vector<std::string> merge_ids = {}) {
    TransformSpec s;
    s.kind = TransformKind::Enrich;
    s.add_characteristics = std::move(add);
    s.merge_ids = std::move(merge_ids);
    return s;
}

inline void validate_into(const TransformSpec& spec, const std::string& path,
                          std::vector<Diagnostic>& out) {
    if (spec.kind == TransformKind::Simplify) {
        if (!spec.add_characteristics.empty() || !spec.merge_ids.empty() ||
            !spec.renames.empty())
            out.push_back({path, "simplify spec carries enrich fields"});
    } else {
        if (!spec.drop_keys.empty() || !spec.decompose_groups.empty())
            out.push_back({path, "enrich spec carries simplify fields"});
    }
}

// Drop keys and/or decompose into per-group compositions. Group outputs get
// ids <id>#1, <id>#2, ... in group order; total characteristic count never
// increases.
inline std::vector<Composition> simplify(const Composition& c, const TransformSpec& spec) {
    if (spec.kind != TransformKind::Simplify)
        throw Error("simplify: spec kind is not Simplify");
    for (const auto& k : spec.drop_keys)
        if (!c.model.contains(k))
            throw KeyNotFound("simplify: key '" + k + "' not in composition '" + c.id + "'");

    std::vector<Characteristic> remaining;
    for (const auto& ch : c.model)
        if (std::find(spec.drop_keys.begin(), spec.drop_keys.end(), ch.key) ==
            spec.drop_keys.end())
            remaining.push_back(ch);

    if (spec.decompose_groups.empty()) {
        Composition out;
        out.id = c.id;
        out.owner = c.owner;
        for (auto& ch : remaining) out.model.add(std::move(ch));
        return {std::move(out)};
    }

    std::vector<std::string> covered;
    for (const auto& group : spec.decompose_groups)
        for (const auto& k : group) {
            if (std::find_if(remaining.begin(), remaining.end(),
                             [&](const Characteristic& ch) { return ch.key == k; }) ==
                remaining.end())
                throw KeyNotFound("simplify: group key '" + k + "' not in composition '" +
                                  c.id + "'");
            if (std::find(covered.begin(), covered.end(), k) != covered.end())
                throw Error("simplify: groups overlap on key '" + k + "'");
            covered.push_back(k);
        }
    if (covered.size() != remaining.size())
        throw Error("simplify: groups do not partition the remaining keys of '" + c.id + "'");

    std::vector<Composition> out;
    out.reserve(spec.decompose_groups.size());
    for (std::size_t g = 0; g < spec.decompose_groups.size(); ++g) {
        Composition part;
        part.id = c.id + "#" + std::to_string(g + 1);
        part.owner = c.owner;
        for (const auto& ch : remaining)
            if (std::find(spec.decompose_groups[g].begin(), spec.decompose_groups[g].end(),
                          ch.key) != spec.decompose_groups[g].end())
                part.model.add(ch);
        out.push_back(std::move(part));
    }
    return out;
}

// Merge compositions (all of cs, or the subset named by merge_ids, in listed
// order) and append added characteristics. Key collisions must be resolved
// by a rename or the merge fails.
inline Composition enrich(const std::vector<Composition>& cs, const TransformSpec& spec) {
    if (spec.kind != TransformKind::Enrich)
        throw Error("enrich: spec kind is not Enrich");

    std::vector<const Composition*> sources;
    if (spec.merge_ids.empty()) {
        for (const auto& c : cs) sources.push_back(&c);
    } else {
        for (const auto& id : spec.merge_ids) {
            auto it = std::find_if(cs.begin(), cs.end(),
                                   [&](const Composition& c) { return c.id == id; });
            if (it == cs.end())
                throw KeyNotFound("enrich: unknown composition id '" + id + "'");
            sources.push_back(&*it);
        }
    }
    if (sources.empty())
        throw Error("enrich: nothing to merge");

    Composition out;
    for (std::size_t i = 0; i < sources.size(); ++i) {
        if (i > 0) out.id += "+";
        out.id += sources[i]->id;
    }
    out.owner = sources.front()->owner;

    for (const Composition* src : sources) {
        for (Characteristic ch : src->model) {
            for (const auto& rn : spec.renames)
                if (rn.composition_id == src->id && rn.key == ch.key) ch.key = rn.new_key;
            if (out.model.contains(ch.key))
                throw KeyCollision("enrich: key '" + ch.key + "' collides while merging into '" +
                                   out.id + "'");
            out.model.add(std::move(ch));
        }
    }
    for (const auto& ch : spec.add_characteristics) {
        if (out.model.contains(ch.key))
            throw KeyCollision("enrich: added key '" + ch.key + "' collides");
        out.model.add(ch);
    }
    return out;
}

// A transformation that, so far, has never degraded the harmonic state of
// the (context, expression) it was applied under.
struct TransformationPattern {
    std::string context_id;
    std::string expression_id;
    TransformSpec spec;
    int support = 0;
    bool always_improved = false;
    int first_seen = 0;

    std::string id() const { return "p" + std::to_string(first_seen); }
};

// Generational memory of observed transformation patterns. State is a pure
// fold over recorded applications; ordering is (support desc, first_seen asc).
class PatternMemory {
public:
    const std::vector<TransformationPattern>& patterns() const { return patterns_; }

    const TransformationPattern* find(const std::string& context_id,
                                      const std::string& expression_id,
                                      const TransformSpec& spec) const {
        for (const auto& p : patterns_)
            if (p.context_id == context_id && p.expression_id == expression_id &&
                p.spec == spec)
                return &p;
        return nullptr;
    }

    friend PatternMemory record_application(PatternMemory mem, const std::string& context_id,
                                            const std::string& expression_id,
                                            const TransformSpec& spec, double hs_before,
                                            double hs_after);

private:
    void sort() {
        std::stable_sort(patterns_.begin(), patterns_.end(),
                         [](const TransformationPattern& a, const TransformationPattern& b) {
                             if (a.support != b.support) return a.support > b.support;
                             return a.first_seen < b.first_seen;
                         });
    }

    std::vector<TransformationPattern> patterns_;
    int next_seq_ = 1;
};

inline PatternMemory record_application(PatternMemory mem, const std::string& context_id,
                                        const std::string& expression_id,
                                        const TransformSpec& spec, double hs_before,
                                        double hs_after) {
    const bool improved = hs_improved(hs_before, hs_after);
    auto it = std::find_if(mem.patterns_.begin(), mem.patterns_.end(),
                           [&](const TransformationPattern& p) {
                               return p.context_id == context_id &&
                                      p.expression_id == expression_id && p.spec == spec;
                           });
    if (it == mem.patterns_.end()) {
        TransformationPattern p;
        p.context_id = context_id;
        p.expression_id = expression_id;
        p.spec = spec;
        p.support = 1;
        p.always_improved = improved;
        p.first_seen = mem.next_seq_++;
        mem.patterns_.push_back(std::move(p));
    } else {
        it->support += 1;
        it->always_improved = it->always_improved && improved;
    }
    mem.sort();
    return mem;
}

enum class ResponsePolicy { Reactive, Active };

inline const char* to_string(ResponsePolicy p) {
    return p == ResponsePolicy::Reactive ? "Reactive" : "Active";
}

struct StateTransition {
    double hs_before = 0.0;
    double hs_after = 0.0;
    std::string context_id;
    std::string expression_id;
};

struct SystemSnapshot {
    Expression expression;
    Context context;
    std::vector<Composition> compositions;
};

enum class ProposalKind { ApplyPattern, EnrichComposition, SimplifyExpression, ExchangeProbe };

inline const char* to_string(ProposalKind k) {
    switch (k) {
    case ProposalKind::ApplyPattern: return "ApplyPattern";
    case ProposalKind::EnrichComposition: return "EnrichComposition";
    case ProposalKind::SimplifyExpression: return "SimplifyExpression";
    default: return "ExchangeProbe";
    }
}

struct Proposal {
    ProposalKind kind = ProposalKind::ExchangeProbe;
    std::optional<TransformSpec> spec;
    std::string target_id; // composition or expression id
    double predicted_delta_hs = 0.0;
    int support = 0;
};

namespace detail {

inline double snapshot_state(const SystemSnapshot& s) {
    return system_state(s.compositions, s.expression, s.context);
}

// Predicted state after merging extra characteristics into one composition.
inline double state_with_enriched(const SystemSnapshot& s, const std::string& comp_id,
                                  const std::vector<Characteristic>& add) {
    std::vector<Composition> comps = s.compositions;
    for (auto& c : comps) {
        if (c.id != comp_id) continue;
        for (const auto& ch : add) {
            if (c.model.contains(ch.key)) return snapshot_state(s); // inapplicable
            c.model.add(ch);
        }
    }
    return system_state(comps, s.expression, s.context);
}

inline double state_with_simplified_composition(const SystemSnapshot& s,
                                                const std::string& comp_id,
                                                const TransformSpec& spec, bool& ok) {
    ok = false;
    std::vector<Composition> comps;
    for (const auto& c : s.compositions) {
        if (c.id != comp_id) {
            comps.push_back(c);
            continue;
        }
        try {
            for (auto& part : simplify(c, spec)) comps.push_back(std::move(part));
            ok = true;
        } catch (const Error&) {
            return 0.0;
        }
    }
    if (!ok) return 0.0;
    return system_state(comps, s.expression, s.context);
}

inline double state_with_simplified_expression(const SystemSnapshot& s,
                                               const TransformSpec& spec, bool& ok) {
    ok = false;
    Composition as_comp;
    as_comp.id = s.expression.id;
    as_comp.model = s.expression.model;
    try {
        auto parts = simplify(as_comp, spec);
        if (parts.size() != 1) return 0.0;
        Expression e;
        e.id = s.expression.id;
        e.model = parts.front().model;
        ok = true;
        return system_state(s.compositions, e, s.context);
    } catch (const Error&) {
        return 0.0;
    }
}

} // namespace detail

// Reactive systems propose repairs only after a state drop: enrich a
// composition toward the expression or simplify the expression toward what
// the compositions manifest. Active systems additionally replay their
// always-improved patterns for this (context, expression) and probe for
// exchange opportunities, drop or no drop. Ranked by predicted delta-Hs,
// then pattern support.
inline std::vector<Proposal> respond(const SystemSnapshot& snapshot,
                                     const StateTransition& transition, ResponsePolicy policy,
                                     const PatternMemory& memory) {
    std::vector<Proposal> proposals;
    const bool dropped = transition.hs_after < transition.hs_before - kHsTolerance;
    const double current = detail::snapshot_state(snapshot);

    if (dropped) {
        for (const auto& comp : snapshot.compositions) {
            std::vector<Characteristic> missing;
            for (const auto& ech : snapshot.expression.model)
                if (!comp.model.contains(ech.key)) missing.push_back(ech);
            if (missing.empty()) continue;
            Proposal p;
            p.kind = ProposalKind::EnrichComposition;
            p.spec = enrich_spec(missing);
            p.target_id = comp.id;
            p.predicted_delta_hs =
                detail::state_with_enriched(snapshot, comp.id, missing) - current;
            proposals.push_back(std::move(p));
        }
        std::vector<std::string> unmatched;
        for (const auto& ech : snapshot.expression.model) {
            bool manifested = std::any_of(
                snapshot.compositions.begin(), snapshot.compositions.end(),
                [&](const Composition& c) { return c.model.contains(ech.key); });
            if (!manifested) unmatched.push_back(ech.key);
        }
        if (!unmatched.empty() &&
            unmatched.size() < snapshot.expression.model.size()) {
            Proposal p;
            p.kind = ProposalKind::SimplifyExpression;
            p.spec = simplify_spec(unmatched);
            p.target_id = snapshot.expression.id;
            bool ok = false;
            p.predicted_delta_hs =
                detail::state_with_simplified_expression(snapshot, *p.spec, ok) - current;
            if (ok) proposals.push_back(std::move(p));
        }
    }

    if (policy == ResponsePolicy::Active) {
        for (const auto& pat : memory.patterns()) {
            if (!pat.always_improved) continue;
            if (pat.context_id != transition.context_id ||
                pat.expression_id != transition.expression_id)
                continue;
            Proposal p;
            p.kind = ProposalKind::ApplyPattern;
            p.spec = pat.spec;
            p.support = pat.support;
            double best = 0.0;
            std::string best_target;
            if (pat.spec.kind == TransformKind::Simplify) {
                for (const auto& comp : snapshot.compositions) {
                    bool ok = false;
                    const double st =
                        detail::state_with_simplified_composition(snapshot, comp.id, pat.spec, ok);
                    if (ok && (best_target.empty() || st - current > best)) {
                        best = st - current;
                        best_target = comp.id;
                    }
                }
            } else {
                for (const auto& comp : snapshot.compositions) {
                    const double st = detail::state_with_enriched(snapshot, comp.id,
                                                                  pat.spec.add_characteristics);
                    if (best_target.empty() || st - current > best) {
                        best = st - current;
                        best_target = comp.id;
                    }
                }
            }
            p.predicted_delta_hs = best_target.empty() ? 0.0 : best;
            p.target_id = best_target;
            proposals.push_back(std::move(p));
        }
        Proposal probe;
        probe.kind = ProposalKind::ExchangeProbe;
        proposals.push_back(std::move(probe));
    }

    std::stable_sort(proposals.begin(), proposals.end(), [](const Proposal& a, const Proposal& b) {
        if (a.predicted_delta_hs != b.predicted_delta_hs)
            return a.predicted_delta_hs > b.predicted_delta_hs;
        if (a.support != b.support) return a.support > b.support;
        if (a.kind != b.kind) return static_cast<int>(a.kind) < static_cast<int>(b.kind);
        return a.target_id < b.target_id;
    });
    return proposals;
}

} // namespace harmonia
