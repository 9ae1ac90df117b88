#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "harmonia/core.hpp"

namespace harmonia {

class EmptyParticipants : public Error {
public:
    using Error::Error;
};

class EmptySelection : public Error {
public:
    using Error::Error;
};

class EmptyInterval : public Error {
public:
    using Error::Error;
};

struct HarmonicValue {
    double value = 0.0;
    int matched = 0; // key-matched (composition, expression) pairs
    int n = 0;       // characteristics in the composition model
};

struct Significance {
    double value = 0.0;
    int n_conforming = 0;
    int m = 0; // total characteristics across participating compositions
};

// Per-pair cosine contribution before and after role adjustment.
struct PairContribution {
    std::string key;
    double theta = 0.0;
    double raw = 0.0;
    double adjusted = 0.0;
};

// Key-matched contributions of a composition against an expression.
// Facilitators amplify their target's positive contribution by (1 + strength);
// inhibitors scale their target's contribution by max(0, 1 - strength).
// Modifiers apply in model order.
inline std::vector<PairContribution> pair_contributions(const Composition& c,
                                                        const Expression& e,
                                                        const Context& ctx) {
    std::vector<PairContribution> pairs;
    pairs.reserve(c.model.size());
    for (const auto& ch : c.model) {
        const Characteristic* ref = e.model.find(ch.key);
        if (ref == nullptr) continue;
        const Comparison cmp = characteristic_theta(ch, *ref, ctx);
        const double raw = std::cos(cmp.theta);
        pairs.push_back({ch.key, cmp.theta, raw, raw});
    }
    for (const auto& ch : c.model) {
        if (ch.role == Role::Activator || !ch.role_target.has_value()) continue;
        for (auto& p : pairs) {
            if (p.key != *ch.role_target) continue;
            if (ch.role == Role::Facilitator) {
                if (p.adjusted > 0.0) p.adjusted *= 1.0 + ch.strength;
            } else {
                p.adjusted *= std::max(0.0, 1.0 - ch.strength);
            }
        }
    }
    return pairs;
}

inline HarmonicValue harmonic_value(const Composition& c, const Expression& e,
                                    const Context& ctx) {
    HarmonicValue hv;
    hv.n = static_cast<int>(c.model.size());
    if (hv.n == 0) return hv;
    const auto pairs = pair_contributions(c, e, ctx);
    hv.matched = static_cast<int>(pairs.size());
    double sum = 0.0;
    for (const auto& p : pairs) sum += p.adjusted;
    hv.value = std::clamp(sum / hv.n, -1.0, 1.0);
    return hv;
}

inline Significance harmonic_significance(const Composition& c, const Expression& e,
                                          const Context& ctx,
                                          const std::vector<Composition>& participants) {
    int m = 0;
    for (const auto& p : participants) m += static_cast<int>(p.model.size());
    if (m == 0)
        throw EmptyParticipants("harmonic_significance: participants carry no characteristics");
    const auto pairs = pair_contributions(c, e, ctx);
    int n_conf = 0;
    for (const auto& p : pairs)
        if (p.adjusted > 0.0) ++n_conf;
    Significance s;
    s.n_conforming = n_conf;
    s.m = m;
    s.value = harmonic_value(c, e, ctx).value * (static_cast<double>(n_conf) / m);
    return s;
}

// Candidates ordered by (significance desc, harmonic value desc, id asc);
// the first selection_size survive. Total and deterministic.
inline std::vector<Composition> select_compositions(const std::vector<Composition>& candidates,
                                                    const Expression& e, const Context& ctx) {
    struct Row {
        double sig;
        double hv;
        const Composition* comp;
    };
    int m = 0;
    for (const auto& c : candidates) m += static_cast<int>(c.model.size());
    std::vector<Row> rows;
    rows.reserve(candidates.size());
    for (const auto& c : candidates) {
        const HarmonicValue hv = harmonic_value(c, e, ctx);
        double sig = 0.0;
        if (m > 0) sig = harmonic_significance(c, e, ctx, candidates).value;
        rows.push_back({sig, hv.value, &c});
    }
    std::sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) {
        if (a.sig != b.sig) return a.sig > b.sig;
        if (a.hv != b.hv) return a.hv > b.hv;
        return a.comp->id < b.comp->id;
    });
    const std::size_t k = std::min<std::size_t>(rows.size(),
                                                static_cast<std::size_t>(ctx.selection_size));
    std::vector<Composition> out;
    out.reserve(k);
    for (std::size_t i = 0; i < k; ++i) out.push_back(*rows[i].comp);
    return out;
}

inline double harmonic_state(const std::vector<double>& selected_hvs) {
    if (selected_hvs.empty())
        throw EmptySelection("harmonic_state: empty selection");
    double sum_sq = 0.0;
    for (double x : selected_hvs) sum_sq += x * x;
    return std::sqrt(sum_sq / static_cast<double>(selected_hvs.size()));
}

inline double harmonic_state(const std::vector<HarmonicValue>& selected) {
    std::vector<double> xs;
    xs.reserve(selected.size());
    for (const auto& hv : selected) xs.push_back(hv.value);
    return harmonic_state(xs);
}

// Selection followed by RMS; 0 for a system holding nothing.
inline double system_state(const std::vector<Composition>& owned, const Expression& e,
                           const Context& ctx) {
    if (owned.empty()) return 0.0;
    const auto selected = select_compositions(owned, e, ctx);
    std::vector<double> hvs;
    hvs.reserve(selected.size());
    for (const auto& c : selected) hvs.push_back(harmonic_value(c, e, ctx).value);
    return harmonic_state(hvs);
}

// Per-tick record of all participating compositions' harmonic values.
class StateHistory {
public:
    struct Sample {
        long tick = 0;
        std::vector<double> composition_hvs;
        double state = 0.0;
    };

    void add_sample(long tick, std::vector<double> composition_hvs, double state) {
        if (!samples_.empty() && tick <= samples_.back().tick)
            throw Error("StateHistory: ticks must be strictly increasing");
        samples_.push_back({tick, std::move(composition_hvs), state});
    }

    const std::vector<Sample>& samples() const { return samples_; }

private:
    std::vector<Sample> samples_;
};

// Mean over ticks in [a, b] of the per-tick mean composition HV.
inline double harmonic_status(const StateHistory& h, long a, long b) {
    if (a > b)
        throw EmptyInterval("harmonic_status: a > b");
    double total = 0.0;
    long count = 0;
    for (const auto& s : h.samples()) {
        if (s.tick < a || s.tick > b) continue;
        double tick_mean = 0.0;
        if (!s.composition_hvs.empty()) {
            for (double x : s.composition_hvs) tick_mean += x;
            tick_mean /= static_cast<double>(s.composition_hvs.size());
        }
        total += tick_mean;
        ++count;
    }
    if (count == 0)
        throw EmptyInterval("harmonic_status: no samples in [a, b]");
    return total / static_cast<double>(count);
}

inline CompositionClass classify_composition(const Composition& c, const Environment& env,
                                             const Expression& e, const Context& ctx) {
    if (!env.contains(c.id)) return CompositionClass::Target;
    return harmonic_value(c, e, ctx).value > 0.0 ? CompositionClass::Active
                                                 : CompositionClass::Passive;
}

} // namespace harmonia
