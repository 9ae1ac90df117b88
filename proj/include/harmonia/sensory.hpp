#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "harmonia/calculus.hpp"
#include "harmonia/core.hpp"

namespace harmonia {

class InvalidCapacity : public Error {
public:
    using Error::Error;
};

class StubNotFound : public Error {
public:
    using Error::Error;
};

// A remembered pattern; its stub is the partial front the context primes
// the sensory loop with.
struct MemoryPattern {
    std::string id;
    CharacteristicModel model;
    std::vector<std::string> stub_keys;
};

enum class ObservationSource { Real, Virtual };

inline const char* to_string(ObservationSource s) {
    return s == ObservationSource::Real ? "Real" : "Virtual";
}

struct Observation {
    long tick = 0;
    CharacteristicModel model;
    ObservationSource source = ObservationSource::Real;
};

struct CycleConfig {
    int c_sbj = 1;    // subject characteristics (observable patterns)
    double c_s = 1.0; // sensory capability
    double c_c = 1.0; // cognition capacity
    double tau = 0.8; // match threshold, mirrors Context::match_threshold
};

// f = ceil(c_sbj / RMS(c_s, c_c)). Converged capacities give f = 1; raising
// either capacity never raises f.
inline int optimum_frequency(const CycleConfig& cfg) {
    if (cfg.c_sbj < 1 || !(cfg.c_s > 0.0) || !(cfg.c_c > 0.0))
        throw InvalidCapacity("optimum_frequency: inputs must be positive");
    const double rms = std::sqrt((cfg.c_s * cfg.c_s + cfg.c_c * cfg.c_c) / 2.0);
    return static_cast<int>(std::ceil(static_cast<double>(cfg.c_sbj) / rms));
}

struct Stub {
    std::string pattern_id;
    CharacteristicModel model; // pattern model restricted to stub_keys
};

inline Stub stub_of(const MemoryPattern& p) {
    Stub s;
    s.pattern_id = p.id;
    for (const auto& key : p.stub_keys) {
        const Characteristic* c = p.model.find(key);
        if (c == nullptr)
            throw StubNotFound("stub_of: stub key '" + key + "' not in pattern '" + p.id + "'");
        s.model.add(*c);
    }
    return s;
}

// Stubs of the patterns whose keys intersect the context's scale keys,
// ordered by pattern id, capped by the cognition capacity.
inline std::vector<Stub> prime(const std::vector<MemoryPattern>& memory, const Context& ctx,
                               double cognition_capacity) {
    std::vector<const MemoryPattern*> eligible;
    for (const auto& p : memory) {
        const bool keyed = std::any_of(p.model.begin(), p.model.end(),
                                       [&](const Characteristic& c) {
                                           return ctx.scales.count(c.key) > 0;
                                       });
        if (keyed) eligible.push_back(&p);
    }
    std::sort(eligible.begin(), eligible.end(),
              [](const MemoryPattern* a, const MemoryPattern* b) { return a->id < b->id; });
    const auto cap = static_cast<std::size_t>(std::max(0.0, std::floor(cognition_capacity)));
    if (eligible.size() > cap) eligible.resize(cap);
    std::vector<Stub> out;
    out.reserve(eligible.size());
    for (const MemoryPattern* p : eligible) out.push_back(stub_of(*p));
    return out;
}

// Conformity of an observation to a stub: harmonic value of the observation
// restricted to the stub's keys, with the stub as the expression.
inline double stub_score(const Stub& stub, const Observation& obs, const Context& ctx) {
    Composition restricted;
    restricted.id = stub.pattern_id;
    for (const auto& c : obs.model)
        if (stub.model.contains(c.key)) restricted.model.add(c);
    Expression reference;
    reference.id = stub.pattern_id;
    reference.model = stub.model;
    return harmonic_value(restricted, reference, ctx).value;
}

inline std::optional<double> match_stub(const Stub& stub, const Observation& obs,
                                        const Context& ctx) {
    const double score = stub_score(stub, obs, ctx);
    if (score >= ctx.match_threshold) return score;
    return std::nullopt;
}

struct Expansion {
    MemoryPattern pattern;
    std::vector<std::string> reprime_ids; // patterns to prime next cycle, id order
};

// Recall the stub's full pattern and ask the next cycle to prime every
// pattern sharing a key with it (itself included).
inline Expansion expand(const Stub& stub, const std::vector<MemoryPattern>& memory) {
    const MemoryPattern* found = nullptr;
    for (const auto& p : memory)
        if (p.id == stub.pattern_id) {
            found = &p;
            break;
        }
    if (found == nullptr)
        throw StubNotFound("expand: no pattern '" + stub.pattern_id + "' in memory");
    Expansion e;
    e.pattern = *found;
    for (const auto& p : memory) {
        const bool shares = std::any_of(p.model.begin(), p.model.end(),
                                        [&](const Characteristic& c) {
                                            return found->model.contains(c.key);
                                        });
        if (shares) e.reprime_ids.push_back(p.id);
    }
    std::sort(e.reprime_ids.begin(), e.reprime_ids.end());
    return e;
}

// Imagined observation: the pattern replayed as if the senses produced it.
// Downstream matching treats it like any other observation; only the trace
// keeps the Virtual tag.
inline Observation virtual_observe(const MemoryPattern& pattern, long tick) {
    Observation o;
    o.tick = tick;
    o.model = pattern.model;
    o.source = ObservationSource::Virtual;
    return o;
}

} // namespace harmonia
