#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace harmonia {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class KeyMismatch : public Error {
public:
    using Error::Error;
};

class InvalidValue : public Error {
public:
    using Error::Error;
};

enum class Kind { Intrinsic, Referential };
enum class Role { Activator, Inhibitor, Facilitator };

inline const char* to_string(Kind k) {
    return k == Kind::Intrinsic ? "Intrinsic" : "Referential";
}

inline const char* to_string(Role r) {
    switch (r) {
    case Role::Activator: return "Activator";
    case Role::Inhibitor: return "Inhibitor";
    default: return "Facilitator";
    }
}

// A keyed scalar trait. Inhibitors and facilitators act on the characteristic
// named by role_target; strength is the suppression/amplification weight.
struct Characteristic {
    std::string key;
    double value = 0.0;
    Kind kind = Kind::Intrinsic;
    Role role = Role::Activator;
    std::optional<std::string> role_target;
    double strength = 0.0;

    friend bool operator==(const Characteristic&, const Characteristic&) = default;
};

inline Characteristic make_characteristic(std::string key, double value) {
    Characteristic c;
    c.key = std::move(key);
    c.value = value;
    return c;
}

// Ordered list of characteristics with unique keys. Insertion order is kept
// so every computation over a model is deterministic.
class CharacteristicModel {
public:
    CharacteristicModel() = default;
    CharacteristicModel(std::initializer_list<Characteristic> cs) {
        for (auto& c : cs) add(c);
    }

    void add(Characteristic c) {
        if (find(c.key) != nullptr)
            throw Error("duplicate characteristic key: " + c.key);
        entries_.push_back(std::move(c));
    }

    const Characteristic* find(std::string_view key) const {
        for (const auto& c : entries_)
            if (c.key == key) return &c;
        return nullptr;
    }

    bool contains(std::string_view key) const { return find(key) != nullptr; }

    std::size_t size() const { return entries_.size(); }
    bool empty() const { return entries_.empty(); }

    auto begin() const { return entries_.begin(); }
    auto end() const { return entries_.end(); }

    const std::vector<Characteristic>& entries() const { return entries_; }

    friend bool operator==(const CharacteristicModel&, const CharacteristicModel&) = default;

private:
    std::vector<Characteristic> entries_;
};

// Bare numeric tuples get positional keys c1..cn.
inline CharacteristicModel positional_model(const std::vector<double>& values) {
    CharacteristicModel m;
    for (std::size_t i = 0; i < values.size(); ++i)
        m.add(make_characteristic("c" + std::to_string(i + 1), values[i]));
    return m;
}

// Situational constraints: per-key comparability scales, how many compositions
// a selection keeps, and the stub match threshold.
struct Context {
    std::string id;
    double default_scale = 1.0;
    std::map<std::string, double> scales;
    int selection_size = 1;
    double match_threshold = 0.8;

    double scale_for(std::string_view key) const {
        auto it = scales.find(std::string(key));
        return it != scales.end() ? it->second : default_scale;
    }
};

struct Expression {
    std::string id;
    CharacteristicModel model;
};

struct Composition {
    std::string id;
    CharacteristicModel model;
    std::optional<std::string> owner;
};

struct Environment {
    std::string id;
    std::vector<Composition> pool;
    std::map<std::string, double> resources;

    bool contains(std::string_view composition_id) const {
        return std::any_of(pool.begin(), pool.end(),
                           [&](const Composition& c) { return c.id == composition_id; });
    }
};

// Angular comparison of one observed characteristic against a reference.
// l_obs = r * theta; on the unit circle (r = 1) it coincides with l_t.
struct Comparison {
    double theta = 0.0;
    double mu = 0.0;
    double r = 1.0;
    double l_obs = 0.0;
    double l_t = 0.0;
};

inline Comparison characteristic_theta(const Characteristic& observed,
                                       const Characteristic& reference,
                                       const Context& ctx) {
    if (observed.key != reference.key)
        throw KeyMismatch("characteristic_theta: key mismatch: '" + observed.key +
                          "' vs '" + reference.key + "'");
    if (!std::isfinite(observed.value) || !std::isfinite(reference.value))
        throw InvalidValue("characteristic_theta: non-finite characteristic value");
    const double scale = ctx.scale_for(observed.key);
    if (!(scale > 0.0) || !std::isfinite(scale))
        throw InvalidValue("characteristic_theta: non-positive scale for key '" +
                           observed.key + "'");
    const double delta = std::abs(observed.value - reference.value);
    Comparison cmp;
    cmp.theta = std::numbers::pi * std::min(delta / scale, 1.0);
    cmp.mu = delta / std::numbers::pi;
    cmp.r = 1.0;
    cmp.l_obs = cmp.r * cmp.theta;
    cmp.l_t = cmp.theta;
    return cmp;
}

enum class CompositionClass { Active, Passive, Target };

inline const char* to_string(CompositionClass c) {
    switch (c) {
    case CompositionClass::Active: return "Active";
    case CompositionClass::Passive: return "Passive";
    default: return "Target";
    }
}

struct Diagnostic {
    std::string path;
    std::string message;
};

inline void validate_into(const Characteristic& c, const std::string& path,
                          std::vector<Diagnostic>& out) {
    if (c.key.empty())
        out.push_back({path, "characteristic key is empty"});
    if (!std::isfinite(c.value))
        out.push_back({path, "characteristic value is not finite"});
    const bool needs_target = c.role == Role::Inhibitor || c.role == Role::Facilitator;
    if (needs_target && !c.role_target.has_value())
        out.push_back({path, "role requires role_target"});
    if (!needs_target && c.role_target.has_value())
        out.push_back({path, "role_target set on an activator"});
    if (!(c.strength >= 0.0) || !std::isfinite(c.strength))
        out.push_back({path, "strength must be finite and >= 0"});
}

inline void validate_into(const CharacteristicModel& m, const std::string& path,
                          std::vector<Diagnostic>& out) {
    std::vector<std::string_view> seen;
    for (std::size_t i = 0; i < m.entries().size(); ++i) {
        const auto& c = m.entries()[i];
        const std::string cpath = path + "[" + std::to_string(i) + "]";
        validate_into(c, cpath, out);
        if (std::find(seen.begin(), seen.end(), c.key) != seen.end())
            out.push_back({cpath, "duplicate characteristic key '" + c.key + "'"});
        seen.push_back(c.key);
    }
}

inline void validate_into(const Context& ctx, const std::string& path,
                          std::vector<Diagnostic>& out) {
    if (ctx.id.empty())
        out.push_back({path, "context id is empty"});
    if (!(ctx.default_scale > 0.0))
        out.push_back({path + ".default_scale", "scale must be > 0"});
    for (const auto& [key, scale] : ctx.scales)
        if (!(scale > 0.0))
            out.push_back({path + ".scales." + key, "scale must be > 0"});
    if (ctx.selection_size < 1)
        out.push_back({path + ".selection_size", "selection_size must be >= 1"});
    if (!(ctx.match_threshold > 0.0) || ctx.match_threshold > 1.0)
        out.push_back({path + ".match_threshold", "match_threshold must be in (0, 1]"});
}

inline void validate_into(const Expression& e, const std::string& path,
                          std::vector<Diagnostic>& out) {
    if (e.id.empty())
        out.push_back({path, "expression id is empty"});
    if (e.model.empty())
        out.push_back({path + ".model", "expression model is empty"});
    validate_into(e.model, path + ".model", out);
}

inline void validate_into(const Composition& c, const std::string& path,
                          std::vector<Diagnostic>& out) {
    if (c.id.empty())
        out.push_back({path, "composition id is empty"});
    // An empty model is allowed: placeholder target compositions carry none.
    validate_into(c.model, path + ".model", out);
}

inline void validate_into(const Environment& env, const std::string& path,
                          std::vector<Diagnostic>& out) {
    if (env.id.empty())
        out.push_back({path, "environment id is empty"});
    std::vector<std::string_view> ids;
    for (std::size_t i = 0; i < env.pool.size(); ++i) {
        const auto& c = env.pool[i];
        const std::string cpath = path + ".pool[" + std::to_string(i) + "]";
        if (std::find(ids.begin(), ids.end(), c.id) != ids.end())
            out.push_back({cpath, "duplicate composition id '" + c.id + "'"});
        ids.push_back(c.id);
        validate_into(c, cpath, out);
    }
    for (const auto& [key, amount] : env.resources)
        if (!(amount >= 0.0))
            out.push_back({path + ".resources." + key, "resource amount must be >= 0"});
}

template <typename T>
std::vector<Diagnostic> validate(const T& value, const std::string& path = "$") {
    std::vector<Diagnostic> out;
    validate_into(value, path, out);
    return out;
}

} // namespace harmonia
