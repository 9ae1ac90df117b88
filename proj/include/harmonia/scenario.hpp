#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "harmonia/core.hpp"
#include "harmonia/sensory.hpp"
#include "harmonia/transform.hpp"

namespace harmonia {

class ParseError : public Error {
public:
    using Error::Error;
};

class ValidationError : public Error {
public:
    using Error::Error;
};

struct ScenarioSystem {
    std::string id;
    ResponsePolicy policy = ResponsePolicy::Reactive;
    std::string context_id;
    Expression expression;
    std::vector<Composition> compositions;
    std::optional<CycleConfig> sensory;
    std::vector<MemoryPattern> memory;
};

struct ExchangeConfig {
    bool enabled = false;
    int max_depth = 6;
    std::size_t cycle_max_len = 6;
    bool detect_cycles = false;
    std::string context_id;
};

struct ScenarioObservation {
    long tick = 0;
    std::string system_id;
    ObservationSource source = ObservationSource::Real;
    CharacteristicModel model;
    std::string virtual_pattern; // when set, model comes from this memory pattern
};

struct RandomObservationStream {
    std::string system_id;
    std::vector<std::string> keys;
    int count = 0;
    long start_tick = 0;
    double min_value = 0.0;
    double max_value = 1.0;
};

struct Scenario {
    int version = 1;
    std::uint64_t seed = 0;
    long ticks = 0;
    std::vector<Context> contexts;
    Environment environment;
    std::vector<ScenarioSystem> systems;
    ExchangeConfig exchange;
    std::vector<ScenarioObservation> observations;
    std::string observations_file; // optional JSONL side file, one observation per line
    std::optional<RandomObservationStream> random_observations;

    const Context* find_context(const std::string& id) const {
        for (const auto& c : contexts)
            if (c.id == id) return &c;
        return nullptr;
    }

    const ScenarioSystem* find_system(const std::string& id) const {
        for (const auto& s : systems)
            if (s.id == id) return &s;
        return nullptr;
    }
};

namespace detail {

using nlohmann::json;

inline Characteristic parse_characteristic(const json& j, std::size_t position) {
    if (j.is_number())
        return make_characteristic("c" + std::to_string(position + 1), j.get<double>());
    if (!j.is_object())
        throw ParseError("characteristic must be a number or an object");
    Characteristic c;
    c.key = j.at("key").get<std::string>();
    c.value = j.at("value").get<double>();
    if (j.contains("kind")) {
        const auto k = j["kind"].get<std::string>();
        if (k == "Intrinsic") c.kind = Kind::Intrinsic;
        else if (k == "Referential") c.kind = Kind::Referential;
        else throw ParseError("unknown characteristic kind '" + k + "'");
    }
    if (j.contains("role")) {
        const auto r = j["role"].get<std::string>();
        if (r == "Activator") c.role = Role::Activator;
        else if (r == "Inhibitor") c.role = Role::Inhibitor;
        else if (r == "Facilitator") c.role = Role::Facilitator;
        else throw ParseError("unknown characteristic role '" + r + "'");
    }
    if (j.contains("role_target")) c.role_target = j["role_target"].get<std::string>();
    if (j.contains("strength")) c.strength = j["strength"].get<double>();
    return c;
}

inline CharacteristicModel parse_model(const json& j) {
    if (!j.is_array())
        throw ParseError("model must be an array");
    CharacteristicModel m;
    for (std::size_t i = 0; i < j.size(); ++i) m.add(parse_characteristic(j[i], i));
    return m;
}

inline json model_to_json(const CharacteristicModel& m) {
    json arr = json::array();
    for (const auto& c : m) {
        json jc{{"key", c.key}, {"value", c.value}};
        if (c.kind != Kind::Intrinsic) jc["kind"] = to_string(c.kind);
        if (c.role != Role::Activator) jc["role"] = to_string(c.role);
        if (c.role_target) jc["role_target"] = *c.role_target;
        if (c.strength != 0.0) jc["strength"] = c.strength;
        arr.push_back(std::move(jc));
    }
    return arr;
}

inline Composition parse_composition(const json& j) {
    Composition c;
    c.id = j.at("id").get<std::string>();
    if (j.contains("model")) c.model = parse_model(j["model"]);
    if (j.contains("owner")) c.owner = j["owner"].get<std::string>();
    return c;
}

inline ScenarioObservation parse_observation(const json& jo) {
    ScenarioObservation o;
    o.tick = jo.at("tick").get<long>();
    o.system_id = jo.at("system").get<std::string>();
    if (jo.contains("virtual_pattern")) {
        o.virtual_pattern = jo["virtual_pattern"].get<std::string>();
        o.source = ObservationSource::Virtual;
    } else {
        o.model = parse_model(jo.at("model"));
        const auto src = jo.value("source", std::string("Real"));
        if (src == "Real") o.source = ObservationSource::Real;
        else if (src == "Virtual") o.source = ObservationSource::Virtual;
        else throw ParseError("unknown observation source '" + src + "'");
    }
    return o;
}

inline Scenario parse_scenario(const json& j) {
    Scenario s;
    s.version = j.at("version").get<int>();
    if (j.contains("seed")) s.seed = j["seed"].get<std::uint64_t>();
    s.ticks = j.at("ticks").get<long>();

    for (const auto& jc : j.value("contexts", json::array())) {
        Context c;
        c.id = jc.at("id").get<std::string>();
        c.default_scale = jc.value("default_scale", 1.0);
        if (jc.contains("scales"))
            for (auto it = jc["scales"].begin(); it != jc["scales"].end(); ++it)
                c.scales[it.key()] = it.value().get<double>();
        c.selection_size = jc.value("selection_size", 1);
        c.match_threshold = jc.value("match_threshold", 0.8);
        s.contexts.push_back(std::move(c));
    }

    if (j.contains("environment")) {
        const auto& je = j["environment"];
        s.environment.id = je.value("id", "env");
        if (je.contains("resources"))
            for (auto it = je["resources"].begin(); it != je["resources"].end(); ++it)
                s.environment.resources[it.key()] = it.value().get<double>();
        for (const auto& jc : je.value("compositions", json::array()))
            s.environment.pool.push_back(parse_composition(jc));
    } else {
        s.environment.id = "env";
    }

    for (const auto& js : j.value("systems", json::array())) {
        ScenarioSystem sys;
        sys.id = js.at("id").get<std::string>();
        const auto policy = js.value("policy", std::string("Reactive"));
        if (policy == "Reactive") sys.policy = ResponsePolicy::Reactive;
        else if (policy == "Active") sys.policy = ResponsePolicy::Active;
        else throw ParseError("unknown policy '" + policy + "' for system '" + sys.id + "'");
        sys.context_id = js.at("context").get<std::string>();
        sys.expression.id = js.at("expression").at("id").get<std::string>();
        sys.expression.model = parse_model(js.at("expression").at("model"));
        for (const auto& jc : js.value("compositions", json::array())) {
            Composition c = parse_composition(jc);
            c.owner = sys.id;
            sys.compositions.push_back(std::move(c));
        }
        if (js.contains("sensory")) {
            CycleConfig cfg;
            cfg.c_sbj = js["sensory"].at("c_sbj").get<int>();
            cfg.c_s = js["sensory"].at("c_s").get<double>();
            cfg.c_c = js["sensory"].at("c_c").get<double>();
            sys.sensory = cfg;
        }
        for (const auto& jp : js.value("memory", json::array())) {
            MemoryPattern p;
            p.id = jp.at("id").get<std::string>();
            p.model = parse_model(jp.at("model"));
            for (const auto& k : jp.at("stub_keys")) p.stub_keys.push_back(k.get<std::string>());
            sys.memory.push_back(std::move(p));
        }
        s.systems.push_back(std::move(sys));
    }

    if (j.contains("exchange")) {
        const auto& je = j["exchange"];
        s.exchange.enabled = je.value("enabled", true);
        s.exchange.max_depth = je.value("max_depth", 6);
        s.exchange.cycle_max_len = je.value("cycle_max_len", std::size_t{6});
        s.exchange.detect_cycles = je.value("detect_cycles", false);
        s.exchange.context_id = je.value("context", std::string());
    }

    for (const auto& jo : j.value("observations", json::array()))
        s.observations.push_back(parse_observation(jo));
    s.observations_file = j.value("observations_file", std::string());

    if (j.contains("random_observations")) {
        const auto& jr = j["random_observations"];
        RandomObservationStream r;
        r.system_id = jr.at("system").get<std::string>();
        for (const auto& k : jr.at("keys")) r.keys.push_back(k.get<std::string>());
        r.count = jr.at("count").get<int>();
        r.start_tick = jr.value("start_tick", 0L);
        r.min_value = jr.value("min", 0.0);
        r.max_value = jr.value("max", 1.0);
        s.random_observations = std::move(r);
    }
    return s;
}

} // namespace detail

// Structural and referential checks; empty result means the scenario is sound.
inline std::vector<Diagnostic> validate(const Scenario& s) {
    std::vector<Diagnostic> out;
    if (s.version != 1)
        out.push_back({"$.version", "unsupported schema version"});
    if (s.ticks < 0)
        out.push_back({"$.ticks", "ticks must be >= 0"});

    std::vector<std::string> context_ids;
    for (std::size_t i = 0; i < s.contexts.size(); ++i) {
        const auto& c = s.contexts[i];
        const std::string path = "$.contexts[" + std::to_string(i) + "]";
        if (std::find(context_ids.begin(), context_ids.end(), c.id) != context_ids.end())
            out.push_back({path, "duplicate context id '" + c.id + "'"});
        context_ids.push_back(c.id);
        validate_into(c, path, out);
    }

    std::vector<std::string> comp_ids;
    auto check_comp_id = [&](const Composition& c, const std::string& path) {
        if (std::find(comp_ids.begin(), comp_ids.end(), c.id) != comp_ids.end())
            out.push_back({path, "duplicate composition id '" + c.id + "'"});
        comp_ids.push_back(c.id);
    };

    for (std::size_t i = 0; i < s.environment.pool.size(); ++i) {
        const std::string path = "$.environment.compositions[" + std::to_string(i) + "]";
        check_comp_id(s.environment.pool[i], path);
        validate_into(s.environment.pool[i], path, out);
    }

    std::vector<std::string> system_ids;
    for (std::size_t i = 0; i < s.systems.size(); ++i) {
        const auto& sys = s.systems[i];
        const std::string path = "$.systems[" + std::to_string(i) + "]";
        if (std::find(system_ids.begin(), system_ids.end(), sys.id) != system_ids.end())
            out.push_back({path, "duplicate system id '" + sys.id + "'"});
        system_ids.push_back(sys.id);
        if (s.find_context(sys.context_id) == nullptr)
            out.push_back({path + ".context", "unknown context '" + sys.context_id + "'"});
        validate_into(sys.expression, path + ".expression", out);
        for (std::size_t k = 0; k < sys.compositions.size(); ++k) {
            const std::string cpath = path + ".compositions[" + std::to_string(k) + "]";
            check_comp_id(sys.compositions[k], cpath);
            validate_into(sys.compositions[k], cpath, out);
        }
        if (sys.sensory) {
            const auto& cfg = *sys.sensory;
            if (cfg.c_sbj < 1 || !(cfg.c_s > 0.0) || !(cfg.c_c > 0.0))
                out.push_back({path + ".sensory", "sensory capacities must be positive"});
        }
        std::vector<std::string> pattern_ids;
        for (std::size_t k = 0; k < sys.memory.size(); ++k) {
            const auto& p = sys.memory[k];
            const std::string ppath = path + ".memory[" + std::to_string(k) + "]";
            if (std::find(pattern_ids.begin(), pattern_ids.end(), p.id) != pattern_ids.end())
                out.push_back({ppath, "duplicate pattern id '" + p.id + "'"});
            pattern_ids.push_back(p.id);
            validate_into(p.model, ppath + ".model", out);
            if (p.stub_keys.empty())
                out.push_back({ppath + ".stub_keys", "stub must not be empty"});
            for (const auto& key : p.stub_keys)
                if (!p.model.contains(key))
                    out.push_back({ppath + ".stub_keys", "stub key '" + key +
                                                             "' not in pattern model"});
        }
    }

    if (s.exchange.enabled) {
        if (s.exchange.max_depth < 1)
            out.push_back({"$.exchange.max_depth", "max_depth must be >= 1"});
        if (!s.exchange.context_id.empty() && s.find_context(s.exchange.context_id) == nullptr)
            out.push_back({"$.exchange.context",
                           "unknown context '" + s.exchange.context_id + "'"});
    }

    for (std::size_t i = 0; i < s.observations.size(); ++i) {
        const auto& o = s.observations[i];
        const std::string path = "$.observations[" + std::to_string(i) + "]";
        const ScenarioSystem* sys = s.find_system(o.system_id);
        if (sys == nullptr) {
            out.push_back({path + ".system", "unknown system '" + o.system_id + "'"});
            continue;
        }
        if (o.tick < 0 || o.tick >= std::max(s.ticks, 1L))
            out.push_back({path + ".tick", "tick outside the run"});
        if (!o.virtual_pattern.empty()) {
            const bool known = std::any_of(sys->memory.begin(), sys->memory.end(),
                                           [&](const MemoryPattern& p) {
                                               return p.id == o.virtual_pattern;
                                           });
            if (!known)
                out.push_back({path + ".virtual_pattern",
                               "unknown pattern '" + o.virtual_pattern + "'"});
        } else {
            validate_into(o.model, path + ".model", out);
        }
    }

    if (s.random_observations) {
        if (s.find_system(s.random_observations->system_id) == nullptr)
            out.push_back({"$.random_observations.system",
                           "unknown system '" + s.random_observations->system_id + "'"});
        if (s.random_observations->count < 0)
            out.push_back({"$.random_observations.count", "count must be >= 0"});
    }
    return out;
}

inline Scenario load_scenario_text(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("scenario parse failed: ") + e.what());
    }
    try {
        return detail::parse_scenario(j);
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("scenario fields invalid: ") + e.what());
    }
}

// One observation per line, same shape as inline scenario observations.
inline std::vector<ScenarioObservation> load_observations_file(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw ParseError("cannot open observations file: " + path);
    std::vector<ScenarioObservation> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        try {
            out.push_back(detail::parse_observation(nlohmann::json::parse(line)));
        } catch (const nlohmann::json::exception& e) {
            throw ParseError("observations file " + path + " line " +
                             std::to_string(lineno) + ": " + e.what());
        }
    }
    return out;
}

inline Scenario load_scenario(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw ParseError("cannot open scenario file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    Scenario s = load_scenario_text(buf.str());
    if (!s.observations_file.empty()) {
        std::filesystem::path obs(s.observations_file);
        if (obs.is_relative()) obs = std::filesystem::path(path).parent_path() / obs;
        for (auto& o : load_observations_file(obs.string()))
            s.observations.push_back(std::move(o));
    }
    const auto diagnostics = validate(s);
    if (!diagnostics.empty()) {
        std::string msg = "scenario validation failed:";
        for (const auto& d : diagnostics) msg += "\n  " + d.path + ": " + d.message;
        throw ValidationError(msg);
    }
    return s;
}

} // namespace harmonia
