#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "harmonia/calculus.hpp"
#include "harmonia/engine.hpp"
#include "harmonia/helix.hpp"
#include "harmonia/scenario.hpp"
#include "harmonia/sensory.hpp"

namespace {

int run_validate(const std::string& path) {
    try {
        harmonia::Scenario s = harmonia::load_scenario(path);
        std::cout << "ok: " << s.systems.size() << " systems, " << s.ticks << " ticks\n";
        return 0;
    } catch (const harmonia::Error& e) {
        std::cerr << e.what() << "\n";
        return 1;
    }
}

std::string default_trace_path(const std::string& scenario_path) {
    const std::filesystem::path p(scenario_path);
    std::string stem = p.stem().string();
    if (stem.empty()) stem = "run";
    const char* dir = std::getenv("HARMONIA_TRACE_DIR");
    const std::filesystem::path base = dir != nullptr ? std::filesystem::path(dir)
                                                      : std::filesystem::path(".");
    return (base / (stem + ".trace.jsonl")).string();
}

int run_run(const std::string& path, std::string trace_path, long ticks_override,
            long seed_override) {
    try {
        harmonia::Scenario s = harmonia::load_scenario(path);
        if (ticks_override >= 0) s.ticks = ticks_override;
        if (seed_override >= 0) s.seed = static_cast<std::uint64_t>(seed_override);
        if (trace_path.empty()) trace_path = default_trace_path(path);
        std::ofstream out(trace_path);
        if (!out) {
            std::cerr << "cannot open trace output: " << trace_path << "\n";
            return 1;
        }
        harmonia::Engine engine(std::move(s));
        const auto summary = engine.run(out);
        std::cout << summary.dump(2) << "\n";
        std::cout << "trace: " << trace_path << "\n";
        return 0;
    } catch (const harmonia::Error& e) {
        std::cerr << e.what() << "\n";
        return 1;
    }
}

int run_hv(const std::string& path) {
    try {
        harmonia::Scenario s = harmonia::load_scenario(path);
        for (const auto& sys : s.systems) {
            const harmonia::Context& ctx = *s.find_context(sys.context_id);
            std::cout << "system " << sys.id << "\n";
            for (const auto& comp : sys.compositions) {
                const auto hv = harmonia::harmonic_value(comp, sys.expression, ctx);
                const auto sig = harmonia::harmonic_significance(comp, sys.expression, ctx,
                                                                 sys.compositions);
                std::cout << "  " << comp.id << "  hv=" << hv.value
                          << "  significance=" << sig.value << "  matched=" << hv.matched
                          << "/" << hv.n << "\n";
            }
            const auto selected =
                harmonia::select_compositions(sys.compositions, sys.expression, ctx);
            std::cout << "  selected:";
            for (const auto& c : selected) std::cout << " " << c.id;
            std::cout << "\n  state=" << harmonia::system_state(sys.compositions,
                                                                sys.expression, ctx)
                      << "\n";
        }
        return 0;
    } catch (const harmonia::Error& e) {
        std::cerr << e.what() << "\n";
        return 1;
    }
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"harmonic system calculus and scenario simulator"};
    app.require_subcommand(1);

    std::string scenario_path;
    auto* validate = app.add_subcommand("validate", "check a scenario file");
    validate->add_option("file", scenario_path, "scenario file")->required();

    std::string run_path, trace_path;
    long ticks_override = -1, seed_override = -1;
    auto* run = app.add_subcommand("run", "run a scenario and write a trace");
    run->add_option("file", run_path, "scenario file")->required();
    run->add_option("--trace", trace_path, "trace output path (JSON lines)");
    run->add_option("--ticks", ticks_override, "override tick count");
    run->add_option("--seed", seed_override, "override seed");

    auto* helix = app.add_subcommand("helix", "integer arithmetic on the double helix");
    helix->require_subcommand(1);
    std::int64_t hx = 0, hy = 0;
    for (const std::string op : {"add", "sub", "mul"}) {
        auto* sub = helix->add_subcommand(op);
        sub->add_option("x", hx)->required();
        sub->add_option("y", hy)->required();
    }

    auto* eval = app.add_subcommand("eval", "boolean expansion over predicate scores");
    eval->require_subcommand(1);
    std::vector<double> scores;
    double inject = 0.0;
    auto* eval_and_cmd = eval->add_subcommand("and");
    eval_and_cmd->add_option("--scores", scores, "operand scores in [-1, 1]")
        ->required()
        ->expected(-1);
    eval_and_cmd->add_option("--inject", inject, "injected activation");
    auto* eval_or_cmd = eval->add_subcommand("or");
    eval_or_cmd->add_option("--scores", scores, "operand scores in [-1, 1]")
        ->required()
        ->expected(-1);

    auto* freq = app.add_subcommand("freq", "optimum sensory cycle frequency");
    int sbj = 0;
    double cs = 0.0, cc = 0.0;
    freq->add_option("--sbj", sbj, "subject characteristics")->required();
    freq->add_option("--s", cs, "sensory capability")->required();
    freq->add_option("--c", cc, "cognition capacity")->required();

    std::string hv_path;
    auto* hv = app.add_subcommand("hv", "one-shot HV/significance/state report");
    hv->add_option("file", hv_path, "scenario file")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2; // help/version exit clean, usage errors exit 2
    }

    try {
        if (validate->parsed()) return run_validate(scenario_path);
        if (run->parsed()) return run_run(run_path, trace_path, ticks_override, seed_override);
        if (helix->parsed()) {
            harmonia::HelixPoint result;
            if (helix->get_subcommand("add")->parsed())
                result = harmonia::helix_add(harmonia::encode(hx), hy);
            else if (helix->get_subcommand("sub")->parsed())
                result = harmonia::helix_sub(harmonia::encode(hx), hy);
            else
                result = harmonia::helix_mul(hx, hy);
            std::cout << harmonia::decode(result) << "\n";
            return 0;
        }
        if (eval->parsed()) {
            std::vector<harmonia::PredicateScore> operands;
            for (double s : scores) operands.push_back(harmonia::predicate_from_value(s));
            const auto result = eval_and_cmd->parsed() ? harmonia::eval_and(operands, inject)
                                                       : harmonia::eval_or(operands);
            std::cout << "outcome=" << result.outcome
                      << " expanded=" << (result.expanded ? "true" : "false") << "\n";
            return 0;
        }
        if (freq->parsed()) {
            harmonia::CycleConfig cfg;
            cfg.c_sbj = sbj;
            cfg.c_s = cs;
            cfg.c_c = cc;
            std::cout << harmonia::optimum_frequency(cfg) << "\n";
            return 0;
        }
        if (hv->parsed()) return run_hv(hv_path);
    } catch (const harmonia::Error& e) {
        std::cerr << e.what() << "\n";
        return 1;
    }
    return 2;
}
