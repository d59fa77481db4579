#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "sspomd/experiment.hpp"

using namespace sspomd;

namespace {

int cmd_gen_instance(const std::string& kind, const json& params, const std::string& out_path,
                     long episodes, const std::string& costs_out, std::uint64_t stream_seed) {
    json doc;
    SspMdp mdp;
    CostStream stream;
    if (kind == "failure") {
        auto inst = gen_failure_mdp(params.at("S").get<int>());
        doc = failure_instance_to_json(inst);
        mdp = inst.mdp;
        stream = inst.stream();
    } else if (kind == "sparse-lb") {
        auto inst = gen_sparse_lb(params.at("S").get<int>(), params.at("A").get<int>(),
                                  params.at("D").get<double>(), params.at("T_star").get<double>(),
                                  params.at("M").get<long>(), params.at("seed").get<std::uint64_t>(),
                                  params.at("relaxed").get<bool>());
        doc = sparse_lb_to_json(inst);
        mdp = inst.mdp;
        stream = inst.stream_with_seed(stream_seed ? stream_seed : inst.seed);
    } else {
        auto inst = gen_unknown_trans_lb(params.at("S").get<int>(), params.at("A").get<int>(),
                                         params.at("D").get<double>(),
                                         params.at("epsilon").get<double>(),
                                         params.at("seed").get<std::uint64_t>());
        doc = unknown_trans_to_json(inst);
        mdp = inst.mdp;
        stream = inst.stream();
    }
    write_file(out_path, doc.dump(2) + "\n");
    std::cout << "wrote " << out_path << " (" << mdp.num_states() << " states, "
              << mdp.num_actions() << " actions)\n";
    if (episodes > 0) {
        if (costs_out.empty()) throw BadParam("gen-instance: --episodes needs --costs-out");
        write_file(costs_out, costs_to_jsonl(materialize(stream, episodes), mdp.num_actions()));
        std::cout << "wrote " << costs_out << " (" << episodes << " episodes)\n";
    }
    return 0;
}

int cmd_validate(const std::string& mdp_path, const std::string& occ_path, double T) {
    const json j = json::parse(read_file(mdp_path));
    const SspMdp mdp = mdp_from_json(j);
    mdp.validate();
    const auto fast = fast_policy_and_diameter(mdp);
    std::cout << "mdp ok: S=" << mdp.num_states() << " A=" << mdp.num_actions()
              << " diameter=" << fast.diameter
              << " T_fast(s0)=" << fast.hitting[mdp.start_state()] << "\n";
    if (j.contains("meta") && j["meta"].contains("claimed"))
        std::cout << "claimed: " << j["meta"]["claimed"].dump() << "\n";
    if (!occ_path.empty()) {
        const json oj = json::parse(read_file(occ_path));
        const auto vals = oj.at("values").get<std::vector<double>>();
        Eigen::ArrayXd q = Eigen::Map<const Eigen::ArrayXd>(vals.data(), vals.size());
        const double cap = oj.value("T", T);
        const FlowReport rep = check_flow_constraints(q, mdp, cap);
        std::printf("occupancy: max_flow_residual=%.3e (state %d) mass_slack=%.6g min_entry=%.3e "
                    "feasible=%s\n",
                    rep.max_flow_residual, rep.argmax_state, rep.mass_slack, rep.min_entry,
                    rep.feasible ? "yes" : "no");
        return rep.feasible ? 0 : 2;
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Adversarial shortest-path mirror descent: instances, learners, benchmarks"};
    app.require_subcommand(1);

    // gen-instance
    auto* gen = app.add_subcommand("gen-instance", "Generate a benchmark MDP as JSON");
    gen->require_subcommand(1);
    std::string out_path = "instance.json", costs_out;
    long episodes = 0;
    std::uint64_t seed = 0, stream_seed = 0;
    int S = 8, A = 8;
    double D = 7, T_star = 8, epsilon = 0.05;
    long M = 16;
    bool strict = false;

    auto add_common = [&](CLI::App* c) {
        c->add_option("--out", out_path, "Output JSON path");
        c->add_option("--episodes", episodes, "Also sample this many cost episodes");
        c->add_option("--costs-out", costs_out, "JSONL path for the sampled costs");
    };
    auto* gf = gen->add_subcommand("failure", "Fixed-horizon entropic-failure instance");
    gf->add_option("--S", S, "Number of states (>= 6)")->required();
    add_common(gf);
    auto* gs = gen->add_subcommand("sparse-lb", "Binary-tree sparse lower-bound instance");
    gs->add_option("--S", S)->required();
    gs->add_option("--A", A)->required();
    gs->add_option("--D", D)->required();
    gs->add_option("--T-star", T_star)->required();
    gs->add_option("--M", M)->required();
    gs->add_option("--seed", seed);
    gs->add_option("--stream-seed", stream_seed, "Seed for the sampled cost stream");
    gs->add_flag("--strict", strict, "Enforce the full-scale parameter preconditions");
    add_common(gs);
    auto* gu = gen->add_subcommand("unknown-trans", "Unknown-transition lower-bound instance");
    gu->add_option("--S", S)->required();
    gu->add_option("--A", A)->required();
    gu->add_option("--D", D)->required();
    gu->add_option("--epsilon", epsilon)->required();
    gu->add_option("--seed", seed);
    add_common(gu);

    // run
    auto* run = app.add_subcommand("run", "Run an experiment config");
    std::string config_path, mode_override, out_override;
    std::vector<std::uint64_t> seed_override;
    run->add_option("--config", config_path, "Experiment config JSON")->required();
    run->add_option("--seed", seed_override, "Override the config's seed list");
    run->add_option("--mode", mode_override, "expected | montecarlo");
    run->add_option("--out", out_override, "Output directory");

    // sweep
    auto* sweep = app.add_subcommand("sweep", "Grid over one config parameter");
    std::string param_path;
    std::vector<std::string> values;
    sweep->add_option("--config", config_path, "Experiment config JSON")->required();
    sweep->add_option("--param", param_path, "Dotted config path, e.g. instance.M")->required();
    sweep->add_option("--values", values, "Values for the parameter")->required();
    sweep->add_option("--mode", mode_override, "expected | montecarlo");
    sweep->add_option("--out", out_override, "Output directory");

    // rw-lb
    auto* rw = app.add_subcommand("rw-lb", "Monte Carlo max of asymmetric zero-mean random walks");
    long n = 10000, d = 100, trials = 10000;
    double p = 0.5;
    rw->add_option("--n", n, "Walk length")->required();
    rw->add_option("--p", p, "Up-step probability in [1/2, 1-1/n]")->required();
    rw->add_option("--d", d, "Number of walks")->required();
    rw->add_option("--trials", trials, "Monte Carlo trials");
    rw->add_option("--seed", seed);

    // validate
    auto* val = app.add_subcommand("validate", "Check an MDP (and optionally an occupancy) file");
    std::string mdp_path, occ_path;
    double T_cap = 0;
    val->add_option("mdp", mdp_path, "MDP JSON file")->required();
    val->add_option("--occupancy", occ_path, "Occupancy JSON: {\"values\": [...], \"T\": ...}");
    val->add_option("--T", T_cap, "Hitting-time cap for the occupancy check");

    CLI11_PARSE(app, argc, argv);

    try {
        if (gen->parsed()) {
            json params = {{"S", S},       {"A", A},       {"D", D},
                           {"T_star", T_star}, {"M", M},   {"epsilon", epsilon},
                           {"seed", seed}, {"relaxed", !strict}};
            std::string kind = gf->parsed() ? "failure" : (gs->parsed() ? "sparse-lb" : "unknown-trans");
            return cmd_gen_instance(kind, params, out_path, episodes, costs_out, stream_seed);
        }
        if (run->parsed()) {
            json cfg = json::parse(read_file(config_path));
            if (!seed_override.empty()) cfg["seeds"] = seed_override;
            if (!mode_override.empty()) cfg["mode"] = mode_override;
            if (!out_override.empty()) cfg["out"] = out_override;
            const json summary = run_experiment(cfg);
            std::cout << summary.at("aggregate").dump(2) << "\n";
            return 0;
        }
        if (sweep->parsed()) {
            json cfg = json::parse(read_file(config_path));
            if (!mode_override.empty()) cfg["mode"] = mode_override;
            if (!out_override.empty()) cfg["out"] = out_override;
            std::vector<json> vals;
            for (const auto& v : values) vals.push_back(json::parse(v));
            const json result = run_sweep(cfg, param_path, vals);
            std::cout << result.dump(2) << "\n";
            return 0;
        }
        if (rw->parsed()) {
            const RwMaxResult r = rw_max_expectation(n, p, d, trials, seed);
            std::printf("estimate=%.6f std_error=%.6f bound=%.6f (n=%ld p=%.3f d=%ld trials=%ld)\n",
                        r.estimate, r.std_error, r.bound, r.n, r.p, r.d, r.trials);
            std::printf("estimate %s bound - 3*SE\n",
                        r.estimate >= r.bound - 3.0 * r.std_error ? ">=" : "<");
            return r.estimate >= r.bound - 3.0 * r.std_error ? 0 : 2;
        }
        if (val->parsed()) return cmd_validate(mdp_path, occ_path, T_cap);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
