#pragma once

#include <functional>
#include <string>
#include <vector>

#include "sspomd/harness.hpp"
#include "sspomd/io.hpp"

namespace sspomd {

// An instance ready to run: the MDP plus a per-run-seed cost stream factory.
// Deterministic constructions ignore the run seed; samplers mix it with the
// instance seed so replications are independent but reproducible.
struct BuiltInstance {
    SspMdp mdp;
    std::function<CostStream(std::uint64_t run_seed)> stream_factory;
    json meta;
};

// spec: {"construction": "failure"|"sparse_lb"|"unknown_trans", ...params}
//       or {"file": "mdp.json", "costs": "stream.jsonl"}.
BuiltInstance build_instance(const json& spec);

struct SeedRun {
    std::uint64_t seed = 0;
    RegretTrace trace;
    json summary;
};

// One (learner, instance, seed) run with full accounting against the
// best-in-hindsight comparator. montecarlo switches the loss column to rolled
// out episode costs (the update path is unchanged: full information).
SeedRun run_single(const BuiltInstance& inst, const json& learner_spec, long K,
                   std::uint64_t seed, bool montecarlo);

// config: {"name", "instance", "learner", "K", "seeds": [...],
//          "mode": "expected"|"montecarlo", "out": dir}
// Writes one CSV per seed plus <name>_summary.json; returns the summary.
json run_experiment(const json& config);

// Reruns the experiment for each value of a dotted config path (e.g.
// "instance.M"), writing an aggregated CSV next to the per-run artifacts.
json run_sweep(const json& config, const std::string& param_path,
               const std::vector<json>& values);

int max_workers();
void parallel_for(long n, const std::function<void(long)>& fn);

} // namespace sspomd
