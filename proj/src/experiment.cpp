#include "sspomd/experiment.hpp"

#include <atomic>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <thread>

namespace sspomd {

namespace {

const double kNaN = std::numeric_limits<double>::quiet_NaN();

// Salt indices for deriving independent sub-streams from (instance seed, run seed).
enum : std::uint64_t { kSaltStream = 1, kSaltRollout = 2, kSaltMeta = 3 };

double min_or_nan(const std::vector<double>& v) {
    double m = std::numeric_limits<double>::infinity();
    bool any = false;
    for (double x : v)
        if (!std::isnan(x)) {
            m = std::min(m, x);
            any = true;
        }
    return any ? m : kNaN;
}

} // namespace

BuiltInstance build_instance(const json& spec) {
    BuiltInstance out;
    if (spec.contains("file")) {
        out.mdp = mdp_from_json(json::parse(read_file(spec.at("file").get<std::string>())));
        const auto costs = costs_from_jsonl(read_file(spec.at("costs").get<std::string>()),
                                            out.mdp.num_actions());
        out.meta = {{"construction", "file"}, {"file", spec.at("file")}, {"episodes_available", costs.size()}};
        out.stream_factory = [costs](std::uint64_t) -> CostStream {
            return [costs](long k) {
                if (k < 1 || k > static_cast<long>(costs.size()))
                    throw BadParam("file cost stream: episode out of range");
                return costs[k - 1];
            };
        };
        return out;
    }

    const std::string kind = spec.at("construction").get<std::string>();
    if (kind == "failure") {
        auto inst = gen_failure_mdp(spec.at("S").get<int>());
        out.mdp = inst.mdp;
        out.meta = failure_instance_to_json(inst)["meta"];
        out.stream_factory = [inst](std::uint64_t) { return inst.stream(); };
    } else if (kind == "sparse_lb") {
        auto inst = gen_sparse_lb(spec.at("S").get<int>(), spec.at("A").get<int>(),
                                  spec.at("D").get<double>(), spec.at("T_star").get<double>(),
                                  spec.at("M").get<long>(), spec.value("seed", 0ULL),
                                  spec.value("relaxed", true));
        out.mdp = inst.mdp;
        out.meta = sparse_lb_to_json(inst)["meta"];
        const std::uint64_t inst_seed = inst.seed;
        out.stream_factory = [inst, inst_seed](std::uint64_t run_seed) {
            return inst.stream_with_seed(CounterRng::at(inst_seed, run_seed, kSaltStream));
        };
    } else if (kind == "unknown_trans") {
        auto inst = gen_unknown_trans_lb(spec.at("S").get<int>(), spec.at("A").get<int>(),
                                         spec.at("D").get<double>(),
                                         spec.at("epsilon").get<double>(),
                                         spec.value("seed", 0ULL));
        out.mdp = inst.mdp;
        out.meta = unknown_trans_to_json(inst)["meta"];
        out.stream_factory = [inst](std::uint64_t) { return inst.stream(); };
    } else {
        throw BadParam("build_instance: unknown construction '" + kind + "'");
    }
    return out;
}

namespace {

ProjectionOptions proj_options(const json& learner) {
    ProjectionOptions opts;
    opts.tol = learner.value("tol", 1e-8);
    return opts;
}

SparsityMode mode_of(const json& learner) {
    return learner.value("sparsity_mode", std::string("l0")) == "l1" ? SparsityMode::L1
                                                                     : SparsityMode::L0;
}

} // namespace

SeedRun run_single(const BuiltInstance& inst, const json& learner_spec, long K, std::uint64_t seed,
                   bool montecarlo) {
    const SspMdp& mdp = inst.mdp;
    const std::uint64_t inst_seed = inst.meta.value("seed", 0ULL);
    const CostStream stream = inst.stream_factory(seed);
    const std::vector<CostVector> costs = materialize(stream, K);

    const FastPolicyResult fast = fast_policy_and_diameter(mdp);
    const ProjectionOptions opts = proj_options(learner_spec);

    std::vector<double> realized;
    EpisodeObserver observer;
    CounterRng mc_rng(CounterRng::at(inst_seed, seed, kSaltRollout));
    if (montecarlo) {
        realized.assign(K, 0.0);
        observer = [&](long k, const Eigen::ArrayXd& q) {
            const Policy pi = policy_from_occupancy(OccupancyMeasure{q, 0.0}, fast.policy);
            realized[k - 1] = rollout(mdp, pi, costs[k - 1], mc_rng).cost;
        };
    }

    const std::string type = learner_spec.at("type").get<std::string>();
    double t_cap = std::numeric_limits<double>::infinity();
    RegretTrace trace;
    if (type == "base") {
        const double T = learner_spec.at("T").get<double>();
        t_cap = T;
        const std::string reg = learner_spec.value("regularizer", std::string("lrnorm"));
        if (reg == "negent") {
            trace = run_omd(mdp, stream, K, T, RegularizerSpec::neg_entropy(),
                            learner_spec.at("eta").get<double>(), 0, opts, observer);
        } else if (learner_spec.contains("eta") && learner_spec.contains("p")) {
            trace = run_omd(mdp, stream, K, T,
                            RegularizerSpec::lr_norm(learner_spec.at("p").get<double>()),
                            learner_spec.at("eta").get<double>(), learner_spec.value("M", 0.0),
                            opts, observer);
        } else {
            BaseConfig cfg;
            cfg.T = T;
            cfg.M = learner_spec.at("M").get<double>();
            cfg.K = K;
            cfg.D = fast.diameter;
            cfg.mode = mode_of(learner_spec);
            trace = run_base_omd(mdp, stream, cfg, opts, observer);
        }
    } else if (type == "sparse_agnostic") {
        const double T = learner_spec.at("T").get<double>();
        t_cap = T;
        trace = run_sparse_agnostic(mdp, stream, T, fast.diameter, K, mode_of(learner_spec), opts,
                                    observer);
    } else if (type == "parameter_free") {
        ParameterFreeOptions pf;
        pf.seed = CounterRng::at(inst_seed, seed, kSaltMeta);
        pf.realized_accounting = learner_spec.value("realized_accounting", false);
        pf.m_guess = learner_spec.value("m_guess", 0.0);
        pf.mode = mode_of(learner_spec);
        pf.proj = opts;
        trace = run_parameter_free(mdp, stream, K, pf, observer);
    } else {
        throw BadParam("run_single: unknown learner type '" + type + "'");
    }

    if (montecarlo) {
        trace.total_loss = 0;
        for (auto& rec : trace.records) {
            rec.learner_loss = realized[rec.episode - 1];
            trace.total_loss += rec.learner_loss;
        }
    }

    const ComparatorResult cmp = best_in_hindsight(mdp, costs, t_cap);
    finalize_trace(trace, costs, cmp);

    std::vector<double> pen, stab;
    for (const auto& r : trace.records) {
        pen.push_back(r.penalty_cert);
        stab.push_back(r.stability_cert);
    }

    SeedRun out;
    out.seed = seed;
    out.summary = {{"seed", seed},
                   {"final_regret", trace.final_regret},
                   {"total_loss", trace.total_loss},
                   {"comparator_total", trace.comparator_total},
                   {"comparator_hitting_time", cmp.hitting_time},
                   {"comparator_within_cap", cmp.within_cap},
                   {"intervals", trace.intervals.size()},
                   {"min_penalty_slack", min_or_nan(pen)},
                   {"min_stability_slack", min_or_nan(stab)},
                   {"episodes", trace.episodes()}};
    out.trace = std::move(trace);
    return out;
}

json run_experiment(const json& config) {
    const std::string name = config.value("name", std::string("experiment"));
    const std::string out_dir = config.value("out", std::string("out"));
    const long K = config.at("K").get<long>();
    if (K < 1) throw BadParam("run_experiment: need K >= 1");
    std::vector<std::uint64_t> seeds = config.value("seeds", std::vector<std::uint64_t>{0});
    if (seeds.empty()) throw BadParam("run_experiment: seeds must be nonempty");
    const bool montecarlo = config.value("mode", std::string("expected")) == "montecarlo";

    const BuiltInstance inst = build_instance(config.at("instance"));

    std::vector<SeedRun> runs(seeds.size());
    parallel_for(static_cast<long>(seeds.size()), [&](long i) {
        runs[i] = run_single(inst, config.at("learner"), K, seeds[i], montecarlo);
    });

    json per_seed = json::array();
    double sum = 0, mn = std::numeric_limits<double>::infinity(), mx = -mn;
    for (auto& run : runs) {
        const std::string csv_path =
            out_dir + "/" + name + "_seed" + std::to_string(run.seed) + ".csv";
        write_file(csv_path, trace_to_csv(run.trace));
        run.summary["csv"] = csv_path;
        per_seed.push_back(run.summary);
        const double r = run.summary.at("final_regret").get<double>();
        sum += r;
        mn = std::min(mn, r);
        mx = std::max(mx, r);
    }

    json summary = {{"name", name},
                    {"config", config},
                    {"instance_meta", inst.meta},
                    {"per_seed", per_seed},
                    {"aggregate",
                     {{"mean_final_regret", sum / static_cast<double>(runs.size())},
                      {"min_final_regret", mn},
                      {"max_final_regret", mx},
                      {"seeds", seeds.size()}}}};
    write_file(out_dir + "/" + name + "_summary.json", summary.dump(2) + "\n");
    return summary;
}

namespace {

void set_by_path(json& root, const std::string& path, const json& value) {
    json* cur = &root;
    size_t start = 0;
    while (true) {
        const size_t dot = path.find('.', start);
        const std::string key = path.substr(start, dot == std::string::npos ? dot : dot - start);
        if (dot == std::string::npos) {
            (*cur)[key] = value;
            return;
        }
        cur = &(*cur)[key];
        start = dot + 1;
    }
}

} // namespace

json run_sweep(const json& config, const std::string& param_path,
               const std::vector<json>& values) {
    const std::string name = config.value("name", std::string("experiment"));
    const std::string out_dir = config.value("out", std::string("out"));
    json all = json::array();
    std::string csv = "param,seed,final_regret,total_loss,comparator_total\n";
    for (const auto& v : values) {
        json cfg = config;
        set_by_path(cfg, param_path, v);
        cfg["name"] = name + "_" + param_path + "=" + v.dump();
        json summary = run_experiment(cfg);
        for (const auto& s : summary.at("per_seed")) {
            csv += v.dump() + "," + std::to_string(s.at("seed").get<std::uint64_t>()) + "," +
                   std::to_string(s.at("final_regret").get<double>()) + "," +
                   std::to_string(s.at("total_loss").get<double>()) + "," +
                   std::to_string(s.at("comparator_total").get<double>()) + "\n";
        }
        all.push_back({{"param", v}, {"summary", summary.at("aggregate")}});
    }
    write_file(out_dir + "/" + name + "_sweep.csv", csv);
    json result = {{"name", name}, {"param", param_path}, {"results", all}};
    write_file(out_dir + "/" + name + "_sweep.json", result.dump(2) + "\n");
    return result;
}

int max_workers() {
    const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
    if (const char* env = std::getenv("SSP_OMD_THREADS")) {
        const int n = std::atoi(env);
        if (n >= 1) return n;
    }
    return static_cast<int>(hw);
}

void parallel_for(long n, const std::function<void(long)>& fn) {
    const int workers = std::min<long>(max_workers(), n);
    if (workers <= 1) {
        for (long i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<long> next{0};
    std::exception_ptr error;
    std::mutex error_mu;
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (int w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            while (true) {
                const long i = next.fetch_add(1);
                if (i >= n) return;
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(error_mu);
                    if (!error) error = std::current_exception();
                }
            }
        });
    }
    for (auto& t : pool) t.join();
    if (error) std::rethrow_exception(error);
}

} // namespace sspomd
