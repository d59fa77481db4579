#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "sspomd/experiment.hpp"
#include "sspomd/harness.hpp"
#include "test_util.hpp"

using namespace sspomd;
using namespace sspomd::testutil;

TEST_CASE("best in hindsight") {
    SUBCASE("failure instance comparator totals K/4") {
        auto inst = gen_failure_mdp(10);
        const long K = 64;
        auto costs = materialize(inst.stream(), K);
        auto cmp = best_in_hindsight(inst.mdp, costs, 3.0);
        CHECK(cmp.total_cost == doctest::Approx(0.25 * K).epsilon(1e-7));
        CHECK(cmp.hitting_time == doctest::Approx(3.0).epsilon(1e-9));
        CHECK(cmp.within_cap);
    }
    SUBCASE("zero costs make every proper policy optimal") {
        auto inst = gen_failure_mdp(8);
        std::vector<CostVector> costs(10, CostVector({}, 1));
        auto cmp = best_in_hindsight(inst.mdp, costs, 3.0);
        CHECK(cmp.total_cost == doctest::Approx(0.0));
    }
    SUBCASE("never beaten by brute-force enumeration of deterministic policies") {
        CounterRng rng(31337);
        for (int rep = 0; rep < 40; ++rep) {
            const int S = 2 + static_cast<int>(rng.next_below(5)); // <= 6
            const int A = 1 + static_cast<int>(rng.next_below(3)); // <= 3
            auto mdp = random_mdp(rng, S, A);
            std::vector<CostVector> costs;
            for (long k = 1; k <= 5; ++k)
                costs.push_back(random_cost(rng, mdp.num_pairs(), 4, k));
            auto cmp = best_in_hindsight(mdp, costs, 100.0);
            long combos = 1;
            for (int s = 0; s < S; ++s) combos *= A;
            for (long id = 0; id < combos; ++id) {
                Policy pi(S, A);
                long rest = id;
                for (int s = 0; s < S; ++s) {
                    pi.set_deterministic(s, static_cast<int>(rest % A));
                    rest /= A;
                }
                double total = 0;
                auto q = occupancy_of_policy(mdp, pi);
                for (const auto& c : costs) total += c.dot(q.values);
                CHECK(cmp.total_cost <= total + 1e-6);
            }
        }
    }
}

TEST_CASE("rollout") {
    auto inst = gen_failure_mdp(8);
    CounterRng rng(5);
    SUBCASE("fixed-horizon episodes always take 3 steps") {
        for (int rep = 0; rep < 200; ++rep) {
            auto r = rollout(inst.mdp, Policy::uniform(8, 2), inst.stream()(1), rng);
            CHECK(r.steps == 3);
        }
    }
    SUBCASE("zero costs accumulate nothing") {
        auto r = rollout(inst.mdp, Policy::uniform(8, 2), CostVector({}, 1), rng);
        CHECK(r.cost == doctest::Approx(0.0));
    }
    SUBCASE("improper policies hit the episode cap") {
        std::vector<Transition> tr{{0, 0, kGoal, 1.0}, {0, 1, 0, 1.0}};
        SspMdp m(1, 2, 0, std::move(tr));
        Policy pi(1, 2);
        pi.set_deterministic(0, 1);
        CHECK_THROWS_AS(rollout(m, pi, CostVector({}, 1), rng, 1000), EpisodeCapExceeded);
    }
}

TEST_CASE("random walk maximum estimator") {
    SUBCASE("a single walk is mean zero") {
        auto r = rw_max_expectation(2000, 0.5, 1, 4000, 7);
        CHECK(std::abs(r.estimate) <= 3.0 * r.std_error);
    }
    SUBCASE("bound formula") {
        auto r = rw_max_expectation(100, 0.5, 10, 10, 1);
        CHECK(r.bound ==
              doctest::Approx(0.02 * std::sqrt(100 * 0.25 * std::log(10.0)) - 1.5));
    }
    SUBCASE("parameter validation") {
        CHECK_THROWS_AS(rw_max_expectation(100, 0.4, 10, 10, 1), BadParam);
        CHECK_THROWS_AS(rw_max_expectation(100, 0.9999, 10, 10, 1), BadParam);
        CHECK_THROWS_AS(rw_max_expectation(0, 0.5, 10, 10, 1), BadParam);
    }
    SUBCASE("binomial sampler matches moments") {
        CounterRng rng(12);
        const long n = 300;
        const double p = 0.8;
        double mean = 0;
        const long reps = 20000;
        double m2 = 0;
        for (long i = 0; i < reps; ++i) {
            const double x = static_cast<double>(rng.binomial(n, p));
            const double d = x - mean;
            mean += d / static_cast<double>(i + 1);
            m2 += d * (x - mean);
        }
        const double var = m2 / (reps - 1.0);
        CHECK(mean == doctest::Approx(n * p).epsilon(0.01));
        CHECK(var == doctest::Approx(n * p * (1 - p)).epsilon(0.08));
    }
}

TEST_CASE("slope fits") {
    std::vector<double> x, y;
    for (double v : {1.0, 2.0, 4.0, 8.0, 16.0}) {
        x.push_back(v);
        y.push_back(3.0 * std::sqrt(v));
    }
    auto fit = fit_loglog(x, y);
    CHECK(fit.slope == doctest::Approx(0.5).epsilon(1e-9));
    CHECK(fit.r2 == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("experiment driver") {
    const std::string dir = "test_out_tmp";
    std::filesystem::remove_all(dir);
    json cfg = {{"name", "smoke"},
                {"instance", {{"construction", "failure"}, {"S", 8}}},
                {"learner", {{"type", "base"}, {"regularizer", "negent"}, {"T", 4.0}, {"eta", 0.1}}},
                {"K", 40},
                {"seeds", {1, 2}},
                {"mode", "expected"},
                {"out", dir}};

    SUBCASE("CSV artifacts are byte-stable across reruns") {
        auto s1 = run_experiment(cfg);
        const std::string csv1 = read_file(dir + "/smoke_seed1.csv");
        std::filesystem::remove_all(dir);
        auto s2 = run_experiment(cfg);
        const std::string csv2 = read_file(dir + "/smoke_seed1.csv");
        CHECK(csv1 == csv2);
        CHECK(s1.at("aggregate").at("mean_final_regret").get<double>() ==
              doctest::Approx(s2.at("aggregate").at("mean_final_regret").get<double>()));
        CHECK(csv1.substr(0, 8) == "episode,");
    }

    SUBCASE("Monte Carlo accounting agrees with expected accounting") {
        json mc = cfg;
        mc["name"] = "smoke_mc";
        mc["K"] = 2000;
        mc["seeds"] = {1};
        auto expected_summary = run_experiment(cfg.patch(json::parse(
            R"([{"op":"replace","path":"/K","value":2000},{"op":"replace","path":"/seeds","value":[1]},{"op":"replace","path":"/name","value":"smoke_exp"}])")));
        mc["mode"] = "montecarlo";
        auto mc_summary = run_experiment(mc);
        // compare realized vs expected losses episode by episode
        const std::string exp_csv = read_file(dir + "/smoke_exp_seed1.csv");
        const std::string mc_csv = read_file(dir + "/smoke_mc_seed1.csv");
        auto parse_col = [](const std::string& text, int col) {
            std::vector<double> out;
            size_t pos = text.find('\n') + 1;
            while (pos < text.size()) {
                size_t end = text.find('\n', pos);
                std::string line = text.substr(pos, end - pos);
                size_t start = 0;
                for (int c = 0; c < col; ++c) start = line.find(',', start) + 1;
                out.push_back(std::stod(line.substr(start)));
                pos = end + 1;
            }
            return out;
        };
        auto exp_loss = parse_col(exp_csv, 1);
        auto mc_loss = parse_col(mc_csv, 1);
        REQUIRE(exp_loss.size() == mc_loss.size());
        double diff = 0, var = 0;
        for (size_t i = 0; i < exp_loss.size(); ++i) {
            diff += mc_loss[i] - exp_loss[i];
            var += (mc_loss[i] - exp_loss[i]) * (mc_loss[i] - exp_loss[i]);
        }
        const double se = std::sqrt(var);
        CHECK(std::abs(diff) <= 3.0 * se + 1e-9);
    }

    SUBCASE("sweep aggregates per-parameter runs") {
        json scfg = cfg;
        scfg["name"] = "sw";
        scfg["K"] = 10;
        auto result = run_sweep(scfg, "learner.eta", {json(0.05), json(0.2)});
        CHECK(result.at("results").size() == 2);
        CHECK(std::filesystem::exists(dir + "/sw_sweep.csv"));
    }
    std::filesystem::remove_all(dir);
}
