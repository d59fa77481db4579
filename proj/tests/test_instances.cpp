#include <doctest.h>

#include <cmath>

#include "sspomd/harness.hpp"
#include "sspomd/instances.hpp"

using namespace sspomd;

TEST_CASE("failure instance") {
    CHECK_THROWS_AS(gen_failure_mdp(5), BadParam);
    auto inst = gen_failure_mdp(11);
    auto stream = inst.stream();
    SUBCASE("cost schedule parity and sparsity") {
        for (long k = 1; k <= 50; ++k) {
            auto c = stream(k);
            CHECK(c.support_size() <= 3);
            const double a1 = c.value_at(inst.mdp.sa_index(inst.s0L, 0));
            CHECK(a1 == doctest::Approx(k % 2 == 0 ? 1.0 : 0.0));
            CHECK(c.value_at(inst.mdp.sa_index(inst.s0L, 1)) == doctest::Approx(0.5));
            CHECK(c.value_at(inst.mdp.sa_index(inst.s0R, 1)) == doctest::Approx(1.0));
        }
    }
    SUBCASE("diameter and comparator hitting time are 3") {
        auto fast = fast_policy_and_diameter(inst.mdp);
        CHECK(fast.diameter == doctest::Approx(3.0).epsilon(1e-10));
    }
}

TEST_CASE("closed-form oracle") {
    const int S = 9;
    const double N = S - 5;
    SUBCASE("episode 1 entries") {
        auto q = negent_closed_form_oracle(S, 0.3, 1);
        CHECK(q[1 * 2 + 0] == doctest::Approx(0.25));  // left split
        CHECK(q[2 * 2 + 1] ==
              doctest::Approx(0.5 * std::sqrt(N) / (1.0 + std::sqrt(N)))); // fan action
        CHECK(q[2 * 2 + 0] == doctest::Approx(0.5 / (1.0 + std::sqrt(N))));
        CHECK(q[5 * 2 + 0] ==
              doctest::Approx(0.25 / (std::sqrt(N) * (1.0 + std::sqrt(N)))));
    }
    SUBCASE("large step size pushes even episodes to the half point") {
        auto q = negent_closed_form_oracle(S, 80.0, 2);
        CHECK(q[1 * 2 + 0] == doctest::Approx(0.5).epsilon(1e-10));
    }
    SUBCASE("flow feasibility of every predicted point") {
        auto inst = gen_failure_mdp(S);
        for (long k : {1L, 2L, 3L, 10L, 101L}) {
            auto q = negent_closed_form_oracle(S, 0.7, k);
            CHECK(check_flow_constraints(q, inst.mdp, 3.0).feasible);
        }
    }
}

TEST_CASE("sparse lower-bound instance") {
    SUBCASE("structural identities") {
        auto inst = gen_sparse_lb(64, 8, 7.0, 9.0, 16, 5);
        CHECK(inst.B == 3);
        CHECK(inst.N == 16);
        CHECK(inst.N >= 64 / 4);
        CHECK(inst.L == 15);
        CHECK(inst.D_prime == doctest::Approx(2.0));
        CHECK(inst.T_prime == doctest::Approx(5.0));
        auto fast = fast_policy_and_diameter(inst.mdp);
        CHECK(fast.diameter == doctest::Approx(7.0).epsilon(1e-9));
        auto commit = inst.commit_policy(0);
        CHECK(expected_hitting_times(inst.mdp, commit)[0] == doctest::Approx(9.0).epsilon(1e-9));
    }
    SUBCASE("episode support never exceeds M and costs are reproducible") {
        auto inst = gen_sparse_lb(32, 4, 6.0, 8.0, 8, 17);
        auto s1 = inst.stream();
        auto s2 = inst.stream_with_seed(17);
        auto s3 = inst.stream_with_seed(18);
        bool any_diff = false;
        for (long k = 1; k <= 200; ++k) {
            auto c1 = s1(k), c2 = s2(k), c3 = s3(k);
            CHECK(c1.support_size() <= 8);
            REQUIRE(c1.support_size() == c2.support_size());
            for (int i = 0; i < c1.support_size(); ++i)
                CHECK(c1.entries()[i] == c2.entries()[i]);
            if (c1.support_size() != c3.support_size()) any_diff = true;
        }
        CHECK(any_diff);
    }
    SUBCASE("committed policies pay T' times the drawn cost") {
        auto inst = gen_sparse_lb(32, 4, 6.0, 9.0, 8, 3);
        auto stream = inst.stream();
        auto commit = inst.commit_policy(2);
        const auto pair_sa =
            inst.mdp.sa_index(inst.good_pairs[2].first, inst.good_pairs[2].second);
        double acc = 0;
        const long K = 400;
        for (long k = 1; k <= K; ++k) {
            auto c = stream(k);
            auto j = cost_to_go(inst.mdp, commit, c);
            CHECK(j[0] == doctest::Approx(inst.T_prime * c.value_at(pair_sa)).epsilon(1e-9));
            acc += j[0];
        }
        // mean per-episode cost approaches T' * D'/(2T') = D'/2
        CHECK(acc / K == doctest::Approx(inst.D_prime / 2.0).epsilon(0.25));
    }
    SUBCASE("hindsight comparator equals T' times the best aggregate pair") {
        auto inst = gen_sparse_lb(32, 4, 6.0, 8.0, 8, 23);
        const long K = 500;
        auto costs = materialize(inst.stream(), K);
        double best_pair = std::numeric_limits<double>::infinity();
        for (const auto& [s, a] : inst.good_pairs) {
            double tot = 0;
            for (const auto& c : costs) tot += c.value_at(inst.mdp.sa_index(s, a));
            best_pair = std::min(best_pair, tot);
        }
        auto cmp = best_in_hindsight(inst.mdp, costs, inst.T_star);
        CHECK(cmp.total_cost == doctest::Approx(inst.T_prime * best_pair).epsilon(1e-6));
    }
    SUBCASE("parameter validation") {
        CHECK_THROWS_AS(gen_sparse_lb(64, 8, 4.9, 9.0, 16, 0), BadParam); // D <= B+2
        CHECK_THROWS_AS(gen_sparse_lb(64, 8, 7.0, 6.0, 16, 0), BadParam); // T* < D
        CHECK_THROWS_AS(gen_sparse_lb(64, 8, 7.0, 9.0, 16, 0, false), BadParam); // strict mode
        CHECK_NOTHROW(gen_sparse_lb(512, 8, 20.0, 24.0, 101, 0, false));
    }
}

TEST_CASE("unknown-transition instance") {
    SUBCASE("optimal policy pays D - 1") {
        for (int S : {2, 6}) {
            auto inst = gen_unknown_trans_lb(S, 20, 5.0, 0.05, 42);
            auto j = cost_to_go(inst.mdp, inst.optimal_policy(), inst.stream()(1));
            CHECK(j[0] == doctest::Approx(4.0).epsilon(1e-9));
            CHECK(inst.stream()(7).support_size() == 1);
        }
    }
    SUBCASE("epsilon zero makes every policy optimal in expectation") {
        auto inst = gen_unknown_trans_lb(4, 20, 6.0, 0.0, 1);
        auto j_uniform =
            cost_to_go(inst.mdp, Policy::uniform(4, 20), inst.stream()(1));
        // dithering at the bounce state delays exit but adds no cost
        CHECK(j_uniform[0] == doctest::Approx(5.0).epsilon(1e-9));
    }
    SUBCASE("parameter validation") {
        CHECK_THROWS_AS(gen_unknown_trans_lb(4, 16, 5.0, 0.05, 1), BadParam);
        CHECK_THROWS_AS(gen_unknown_trans_lb(4, 20, 5.0, 0.2, 1), BadParam);
        CHECK_THROWS_AS(gen_unknown_trans_lb(1, 20, 5.0, 0.05, 1), BadParam);
    }
    SUBCASE("rollout identity holds for a uniform learner") {
        auto inst = gen_unknown_trans_lb(5, 20, 4.0, 0.06, 7);
        auto check = check_unknown_trans_identity(inst, Policy::uniform(5, 20), 20000, 99);
        CHECK(check.within(3.0));
    }
}
