#include <doctest.h>

#include <cmath>

#include "sspomd/harness.hpp"
#include "sspomd/instances.hpp"
#include "sspomd/omd.hpp"
#include "sspomd/regularizers.hpp"
#include "test_util.hpp"

using namespace sspomd;
using namespace sspomd::testutil;

namespace {

// Independent primal-space projection: quadratic penalty on the constraints,
// projected gradient in q with backtracking, penalty weight escalated. Slow
// but derived from nothing shared with the dual solver.
Eigen::ArrayXd primal_projection_oracle(const RegularizerSpec& spec, const Eigen::ArrayXd& q_prime,
                                        const SspMdp& mdp, double T) {
    Eigen::ArrayXd q = q_prime.max(1e-6);
    const long n = q.size();
    for (double rho : {1e2, 1e4, 1e6, 1e8}) {
        double step = 1e-2;
        for (int it = 0; it < 40000; ++it) {
            const Eigen::VectorXd r = flow_residual(q, mdp);
            const double over = std::max(q.sum() - T, 0.0);
            Eigen::ArrayXd grad =
                psi_gradient(spec, q) - psi_gradient(spec, q_prime.max(1e-12));
            for (int sa = 0; sa < n; ++sa) {
                double pr = 0;
                auto [lo, hi] = mdp.row_range(sa);
                for (int i = lo; i < hi; ++i)
                    if (mdp.next_at(i) != kGoal) pr += mdp.prob_at(i) * r[mdp.next_at(i)];
                grad[sa] += rho * (r[sa / mdp.num_actions()] - pr) + rho * over;
            }
            const auto objective = [&](const Eigen::ArrayXd& x) {
                const Eigen::VectorXd rx = flow_residual(x, mdp);
                const double ox = std::max(x.sum() - T, 0.0);
                return bregman(spec, x, q_prime.max(1e-12)) +
                       0.5 * rho * (rx.squaredNorm() + ox * ox);
            };
            const double f0 = objective(q);
            bool moved = false;
            for (int bt = 0; bt < 40; ++bt) {
                Eigen::ArrayXd cand = (q - step * grad).max(0.0);
                if (objective(cand) < f0 - 1e-14) {
                    const double delta = (cand - q).abs().maxCoeff();
                    q = cand;
                    step *= 1.3;
                    moved = true;
                    if (delta < 1e-13) it = 40000;
                    break;
                }
                step *= 0.5;
            }
            if (!moved) break;
        }
    }
    return q;
}

} // namespace

TEST_CASE("initial occupancy") {
    SUBCASE("entropic initialization on the failure instance matches closed forms") {
        for (int S : {8, 20}) {
            auto inst = gen_failure_mdp(S);
            auto [q1, rep] = init_occupancy(inst.mdp, 4.0, RegularizerSpec::neg_entropy(),
                                            {.tol = 1e-11});
            CHECK(rep.converged);
            const Eigen::ArrayXd expect = negent_closed_form_oracle(S, 1.0, 1); // k=1: eta-free
            for (long i = 0; i < expect.size(); ++i)
                CHECK(q1.values[i] == doctest::Approx(expect[i]).epsilon(1e-7));
        }
    }
    SUBCASE("two identical exits split evenly under either regularizer") {
        std::vector<Transition> tr{{0, 0, kGoal, 1.0}, {0, 1, kGoal, 1.0}};
        SspMdp m(1, 2, 0, std::move(tr));
        for (auto spec : {RegularizerSpec::neg_entropy(), RegularizerSpec::lr_norm(2.5)}) {
            auto [q1, rep] = init_occupancy(m, 1.0, spec);
            CHECK(q1.values[0] == doctest::Approx(0.5).epsilon(1e-8));
            CHECK(q1.values[1] == doctest::Approx(0.5).epsilon(1e-8));
        }
    }
    SUBCASE("T below the fastest hitting time is infeasible") {
        auto inst = gen_failure_mdp(8);
        CHECK_THROWS_AS(init_occupancy(inst.mdp, 2.5, RegularizerSpec::neg_entropy()),
                        InfeasibleT);
    }
}

TEST_CASE("closed-form unconstrained step") {
    std::vector<Transition> tr{{0, 0, kGoal, 1.0}, {0, 1, kGoal, 1.0}};
    SspMdp m(1, 2, 0, std::move(tr));
    SUBCASE("zero cost is the identity") {
        OccupancyMeasure q{Eigen::ArrayXd::Constant(2, 0.37), 1.0};
        auto qp = unconstrained_step(RegularizerSpec::lr_norm(2.0), q, CostVector({}, 1), 0.7);
        CHECK(qp[0] == 0.37);
        CHECK(qp[1] == 0.37);
    }
    SUBCASE("exact cancellation clamps at the boundary") {
        OccupancyMeasure q{Eigen::ArrayXd::Constant(2, 1.0), 2.0};
        auto qp = unconstrained_step(RegularizerSpec::lr_norm(2.0), q, CostVector({{0, 1.0}}, 1),
                                     3.0);
        CHECK(qp[0] == doctest::Approx(0.0));
        CHECK(qp[1] == doctest::Approx(1.0));
    }
    SUBCASE("entropic step is multiplicative") {
        OccupancyMeasure q{Eigen::ArrayXd::Constant(2, 0.5), 1.0};
        auto qp = unconstrained_step(RegularizerSpec::neg_entropy(), q,
                                     CostVector({{1, 1.0}}, 1), std::log(2.0));
        CHECK(qp[1] == doctest::Approx(0.25).epsilon(1e-12));
    }
}

TEST_CASE("projection") {
    SUBCASE("a feasible point projects to itself") {
        CounterRng rng(4);
        auto mdp = random_mdp(rng, 5, 3);
        auto q = occupancy_of_policy(mdp, random_policy(rng, 5, 3));
        for (auto spec : {RegularizerSpec::lr_norm(3.0), RegularizerSpec::neg_entropy()}) {
            auto [proj, duals, rep] = project(spec, q.values, mdp, q.mass() + 1.0);
            CHECK(rep.converged);
            CHECK((proj.values - q.values).abs().maxCoeff() <= 1e-8);
        }
    }
    SUBCASE("entropic step from the initial point matches the closed form") {
        const int S = 12;
        const double eta = 0.8;
        auto inst = gen_failure_mdp(S);
        OmdEngine engine(inst.mdp, RegularizerSpec::neg_entropy(), 4.0, {.tol = 1e-12});
        engine.init_occupancy();
        auto [q2, rep] = engine.step(inst.stream()(1), eta);
        CHECK(q2.values[inst.mdp.sa_index(inst.s0L, 0)] ==
              doctest::Approx(0.5 / (1.0 + std::exp(-0.5 * eta))).epsilon(1e-8));
    }
    SUBCASE("matches the independent primal-space oracle") {
        CounterRng rng(123);
        int done = 0;
        for (int rep = 0; rep < 12; ++rep) {
            auto mdp = random_mdp(rng, 3, 2);
            const double T = expected_hitting_times(mdp, Policy::uniform(3, 2))[0] + 0.5;
            Eigen::ArrayXd qp(mdp.num_pairs());
            for (long i = 0; i < qp.size(); ++i) qp[i] = rng.next_double() * 1.5;
            const auto spec = RegularizerSpec::lr_norm(2.0);
            auto [qd, duals, report] = project(spec, qp, mdp, T, {.tol = 1e-11});
            const auto qo = primal_projection_oracle(spec, qp, mdp, T);
            CHECK((qd.values - qo).abs().maxCoeff() <= 1e-5);
            ++done;
        }
        CHECK(done == 12);
    }
    SUBCASE("zeros in the projected point stay finite") {
        CounterRng rng(9);
        auto mdp = random_mdp(rng, 4, 2);
        Eigen::ArrayXd qp = Eigen::ArrayXd::Zero(mdp.num_pairs());
        qp[1] = 0.4; // everything else exactly zero
        auto [q, duals, rep] = project(RegularizerSpec::lr_norm(4.0), qp, mdp, 30.0);
        CHECK(q.values.allFinite());
        CHECK(check_flow_constraints(q.values, mdp, 30.0).feasible);
    }
}

TEST_CASE("omd step composition") {
    SUBCASE("zero cost keeps a feasible iterate in place") {
        CounterRng rng(17);
        auto mdp = random_mdp(rng, 5, 2);
        auto q = occupancy_of_policy(mdp, random_policy(rng, 5, 2));
        for (auto spec : {RegularizerSpec::lr_norm(2.0), RegularizerSpec::neg_entropy()}) {
            auto [qn, rep] = omd_step(spec, q, CostVector({}, 1), 0.3, mdp, q.mass() + 0.5);
            CHECK((qn.values - q.values).abs().maxCoeff() <= 1e-8);
        }
    }
    SUBCASE("entropic trajectory on the failure instance tracks every closed form") {
        const int S = 8;
        auto inst = gen_failure_mdp(S);
        auto stream = inst.stream();
        for (double eta : {0.1, 1.0}) {
            OmdEngine engine(inst.mdp, RegularizerSpec::neg_entropy(), 4.0, {.tol = 1e-11});
            engine.init_occupancy();
            for (long k = 1; k <= 40; ++k) {
                const Eigen::ArrayXd expect = negent_closed_form_oracle(S, eta, k);
                const Eigen::ArrayXd& got = engine.occupancy();
                for (long i = 0; i < expect.size(); ++i) {
                    const double rel = std::abs(got[i] - expect[i]) / std::max(expect[i], 1e-300);
                    CHECK(rel <= 1e-6);
                }
                if (k % 2 == 1)
                    CHECK(got[inst.mdp.sa_index(inst.s0L, 0)] ==
                          doctest::Approx(0.25).epsilon(1e-8));
                engine.step(stream(k), eta);
            }
        }
    }
}

TEST_CASE("projection optimality properties") {
    CounterRng rng(555);
    for (int rep = 0; rep < 25; ++rep) {
        const int S = 3 + static_cast<int>(rng.next_below(3));
        const int A = 2;
        auto mdp = random_mdp(rng, S, A);
        // every (s,a) reaches the goal w.p. >= 0.05, so all hitting times are <= 20
        const double T = 25.0;
        const auto spec =
            rep % 2 == 0 ? RegularizerSpec::lr_norm(1.5 + 3.0 * rng.next_double())
                         : RegularizerSpec::neg_entropy();
        Eigen::ArrayXd qp(mdp.num_pairs());
        for (long i = 0; i < qp.size(); ++i) qp[i] = 0.05 + rng.next_double();

        std::vector<double> objectives;
        ProjectionOptions opts;
        opts.tol = 1e-10;
        opts.objective_trace = &objectives;
        auto [q, duals, report] = project(spec, qp, mdp, T, opts);
        CHECK(report.converged);

        // accepted line-search steps never increase the dual objective
        for (size_t i = 1; i < objectives.size(); ++i)
            CHECK(objectives[i] <= objectives[i - 1] + 1e-9 * std::max(1.0, std::abs(objectives[i - 1])));

        const Eigen::ArrayXd grad_diff =
            psi_gradient(spec, q.values.max(1e-300)) - psi_gradient(spec, qp);
        for (int x_case = 0; x_case < 100; ++x_case) {
            auto x = occupancy_of_policy(mdp, random_policy(rng, S, A));
            REQUIRE(x.mass() <= T);
            // variational inequality of the Bregman projection
            double inner = 0;
            for (long i = 0; i < grad_diff.size(); ++i) {
                if (x.values[i] == q.values[i]) continue;
                inner += grad_diff[i] * (x.values[i] - q.values[i]);
            }
            CHECK(inner >= -1e-6);
            // generalized Pythagorean inequality
            CHECK(bregman(spec, x.values, qp) >=
                  bregman(spec, x.values, q.values.max(1e-300)) + bregman(spec, q.values, qp) -
                      1e-6);
        }
    }
}
