#include "sspomd/instances.hpp"

#include <cmath>
#include <string>

namespace sspomd {

FailureInstance gen_failure_mdp(int S) {
    if (S < 6) throw BadParam("gen_failure_mdp: need S >= 6");
    FailureInstance inst;
    inst.N = S - 5;
    const int A = 2;
    std::vector<Transition> tr;
    auto both = [&](int s, int next, double prob) {
        tr.push_back({s, 0, next, prob});
        tr.push_back({s, 1, next, prob});
    };
    both(inst.s0, inst.s0L, 0.5);
    both(inst.s0, inst.s0R, 0.5);
    both(inst.s0L, inst.sgL, 1.0);
    both(inst.sgL, kGoal, 1.0);
    tr.push_back({inst.s0R, 0, inst.sgR, 1.0}); // a1 exits through the buffer
    for (long i = 0; i < inst.N; ++i)           // a2 fans out uniformly
        tr.push_back({inst.s0R, 1, 5 + static_cast<int>(i), 1.0 / static_cast<double>(inst.N)});
    both(inst.sgR, kGoal, 1.0);
    for (long i = 0; i < inst.N; ++i) both(5 + static_cast<int>(i), kGoal, 1.0);

    inst.mdp = SspMdp(S, A, inst.s0, std::move(tr));
    inst.mdp.validate();
    return inst;
}

CostStream FailureInstance::stream() const {
    const int a1_L = mdp.sa_index(s0L, 0);
    const int a2_L = mdp.sa_index(s0L, 1);
    const int a2_R = mdp.sa_index(s0R, 1);
    return [=](long k) {
        std::vector<std::pair<int, double>> entries;
        if (k % 2 == 0) entries.emplace_back(a1_L, 1.0); // (1 + (-1)^k) / 2
        entries.emplace_back(a2_L, 0.5);
        entries.emplace_back(a2_R, 1.0);
        return CostVector(std::move(entries), k);
    };
}

Eigen::ArrayXd FailureInstance::comparator_occupancy() const {
    Eigen::ArrayXd q = Eigen::ArrayXd::Zero(mdp.num_pairs());
    q[mdp.sa_index(s0, 0)] = 0.5;
    q[mdp.sa_index(s0, 1)] = 0.5;
    q[mdp.sa_index(s0L, 1)] = 0.5;
    q[mdp.sa_index(sgL, 0)] = 0.25;
    q[mdp.sa_index(sgL, 1)] = 0.25;
    q[mdp.sa_index(s0R, 0)] = 0.5;
    q[mdp.sa_index(sgR, 0)] = 0.25;
    q[mdp.sa_index(sgR, 1)] = 0.25;
    return q;
}

Eigen::ArrayXd negent_closed_form_oracle(int S, double eta, long k) {
    if (S < 6) throw BadParam("negent_closed_form_oracle: need S >= 6");
    if (k < 1) throw BadParam("negent_closed_form_oracle: episodes are 1-based");
    if (!(eta > 0.0)) throw BadParam("negent_closed_form_oracle: eta must be positive");
    const double N = static_cast<double>(S - 5);
    const double rN = std::sqrt(N);
    const int A = 2;
    Eigen::ArrayXd q = Eigen::ArrayXd::Zero(static_cast<long>(S) * A);
    auto at = [&](int s, int a) -> double& { return q[s * A + a]; };

    at(0, 0) = at(0, 1) = 0.5; // s0 splits evenly for all k

    // Left decision state: the played mass on a1 alternates with the parity of k.
    const double qL_a1 = (k % 2 == 1) ? 0.25 : 0.5 / (1.0 + std::exp(-0.5 * eta));
    at(1, 0) = qL_a1;
    at(1, 1) = 0.5 - qL_a1;
    at(3, 0) = at(3, 1) = 0.25; // left buffer keeps mass 0.5, split evenly

    // Right decision state: the fan action decays geometrically in k.
    const double qR_a2 = 0.5 * rN / (rN + std::exp(0.5 * eta * static_cast<double>(k - 1)));
    at(2, 1) = qR_a2;
    at(2, 0) = 0.5 - qR_a2;
    const double buf = (0.5 - qR_a2) / 2.0; // right buffer carries q(s0R, a1)
    at(4, 0) = at(4, 1) = buf;
    const double fan = qR_a2 / (2.0 * N); // each fan state carries q(s0R, a2)/N
    for (int s = 5; s < S; ++s) at(s, 0) = at(s, 1) = fan;
    return q;
}

SparseLbInstance gen_sparse_lb(int S, int A, double D, double T_star, long M, std::uint64_t seed,
                               bool relaxed) {
    if (S < 8) throw BadParam("gen_sparse_lb: need S >= 8 for a tree of depth >= 2");
    if (A < 3) throw BadParam("gen_sparse_lb: need A >= 3 (two tree moves plus the funnel action)");
    if (M < 2) throw BadParam("gen_sparse_lb: need M >= 2");
    if (!(T_star >= D)) throw BadParam("gen_sparse_lb: need T_star >= D");

    SparseLbInstance inst;
    inst.B = static_cast<int>(std::ceil(std::log2(S / 2.0))) - 2;
    if (inst.B < 0) throw BadParam("gen_sparse_lb: S too small");
    inst.N = 1L << (inst.B + 1);
    inst.L = std::min<long>(M - 1, inst.N * (A - 1));
    inst.D_prime = D - inst.B - 2;
    inst.T_prime = T_star - inst.B - 1;
    if (inst.D_prime < 1.0)
        throw BadParam("gen_sparse_lb: D <= B + 2, funnel exit rate undefined");
    if (inst.T_prime < 1.0) throw BadParam("gen_sparse_lb: T_star <= B + 1");
    inst.bern_p = inst.D_prime / (2.0 * inst.T_prime);
    if (inst.bern_p > 1.0) throw BadParam("gen_sparse_lb: D' > 2T'");
    if (!relaxed) {
        if (!(D >= 3.0 * std::log(S))) throw BadParam("gen_sparse_lb strict: D < 3 log S");
        if (static_cast<long>(S) * (A - 1) < 400)
            throw BadParam("gen_sparse_lb strict: S(A-1) < 400");
        if (M < 101) throw BadParam("gen_sparse_lb strict: M < 101");
    }
    inst.D = D;
    inst.T_star = T_star;
    inst.M = M;
    inst.relaxed = relaxed;
    inst.seed = seed;

    const int tree_nodes = (1 << (inst.B + 2)) - 1; // <= S - 1
    inst.first_leaf = (1 << (inst.B + 1)) - 1;
    inst.f_state = tree_nodes;
    const int num_states = tree_nodes + 1;
    const int af = A - 1; // funnel action

    std::vector<Transition> tr;
    for (int s = 0; s < inst.first_leaf; ++s) {
        tr.push_back({s, 0, 2 * s + 1, 1.0});
        tr.push_back({s, 1, 2 * s + 2, 1.0});
        for (int a = 2; a < A; ++a) tr.push_back({s, a, s, 1.0}); // inert self-loops
    }
    for (long i = 1; i <= inst.N; ++i) {
        const int s = inst.first_leaf + static_cast<int>(i) - 1;
        for (int j = 1; j <= A - 1; ++j) {
            const int a = j - 1;
            if (j + (A - 1) * (i - 1) <= inst.L) {
                tr.push_back({s, a, kGoal, 1.0 / inst.T_prime});
                if (inst.T_prime > 1.0) tr.push_back({s, a, s, 1.0 - 1.0 / inst.T_prime});
                inst.good_pairs.emplace_back(s, a);
            } else {
                tr.push_back({s, a, inst.f_state, 1.0});
            }
        }
        tr.push_back({s, af, inst.f_state, 1.0});
    }
    tr.push_back({inst.f_state, af, kGoal, 1.0 / inst.D_prime});
    if (inst.D_prime > 1.0)
        tr.push_back({inst.f_state, af, inst.f_state, 1.0 - 1.0 / inst.D_prime});
    for (int a = 0; a < af; ++a) tr.push_back({inst.f_state, a, inst.f_state, 1.0});

    inst.mdp = SspMdp(num_states, A, 0, std::move(tr));
    inst.mdp.validate();
    return inst;
}

CostStream SparseLbInstance::stream_with_seed(std::uint64_t s) const {
    const long L_local = L;
    const double p = bern_p;
    std::vector<int> good_sa;
    good_sa.reserve(good_pairs.size());
    for (const auto& [st, a] : good_pairs) good_sa.push_back(mdp.sa_index(st, a));
    const int funnel_sa = mdp.sa_index(f_state, mdp.num_actions() - 1);
    return [=](long k) {
        std::vector<std::pair<int, double>> entries;
        entries.reserve(L_local + 1);
        for (long i = 0; i < L_local; ++i) {
            const double u = CounterRng::to_unit(
                CounterRng::at(s, static_cast<std::uint64_t>(k), static_cast<std::uint64_t>(i)));
            if (u < p) entries.emplace_back(good_sa[i], 1.0);
        }
        entries.emplace_back(funnel_sa, 1.0);
        return CostVector(std::move(entries), k);
    };
}

Policy SparseLbInstance::commit_policy(int good_pair_index) const {
    if (good_pair_index < 0 || good_pair_index >= static_cast<int>(good_pairs.size()))
        throw BadParam("commit_policy: good pair index out of range");
    Policy pi = fast_policy_and_diameter(mdp).policy;
    const auto [leaf, action] = good_pairs[good_pair_index];
    // Rewire the root-to-leaf path, then commit at the leaf.
    int node = leaf;
    while (node != 0) {
        const int parent = (node - 1) / 2;
        pi.set_deterministic(parent, node == 2 * parent + 1 ? 0 : 1);
        node = parent;
    }
    pi.set_deterministic(leaf, action);
    return pi;
}

UnknownTransInstance gen_unknown_trans_lb(int S, int A, double D, double epsilon,
                                          std::uint64_t seed) {
    if (S < 2) throw BadParam("gen_unknown_trans_lb: need S >= 2");
    if (A <= 16) throw BadParam("gen_unknown_trans_lb: need A > 16");
    if (!(D >= 2.0)) throw BadParam("gen_unknown_trans_lb: need D >= 2");
    if (!(epsilon >= 0.0 && epsilon < 0.125))
        throw BadParam("gen_unknown_trans_lb: need epsilon in [0, 1/8)");

    UnknownTransInstance inst;
    inst.epsilon = epsilon;
    inst.D = D;
    inst.seed = seed;
    inst.f_state = S - 1;
    inst.return_action = 0;
    if (S == 2) {
        inst.decision_states = {0};
    } else {
        for (int s = 1; s < S - 1; ++s) inst.decision_states.push_back(s);
    }
    CounterRng rng(seed);
    for (size_t i = 0; i < inst.decision_states.size(); ++i)
        inst.a_star.push_back(static_cast<int>(rng.next_below(A)));

    std::vector<Transition> tr;
    if (S > 2) {
        const double u = 1.0 / static_cast<double>(inst.decision_states.size());
        for (int a = 0; a < A; ++a)
            for (int d : inst.decision_states) tr.push_back({0, a, d, u});
    }
    for (size_t i = 0; i < inst.decision_states.size(); ++i) {
        const int s = inst.decision_states[i];
        for (int a = 0; a < A; ++a) {
            const double pg = (1.0 - (a == inst.a_star[i] ? 0.0 : epsilon)) / D;
            tr.push_back({s, a, kGoal, pg});
            tr.push_back({s, a, inst.f_state, 1.0 - pg});
        }
    }
    tr.push_back({inst.f_state, inst.return_action, 0, 1.0}); // the only costly pair
    for (int a = 1; a < A; ++a) tr.push_back({inst.f_state, a, inst.f_state, 1.0});

    inst.mdp = SspMdp(S, A, 0, std::move(tr));
    inst.mdp.validate();
    return inst;
}

CostStream UnknownTransInstance::stream() const {
    const int sa = mdp.sa_index(f_state, return_action);
    return [sa](long k) {
        return CostVector({{sa, 1.0}}, k);
    };
}

Policy UnknownTransInstance::optimal_policy() const {
    Policy pi(mdp.num_states(), mdp.num_actions());
    for (int s = 0; s < mdp.num_states(); ++s) pi.set_deterministic(s, 0);
    for (size_t i = 0; i < decision_states.size(); ++i)
        pi.set_deterministic(decision_states[i], a_star[i]);
    pi.set_deterministic(f_state, return_action);
    return pi;
}

} // namespace sspomd
