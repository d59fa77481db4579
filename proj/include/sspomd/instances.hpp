#pragma once

#include <cstdint>
#include <functional>
#include <utility>
#include <vector>

#include "sspomd/mdp.hpp"
#include "sspomd/rng.hpp"

namespace sspomd {

// A cost stream maps a 1-based episode index to that episode's sparse costs.
// Streams are pure functions of (parameters, seed), so replays are bit-exact.
using CostStream = std::function<CostVector(long k)>;

// Fixed-horizon-3 instance on which entropic mirror descent provably pays a
// sqrt(log S) price despite 3-sparse costs. Layout: s0 branches uniformly to a
// left and right decision state; the right one either exits through a buffer
// state or fans out over N = S - 5 states.
struct FailureInstance {
    SspMdp mdp;
    long N = 0;
    int s0 = 0, s0L = 1, s0R = 2, sgL = 3, sgR = 4; // fan states occupy 5 .. 4+N
    static constexpr double kHorizon = 3.0; // every policy hits the goal in exactly 3 steps
    static constexpr int kSparsity = 3;

    CostStream stream() const;

    // The cheap deterministic route (a2 at s0L, a1 at s0R) costing 0.25 per episode.
    Eigen::ArrayXd comparator_occupancy() const;
};

FailureInstance gen_failure_mdp(int S);

// Exact occupancy played at episode k by entropic OMD with step size eta on
// gen_failure_mdp(S); every state-action entry is predicted. Derived from the
// first-order conditions of the per-episode dual, which decouple by symmetry.
Eigen::ArrayXd negent_closed_form_oracle(int S, double eta, long k);

// Binary-tree instance with stochastic sparse costs: L "good" leaf actions
// exit at rate 1/T' and charge Bernoulli(D'/(2T')) costs; all other leaf
// actions funnel into a bad state f whose only exit costs 1 per attempt.
struct SparseLbInstance {
    SspMdp mdp;
    int B = 0;        // tree has depth B+2 (2^{B+2}-1 nodes)
    long N = 0;       // leaves
    long L = 0;       // good (state, action) pairs, min(M-1, N(A-1))
    double D = 0, T_star = 0;
    long M = 0;
    double D_prime = 0, T_prime = 0;
    double bern_p = 0; // D'/(2T')
    int f_state = 0;
    int first_leaf = 0;
    std::vector<std::pair<int, int>> good_pairs; // (leaf state, action)
    bool relaxed = false;
    std::uint64_t seed = 0;

    CostStream stream() const { return stream_with_seed(seed); }
    CostStream stream_with_seed(std::uint64_t s) const;

    // Deterministic policy that walks the tree to a good pair's leaf and then
    // commits to that action; rows elsewhere follow the fast policy.
    Policy commit_policy(int good_pair_index) const;
};

// relaxed=true keeps structural identities but waives the magnitude
// preconditions (M >= 101 etc.) so CI-sized sweeps are possible.
SparseLbInstance gen_sparse_lb(int S, int A, double D, double T_star, long M, std::uint64_t seed,
                               bool relaxed = true);

// Unknown-transition lower-bound family: each decision state hides an optimal
// action a* with goal probability 1/D (vs (1-eps)/D otherwise); misses bounce
// through a bad state whose single return action costs 1. M = 1.
struct UnknownTransInstance {
    SspMdp mdp;
    std::vector<int> decision_states;
    std::vector<int> a_star; // aligned with decision_states
    int f_state = 0;
    int return_action = 0;
    double epsilon = 0, D = 0;
    std::uint64_t seed = 0;

    double optimal_cost_to_go() const { return D - 1.0; } // J*(s0)

    CostStream stream() const; // constant: cost 1 at (f, return_action)
    Policy optimal_policy() const;
};

UnknownTransInstance gen_unknown_trans_lb(int S, int A, double D, double epsilon,
                                          std::uint64_t seed);

} // namespace sspomd
