#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "sspomd/errors.hpp"

namespace sspomd {

inline constexpr int kGoal = -1;              // sink state, not indexed in S
inline constexpr double kTolProb = 1e-12;     // row-stochasticity slack
inline constexpr double kTolFlow = 1e-8;      // flow residual slack, scaled by max(1, T)
inline constexpr double kMassFloor = 1e-12;   // below this a state is "unvisited"
inline constexpr double kValueCeiling = 1e12; // hitting times above this => improper

struct Transition {
    int s;
    int a;
    int next; // kGoal for the goal state
    double prob;
};

// Episodic shortest-path MDP with a shared action set and a single absorbing
// goal outside the state index range. Transitions are stored row-compressed
// per (s, a) pair; immutable after build().
class SspMdp {
public:
    SspMdp() = default;
    SspMdp(int num_states, int num_actions, int start_state, std::vector<Transition> transitions);

    int num_states() const { return num_states_; }
    int num_actions() const { return num_actions_; }
    int start_state() const { return start_state_; }
    int num_pairs() const { return num_states_ * num_actions_; }

    int sa_index(int s, int a) const { return s * num_actions_ + a; }

    // CSR access for one (s, a) row.
    std::pair<int, int> row_range(int sa) const { return {row_ptr_[sa], row_ptr_[sa + 1]}; }
    int next_at(int idx) const { return next_[idx]; }
    double prob_at(int idx) const { return prob_[idx]; }
    int nnz() const { return static_cast<int>(next_.size()); }

    double goal_prob(int s, int a) const; // direct mass on the goal from (s, a)

    // Checks nonnegativity and row sums within kTolProb; throws BadParam.
    // Properness of the MDP itself is established by fast_policy_and_diameter.
    void validate() const;

    std::vector<Transition> transitions() const; // materialized, for serialization

private:
    int num_states_ = 0;
    int num_actions_ = 0;
    int start_state_ = 0;
    std::vector<int> row_ptr_;
    std::vector<int> next_;
    std::vector<double> prob_;
};

// Sparse per-episode cost function over state-action pairs. Stored values are
// in (0, 1]; zeros are simply absent, so support_size() is the l0 norm.
class CostVector {
public:
    CostVector() = default;
    // entries: (sa index, cost); zero costs are dropped, duplicates are an error.
    CostVector(std::vector<std::pair<int, double>> entries, long episode_index);

    long episode_index() const { return episode_index_; }
    int support_size() const { return static_cast<int>(entries_.size()); }
    double l1() const { return l1_; }
    double value_at(int sa) const; // 0 when absent (binary search)

    const std::vector<std::pair<int, double>>& entries() const { return entries_; }

    double dot(const Eigen::ArrayXd& q) const;

private:
    std::vector<std::pair<int, double>> entries_; // sorted by sa index
    long episode_index_ = 0;
    double l1_ = 0.0;
};

// Row-stochastic action distributions, one row per state.
class Policy {
public:
    Policy() = default;
    Policy(int num_states, int num_actions);

    int num_states() const { return num_states_; }
    int num_actions() const { return num_actions_; }

    double prob(int s, int a) const { return probs_[s * num_actions_ + a]; }
    void set_prob(int s, int a, double p) { probs_[s * num_actions_ + a] = p; }
    void set_deterministic(int s, int a);
    void set_row_uniform(int s);
    void copy_row_from(const Policy& other, int s);

    static Policy uniform(int num_states, int num_actions);

    void validate() const; // rows sum to 1 within kTolProb, entries nonnegative

private:
    int num_states_ = 0;
    int num_actions_ = 0;
    std::vector<double> probs_;
};

// Expected visit counts over state-action pairs, constrained to the polytope
// of occupancies with total mass (expected hitting time) at most `bound`.
struct OccupancyMeasure {
    Eigen::ArrayXd values; // length S*A, nonnegative
    double bound = 0.0;    // the cap T it was projected/solved under

    double mass() const { return values.sum(); }
};

struct FlowReport {
    double max_flow_residual = 0.0; // max_s |r(s)|
    int argmax_state = -1;
    double mass_slack = 0.0;        // T - sum(q)
    double min_entry = 0.0;
    bool feasible = false;          // within tolerance at every state and q >= 0
};

struct FastPolicyResult {
    Policy policy;           // deterministic minimizer of the worst-state hitting time
    double diameter = 0.0;   // max_s T^{pi_f}(s)
    Eigen::VectorXd hitting; // per-state expected hitting times under pi_f
};

// Value iteration on the all-ones-cost problem; throws NoProperPolicy when the
// values exceed kValueCeiling (no policy reaches the goal from some state).
FastPolicyResult fast_policy_and_diameter(const SspMdp& mdp);

// Solves T(s) = 1 + sum_{s'} P^pi(s'|s) T(s'). Throws ImproperPolicy on
// singular systems or non-finite/negative/huge solutions.
Eigen::VectorXd expected_hitting_times(const SspMdp& mdp, const Policy& policy);

// Solves J(s) = sum_a pi(a|s) [c(s,a) + sum_{s'} P(s'|s,a) J(s')].
Eigen::VectorXd cost_to_go(const SspMdp& mdp, const Policy& policy, const CostVector& cost);

// Expected visit counts from the start state; q(s,a) = mu(s) pi(a|s) where mu
// solves the flow balance system.
OccupancyMeasure occupancy_of_policy(const SspMdp& mdp, const Policy& policy);

// Normalizes q(s,.) into action distributions. States whose mass is below
// kMassFloor take the fallback row verbatim, so the result is always executable.
Policy policy_from_occupancy(const OccupancyMeasure& q, const Policy& fallback);

// Residual report for an arbitrary vector against the flow constraints of Delta(T).
FlowReport check_flow_constraints(const Eigen::ArrayXd& q, const SspMdp& mdp, double T,
                                  double tol = kTolFlow);

// Flow residual r(s) = sum_a q(s,a) - sum_{s',a'} P(s|s',a') q(s',a') - I{s=s0}.
Eigen::VectorXd flow_residual(const Eigen::ArrayXd& q, const SspMdp& mdp);

// Minimum expected hitting time from the start state (over all policies);
// the smallest T for which Delta(T) is nonempty.
double min_hitting_time_from_start(const SspMdp& mdp);

} // namespace sspomd
