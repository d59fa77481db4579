#pragma once

#include <string>
#include <vector>

#include "sspomd/instances.hpp"
#include "sspomd/learners.hpp"

namespace sspomd {

struct ComparatorResult {
    Policy policy;
    OccupancyMeasure occupancy;
    double total_cost = 0;   // sum_k <q*, c_k>
    double hitting_time = 0; // T^{pi*}(s0)
    bool within_cap = true;
};

// Best proper deterministic policy in hindsight: value iteration on the
// aggregate cost sum_k c_k, perturbed by a uniform 1e-9 so zero-cost cycles
// break toward proper policies.
ComparatorResult best_in_hindsight(const SspMdp& mdp, const std::vector<CostVector>& costs,
                                   double T_cap);

// Fills comparator losses, cumulative regret and the per-interval penalty
// certificate slack (p T^{1+1/p} - [psi_p(q*) - psi_p(q_1)]) into a trace.
void finalize_trace(RegretTrace& trace, const std::vector<CostVector>& costs,
                    const ComparatorResult& comparator);

std::vector<CostVector> materialize(const CostStream& stream, long K);

struct RolloutResult {
    double cost = 0;
    long steps = 0;
};

// Simulates one episode; throws EpisodeCapExceeded past `cap` steps.
RolloutResult rollout(const SspMdp& mdp, const Policy& policy, const CostVector& cost,
                      CounterRng& rng, long cap = 10000000);

struct RwMaxResult {
    double estimate = 0;
    double std_error = 0;
    double bound = 0; // 0.02 sqrt(n p (1-p) log d) - 1.5
    long n = 0;
    double p = 0;
    long d = 0;
    long trials = 0;
};

// Monte Carlo estimate of E[max_i Z_i] for d independent zero-mean walks of n
// steps (+1-p with prob p, -p otherwise), next to the theoretical lower bound.
RwMaxResult rw_max_expectation(long n, double p, long d, long trials, std::uint64_t seed);

struct SlopeFit {
    double slope = 0;
    double intercept = 0;
    double r2 = 0;
};

SlopeFit fit_line(const std::vector<double>& x, const std::vector<double>& y);
SlopeFit fit_loglog(const std::vector<double>& x, const std::vector<double>& y);

struct IdentityCheckResult {
    double lhs_mean = 0;  // mean(N_k) - 1 - J*
    double rhs_mean = 0;  // eps * mean(N_k - N_k*)
    double diff_mean = 0; // per-episode lhs - rhs
    double diff_se = 0;
    long episodes = 0;
    bool within(double z_score) const { return std::abs(diff_mean) <= z_score * diff_se; }
};

// Rollout check of the per-episode identity E[N_k] - 1 - J* = eps E[N_k - N_k*]
// on the unknown-transition family, counting decision-state visits.
IdentityCheckResult check_unknown_trans_identity(const UnknownTransInstance& inst,
                                                 const Policy& learner, long episodes,
                                                 std::uint64_t seed, long cap = 10000000);

// RFC-4180 CSV with one row per episode; NaN certificate slots are left empty.
std::string trace_to_csv(const RegretTrace& trace);
void write_file(const std::string& path, const std::string& contents);

} // namespace sspomd
