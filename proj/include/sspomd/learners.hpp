#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <vector>

#include "sspomd/instances.hpp"
#include "sspomd/omd.hpp"

namespace sspomd {

// Sparsity can be measured by support size or, for "softly sparse" costs, by
// the l1 norm; both drive the same tuning formulas.
enum class SparsityMode { L0, L1 };

inline double sparsity_of(const CostVector& c, SparsityMode mode) {
    return mode == SparsityMode::L0 ? static_cast<double>(c.support_size()) : c.l1();
}

// Tuning for the known-sparsity learner: p = log(T M),
// eta = sqrt(p T^{1+1/p} / (K D M^{1/p})).
struct BaseConfig {
    double T = 0;
    double M = 0;
    long K = 0;
    double D = 0;
    SparsityMode mode = SparsityMode::L0;

    double p() const { return std::log(T * M); }
    double eta() const {
        const double pp = p();
        return std::sqrt(pp * std::pow(T, 1.0 + 1.0 / pp) / (static_cast<double>(K) * D * std::pow(M, 1.0 / pp)));
    }
    // Requires T > e (so the cap exceeds the regularizer scale), T*M > e (so
    // p > 1), and K large enough that eta <= 4 M^{-1/p}.
    void validate() const;
};

struct EpisodeRecord {
    long episode = 0;
    double learner_loss = 0;     // <q_k, c_k>
    double comparator_loss = 0;  // filled by the harness once the comparator is known
    double cum_regret = 0;
    double penalty_cert = std::numeric_limits<double>::quiet_NaN();   // slack, filled by harness
    double stability_cert = std::numeric_limits<double>::quiet_NaN(); // slack, per episode
    int proj_iters = 0;
    double kkt_residual = 0;
    int interval_b = 0;
    int sampled_instance = -1;
};

// One tuning interval of a run (a single run of base OMD has exactly one).
struct IntervalInfo {
    long start_episode = 1;
    int b = 0;
    double m_guess = 0;
    double T = 0;
    double p = 0;   // 0 for NegEnt
    double eta = 0;
    double psi_q1 = 0;
    double penalty_rhs = 0; // p T^{1+1/p}; NaN for NegEnt
    RegularizerSpec spec;
};

struct RegretTrace {
    std::vector<EpisodeRecord> records;
    std::vector<IntervalInfo> intervals;
    double total_loss = 0;
    double comparator_total = 0;
    double final_regret = 0;
    std::vector<double> meta_T_grid;   // b(j) of the meta learner, empty otherwise
    std::vector<double> meta_eta;
    long episodes() const { return static_cast<long>(records.size()); }
};

// Called with the occupancy the learner commits to for episode k, before the
// cost is revealed; used for Monte Carlo execution of the played policy.
using EpisodeObserver = std::function<void(long k, const Eigen::ArrayXd& q)>;

// Certificate slack of one episode under psi_p:
//   M^{1/p} (1 + <c,q>) - ||c||^2 in the inverse-Hessian norm at q.
double stability_slack(double p, double cert_m, const CostVector& c, const Eigen::ArrayXd& q);

// Fixed-regularizer OMD over Delta(T). cert_m > 0 turns on the per-episode
// stability certificate (LrNorm only).
RegretTrace run_omd(const SspMdp& mdp, const CostStream& stream, long K, double T,
                    RegularizerSpec spec, double eta, double cert_m = 0,
                    ProjectionOptions opts = {}, const EpisodeObserver& observer = {});

RegretTrace run_base_omd(const SspMdp& mdp, const CostStream& stream, const BaseConfig& cfg,
                         ProjectionOptions opts = {}, const EpisodeObserver& observer = {});

// Restart scheme for unknown sparsity: guesses m(b) = 2^(2^b) and restarts
// OMD with retuned (p, eta) whenever an observed cost exceeds the guess.
class SparseAgnosticLearner {
public:
    SparseAgnosticLearner(const SspMdp& mdp, double T, double D, long K,
                          SparsityMode mode = SparsityMode::L0, ProjectionOptions opts = {});

    const Eigen::ArrayXd& occupancy() const { return engine_->occupancy(); }

    struct StepOut {
        double loss = 0;
        int proj_iters = 0;
        double kkt = 0;
        bool restarted = false;
        double stability_slack = std::numeric_limits<double>::quiet_NaN();
    };
    // Charges the current occupancy against c, then updates (or restarts when
    // the sparsity guess is exceeded; the triggering loss is still charged).
    StepOut observe(const CostVector& c);

    int b() const { return b_; }
    double m() const { return m_; }
    double p() const { return p_; }
    double eta() const { return eta_; }
    const std::vector<IntervalInfo>& intervals() const { return intervals_; }

private:
    void start_interval(long next_episode);

    const SspMdp* mdp_;
    double T_, D_;
    long K_;
    SparsityMode mode_;
    ProjectionOptions opts_;
    int b_ = 1;
    double m_ = 4, p_ = 0, eta_ = 0;
    long episode_ = 0;
    std::unique_ptr<OmdEngine> engine_;
    std::vector<IntervalInfo> intervals_;
};

RegretTrace run_sparse_agnostic(const SspMdp& mdp, const CostStream& stream, double T, double D,
                                long K, SparsityMode mode = SparsityMode::L0,
                                ProjectionOptions opts = {}, const EpisodeObserver& observer = {});

// Weighted-entropy mirror step on the simplex with per-coordinate rates:
// w'(j) proportional to w(j) exp(-eta(j) g(j)), normalized through the scalar
// mu solving sum_j w(j) exp(-eta(j)(g(j) + mu)) = 1 by bisection.
Eigen::VectorXd meta_weights_update(const Eigen::VectorXd& weights, const Eigen::VectorXd& eta,
                                    const Eigen::VectorXd& g);

struct MetaState {
    Eigen::VectorXd weights;
    Eigen::VectorXd eta;
};

// One meta update from raw instance losses: g = l + 4 eta l^2.
MetaState meta_step(const MetaState& state, const Eigen::VectorXd& losses);

struct ParameterFreeOptions {
    std::uint64_t seed = 0;
    bool realized_accounting = false; // charge the sampled instance instead of the mixture
    double m_guess = 0;               // sparsity inside eta_j's log; 0 means S*A
    SparsityMode mode = SparsityMode::L0;
    ProjectionOptions proj;
};

// Runs N = ceil(log2 K) - j0 sparse-agnostic instances on the hitting-time
// grid b(j) = 2^{j0+j} and mixes them with the meta step above; instance j0
// comes from the fast policy so every instance is feasible.
RegretTrace run_parameter_free(const SspMdp& mdp, const CostStream& stream, long K,
                               const ParameterFreeOptions& options = {},
                               const EpisodeObserver& observer = {});

} // namespace sspomd
