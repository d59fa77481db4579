#pragma once

#include <tuple>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "sspomd/mdp.hpp"
#include "sspomd/regularizers.hpp"

namespace sspomd {

// Multipliers of the projection Lagrangian: lambda >= 0 for the total-mass
// (hitting-time) constraint, v(s) for the per-state flow constraints.
struct DualVariables {
    double lambda = 0.0;
    Eigen::VectorXd v;
};

struct ProjectionReport {
    int iterations = 0;
    double kkt_residual = 0.0; // max of flow residual, lambda complementarity, projected dual gradient
    double flow_residual = 0.0;
    double dual_objective = 0.0;
    bool converged = false;
};

struct ProjectionOptions {
    double tol = 1e-8;    // stopping threshold on the KKT residual
    int max_iter = 100000;
    double armijo_slope = 1e-4;
    double backtrack = 0.5;
    bool throw_on_failure = true;
    std::vector<double>* objective_trace = nullptr; // per accepted step, for tests
};

// One mirror-descent step over Delta(T) is a closed-form unconstrained update
// followed by a Bregman projection, computed through the Lagrangian dual:
// minimize over (lambda >= 0, v) the dual objective whose gradient is exactly
// (T - mass, flow residuals) of the recovered primal point. The dual is solved
// by projected gradient descent with Armijo backtracking; step sizes are
// Barzilai-Borwein initialized and the multipliers are warm-started across
// episodes. An engine holds that warm-start state plus the current occupancy,
// so it is confined to one experiment thread.
class OmdEngine {
public:
    OmdEngine(const SspMdp& mdp, RegularizerSpec spec, double T, ProjectionOptions opts = {});

    const SspMdp& mdp() const { return *mdp_; }
    const RegularizerSpec& spec() const { return spec_; }
    double hitting_cap() const { return T_; }

    // q_1: Bregman projection of the all-ones point (the zero-cost step from
    // q_0 = 1). Resets warm-start state first.
    std::pair<OccupancyMeasure, ProjectionReport> init_occupancy();

    // Closed-form unconstrained minimizer of eta<q,c> + D_psi(q, current):
    // LrNorm: [q^{1/p} - eta c/(p+1)]_+^p, NegEnt: q exp(-eta c).
    Eigen::ArrayXd unconstrained_step(const CostVector& cost, double eta) const;

    // Full OMD step from the engine's current occupancy; advances the state.
    std::pair<OccupancyMeasure, ProjectionReport> step(const CostVector& cost, double eta);

    // Bregman projection of an arbitrary nonnegative point onto Delta(T);
    // adopts the result as the engine's current state.
    std::tuple<OccupancyMeasure, DualVariables, ProjectionReport> project(const Eigen::ArrayXd& q_prime);

    const Eigen::ArrayXd& occupancy() const { return q_; }
    void set_state(const Eigen::ArrayXd& q);
    const DualVariables& duals() const { return duals_; }
    void reset_warm_start();

private:
    double eval_dual(double lambda, const Eigen::VectorXd& v, Eigen::ArrayXd& q,
                     Eigen::ArrayXd& aux) const;
    void dual_gradient(const Eigen::ArrayXd& q, Eigen::VectorXd& gv, double& glam) const;
    ProjectionReport solve_dual();
    void adopt_solution();

    const SspMdp* mdp_; // non-owning; must outlive the engine
    RegularizerSpec spec_;
    double T_;
    ProjectionOptions opts_;
    double p_ = 0.0, inv_p1_ = 0.0;
    int npairs_ = 0;

    // Mirror image of the point being projected: u' = q'^{1/p} for LrNorm,
    // log q' for NegEnt. Maintained incrementally across steps (O(support)).
    Eigen::ArrayXd mirror_prime_;
    // Current occupancy and its mirror image (w_+ resp. log q).
    Eigen::ArrayXd q_;
    Eigen::ArrayXd mirror_;

    DualVariables duals_;
    double warm_alpha_ = 1.0;

    // solver scratch
    mutable Eigen::ArrayXd delta_, q_trial_, aux_trial_;
    Eigen::VectorXd gv_, gv_prev_, v_trial_;
};

// Stateless wrappers matching the per-operation contracts (fresh duals each call).
std::pair<OccupancyMeasure, ProjectionReport> init_occupancy(const SspMdp& mdp, double T,
                                                             RegularizerSpec spec,
                                                             ProjectionOptions opts = {});
Eigen::ArrayXd unconstrained_step(RegularizerSpec spec, const OccupancyMeasure& q,
                                  const CostVector& cost, double eta);
std::tuple<OccupancyMeasure, DualVariables, ProjectionReport> project(RegularizerSpec spec,
                                                                      const Eigen::ArrayXd& q_prime,
                                                                      const SspMdp& mdp, double T,
                                                                      ProjectionOptions opts = {});
std::pair<OccupancyMeasure, ProjectionReport> omd_step(RegularizerSpec spec,
                                                       const OccupancyMeasure& q,
                                                       const CostVector& cost, double eta,
                                                       const SspMdp& mdp, double T,
                                                       ProjectionOptions opts = {});

} // namespace sspomd
