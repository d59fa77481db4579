#include "sspomd/omd.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace sspomd {

namespace {
constexpr double kFlushFloor = 1e-300; // entries below this collapse to exact 0
constexpr double kAlphaMin = 1e-14;
constexpr double kAlphaMax = 1e12;
const double kNegInf = -std::numeric_limits<double>::infinity();
} // namespace

OmdEngine::OmdEngine(const SspMdp& mdp, RegularizerSpec spec, double T, ProjectionOptions opts)
    : mdp_(&mdp), spec_(spec), T_(T), opts_(opts), npairs_(mdp.num_pairs()) {
    if (!(T > 0.0)) throw BadParam("OmdEngine: T must be positive");
    const double t_min = min_hitting_time_from_start(mdp);
    if (T < t_min - 1e-9 * std::max(1.0, t_min))
        throw InfeasibleT("Delta(T) empty: T=" + std::to_string(T) +
                          " below minimum expected hitting time " + std::to_string(t_min));
    if (spec_.kind == RegKind::LrNorm) {
        p_ = spec_.p;
        inv_p1_ = 1.0 / (p_ + 1.0);
    }
    duals_.lambda = 0.0;
    duals_.v = Eigen::VectorXd::Zero(mdp.num_states());
    delta_.resize(npairs_);
    q_trial_.resize(npairs_);
    aux_trial_.resize(npairs_);
    gv_.resize(mdp.num_states());
    v_trial_.resize(mdp.num_states());
}

void OmdEngine::reset_warm_start() {
    duals_.lambda = 0.0;
    duals_.v.setZero();
    warm_alpha_ = 1.0;
}

double OmdEngine::eval_dual(double lambda, const Eigen::VectorXd& v, Eigen::ArrayXd& q,
                            Eigen::ArrayXd& aux) const {
    const int A = mdp_->num_actions();
    // delta(s,a) = lambda + sum_{s'} P(s'|s,a) v(s') - v(s)
    for (int sa = 0; sa < npairs_; ++sa) {
        double pv = 0.0;
        auto [lo, hi] = mdp_->row_range(sa);
        for (int i = lo; i < hi; ++i) {
            const int n = mdp_->next_at(i);
            if (n >= 0) pv += mdp_->prob_at(i) * v[n];
        }
        delta_[sa] = lambda + pv - v[sa / A];
    }

    double obj;
    if (spec_.kind == RegKind::LrNorm) {
        // aux = w_+ = [q'^{1/p} - delta/(p+1)]_+ ; q = w_+^p ; terms w_+^{p+1}.
        aux = (mirror_prime_ - delta_ * inv_p1_).max(0.0);
        q = (aux.log() * p_).exp(); // log(0) -> -inf -> exp -> 0, no branch needed
        obj = (q * aux).sum();
    } else {
        // aux = log q = log q' - delta ; objective term sum q.
        aux = mirror_prime_ - delta_;
        q = aux.exp();
        obj = q.sum();
    }
    return obj + lambda * T_ - v[mdp_->start_state()];
}

void OmdEngine::dual_gradient(const Eigen::ArrayXd& q, Eigen::VectorXd& gv, double& glam) const {
    const int A = mdp_->num_actions();
    gv.setZero();
    double mass = 0.0;
    for (int sa = 0; sa < npairs_; ++sa) {
        const double qs = q[sa];
        if (qs == 0.0) continue;
        mass += qs;
        gv[sa / A] += qs;
        auto [lo, hi] = mdp_->row_range(sa);
        for (int i = lo; i < hi; ++i) {
            const int n = mdp_->next_at(i);
            if (n >= 0) gv[n] -= mdp_->prob_at(i) * qs;
        }
    }
    gv[mdp_->start_state()] -= 1.0;
    glam = T_ - mass;
}

ProjectionReport OmdEngine::solve_dual() {
    const int S = mdp_->num_states();
    double lam = duals_.lambda;
    Eigen::VectorXd v = duals_.v;

    Eigen::ArrayXd q_cur(npairs_), aux_cur(npairs_);
    double obj = eval_dual(lam, v, q_cur, aux_cur);
    Eigen::VectorXd gv(S), gv_prev(S), v_prev(S);
    double glam = 0.0;
    dual_gradient(q_cur, gv, glam);

    double alpha = warm_alpha_;
    double lam_prev = 0.0, glam_prev = 0.0;
    bool have_prev = false;
    int stall = 0;

    ProjectionReport rep;
    for (int iter = 0;; ++iter) {
        const double flow = gv.lpNorm<Eigen::Infinity>();
        const double lam_res = lam > 0.0 ? std::abs(glam) : std::max(0.0, -glam);
        const double comp = std::abs(lam * glam);
        const double kkt = std::max({flow, lam_res, comp});
        rep.iterations = iter;
        rep.kkt_residual = kkt;
        rep.flow_residual = flow;
        rep.dual_objective = obj;
        if (kkt < opts_.tol) {
            rep.converged = true;
            break;
        }
        if (iter >= opts_.max_iter || stall >= 3) break;

        if (have_prev) {
            const double dxdg =
                (lam - lam_prev) * (glam - glam_prev) + (v - v_prev).dot(gv - gv_prev);
            const double dxdx =
                (lam - lam_prev) * (lam - lam_prev) + (v - v_prev).squaredNorm();
            alpha = dxdg > 1e-300 ? dxdx / dxdg : alpha * 10.0;
            alpha = std::clamp(alpha, kAlphaMin, kAlphaMax);
        }

        lam_prev = lam;
        v_prev = v;
        glam_prev = glam;
        gv_prev = gv;

        bool accepted = false;
        double a = alpha;
        for (int bt = 0; bt < 60 && !accepted; ++bt) {
            const double lam_c = std::max(0.0, lam - a * glam);
            v_trial_ = v - a * gv;
            const double obj_c = eval_dual(lam_c, v_trial_, q_trial_, aux_trial_);
            const double dir = (lam_c - lam) * glam + (v_trial_ - v).dot(gv);
            // Relative slack keeps the line search functional when improvements
            // fall below the representable resolution of the objective.
            if (std::isfinite(obj_c) &&
                obj_c <= obj + opts_.armijo_slope * dir + 4e-16 * std::abs(obj)) {
                lam = lam_c;
                v.swap(v_trial_);
                obj = obj_c;
                q_cur.swap(q_trial_);
                aux_cur.swap(aux_trial_);
                alpha = a;
                accepted = true;
            }
            a *= opts_.backtrack;
        }
        if (!accepted) {
            ++stall;
            alpha = std::max(alpha * 1e-3, kAlphaMin);
            have_prev = false;
            continue;
        }
        stall = 0;
        have_prev = true;
        if (opts_.objective_trace) opts_.objective_trace->push_back(obj);
        dual_gradient(q_cur, gv, glam);
    }

    duals_.lambda = lam;
    duals_.v = v;
    warm_alpha_ = std::clamp(alpha, kAlphaMin, kAlphaMax);

    q_ = q_cur;
    mirror_ = aux_cur;
    for (int sa = 0; sa < npairs_; ++sa) {
        if (q_[sa] < kFlushFloor) {
            q_[sa] = 0.0;
            mirror_[sa] = spec_.kind == RegKind::LrNorm ? 0.0 : kNegInf;
        }
    }

    if (!rep.converged && opts_.throw_on_failure)
        throw NonConvergence("Bregman projection dual solver did not converge (kkt=" +
                                 std::to_string(rep.kkt_residual) + ")",
                             rep.iterations, rep.kkt_residual);
    return rep;
}

std::pair<OccupancyMeasure, ProjectionReport> OmdEngine::init_occupancy() {
    reset_warm_start();
    if (spec_.kind == RegKind::LrNorm)
        mirror_prime_ = Eigen::ArrayXd::Ones(npairs_); // 1^{1/p}
    else
        mirror_prime_ = Eigen::ArrayXd::Zero(npairs_); // log 1
    ProjectionReport rep = solve_dual();
    return {OccupancyMeasure{q_, T_}, rep};
}

Eigen::ArrayXd OmdEngine::unconstrained_step(const CostVector& cost, double eta) const {
    if (q_.size() != npairs_) throw BadParam("OmdEngine: no current occupancy");
    if (!(eta > 0.0)) throw BadParam("OmdEngine: eta must be positive");
    Eigen::ArrayXd qp = q_;
    for (const auto& [sa, c] : cost.entries()) {
        if (spec_.kind == RegKind::LrNorm) {
            const double u = std::max(mirror_[sa] - eta * inv_p1_ * c, 0.0);
            qp[sa] = u > 0.0 ? std::exp(p_ * std::log(u)) : 0.0;
        } else {
            qp[sa] = q_[sa] * std::exp(-eta * c);
        }
    }
    return qp;
}

std::pair<OccupancyMeasure, ProjectionReport> OmdEngine::step(const CostVector& cost, double eta) {
    if (q_.size() != npairs_) throw BadParam("OmdEngine: no current occupancy");
    if (!(eta > 0.0)) throw BadParam("OmdEngine: eta must be positive");
    mirror_prime_ = mirror_;
    for (const auto& [sa, c] : cost.entries()) {
        if (spec_.kind == RegKind::LrNorm)
            mirror_prime_[sa] = std::max(mirror_prime_[sa] - eta * inv_p1_ * c, 0.0);
        else
            mirror_prime_[sa] -= eta * c; // log-space; -inf entries stay -inf
    }
    ProjectionReport rep = solve_dual();
    return {OccupancyMeasure{q_, T_}, rep};
}

std::tuple<OccupancyMeasure, DualVariables, ProjectionReport> OmdEngine::project(
    const Eigen::ArrayXd& q_prime) {
    if (q_prime.size() != npairs_) throw BadParam("project: dimension must be S*A");
    if (q_prime.size() > 0 && !(q_prime.minCoeff() >= 0.0))
        throw DomainError("project: q_prime must be nonnegative");
    if (spec_.kind == RegKind::LrNorm)
        mirror_prime_ = (q_prime.log() * (1.0 / p_)).exp();
    else
        mirror_prime_ = q_prime.log();
    ProjectionReport rep = solve_dual();
    return {OccupancyMeasure{q_, T_}, duals_, rep};
}

void OmdEngine::set_state(const Eigen::ArrayXd& q) {
    if (q.size() != npairs_) throw BadParam("set_state: dimension must be S*A");
    if (q.size() > 0 && !(q.minCoeff() >= 0.0))
        throw DomainError("set_state: occupancy must be nonnegative");
    q_ = q;
    if (spec_.kind == RegKind::LrNorm)
        mirror_ = (q_.log() * (1.0 / p_)).exp();
    else
        mirror_ = q_.log();
    for (int sa = 0; sa < npairs_; ++sa) {
        if (q_[sa] < kFlushFloor) {
            q_[sa] = 0.0;
            mirror_[sa] = spec_.kind == RegKind::LrNorm ? 0.0 : kNegInf;
        }
    }
}

std::pair<OccupancyMeasure, ProjectionReport> init_occupancy(const SspMdp& mdp, double T,
                                                             RegularizerSpec spec,
                                                             ProjectionOptions opts) {
    OmdEngine engine(mdp, spec, T, opts);
    return engine.init_occupancy();
}

Eigen::ArrayXd unconstrained_step(RegularizerSpec spec, const OccupancyMeasure& q,
                                  const CostVector& cost, double eta) {
    // Elementwise closed form; no MDP needed.
    Eigen::ArrayXd qp = q.values;
    for (const auto& [sa, c] : cost.entries()) {
        if (spec.kind == RegKind::LrNorm) {
            const double u =
                std::max(std::pow(q.values[sa], 1.0 / spec.p) - eta / (spec.p + 1.0) * c, 0.0);
            qp[sa] = u > 0.0 ? std::pow(u, spec.p) : 0.0;
        } else {
            qp[sa] = q.values[sa] * std::exp(-eta * c);
        }
    }
    return qp;
}

std::tuple<OccupancyMeasure, DualVariables, ProjectionReport> project(RegularizerSpec spec,
                                                                      const Eigen::ArrayXd& q_prime,
                                                                      const SspMdp& mdp, double T,
                                                                      ProjectionOptions opts) {
    OmdEngine engine(mdp, spec, T, opts);
    return engine.project(q_prime);
}

std::pair<OccupancyMeasure, ProjectionReport> omd_step(RegularizerSpec spec,
                                                       const OccupancyMeasure& q,
                                                       const CostVector& cost, double eta,
                                                       const SspMdp& mdp, double T,
                                                       ProjectionOptions opts) {
    OmdEngine engine(mdp, spec, T, opts);
    engine.set_state(q.values);
    return engine.step(cost, eta);
}

} // namespace sspomd
