#include "sspomd/mdp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <Eigen/Dense>
#include <Eigen/SparseCore>
#include <Eigen/SparseLU>

namespace sspomd {

namespace {

constexpr int kMaxSweeps = 1000000;
constexpr double kSweepTol = 1e-10;
// Dense LU up to this many state-action pairs, sparse LU beyond.
constexpr int kDenseLimit = 5000;

} // namespace

SspMdp::SspMdp(int num_states, int num_actions, int start_state,
               std::vector<Transition> transitions)
    : num_states_(num_states), num_actions_(num_actions), start_state_(start_state) {
    if (num_states <= 0 || num_actions <= 0)
        throw BadParam("SspMdp: need at least one state and one action");
    if (start_state < 0 || start_state >= num_states)
        throw BadParam("SspMdp: start state out of range");

    const int pairs = num_states * num_actions;
    std::vector<int> counts(pairs, 0);
    for (const auto& t : transitions) {
        if (t.s < 0 || t.s >= num_states || t.a < 0 || t.a >= num_actions)
            throw BadParam("SspMdp: transition (s,a) out of range");
        if (t.next != kGoal && (t.next < 0 || t.next >= num_states))
            throw BadParam("SspMdp: transition target out of range");
        ++counts[sa_index(t.s, t.a)];
    }
    row_ptr_.assign(pairs + 1, 0);
    for (int i = 0; i < pairs; ++i) row_ptr_[i + 1] = row_ptr_[i] + counts[i];
    next_.resize(transitions.size());
    prob_.resize(transitions.size());
    std::vector<int> cursor(row_ptr_.begin(), row_ptr_.end() - 1);
    for (const auto& t : transitions) {
        const int at = cursor[sa_index(t.s, t.a)]++;
        next_[at] = t.next;
        prob_[at] = t.prob;
    }
}

double SspMdp::goal_prob(int s, int a) const {
    double p = 0.0;
    auto [lo, hi] = row_range(sa_index(s, a));
    for (int i = lo; i < hi; ++i)
        if (next_[i] == kGoal) p += prob_[i];
    return p;
}

void SspMdp::validate() const {
    for (int s = 0; s < num_states_; ++s) {
        for (int a = 0; a < num_actions_; ++a) {
            auto [lo, hi] = row_range(sa_index(s, a));
            if (lo == hi)
                throw BadParam("SspMdp: no outgoing distribution at (s=" + std::to_string(s) +
                               ", a=" + std::to_string(a) + ")");
            double sum = 0.0;
            for (int i = lo; i < hi; ++i) {
                if (!(prob_[i] >= 0.0))
                    throw BadParam("SspMdp: negative transition probability");
                sum += prob_[i];
            }
            if (std::abs(sum - 1.0) > kTolProb)
                throw BadParam("SspMdp: outgoing probabilities at (s=" + std::to_string(s) +
                               ", a=" + std::to_string(a) + ") sum to " + std::to_string(sum));
        }
    }
}

std::vector<Transition> SspMdp::transitions() const {
    std::vector<Transition> out;
    out.reserve(next_.size());
    for (int s = 0; s < num_states_; ++s)
        for (int a = 0; a < num_actions_; ++a) {
            auto [lo, hi] = row_range(sa_index(s, a));
            for (int i = lo; i < hi; ++i) out.push_back({s, a, next_[i], prob_[i]});
        }
    return out;
}

CostVector::CostVector(std::vector<std::pair<int, double>> entries, long episode_index)
    : episode_index_(episode_index) {
    std::sort(entries.begin(), entries.end());
    entries_.reserve(entries.size());
    for (const auto& [sa, c] : entries) {
        if (c == 0.0) continue;
        if (!(c > 0.0) || c > 1.0)
            throw DomainError("CostVector: costs must lie in [0, 1]");
        if (!entries_.empty() && entries_.back().first == sa)
            throw BadParam("CostVector: duplicate entry for a state-action pair");
        entries_.emplace_back(sa, c);
        l1_ += c;
    }
}

double CostVector::value_at(int sa) const {
    auto it = std::lower_bound(entries_.begin(), entries_.end(), sa,
                               [](const auto& e, int key) { return e.first < key; });
    return (it != entries_.end() && it->first == sa) ? it->second : 0.0;
}

double CostVector::dot(const Eigen::ArrayXd& q) const {
    double acc = 0.0;
    for (const auto& [sa, c] : entries_) acc += c * q[sa];
    return acc;
}

Policy::Policy(int num_states, int num_actions)
    : num_states_(num_states), num_actions_(num_actions),
      probs_(static_cast<size_t>(num_states) * num_actions, 0.0) {}

void Policy::set_deterministic(int s, int a) {
    for (int b = 0; b < num_actions_; ++b) probs_[s * num_actions_ + b] = 0.0;
    probs_[s * num_actions_ + a] = 1.0;
}

void Policy::set_row_uniform(int s) {
    const double u = 1.0 / num_actions_;
    for (int b = 0; b < num_actions_; ++b) probs_[s * num_actions_ + b] = u;
}

void Policy::copy_row_from(const Policy& other, int s) {
    for (int b = 0; b < num_actions_; ++b)
        probs_[s * num_actions_ + b] = other.prob(s, b);
}

Policy Policy::uniform(int num_states, int num_actions) {
    Policy pi(num_states, num_actions);
    for (int s = 0; s < num_states; ++s) pi.set_row_uniform(s);
    return pi;
}

void Policy::validate() const {
    for (int s = 0; s < num_states_; ++s) {
        double sum = 0.0;
        for (int a = 0; a < num_actions_; ++a) {
            const double p = prob(s, a);
            if (!(p >= 0.0)) throw BadParam("Policy: negative probability");
            sum += p;
        }
        if (std::abs(sum - 1.0) > kTolProb)
            throw BadParam("Policy: row " + std::to_string(s) + " sums to " + std::to_string(sum));
    }
}

namespace {

// Solves (I - P_pi) x = rhs, or the transposed system used for occupancies.
// P_pi(s, s') = sum_a pi(a|s) P(s'|s,a); the goal column is dropped.
Eigen::VectorXd solve_policy_system(const SspMdp& mdp, const Policy& policy,
                                    const Eigen::VectorXd& rhs, bool transpose) {
    const int S = mdp.num_states();
    const int A = mdp.num_actions();

    auto check = [&](const Eigen::VectorXd& x, const auto& apply_residual) {
        if (!x.allFinite()) throw ImproperPolicy("policy evaluation: non-finite solution");
        Eigen::VectorXd r = apply_residual(x);
        const double scale = std::max(1.0, rhs.lpNorm<Eigen::Infinity>());
        if (r.lpNorm<Eigen::Infinity>() > 1e-6 * std::max(scale, x.lpNorm<Eigen::Infinity>()))
            throw ImproperPolicy("policy evaluation: singular or ill-conditioned system");
    };

    if (static_cast<long>(S) * A <= kDenseLimit) {
        Eigen::MatrixXd M = Eigen::MatrixXd::Identity(S, S);
        for (int s = 0; s < S; ++s)
            for (int a = 0; a < A; ++a) {
                const double pa = policy.prob(s, a);
                if (pa == 0.0) continue;
                auto [lo, hi] = mdp.row_range(mdp.sa_index(s, a));
                for (int i = lo; i < hi; ++i) {
                    const int n = mdp.next_at(i);
                    if (n == kGoal) continue;
                    if (transpose)
                        M(n, s) -= pa * mdp.prob_at(i);
                    else
                        M(s, n) -= pa * mdp.prob_at(i);
                }
            }
        Eigen::PartialPivLU<Eigen::MatrixXd> lu(M);
        Eigen::VectorXd x = lu.solve(rhs);
        x += lu.solve(rhs - M * x); // one refinement step
        check(x, [&](const Eigen::VectorXd& y) { return (rhs - M * y).eval(); });
        return x;
    }

    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(mdp.nnz() + S);
    for (int s = 0; s < S; ++s) trips.emplace_back(s, s, 1.0);
    for (int s = 0; s < S; ++s)
        for (int a = 0; a < A; ++a) {
            const double pa = policy.prob(s, a);
            if (pa == 0.0) continue;
            auto [lo, hi] = mdp.row_range(mdp.sa_index(s, a));
            for (int i = lo; i < hi; ++i) {
                const int n = mdp.next_at(i);
                if (n == kGoal) continue;
                if (transpose)
                    trips.emplace_back(n, s, -pa * mdp.prob_at(i));
                else
                    trips.emplace_back(s, n, -pa * mdp.prob_at(i));
            }
        }
    Eigen::SparseMatrix<double> M(S, S);
    M.setFromTriplets(trips.begin(), trips.end());
    Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
    lu.analyzePattern(M);
    lu.factorize(M);
    if (lu.info() != Eigen::Success)
        throw ImproperPolicy("policy evaluation: sparse factorization failed");
    Eigen::VectorXd x = lu.solve(rhs);
    x += lu.solve(rhs - M * x);
    check(x, [&](const Eigen::VectorXd& y) { return (rhs - M * y).eval(); });
    return x;
}

Eigen::VectorXd policy_cost_row(const SspMdp& mdp, const Policy& policy, const CostVector& cost) {
    Eigen::VectorXd c = Eigen::VectorXd::Zero(mdp.num_states());
    for (const auto& [sa, v] : cost.entries()) {
        const int s = sa / mdp.num_actions();
        const int a = sa % mdp.num_actions();
        c[s] += policy.prob(s, a) * v;
    }
    return c;
}

} // namespace

FastPolicyResult fast_policy_and_diameter(const SspMdp& mdp) {
    const int S = mdp.num_states();
    const int A = mdp.num_actions();
    Eigen::VectorXd value = Eigen::VectorXd::Zero(S);
    Eigen::VectorXd next_value(S);

    for (int sweep = 0; sweep < kMaxSweeps; ++sweep) {
        for (int s = 0; s < S; ++s) {
            double best = std::numeric_limits<double>::infinity();
            for (int a = 0; a < A; ++a) {
                double acc = 1.0;
                auto [lo, hi] = mdp.row_range(mdp.sa_index(s, a));
                for (int i = lo; i < hi; ++i)
                    if (mdp.next_at(i) != kGoal) acc += mdp.prob_at(i) * value[mdp.next_at(i)];
                best = std::min(best, acc);
            }
            next_value[s] = best;
        }
        const double delta = (next_value - value).lpNorm<Eigen::Infinity>();
        value.swap(next_value);
        if (value.maxCoeff() > kValueCeiling)
            throw NoProperPolicy("fast policy value iteration diverged");
        if (delta < kSweepTol) break;
    }

    Policy pi(S, A);
    for (int s = 0; s < S; ++s) {
        double best = std::numeric_limits<double>::infinity();
        int best_a = 0;
        for (int a = 0; a < A; ++a) {
            double acc = 1.0;
            auto [lo, hi] = mdp.row_range(mdp.sa_index(s, a));
            for (int i = lo; i < hi; ++i)
                if (mdp.next_at(i) != kGoal) acc += mdp.prob_at(i) * value[mdp.next_at(i)];
            if (acc < best - 1e-12) {
                best = acc;
                best_a = a;
            }
        }
        pi.set_deterministic(s, best_a);
    }

    FastPolicyResult out;
    out.policy = pi;
    try {
        out.hitting = expected_hitting_times(mdp, pi);
    } catch (const ImproperPolicy& e) {
        throw NoProperPolicy(std::string("fast policy evaluation failed: ") + e.what());
    }
    out.diameter = out.hitting.maxCoeff();
    return out;
}

Eigen::VectorXd expected_hitting_times(const SspMdp& mdp, const Policy& policy) {
    Eigen::VectorXd ones = Eigen::VectorXd::Ones(mdp.num_states());
    Eigen::VectorXd t = solve_policy_system(mdp, policy, ones, /*transpose=*/false);
    if (t.minCoeff() < -1e-8 || t.maxCoeff() > kValueCeiling)
        throw ImproperPolicy("expected_hitting_times: negative or unbounded solution");
    return t.cwiseMax(0.0);
}

Eigen::VectorXd cost_to_go(const SspMdp& mdp, const Policy& policy, const CostVector& cost) {
    Eigen::VectorXd c = policy_cost_row(mdp, policy, cost);
    Eigen::VectorXd j = solve_policy_system(mdp, policy, c, /*transpose=*/false);
    if (j.minCoeff() < -1e-8 || j.maxCoeff() > kValueCeiling)
        throw ImproperPolicy("cost_to_go: negative or unbounded solution");
    return j.cwiseMax(0.0);
}

OccupancyMeasure occupancy_of_policy(const SspMdp& mdp, const Policy& policy) {
    const int S = mdp.num_states();
    const int A = mdp.num_actions();
    Eigen::VectorXd e0 = Eigen::VectorXd::Zero(S);
    e0[mdp.start_state()] = 1.0;
    Eigen::VectorXd mu = solve_policy_system(mdp, policy, e0, /*transpose=*/true);
    if (mu.minCoeff() < -1e-8 || mu.maxCoeff() > kValueCeiling)
        throw ImproperPolicy("occupancy_of_policy: negative or unbounded state visits");

    OccupancyMeasure q;
    q.values = Eigen::ArrayXd::Zero(S * A);
    for (int s = 0; s < S; ++s) {
        const double m = std::max(mu[s], 0.0);
        for (int a = 0; a < A; ++a) q.values[mdp.sa_index(s, a)] = m * policy.prob(s, a);
    }
    q.bound = q.values.sum() + kTolFlow;
    return q;
}

Policy policy_from_occupancy(const OccupancyMeasure& q, const Policy& fallback) {
    const int S = fallback.num_states();
    const int A = fallback.num_actions();
    if (q.values.size() != static_cast<long>(S) * A)
        throw BadParam("policy_from_occupancy: dimension mismatch with fallback");
    Policy pi(S, A);
    for (int s = 0; s < S; ++s) {
        double mass = 0.0;
        for (int a = 0; a < A; ++a) mass += q.values[s * A + a];
        if (mass > kMassFloor) {
            for (int a = 0; a < A; ++a) pi.set_prob(s, a, q.values[s * A + a] / mass);
        } else {
            pi.copy_row_from(fallback, s);
        }
    }
    return pi;
}

Eigen::VectorXd flow_residual(const Eigen::ArrayXd& q, const SspMdp& mdp) {
    const int S = mdp.num_states();
    const int A = mdp.num_actions();
    Eigen::VectorXd r = Eigen::VectorXd::Zero(S);
    for (int s = 0; s < S; ++s) {
        double out = 0.0;
        for (int a = 0; a < A; ++a) out += q[s * A + a];
        r[s] = out;
    }
    for (int sa = 0; sa < mdp.num_pairs(); ++sa) {
        const double qs = q[sa];
        if (qs == 0.0) continue;
        auto [lo, hi] = mdp.row_range(sa);
        for (int i = lo; i < hi; ++i)
            if (mdp.next_at(i) != kGoal) r[mdp.next_at(i)] -= mdp.prob_at(i) * qs;
    }
    r[mdp.start_state()] -= 1.0;
    return r;
}

FlowReport check_flow_constraints(const Eigen::ArrayXd& q, const SspMdp& mdp, double T, double tol) {
    if (q.size() != mdp.num_pairs())
        throw BadParam("check_flow_constraints: vector dimension must be S*A");
    FlowReport rep;
    Eigen::VectorXd r = flow_residual(q, mdp);
    rep.max_flow_residual = 0.0;
    for (int s = 0; s < mdp.num_states(); ++s) {
        if (std::abs(r[s]) > rep.max_flow_residual) {
            rep.max_flow_residual = std::abs(r[s]);
            rep.argmax_state = s;
        }
    }
    rep.mass_slack = T - q.sum();
    rep.min_entry = q.size() > 0 ? q.minCoeff() : 0.0;
    const double scaled = tol * std::max(1.0, T);
    rep.feasible = rep.max_flow_residual <= scaled && rep.mass_slack >= -scaled &&
                   rep.min_entry >= -scaled;
    return rep;
}

double min_hitting_time_from_start(const SspMdp& mdp) {
    return fast_policy_and_diameter(mdp).hitting[mdp.start_state()];
}

} // namespace sspomd
