#include "sspomd/harness.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>

#include "sspomd/regularizers.hpp"

namespace sspomd {

namespace {
constexpr double kTieBreak = 1e-9; // uniform cost perturbation against zero-cost cycles
constexpr int kMaxSweeps = 2000000;
} // namespace

ComparatorResult best_in_hindsight(const SspMdp& mdp, const std::vector<CostVector>& costs,
                                   double T_cap) {
    const int S = mdp.num_states();
    const int A = mdp.num_actions();
    Eigen::ArrayXd aggregate = Eigen::ArrayXd::Zero(mdp.num_pairs());
    for (const auto& c : costs)
        for (const auto& [sa, v] : c.entries()) aggregate[sa] += v;

    Eigen::VectorXd value = Eigen::VectorXd::Zero(S);
    Eigen::VectorXd next_value(S);
    for (int sweep = 0; sweep < kMaxSweeps; ++sweep) {
        for (int s = 0; s < S; ++s) {
            double best = std::numeric_limits<double>::infinity();
            for (int a = 0; a < A; ++a) {
                double acc = aggregate[mdp.sa_index(s, a)] + kTieBreak;
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
            throw NoProperPolicy("best_in_hindsight: aggregate value iteration diverged");
        if (delta < 1e-11 * std::max(1.0, value.maxCoeff())) break;
    }

    Policy pi(S, A);
    for (int s = 0; s < S; ++s) {
        double best = std::numeric_limits<double>::infinity();
        int best_a = 0;
        for (int a = 0; a < A; ++a) {
            double acc = aggregate[mdp.sa_index(s, a)] + kTieBreak;
            auto [lo, hi] = mdp.row_range(mdp.sa_index(s, a));
            for (int i = lo; i < hi; ++i)
                if (mdp.next_at(i) != kGoal) acc += mdp.prob_at(i) * value[mdp.next_at(i)];
            if (acc < best - 1e-15) {
                best = acc;
                best_a = a;
            }
        }
        pi.set_deterministic(s, best_a);
    }

    ComparatorResult out;
    out.policy = pi;
    out.occupancy = occupancy_of_policy(mdp, pi);
    out.total_cost = (out.occupancy.values * aggregate).sum();
    out.hitting_time = expected_hitting_times(mdp, pi)[mdp.start_state()];
    out.within_cap = out.hitting_time <= T_cap + kTolFlow * std::max(1.0, T_cap);
    return out;
}

void finalize_trace(RegretTrace& trace, const std::vector<CostVector>& costs,
                    const ComparatorResult& comparator) {
    if (static_cast<long>(costs.size()) < trace.episodes())
        throw BadParam("finalize_trace: cost stream shorter than the trace");

    // Penalty slack is constant within a tuning interval.
    std::vector<double> penalty(trace.intervals.size(),
                                std::numeric_limits<double>::quiet_NaN());
    for (size_t i = 0; i < trace.intervals.size(); ++i) {
        const auto& itv = trace.intervals[i];
        if (itv.spec.kind == RegKind::LrNorm)
            penalty[i] =
                itv.penalty_rhs - (psi_value(itv.spec, comparator.occupancy.values) - itv.psi_q1);
    }

    double cum = 0.0, total_cmp = 0.0;
    size_t itv = 0;
    for (auto& rec : trace.records) {
        while (itv + 1 < trace.intervals.size() &&
               trace.intervals[itv + 1].start_episode <= rec.episode)
            ++itv;
        rec.comparator_loss = costs[rec.episode - 1].dot(comparator.occupancy.values);
        cum += rec.learner_loss - rec.comparator_loss;
        rec.cum_regret = cum;
        if (!trace.intervals.empty()) rec.penalty_cert = penalty[itv];
        total_cmp += rec.comparator_loss;
    }
    trace.comparator_total = total_cmp;
    trace.final_regret = cum;
}

std::vector<CostVector> materialize(const CostStream& stream, long K) {
    std::vector<CostVector> out;
    out.reserve(K);
    for (long k = 1; k <= K; ++k) out.push_back(stream(k));
    return out;
}

RolloutResult rollout(const SspMdp& mdp, const Policy& policy, const CostVector& cost,
                      CounterRng& rng, long cap) {
    RolloutResult out;
    int s = mdp.start_state();
    while (true) {
        if (out.steps >= cap)
            throw EpisodeCapExceeded("rollout: episode exceeded " + std::to_string(cap) +
                                     " steps (policy effectively improper)");
        // sample action
        double u = rng.next_double();
        int a = mdp.num_actions() - 1;
        double acc = 0.0;
        for (int b = 0; b < mdp.num_actions(); ++b) {
            acc += policy.prob(s, b);
            if (u < acc) {
                a = b;
                break;
            }
        }
        out.cost += cost.value_at(mdp.sa_index(s, a));
        ++out.steps;
        // sample transition
        u = rng.next_double();
        acc = 0.0;
        int next = kGoal;
        auto [lo, hi] = mdp.row_range(mdp.sa_index(s, a));
        for (int i = lo; i < hi; ++i) {
            acc += mdp.prob_at(i);
            if (u < acc) {
                next = mdp.next_at(i);
                break;
            }
        }
        if (next == kGoal) break;
        s = next;
    }
    return out;
}

RwMaxResult rw_max_expectation(long n, double p, long d, long trials, std::uint64_t seed) {
    if (n < 1 || d < 1 || trials < 1) throw BadParam("rw_max_expectation: need n, d, trials >= 1");
    if (!(p >= 0.5) || !(p <= 1.0 - 1.0 / static_cast<double>(n)))
        throw BadParam("rw_max_expectation: need p in [1/2, 1 - 1/n]");

    CounterRng rng(seed);
    double mean = 0.0, m2 = 0.0;
    for (long t = 0; t < trials; ++t) {
        double best = -std::numeric_limits<double>::infinity();
        for (long i = 0; i < d; ++i) {
            const double z = static_cast<double>(rng.binomial(n, p)) - p * static_cast<double>(n);
            best = std::max(best, z);
        }
        const double delta = best - mean;
        mean += delta / static_cast<double>(t + 1);
        m2 += delta * (best - mean);
    }

    RwMaxResult out;
    out.estimate = mean;
    out.std_error = trials > 1 ? std::sqrt(m2 / (trials - 1.0) / trials) : 0.0;
    out.bound = 0.02 * std::sqrt(static_cast<double>(n) * p * (1.0 - p) * std::log(d)) - 1.5;
    out.n = n;
    out.p = p;
    out.d = d;
    out.trials = trials;
    return out;
}

SlopeFit fit_line(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size() || x.size() < 2) throw BadParam("fit_line: need matched size >= 2");
    const double n = static_cast<double>(x.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0, syy = 0;
    for (size_t i = 0; i < x.size(); ++i) {
        sx += x[i];
        sy += y[i];
        sxx += x[i] * x[i];
        sxy += x[i] * y[i];
        syy += y[i] * y[i];
    }
    SlopeFit fit;
    const double den = n * sxx - sx * sx;
    fit.slope = (n * sxy - sx * sy) / den;
    fit.intercept = (sy - fit.slope * sx) / n;
    double ss_res = 0, ss_tot = 0;
    const double ybar = sy / n;
    for (size_t i = 0; i < x.size(); ++i) {
        const double pred = fit.slope * x[i] + fit.intercept;
        ss_res += (y[i] - pred) * (y[i] - pred);
        ss_tot += (y[i] - ybar) * (y[i] - ybar);
    }
    fit.r2 = ss_tot > 0 ? 1.0 - ss_res / ss_tot : 1.0;
    return fit;
}

SlopeFit fit_loglog(const std::vector<double>& x, const std::vector<double>& y) {
    std::vector<double> lx(x.size()), ly(y.size());
    for (size_t i = 0; i < x.size(); ++i) {
        if (!(x[i] > 0) || !(y[i] > 0)) throw BadParam("fit_loglog: need positive data");
        lx[i] = std::log(x[i]);
        ly[i] = std::log(y[i]);
    }
    return fit_line(lx, ly);
}

IdentityCheckResult check_unknown_trans_identity(const UnknownTransInstance& inst,
                                                 const Policy& learner, long episodes,
                                                 std::uint64_t seed, long cap) {
    std::vector<char> is_decision(inst.mdp.num_states(), 0);
    std::vector<int> astar_of(inst.mdp.num_states(), -1);
    for (size_t i = 0; i < inst.decision_states.size(); ++i) {
        is_decision[inst.decision_states[i]] = 1;
        astar_of[inst.decision_states[i]] = inst.a_star[i];
    }

    CounterRng rng(seed);
    const double jstar = inst.optimal_cost_to_go();
    double lhs_sum = 0, rhs_sum = 0, mean = 0, m2 = 0;
    for (long ep = 0; ep < episodes; ++ep) {
        long n_visits = 0, n_star = 0, steps = 0;
        int s = inst.mdp.start_state();
        while (true) {
            if (steps++ >= cap) throw EpisodeCapExceeded("identity check: episode too long");
            double u = rng.next_double();
            int a = inst.mdp.num_actions() - 1;
            double acc = 0.0;
            for (int b = 0; b < inst.mdp.num_actions(); ++b) {
                acc += learner.prob(s, b);
                if (u < acc) {
                    a = b;
                    break;
                }
            }
            if (is_decision[s]) {
                ++n_visits;
                if (a == astar_of[s]) ++n_star;
            }
            u = rng.next_double();
            acc = 0.0;
            int next = kGoal;
            auto [lo, hi] = inst.mdp.row_range(inst.mdp.sa_index(s, a));
            for (int i = lo; i < hi; ++i) {
                acc += inst.mdp.prob_at(i);
                if (u < acc) {
                    next = inst.mdp.next_at(i);
                    break;
                }
            }
            if (next == kGoal) break;
            s = next;
        }
        const double lhs = static_cast<double>(n_visits) - 1.0 - jstar;
        const double rhs = inst.epsilon * static_cast<double>(n_visits - n_star);
        lhs_sum += lhs;
        rhs_sum += rhs;
        const double x = lhs - rhs;
        const double delta = x - mean;
        mean += delta / static_cast<double>(ep + 1);
        m2 += delta * (x - mean);
    }

    IdentityCheckResult out;
    out.episodes = episodes;
    out.lhs_mean = lhs_sum / episodes;
    out.rhs_mean = rhs_sum / episodes;
    out.diff_mean = mean;
    out.diff_se = episodes > 1 ? std::sqrt(m2 / (episodes - 1.0) / episodes) : 0.0;
    return out;
}

namespace {

std::string fmt(double v) {
    if (std::isnan(v)) return "";
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

} // namespace

std::string trace_to_csv(const RegretTrace& trace) {
    std::string out = "episode,learner_loss,comparator_loss,cum_regret,penalty_cert,"
                      "stability_cert,proj_iters,kkt_residual,interval_b,sampled_instance\n";
    for (const auto& r : trace.records) {
        out += std::to_string(r.episode);
        out += ',';
        out += fmt(r.learner_loss);
        out += ',';
        out += fmt(r.comparator_loss);
        out += ',';
        out += fmt(r.cum_regret);
        out += ',';
        out += fmt(r.penalty_cert);
        out += ',';
        out += fmt(r.stability_cert);
        out += ',';
        out += std::to_string(r.proj_iters);
        out += ',';
        out += fmt(r.kkt_residual);
        out += ',';
        out += std::to_string(r.interval_b);
        out += ',';
        out += std::to_string(r.sampled_instance);
        out += '\n';
    }
    return out;
}

void write_file(const std::string& path, const std::string& contents) {
    const std::filesystem::path p(path);
    if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
    std::ofstream f(path, std::ios::binary);
    if (!f) throw BadParam("write_file: cannot open " + path);
    f << contents;
}

} // namespace sspomd
