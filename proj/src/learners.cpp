#include "sspomd/learners.hpp"

#include <algorithm>
#include <cmath>

#include "sspomd/regularizers.hpp"

namespace sspomd {

namespace {
const double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kE = 2.718281828459045;
} // namespace

void BaseConfig::validate() const {
    if (!(T > kE)) throw BadParam("BaseConfig: need T > e");
    if (!(M > 0) || !(T * M > kE)) throw BadParam("BaseConfig: need T*M > e so p > 1");
    if (K < 1 || !(D >= 1.0)) throw BadParam("BaseConfig: need K >= 1 and D >= 1");
    const double pp = p();
    const double cap = 4.0 * std::pow(M, -1.0 / pp);
    if (!(eta() <= cap))
        throw BadParam("BaseConfig: K too small, eta exceeds 4 M^{-1/p} (eta=" +
                       std::to_string(eta()) + ", cap=" + std::to_string(cap) + ")");
}

double stability_slack(double p, double cert_m, const CostVector& c, const Eigen::ArrayXd& q) {
    double lhs = 0.0, loss = 0.0;
    const double coeff = p / (p + 1.0);
    for (const auto& [sa, v] : c.entries()) {
        const double qi = q[sa];
        loss += v * qi;
        if (qi > 0.0) lhs += v * v * coeff * std::pow(qi, 1.0 - 1.0 / p);
    }
    const double rhs = std::pow(cert_m, 1.0 / p) * (1.0 + loss);
    return rhs - lhs;
}

RegretTrace run_omd(const SspMdp& mdp, const CostStream& stream, long K, double T,
                    RegularizerSpec spec, double eta, double cert_m, ProjectionOptions opts,
                    const EpisodeObserver& observer) {
    if (K < 1) throw BadParam("run_omd: need K >= 1");
    OmdEngine engine(mdp, spec, T, opts);
    auto [q1, rep1] = engine.init_occupancy();

    RegretTrace trace;
    trace.records.reserve(K);
    IntervalInfo interval;
    interval.start_episode = 1;
    interval.b = 0;
    interval.m_guess = cert_m;
    interval.T = T;
    interval.eta = eta;
    interval.spec = spec;
    if (spec.kind == RegKind::LrNorm) {
        interval.p = spec.p;
        interval.penalty_rhs = spec.p * std::pow(T, 1.0 + 1.0 / spec.p);
    } else {
        interval.p = 0;
        interval.penalty_rhs = kNaN;
    }
    interval.psi_q1 = psi_value(spec, q1.values);
    trace.intervals.push_back(interval);

    for (long k = 1; k <= K; ++k) {
        const Eigen::ArrayXd& q = engine.occupancy();
        if (observer) observer(k, q);
        const CostVector c = stream(k);
        EpisodeRecord rec;
        rec.episode = k;
        rec.learner_loss = c.dot(q);
        if (spec.kind == RegKind::LrNorm && cert_m > 0) {
            const double m_eff = std::max(cert_m, sparsity_of(c, SparsityMode::L1));
            rec.stability_cert = stability_slack(spec.p, m_eff, c, q);
        }
        auto [qn, rep] = engine.step(c, eta);
        rec.proj_iters = rep.iterations;
        rec.kkt_residual = rep.kkt_residual;
        trace.records.push_back(rec);
        trace.total_loss += rec.learner_loss;
    }
    return trace;
}

RegretTrace run_base_omd(const SspMdp& mdp, const CostStream& stream, const BaseConfig& cfg,
                         ProjectionOptions opts, const EpisodeObserver& observer) {
    cfg.validate();
    return run_omd(mdp, stream, cfg.K, cfg.T, RegularizerSpec::lr_norm(cfg.p()), cfg.eta(), cfg.M,
                   opts, observer);
}

SparseAgnosticLearner::SparseAgnosticLearner(const SspMdp& mdp, double T, double D, long K,
                                             SparsityMode mode, ProjectionOptions opts)
    : mdp_(&mdp), T_(T), D_(D), K_(K), mode_(mode), opts_(opts) {
    if (!(T > 0) || !(D >= 1.0) || K < 1)
        throw BadParam("SparseAgnosticLearner: need T > 0, D >= 1, K >= 1");
    if (!(std::log(4.0 * T) > 1.0))
        throw BadParam("SparseAgnosticLearner: need m(1)*T > e so p(1) > 1");
    b_ = 1;
    start_interval(1);
}

void SparseAgnosticLearner::start_interval(long next_episode) {
    m_ = std::pow(2.0, std::pow(2.0, b_));
    p_ = std::log(m_ * T_);
    eta_ = std::sqrt(p_ * std::pow(T_, 1.0 + 1.0 / p_) /
                     (static_cast<double>(K_) * D_ * std::pow(m_, 1.0 / p_)));
    engine_ = std::make_unique<OmdEngine>(*mdp_, RegularizerSpec::lr_norm(p_), T_, opts_);
    auto [q1, rep] = engine_->init_occupancy();

    IntervalInfo info;
    info.start_episode = next_episode;
    info.b = b_;
    info.m_guess = m_;
    info.T = T_;
    info.p = p_;
    info.eta = eta_;
    info.psi_q1 = psi_value(engine_->spec(), q1.values);
    info.penalty_rhs = p_ * std::pow(T_, 1.0 + 1.0 / p_);
    info.spec = engine_->spec();
    intervals_.push_back(info);
}

SparseAgnosticLearner::StepOut SparseAgnosticLearner::observe(const CostVector& c) {
    ++episode_;
    StepOut out;
    const Eigen::ArrayXd& q = engine_->occupancy();
    out.loss = c.dot(q);
    const double s = sparsity_of(c, mode_);
    out.stability_slack = stability_slack(p_, std::max(m_, sparsity_of(c, SparsityMode::L1)), c, q);
    if (s <= m_) {
        auto [qn, rep] = engine_->step(c, eta_);
        out.proj_iters = rep.iterations;
        out.kkt = rep.kkt_residual;
    } else {
        // Exceeded the guess: jump b to cover the observed level and restart
        // from the regularizer minimum; the triggering loss was already charged.
        b_ = static_cast<int>(std::ceil(std::log2(std::log2(s))));
        start_interval(episode_ + 1);
        out.restarted = true;
    }
    return out;
}

RegretTrace run_sparse_agnostic(const SspMdp& mdp, const CostStream& stream, double T, double D,
                                long K, SparsityMode mode, ProjectionOptions opts,
                                const EpisodeObserver& observer) {
    SparseAgnosticLearner learner(mdp, T, D, K, mode, opts);
    RegretTrace trace;
    trace.records.reserve(K);
    for (long k = 1; k <= K; ++k) {
        if (observer) observer(k, learner.occupancy());
        const CostVector c = stream(k);
        const int b_played = learner.b();
        auto step = learner.observe(c);
        EpisodeRecord rec;
        rec.episode = k;
        rec.learner_loss = step.loss;
        rec.stability_cert = step.stability_slack;
        rec.proj_iters = step.proj_iters;
        rec.kkt_residual = step.kkt;
        rec.interval_b = b_played;
        trace.records.push_back(rec);
        trace.total_loss += step.loss;
    }
    trace.intervals = learner.intervals();
    return trace;
}

Eigen::VectorXd meta_weights_update(const Eigen::VectorXd& weights, const Eigen::VectorXd& eta,
                                    const Eigen::VectorXd& g) {
    const long n = weights.size();
    if (eta.size() != n || g.size() != n) throw BadParam("meta_weights_update: size mismatch");
    Eigen::VectorXd logw(n);
    for (long j = 0; j < n; ++j) logw[j] = std::log(std::max(weights[j], 1e-300));

    const auto total = [&](double mu) {
        double acc = 0.0;
        for (long j = 0; j < n; ++j) acc += std::exp(logw[j] - eta[j] * (g[j] + mu));
        return acc;
    };

    // sum_j w(j) exp(-eta_j (g_j + mu)) is continuous and strictly decreasing
    // in mu, so the normalizer is the unique root of total(mu) = 1.
    const double eta_min = eta.minCoeff();
    if (!(eta_min > 0)) throw BadParam("meta_weights_update: rates must be positive");
    double lo = -50.0 / eta_min, hi = 50.0 / eta_min;
    for (int guard = 0; guard < 200 && total(lo) < 1.0; ++guard) lo = lo * 2.0 - 1.0;
    for (int guard = 0; guard < 200 && total(hi) > 1.0; ++guard) hi = hi * 2.0 + 1.0;
    for (int it = 0; it < 200 && hi - lo > 1e-14 * std::max(1.0, std::abs(lo)); ++it) {
        const double mid = 0.5 * (lo + hi);
        (total(mid) >= 1.0 ? lo : hi) = mid;
    }
    const double mu = 0.5 * (lo + hi);

    Eigen::VectorXd out(n);
    for (long j = 0; j < n; ++j)
        out[j] = std::max(std::exp(logw[j] - eta[j] * (g[j] + mu)), 1e-300);
    out /= out.sum();
    return out;
}

MetaState meta_step(const MetaState& state, const Eigen::VectorXd& losses) {
    if (losses.size() != state.weights.size()) throw BadParam("meta_step: size mismatch");
    Eigen::VectorXd g = losses + 4.0 * state.eta.cwiseProduct(losses.cwiseProduct(losses));
    return {meta_weights_update(state.weights, state.eta, g), state.eta};
}

RegretTrace run_parameter_free(const SspMdp& mdp, const CostStream& stream, long K,
                               const ParameterFreeOptions& options,
                               const EpisodeObserver& observer) {
    if (K < 2) throw BadParam("run_parameter_free: need K > 1");
    const FastPolicyResult fast = fast_policy_and_diameter(mdp);
    const double t_fast = fast.hitting[mdp.start_state()];
    const double D = fast.diameter;
    const int j0 = static_cast<int>(std::ceil(std::log2(std::max(t_fast, 1.0)))) - 1;
    const int N = static_cast<int>(std::ceil(std::log2(static_cast<double>(K)))) - j0;
    if (N < 1)
        throw BadParam("run_parameter_free: K too small relative to the fast-policy hitting time");
    const double m_guess =
        options.m_guess > 0 ? options.m_guess : static_cast<double>(mdp.num_pairs());

    Eigen::VectorXd b_grid(N), eta(N);
    std::vector<std::unique_ptr<SparseAgnosticLearner>> instances;
    instances.reserve(N);
    for (int j = 1; j <= N; ++j) {
        b_grid[j - 1] = std::pow(2.0, j0 + j);
        eta[j - 1] = std::pow(
            D * b_grid[j - 1] * static_cast<double>(K) * std::log(b_grid[j - 1] * m_guess), -0.25);
        instances.push_back(std::make_unique<SparseAgnosticLearner>(
            mdp, b_grid[j - 1], D, K, options.mode, options.proj));
    }

    // Prior: p_1(j) = eta_j / (eta_1 N) for j != 1, remainder on the first.
    Eigen::VectorXd weights(N);
    double rest = 0.0;
    for (int j = 1; j < N; ++j) {
        weights[j] = eta[j] / (eta[0] * N);
        rest += weights[j];
    }
    weights[0] = 1.0 - rest;

    CounterRng rng(options.seed);
    RegretTrace trace;
    trace.records.reserve(K);
    trace.meta_T_grid.assign(b_grid.data(), b_grid.data() + N);
    trace.meta_eta.assign(eta.data(), eta.data() + N);

    Eigen::VectorXd losses(N);
    for (long k = 1; k <= K; ++k) {
        // Sample the executed instance, then reveal the cost to all of them.
        int jk = 0;
        {
            const double u = rng.next_double();
            double acc = 0.0;
            for (int j = 0; j < N; ++j) {
                acc += weights[j];
                if (u < acc || j == N - 1) {
                    jk = j;
                    break;
                }
            }
        }
        if (observer) observer(k, instances[jk]->occupancy());
        const CostVector c = stream(k);

        int proj_iters = 0;
        double kkt = 0;
        for (int j = 0; j < N; ++j) losses[j] = c.dot(instances[j]->occupancy());
        const double expected_loss = weights.dot(losses);
        const double realized_loss = losses[jk];
        const int b_played = instances[jk]->b();
        for (int j = 0; j < N; ++j) {
            auto step = instances[j]->observe(c);
            proj_iters += step.proj_iters;
            kkt = std::max(kkt, step.kkt);
        }
        weights = meta_weights_update(
            weights, eta, losses + 4.0 * eta.cwiseProduct(losses.cwiseProduct(losses)));

        EpisodeRecord rec;
        rec.episode = k;
        rec.learner_loss = options.realized_accounting ? realized_loss : expected_loss;
        rec.proj_iters = proj_iters;
        rec.kkt_residual = kkt;
        rec.interval_b = b_played;
        rec.sampled_instance = jk;
        trace.records.push_back(rec);
        trace.total_loss += rec.learner_loss;
    }
    return trace;
}

} // namespace sspomd
