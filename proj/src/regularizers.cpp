#include "sspomd/regularizers.hpp"

#include <cmath>
#include <limits>

namespace sspomd {

namespace {

void require_nonneg(const Eigen::ArrayXd& q, const char* who) {
    if (q.size() > 0 && !(q.minCoeff() >= 0.0))
        throw DomainError(std::string(who) + ": negative entry in q");
}

// x^e for x >= 0 with 0^e := 0 (continuous extension used throughout).
inline double pow_nn(double x, double e) { return x > 0.0 ? std::pow(x, e) : 0.0; }

} // namespace

double psi_value(const RegularizerSpec& spec, const Eigen::ArrayXd& q) {
    require_nonneg(q, "psi_value");
    if (spec.kind == RegKind::LrNorm) {
        const double e = 1.0 + 1.0 / spec.p;
        double acc = 0.0;
        for (long i = 0; i < q.size(); ++i) acc += pow_nn(q[i], e);
        return spec.p * (acc - 1.0);
    }
    double acc = 0.0;
    for (long i = 0; i < q.size(); ++i)
        acc += q[i] > 0.0 ? q[i] * (std::log(q[i]) - 1.0) : 0.0;
    return acc;
}

Eigen::ArrayXd psi_gradient(const RegularizerSpec& spec, const Eigen::ArrayXd& q) {
    require_nonneg(q, "psi_gradient");
    Eigen::ArrayXd g(q.size());
    if (spec.kind == RegKind::LrNorm) {
        const double e = 1.0 / spec.p;
        for (long i = 0; i < q.size(); ++i) g[i] = (spec.p + 1.0) * pow_nn(q[i], e);
        return g;
    }
    for (long i = 0; i < q.size(); ++i)
        g[i] = q[i] > 0.0 ? std::log(q[i]) : -std::numeric_limits<double>::infinity();
    return g;
}

Eigen::ArrayXd psi_hessian_inv_diag(const RegularizerSpec& spec, const Eigen::ArrayXd& q) {
    require_nonneg(q, "psi_hessian_inv_diag");
    if (spec.kind == RegKind::LrNorm) {
        const double e = 1.0 - 1.0 / spec.p;
        Eigen::ArrayXd h(q.size());
        for (long i = 0; i < q.size(); ++i)
            h[i] = spec.p / (spec.p + 1.0) * pow_nn(q[i], e);
        return h;
    }
    return q;
}

double bregman(const RegularizerSpec& spec, const Eigen::ArrayXd& q, const Eigen::ArrayXd& q_ref) {
    require_nonneg(q, "bregman");
    require_nonneg(q_ref, "bregman");
    if (q.size() != q_ref.size()) throw BadParam("bregman: dimension mismatch");

    if (spec.kind == RegKind::LrNorm) {
        // sum { r^{1+1/p} + q [ p q^{1/p} - (p+1) r^{1/p} ] }; exactly zero per
        // entry when q == r.
        const double p = spec.p;
        double acc = 0.0;
        for (long i = 0; i < q.size(); ++i) {
            const double qi = q[i], ri = q_ref[i];
            if (qi == ri) continue;
            acc += pow_nn(ri, 1.0 + 1.0 / p) +
                   qi * (p * pow_nn(qi, 1.0 / p) - (p + 1.0) * pow_nn(ri, 1.0 / p));
        }
        return acc;
    }

    double acc = 0.0;
    for (long i = 0; i < q.size(); ++i) {
        const double qi = q[i], ri = q_ref[i];
        if (qi == ri) continue;
        if (qi > 0.0 && ri == 0.0)
            throw DomainError("bregman(NegEnt): q > 0 where q_ref == 0");
        acc += (qi > 0.0 ? qi * std::log(qi / ri) : 0.0) - qi + ri;
    }
    return acc;
}

} // namespace sspomd
