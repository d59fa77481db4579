#pragma once

#include <Eigen/Core>

#include "sspomd/errors.hpp"

namespace sspomd {

enum class RegKind { LrNorm, NegEnt };

// Regularizer family for mirror descent over occupancy measures:
//   LrNorm(p): psi_p(q) = p * (-1 + sum_i q_i^{1+1/p}), p >= 1.
//     p = 1 is the squared-Euclidean member, p -> infinity recovers the
//     negative entropy. Its gradient stays finite at the boundary q_i = 0.
//   NegEnt: psi(q) = sum_i q_i (log q_i - 1), with 0 log 0 := 0.
struct RegularizerSpec {
    RegKind kind = RegKind::NegEnt;
    double p = 0.0; // only meaningful for LrNorm

    // Tuned configurations use p = log(T*M) > 1; p = 1 is accepted here as the
    // closed boundary member of the family.
    static RegularizerSpec lr_norm(double p) {
        if (!(p >= 1.0)) throw BadParam("RegularizerSpec: LrNorm needs p >= 1");
        return {RegKind::LrNorm, p};
    }
    static RegularizerSpec neg_entropy() { return {RegKind::NegEnt, 0.0}; }
};

// All functions require q >= 0 elementwise and throw DomainError otherwise.
double psi_value(const RegularizerSpec& spec, const Eigen::ArrayXd& q);

// LrNorm: (p+1) q^{1/p}, finite (zero) at the boundary.
// NegEnt: log q, -infinity at zero entries; callers must guard.
Eigen::ArrayXd psi_gradient(const RegularizerSpec& spec, const Eigen::ArrayXd& q);

// Diagonal of the inverse Hessian: LrNorm p/(p+1) q^{1-1/p}; NegEnt q.
Eigen::ArrayXd psi_hessian_inv_diag(const RegularizerSpec& spec, const Eigen::ArrayXd& q);

// Bregman divergence D_psi(q, q_ref) >= 0, zero iff q == q_ref.
// For NegEnt, q_ref must be positive wherever q is.
double bregman(const RegularizerSpec& spec, const Eigen::ArrayXd& q, const Eigen::ArrayXd& q_ref);

} // namespace sspomd
