#pragma once

#include <stdexcept>
#include <string>

namespace sspomd {

struct BadParam : std::invalid_argument {
    explicit BadParam(const std::string& what) : std::invalid_argument(what) {}
};

struct DomainError : std::domain_error {
    explicit DomainError(const std::string& what) : std::domain_error(what) {}
};

// No stationary policy reaches the goal with probability one from every state.
struct NoProperPolicy : std::runtime_error {
    explicit NoProperPolicy(const std::string& what) : std::runtime_error(what) {}
};

// A specific policy fails to reach the goal (singular/huge/non-finite evaluation).
struct ImproperPolicy : std::runtime_error {
    explicit ImproperPolicy(const std::string& what) : std::runtime_error(what) {}
};

// Requested hitting-time cap T is below the minimum achievable from the start state.
struct InfeasibleT : std::runtime_error {
    explicit InfeasibleT(const std::string& what) : std::runtime_error(what) {}
};

struct NonConvergence : std::runtime_error {
    NonConvergence(const std::string& what, int iterations, double residual)
        : std::runtime_error(what), iterations(iterations), residual(residual) {}
    int iterations;
    double residual;
};

struct EpisodeCapExceeded : std::runtime_error {
    explicit EpisodeCapExceeded(const std::string& what) : std::runtime_error(what) {}
};

} // namespace sspomd
