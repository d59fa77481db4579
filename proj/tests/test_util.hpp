#pragma once

#include <vector>

#include "sspomd/mdp.hpp"
#include "sspomd/rng.hpp"

namespace sspomd::testutil {

// Random MDP in which every (s,a) leads to the goal with probability >= 0.05,
// so every policy is proper. Good enough for round-trip and consistency checks.
inline SspMdp random_mdp(CounterRng& rng, int S, int A) {
    std::vector<Transition> tr;
    for (int s = 0; s < S; ++s)
        for (int a = 0; a < A; ++a) {
            const int k = 1 + static_cast<int>(rng.next_below(3));
            const double pg = 0.05 + 0.3 * rng.next_double();
            std::vector<double> w(k);
            double wsum = 0;
            for (int i = 0; i < k; ++i) {
                w[i] = 0.1 + rng.next_double();
                wsum += w[i];
            }
            tr.push_back({s, a, kGoal, pg});
            // Targets may repeat; merge by accumulating onto distinct states.
            std::vector<double> mass(S, 0.0);
            for (int i = 0; i < k; ++i)
                mass[rng.next_below(S)] += (1.0 - pg) * w[i] / wsum;
            for (int t = 0; t < S; ++t)
                if (mass[t] > 0) tr.push_back({s, a, t, mass[t]});
        }
    SspMdp mdp(S, A, 0, std::move(tr));
    mdp.validate();
    return mdp;
}

inline Policy random_policy(CounterRng& rng, int S, int A) {
    Policy pi(S, A);
    for (int s = 0; s < S; ++s) {
        double sum = 0;
        std::vector<double> w(A);
        for (int a = 0; a < A; ++a) {
            w[a] = 0.05 + rng.next_double();
            sum += w[a];
        }
        for (int a = 0; a < A; ++a) pi.set_prob(s, a, w[a] / sum);
    }
    return pi;
}

inline CostVector random_cost(CounterRng& rng, int num_pairs, int support, long episode) {
    std::vector<std::pair<int, double>> entries;
    for (int i = 0; i < support; ++i) {
        const int sa = static_cast<int>(rng.next_below(num_pairs));
        bool dup = false;
        for (const auto& [existing, _] : entries) dup = dup || existing == sa;
        if (!dup) entries.emplace_back(sa, 0.05 + 0.95 * rng.next_double());
    }
    return CostVector(std::move(entries), episode);
}

} // namespace sspomd::testutil
