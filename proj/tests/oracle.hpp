#pragma once

// Exhaustive reference for small sequences, kept deliberately independent
// of the library's recursions: every quantity is a plain sum over all 2^T
// hidden state paths, with no scaling, no dynamic programming and no reuse
// of library internals beyond the parameter container itself.

#include <array>
#include <cmath>
#include <cstdint>
#include <vector>

#include "bkt/data.hpp"
#include "bkt/model.hpp"

namespace oracle {

struct Reference {
    double log_likelihood = 0.0;
    std::vector<std::array<double, 2>> state_marginal; // P(state_t | all obs)
    std::vector<double> p_correct;                     // P(correct_t | obs before t)
};

inline double transition_prob(const bkt::ModelParams& p, int from, int to,
                              std::int32_t learn_class) {
    const double learn = p.learns[static_cast<std::size_t>(learn_class)];
    const double forget = p.forgets[static_cast<std::size_t>(learn_class)];
    if (from == 0)
        return to == 1 ? learn : 1.0 - learn;
    return to == 0 ? forget : 1.0 - forget;
}

inline double emission_prob(const bkt::ModelParams& p, int state, int obs,
                            std::int32_t guess_class) {
    const double guess = p.guesses[static_cast<std::size_t>(guess_class)];
    const double slip = p.slips[static_cast<std::size_t>(guess_class)];
    if (state == 0)
        return obs == 1 ? guess : 1.0 - guess;
    return obs == 1 ? 1.0 - slip : slip;
}

// Probability of one full hidden path together with the first `obs_prefix`
// observations of the sequence.
inline double path_prob(const bkt::ModelParams& p, const bkt::Sequence& seq,
                        std::uint32_t path_bits, std::size_t obs_prefix) {
    const std::size_t T = seq.length();
    double prob = (path_bits & 1u) ? p.prior : 1.0 - p.prior;
    for (std::size_t t = 1; t < T; ++t) {
        const int from = (path_bits >> (t - 1)) & 1u;
        const int to = (path_bits >> t) & 1u;
        prob *= transition_prob(p, from, to, seq.learn_classes[t]);
    }
    for (std::size_t t = 0; t < obs_prefix; ++t) {
        const int state = (path_bits >> t) & 1u;
        prob *= emission_prob(p, state, seq.obs[t], seq.guess_classes[t]);
    }
    return prob;
}

inline Reference enumerate(const bkt::ModelParams& p, const bkt::Sequence& seq) {
    const std::size_t T = seq.length();
    const std::uint32_t paths = 1u << T;
    Reference ref;
    ref.state_marginal.assign(T, {0.0, 0.0});
    ref.p_correct.assign(T, 0.0);

    double total = 0.0;
    for (std::uint32_t bits = 0; bits < paths; ++bits) {
        const double prob = path_prob(p, seq, bits, T);
        total += prob;
        for (std::size_t t = 0; t < T; ++t)
            ref.state_marginal[t][(bits >> t) & 1u] += prob;
    }
    ref.log_likelihood = std::log(total);
    for (std::size_t t = 0; t < T; ++t) {
        ref.state_marginal[t][0] /= total;
        ref.state_marginal[t][1] /= total;
    }

    for (std::size_t t = 0; t < T; ++t) {
        double evidence = 0.0;
        double correct = 0.0;
        for (std::uint32_t bits = 0; bits < paths; ++bits) {
            const double prob = path_prob(p, seq, bits, t);
            evidence += prob;
            correct += prob * emission_prob(p, (bits >> t) & 1u, 1, seq.guess_classes[t]);
        }
        ref.p_correct[t] = correct / evidence;
    }
    return ref;
}

} // namespace oracle
