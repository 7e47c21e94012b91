#pragma once

// Random instance generators shared by the property-style tests. Rates stay
// inside [0.02, 0.98] so no drawn instance sits on a degenerate boundary.

#include <cstdint>
#include <string>
#include <vector>

#include "bkt/data.hpp"
#include "bkt/model.hpp"
#include "bkt/rng.hpp"

namespace gen {

inline double in_range(bkt::Rng& rng, double lo, double hi) {
    return lo + (hi - lo) * rng.unit();
}

inline bkt::ModelParams random_params(bkt::Rng& rng, std::size_t m, std::size_t n,
                                      bool with_forgets) {
    bkt::ModelParams p;
    p.prior = in_range(rng, 0.02, 0.98);
    p.learns.resize(m);
    p.forgets.assign(m, 0.0);
    p.guesses.resize(n);
    p.slips.resize(n);
    for (auto& v : p.learns) v = in_range(rng, 0.02, 0.98);
    if (with_forgets)
        for (auto& v : p.forgets) v = in_range(rng, 0.02, 0.3);
    for (auto& v : p.guesses) v = in_range(rng, 0.02, 0.45);
    for (auto& v : p.slips) v = in_range(rng, 0.02, 0.45);
    return p;
}

inline bkt::Sequence random_sequence(bkt::Rng& rng, std::size_t T, std::size_t m,
                                     std::size_t n, const std::string& student = "s") {
    bkt::Sequence seq;
    seq.student = student;
    seq.obs.resize(T);
    seq.learn_classes.resize(T);
    seq.guess_classes.resize(T);
    seq.scored.assign(T, 1);
    for (std::size_t t = 0; t < T; ++t) {
        seq.obs[t] = rng.bernoulli(0.5) ? 1 : 0;
        seq.learn_classes[t] = static_cast<std::int32_t>(rng.below(m));
        seq.guess_classes[t] = static_cast<std::int32_t>(rng.below(n));
    }
    return seq;
}

inline std::vector<bkt::Sequence> random_sequences(bkt::Rng& rng, std::size_t count,
                                                   std::size_t max_T, std::size_t m,
                                                   std::size_t n) {
    std::vector<bkt::Sequence> out;
    out.reserve(count);
    for (std::size_t s = 0; s < count; ++s) {
        const std::size_t T = 1 + rng.below(max_T);
        out.push_back(random_sequence(rng, T, m, n, "s" + std::to_string(s)));
    }
    return out;
}

} // namespace gen
