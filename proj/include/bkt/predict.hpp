#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "bkt/data.hpp"
#include "bkt/model.hpp"

namespace bkt {

/// Step-by-step predictions for one sequence. mastery_prior[t] is
/// P(learned at t) given responses before t; p_correct[t] the implied
/// response probability; mastery[t] the posterior after seeing obs_t.
/// scored mirrors the sequence's scoring mask.
struct PredictionTrace {
    std::vector<double> p_correct;
    std::vector<double> mastery;       // filtered, after obs_t
    std::vector<double> mastery_prior; // before obs_t
    std::vector<std::uint8_t> scored;
};

PredictionTrace predict(const ModelParams& p, const Sequence& seq);

struct MasteryClassification {
    std::vector<std::uint8_t> mastered;     // mastery[t] >= threshold
    std::optional<std::size_t> first_step;  // earliest flagged step
};

MasteryClassification classify_mastery(const PredictionTrace& trace,
                                       double threshold = 0.95);

/// Pure prior propagation without observations: repeatedly applies
/// P(L') = P(L)(1 - forget) + (1 - P(L)) * learn for `steps` rounds.
double propagate_prior(double mastery, double learn, double forget, std::size_t steps);

} // namespace bkt
