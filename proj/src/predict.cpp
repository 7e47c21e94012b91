#include "bkt/predict.hpp"

#include <string>

#include "bkt/errors.hpp"

namespace bkt {

PredictionTrace predict(const ModelParams& p, const Sequence& seq) {
    auto violations = validate_params(p);
    if (!violations.empty())
        throw ConfigError("invalid parameters: " + violations.front().field + ": " +
                          violations.front().message);

    const std::size_t T = seq.length();
    PredictionTrace trace;
    trace.p_correct.resize(T);
    trace.mastery.resize(T);
    trace.mastery_prior.resize(T);
    trace.scored = seq.scored.empty() ? std::vector<std::uint8_t>(T, 1) : seq.scored;

    double mastery_prior = p.prior;
    for (std::size_t t = 0; t < T; ++t) {
        if (t > 0) {
            const auto i = static_cast<std::size_t>(seq.learn_classes[t]);
            mastery_prior = propagate_prior(trace.mastery[t - 1], p.learns[i], p.forgets[i], 1);
        }
        const auto j = static_cast<std::size_t>(seq.guess_classes[t]);
        const double guess = p.guesses[j];
        const double slip = p.slips[j];
        trace.mastery_prior[t] = mastery_prior;
        trace.p_correct[t] = mastery_prior * (1.0 - slip) + (1.0 - mastery_prior) * guess;

        const double numer = seq.obs[t] ? mastery_prior * (1.0 - slip) : mastery_prior * slip;
        const double denom = seq.obs[t] ? trace.p_correct[t] : 1.0 - trace.p_correct[t];
        if (!(denom > 0.0))
            throw DegeneracyError("observation at step " + std::to_string(t) +
                                  " of student \"" + seq.student +
                                  "\" has probability zero under the current parameters");
        trace.mastery[t] = numer / denom;
    }
    return trace;
}

MasteryClassification classify_mastery(const PredictionTrace& trace, double threshold) {
    MasteryClassification out;
    out.mastered.resize(trace.mastery.size());
    for (std::size_t t = 0; t < trace.mastery.size(); ++t) {
        out.mastered[t] = trace.mastery[t] >= threshold ? 1 : 0;
        if (out.mastered[t] && !out.first_step)
            out.first_step = t;
    }
    return out;
}

double propagate_prior(double mastery, double learn, double forget, std::size_t steps) {
    for (std::size_t i = 0; i < steps; ++i)
        mastery = mastery * (1.0 - forget) + (1.0 - mastery) * learn;
    return mastery;
}

} // namespace bkt
