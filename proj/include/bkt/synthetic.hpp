#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "bkt/data.hpp"
#include "bkt/model.hpp"

namespace bkt {

/// Ground-truth generator configuration. Students draw from independent
/// substreams derived from (seed, student index), so growing num_students
/// extends the sample without reshuffling the students already drawn.
struct SyntheticSpec {
    ModelParams params;
    std::size_t num_students = 1;
    std::size_t sequence_length = 1;
    std::vector<std::size_t> lengths;          // optional per-student lengths
    std::uint64_t seed = 0;
    std::vector<std::int32_t> learn_schedule;  // class of the arrow into step t
    std::vector<std::int32_t> guess_schedule;  // class of the emission at step t
    std::string skill_name = "synthetic";
};

struct SyntheticResult {
    Dataset dataset;                                // one skill
    std::vector<std::vector<std::uint8_t>> states;  // latent mastery per student/step
};

/// Samples mastery trajectories and responses. Per student the draw order
/// is fixed: initial state, then per step the response followed by the
/// transition into the next step.
SyntheticResult generate(const SyntheticSpec& spec);

/// Writes the latent-state table (skill, student, step, state).
void write_states_csv(const SyntheticResult& result, const std::string& path);

/// Grid-searches the learn rate (step = granularity, range [0, 1]) whose
/// analytic expected mastery after `length` pure-transition steps from the
/// prior is closest to `target`; ties go to the smaller rate. Guess, slip
/// and forget entries of `base` are ignored by the propagation.
double find_worst_case_learn_rate(const ModelParams& base, std::size_t length,
                                  double target = 0.5, double granularity = 0.001);

} // namespace bkt
