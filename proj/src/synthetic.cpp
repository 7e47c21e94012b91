#include "bkt/synthetic.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

#include "bkt/errors.hpp"
#include "bkt/rng.hpp"

namespace bkt {

namespace {

void validate_spec(const SyntheticSpec& spec) {
    auto violations = validate_params(spec.params);
    if (!violations.empty())
        throw ConfigError("invalid generating parameters: " + violations.front().field +
                          ": " + violations.front().message);
    if (spec.num_students < 1)
        throw ConfigError("num_students must be >= 1");
    if (!spec.lengths.empty() && spec.lengths.size() != spec.num_students)
        throw ConfigError("per-student lengths must cover every student");
    std::size_t max_len = spec.sequence_length;
    for (std::size_t len : spec.lengths)
        max_len = std::max(max_len, len);
    if (spec.lengths.empty() && spec.sequence_length < 1)
        throw ConfigError("sequence_length must be >= 1");
    for (std::size_t len : spec.lengths)
        if (len < 1)
            throw ConfigError("every sequence length must be >= 1");
    const auto m = static_cast<std::int32_t>(spec.params.num_learn_classes());
    const auto n = static_cast<std::int32_t>(spec.params.num_guess_classes());
    if (!spec.learn_schedule.empty() && spec.learn_schedule.size() < max_len)
        throw ConfigError("learn_schedule shorter than the longest sequence");
    if (!spec.guess_schedule.empty() && spec.guess_schedule.size() < max_len)
        throw ConfigError("guess_schedule shorter than the longest sequence");
    for (std::int32_t v : spec.learn_schedule)
        if (v < 0 || v >= m)
            throw ConfigError("learn_schedule class " + std::to_string(v) + " out of range");
    for (std::int32_t v : spec.guess_schedule)
        if (v < 0 || v >= n)
            throw ConfigError("guess_schedule class " + std::to_string(v) + " out of range");
}

std::vector<std::string> class_names(std::size_t count, char prefix) {
    if (count == 1)
        return {"default"};
    std::vector<std::string> out;
    out.reserve(count);
    for (std::size_t i = 0; i < count; ++i)
        out.push_back(prefix + std::to_string(i));
    return out;
}

std::string student_name(std::size_t index) {
    char buf[24];
    std::snprintf(buf, sizeof(buf), "s%05zu", index);
    return buf;
}

} // namespace

SyntheticResult generate(const SyntheticSpec& spec) {
    validate_spec(spec);
    const ModelParams& p = spec.params;

    SyntheticResult result;
    SkillData skill;
    skill.name = spec.skill_name;
    skill.labels.learn = class_names(p.num_learn_classes(), 'l');
    skill.labels.guess = class_names(p.num_guess_classes(), 'g');
    skill.sequences.resize(spec.num_students);
    result.states.resize(spec.num_students);

    for (std::size_t s = 0; s < spec.num_students; ++s) {
        const std::size_t T = spec.lengths.empty() ? spec.sequence_length : spec.lengths[s];
        Rng rng(mix_seed(spec.seed, s, 0x57CDu));
        Sequence& seq = skill.sequences[s];
        seq.student = student_name(s);
        seq.obs.resize(T);
        seq.learn_classes.resize(T);
        seq.guess_classes.resize(T);
        seq.scored.assign(T, 1);
        std::vector<std::uint8_t>& states = result.states[s];
        states.resize(T);

        int state = rng.bernoulli(p.prior) ? kLearned : kUnlearned;
        for (std::size_t t = 0; t < T; ++t) {
            const std::int32_t lc = spec.learn_schedule.empty() ? 0 : spec.learn_schedule[t];
            const std::int32_t gc = spec.guess_schedule.empty() ? 0 : spec.guess_schedule[t];
            seq.learn_classes[t] = lc;
            seq.guess_classes[t] = gc;
            states[t] = static_cast<std::uint8_t>(state);

            const auto j = static_cast<std::size_t>(gc);
            const bool correct = state == kLearned ? !rng.bernoulli(p.slips[j])
                                                   : rng.bernoulli(p.guesses[j]);
            seq.obs[t] = correct ? 1 : 0;

            if (t + 1 < T) {
                const auto i =
                    static_cast<std::size_t>(spec.learn_schedule.empty()
                                                 ? 0
                                                 : spec.learn_schedule[t + 1]);
                if (state == kUnlearned)
                    state = rng.bernoulli(p.learns[i]) ? kLearned : kUnlearned;
                else
                    state = rng.bernoulli(p.forgets[i]) ? kUnlearned : kLearned;
            }
        }
    }
    result.dataset.skills.push_back(std::move(skill));
    return result;
}

void write_states_csv(const SyntheticResult& result, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw IoError("cannot open \"" + path + "\" for writing");
    out << "skill_name,user_id,step,state\n";
    const SkillData& skill = result.dataset.skills.front();
    for (std::size_t s = 0; s < skill.sequences.size(); ++s)
        for (std::size_t t = 0; t < result.states[s].size(); ++t)
            out << skill.name << ',' << skill.sequences[s].student << ',' << (t + 1) << ','
                << int(result.states[s][t]) << "\n";
    if (!out)
        throw IoError("failed writing \"" + path + "\"");
}

double find_worst_case_learn_rate(const ModelParams& base, std::size_t length,
                                  double target, double granularity) {
    if (length < 1)
        throw ConfigError("sequence length must be >= 1");
    if (!(granularity > 0.0) || granularity > 1.0)
        throw ConfigError("granularity must be in (0, 1]");

    // expected mastery after `length` transitions: 1 - (1-prior)(1-learn)^length
    const auto steps = static_cast<std::size_t>(std::llround(1.0 / granularity));
    double best_rate = 0.0;
    double best_err = 0.0;
    for (std::size_t k = 0; k <= steps; ++k) {
        const double rate = std::min(1.0, static_cast<double>(k) * granularity);
        const double expected =
            1.0 - (1.0 - base.prior) * std::pow(1.0 - rate, static_cast<double>(length));
        const double err = std::abs(expected - target);
        if (k == 0 || err < best_err) {
            best_err = err;
            best_rate = rate;
        }
    }
    return best_rate;
}

} // namespace bkt
