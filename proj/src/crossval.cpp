#include "bkt/crossval.hpp"

#include <algorithm>
#include <numeric>
#include <unordered_set>

#include "bkt/em.hpp"
#include "bkt/errors.hpp"
#include "bkt/predict.hpp"
#include "bkt/rng.hpp"

namespace bkt {

namespace {

// Salts keeping fold shuffles and per-fold refits on separate streams
// from the top-level fit of the same dataset.
constexpr std::uint64_t kFoldSalt = 0xF01D;
constexpr std::uint64_t kRefitSalt = 0xCF17;

} // namespace

int FoldAssignment::fold_of(const std::string& student) const {
    for (std::size_t i = 0; i < students.size(); ++i)
        if (students[i] == student)
            return fold[i];
    throw ConfigError("student \"" + student + "\" missing from fold assignment");
}

FoldAssignment assign_folds(const std::vector<std::string>& students, int k,
                            std::uint64_t seed) {
    if (k < 2)
        throw ConfigError("cross-validation needs k >= 2");
    if (students.size() < static_cast<std::size_t>(k))
        throw ConfigError("k = " + std::to_string(k) + " exceeds the " +
                          std::to_string(students.size()) + " available students");
    FoldAssignment out;
    out.students = students;
    out.fold.resize(students.size());
    out.k = k;

    std::vector<std::size_t> perm(students.size());
    std::iota(perm.begin(), perm.end(), 0);
    Rng rng(seed);
    for (std::size_t i = perm.size(); i-- > 1;)
        std::swap(perm[i], perm[rng.below(i + 1)]);
    for (std::size_t i = 0; i < perm.size(); ++i)
        out.fold[perm[i]] = static_cast<int>(i % static_cast<std::size_t>(k));
    return out;
}

void validate_assignment(const FoldAssignment& assignment,
                         const std::vector<std::string>& students) {
    if (assignment.k < 2)
        throw ConfigError("fold assignment needs k >= 2");
    if (assignment.students.size() != assignment.fold.size())
        throw ConfigError("fold assignment lists " + std::to_string(assignment.students.size()) +
                          " students but " + std::to_string(assignment.fold.size()) + " folds");
    std::unordered_set<std::string> listed;
    std::vector<std::size_t> sizes(static_cast<std::size_t>(assignment.k), 0);
    for (std::size_t i = 0; i < assignment.students.size(); ++i) {
        if (!listed.insert(assignment.students[i]).second)
            throw ConfigError("student \"" + assignment.students[i] +
                              "\" assigned more than once");
        const int f = assignment.fold[i];
        if (f < 0 || f >= assignment.k)
            throw ConfigError("fold index " + std::to_string(f) + " outside [0, " +
                              std::to_string(assignment.k) + ")");
        ++sizes[static_cast<std::size_t>(f)];
    }
    for (const std::string& student : students)
        if (!listed.count(student))
            throw ConfigError("student \"" + student + "\" missing from fold assignment");
    if (listed.size() != students.size())
        throw ConfigError("fold assignment names students not present in the skill");
    const auto [lo, hi] = std::minmax_element(sizes.begin(), sizes.end());
    if (*hi - *lo > 1)
        throw ConfigError("fold sizes differ by more than one (" + std::to_string(*lo) +
                          " vs " + std::to_string(*hi) + ")");
}

MetricReport crossvalidate(const Dataset& ds, const ModelConfig& cfg, int k,
                           const std::vector<Metric>& metrics,
                           const std::map<std::string, FoldAssignment>* custom) {
    validate_config(cfg);
    if (k < 2)
        throw ConfigError("cross-validation needs k >= 2");

    std::vector<std::string> notes;
    std::vector<PredictionPool> pools;

    for (std::size_t skill_idx = 0; skill_idx < ds.skills.size(); ++skill_idx) {
        const SkillData& skill = ds.skills[skill_idx];
        const std::size_t m = skill.labels.learn.size();
        const std::size_t n = skill.labels.guess.size();

        std::vector<std::string> students;
        students.reserve(skill.sequences.size());
        for (const Sequence& seq : skill.sequences)
            students.push_back(seq.student);
        if (students.size() < static_cast<std::size_t>(k)) {
            notes.push_back("skill \"" + skill.name + "\": " +
                            std::to_string(students.size()) + " students < " +
                            std::to_string(k) + " folds; skipped");
            continue;
        }

        FoldAssignment folds;
        if (custom && custom->count(skill.name)) {
            folds = custom->at(skill.name);
            validate_assignment(folds, students);
        } else {
            folds = assign_folds(students, k, mix_seed(cfg.seed, kFoldSalt, skill_idx));
        }

        PredictionPool pool;
        pool.skill = skill.name;
        std::size_t fallback_steps = 0;

        for (int f = 0; f < k; ++f) {
            std::vector<Sequence> train;
            std::vector<const Sequence*> test;
            for (std::size_t s = 0; s < skill.sequences.size(); ++s) {
                if (folds.fold_of(skill.sequences[s].student) == f)
                    test.push_back(&skill.sequences[s]);
                else
                    train.push_back(skill.sequences[s]);
            }

            std::vector<std::uint8_t> learn_seen(m, 0), guess_seen(n, 0);
            for (const Sequence& seq : train) {
                for (std::size_t t = 1; t < seq.length(); ++t)
                    learn_seen[static_cast<std::size_t>(seq.learn_classes[t])] = 1;
                for (std::int32_t g : seq.guess_classes)
                    guess_seen[static_cast<std::size_t>(g)] = 1;
            }

            ModelConfig fold_cfg = cfg;
            fold_cfg.seed = mix_seed(cfg.seed, kRefitSalt + static_cast<std::uint64_t>(f),
                                     skill_idx);
            ModelParams params = fit_skill(train, m, n, fold_cfg, skill_idx).best;

            for (std::size_t i = 0; i < m; ++i) {
                if (!learn_seen[i]) {
                    params.learns[i] = params.learns[0];
                    params.forgets[i] = params.forgets[0];
                }
            }
            for (std::size_t j = 0; j < n; ++j) {
                if (!guess_seen[j]) {
                    params.guesses[j] = params.guesses[0];
                    params.slips[j] = params.slips[0];
                }
            }

            for (const Sequence* seq : test) {
                for (std::size_t t = 1; t < seq->length(); ++t)
                    if (!learn_seen[static_cast<std::size_t>(seq->learn_classes[t])])
                        ++fallback_steps;
                for (std::int32_t g : seq->guess_classes)
                    if (!guess_seen[static_cast<std::size_t>(g)])
                        ++fallback_steps;
                const PredictionTrace trace = predict(params, *seq);
                for (std::size_t t = 0; t < seq->length(); ++t) {
                    if (!trace.scored[t])
                        continue;
                    pool.truth.push_back(static_cast<double>(seq->obs[t]));
                    pool.pred.push_back(trace.p_correct[t]);
                }
            }
        }
        if (fallback_steps > 0)
            notes.push_back("skill \"" + skill.name + "\": " + std::to_string(fallback_steps) +
                            " held-out steps fell back to class-0 parameters");
        pools.push_back(std::move(pool));
    }

    if (pools.empty()) {
        MetricReport report;
        for (const Metric& metric : metrics)
            report.metric_names.push_back(metric.name);
        report.notes = std::move(notes);
        return report;
    }
    return compute_metrics(metrics, pools, std::move(notes));
}

MetricReport crossvalidate(const Dataset& ds, const ModelConfig& cfg, int k,
                           const std::vector<std::string>& metric_names) {
    return crossvalidate(ds, cfg, k, resolve_metrics(metric_names));
}

} // namespace bkt
