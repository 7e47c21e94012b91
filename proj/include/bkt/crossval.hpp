#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "bkt/data.hpp"
#include "bkt/metrics.hpp"
#include "bkt/model.hpp"

namespace bkt {

/// Student-level fold assignment: fold[i] is the fold of students[i].
struct FoldAssignment {
    std::vector<std::string> students;
    std::vector<int> fold;
    int k = 0;

    int fold_of(const std::string& student) const;
};

/// Seeded shuffle followed by round-robin assignment, so fold sizes never
/// differ by more than one. Requires 2 <= k <= students.size().
FoldAssignment assign_folds(const std::vector<std::string>& students, int k,
                            std::uint64_t seed);

/// Checks a (possibly user-supplied) assignment: every listed student
/// assigned exactly once, folds within [0, k), sizes differing by at most 1.
void validate_assignment(const FoldAssignment& assignment,
                         const std::vector<std::string>& students);

/// Grouped k-fold cross-validation: per skill, each fold's students are
/// held out, the model is refitted on the rest, and the held-out
/// predictions are pooled across folds before computing each metric once.
/// Guess/learn classes never seen in a training split fall back to class
/// 0's parameters. Skills with fewer than k students are skipped with a
/// note. `custom` overrides the seeded assignment per skill.
MetricReport crossvalidate(const Dataset& ds, const ModelConfig& cfg, int k,
                           const std::vector<Metric>& metrics,
                           const std::map<std::string, FoldAssignment>* custom = nullptr);

MetricReport crossvalidate(const Dataset& ds, const ModelConfig& cfg, int k,
                           const std::vector<std::string>& metric_names);

} // namespace bkt
