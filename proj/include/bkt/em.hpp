#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "bkt/data.hpp"
#include "bkt/model.hpp"

namespace bkt {

/// Scaled forward pass. filtered[t] is the state posterior given
/// observations up to and including t; step_prob[t] = P(obs_t | obs_<t)
/// is the scaling constant, so log_likelihood = sum of log step_prob.
struct ForwardResult {
    std::vector<State2> filtered;
    std::vector<double> step_prob;
    double log_likelihood = 0.0;
};

/// Expected sufficient statistics accumulated over one or more sequences.
/// transitions[i][from][to] is the expected number of from->to moves on
/// arrows of learn class i; emissions[j][state][obs] the expected number
/// of times a student in `state` produced `obs` on steps of guess class j.
struct ExpectedCounts {
    State2 first_step_mass{0.0, 0.0};
    std::size_t sequences = 0;
    std::vector<Mat2> transitions;
    std::vector<Mat2> emissions;

    void resize(std::size_t m, std::size_t n);
    void merge(const ExpectedCounts& other);
};

/// Full E-step output for one sequence: smoothed posteriors plus the
/// sequence's contribution to the sufficient statistics.
struct EStepResult {
    std::vector<State2> state_posterior;          // P(state_t | all obs)
    std::vector<Mat2> pair_posterior;             // [from][to], arrows t -> t+1
    ExpectedCounts counts;
    double log_likelihood = 0.0;
};

struct MStepResult {
    ModelParams params;
    std::vector<std::string> notes; // zero-visit classes kept at previous values
};

struct RestartStats {
    double final_log_likelihood = 0.0;
    int iterations = 0;  // M-steps applied
    bool converged = false;
    bool failed = false; // degenerate; excluded from the winner selection
    std::vector<double> trace; // log-likelihood before each M-step, then final
};

struct FitResult {
    ModelParams best;
    std::size_t best_restart = 0;
    std::vector<RestartStats> restarts;
    std::vector<std::string> notes;
};

struct SkillFit {
    std::string skill;
    FitResult result;
};

struct FitOutcome {
    std::vector<SkillFit> skills;
    std::vector<std::string> warnings;

    const FitResult* find(const std::string& skill) const;
};

ForwardResult forward(const ModelParams& p, const Sequence& seq);

EStepResult e_step(const ModelParams& p, const Sequence& seq);

/// Re-estimates parameters from pooled expected counts. The prior is the
/// per-sequence average of the first-step posterior; transition and
/// emission rates are ratios of pooled counts. A class with no expected
/// visits keeps its previous value (noted, not fatal). Forget rates are
/// pinned to 0 unless forgets_enabled.
MStepResult m_step(const ExpectedCounts& counts, const ModelParams& previous,
                   bool forgets_enabled);

/// Multi-restart EM over every skill in the dataset. Restart r of skill k
/// draws its initial parameters from mix_seed(cfg.seed, k, r), so results
/// do not depend on thread count or the parallel flag.
FitOutcome fit(const Dataset& ds, const ModelConfig& cfg);

/// EM for a single skill's sequences (class counts m, n taken from the
/// dictionaries). skill_index feeds restart seed derivation.
FitResult fit_skill(const std::vector<Sequence>& sequences, std::size_t m, std::size_t n,
                    const ModelConfig& cfg, std::size_t skill_index);

double log_likelihood(const ModelParams& p, const std::vector<Sequence>& sequences);
double log_likelihood(const ModelParams& p, const SkillData& skill);

/// Sum over every skill in the dataset; p must be shaped for all of them.
double log_likelihood(const ModelParams& p, const Dataset& ds);

/// Bundles a fit outcome with the dataset's class labels into a portable
/// model document.
ModelDocument make_document(const Dataset& ds, const FitOutcome& outcome,
                            const ModelConfig& cfg);

} // namespace bkt
