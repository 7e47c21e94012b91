#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "bkt/rng.hpp"

namespace bkt {

// State indices of the two-state mastery chain.
inline constexpr int kUnlearned = 0;
inline constexpr int kLearned = 1;

/// Two-entry state vector [P(unlearned), P(learned)].
using State2 = std::array<double, 2>;

/// 2x2 matrix stored [to][from]; columns are source states, so each
/// column of a transition matrix sums to 1.
using Mat2 = std::array<State2, 2>;

/// One skill's parameters. learns/forgets are indexed by learn class,
/// guesses/slips by guess class. Standard models have one class of each
/// and all forget rates exactly 0.
struct ModelParams {
    double prior = 0.0;
    std::vector<double> learns;
    std::vector<double> forgets;
    std::vector<double> guesses;
    std::vector<double> slips;

    std::size_t num_learn_classes() const { return learns.size(); }
    std::size_t num_guess_classes() const { return guesses.size(); }

    bool operator==(const ModelParams&) const = default;
};

/// Per-class transition matrices derived from ModelParams. Matrix i is
///   [[1-learns[i], forgets[i]],
///    [learns[i],   1-forgets[i]]]
struct TransitionSet {
    std::vector<Mat2> matrices;
};

/// Initial state distribution [1-prior, prior].
using StatePrior = State2;

/// Variant flags and fitting knobs. Column names are only consulted at
/// ingestion time; fitting reads class counts from the dataset itself.
struct ModelConfig {
    bool multigs = false;
    std::string multigs_column;   // empty = dialect default
    bool multilearn = false;
    std::string multilearn_column;
    bool multiprior = false;
    bool multipair = false;
    std::string multipair_column; // item column for order pairs
    bool forgets = false;

    int num_restarts = 20;
    int max_iterations = 100;
    double convergence_tol = 1e-3; // absolute log-likelihood gain per iteration
    std::uint64_t seed = 0;
    bool parallel = false;
    int threads = 0;              // 0 = library default
    std::optional<ModelParams> fixed_init;
};

/// One invariant violation found by validate_params, e.g. {"learns[2]",
/// "value 1.25 outside [0, 1]"}.
struct ParamViolation {
    std::string field;
    std::string message;
};

/// Throws ConfigError when the flag combination is unusable (restarts < 1,
/// multiprior together with fixed_init or another learn-class variant, ...).
void validate_config(const ModelConfig& cfg);

/// Random initial parameters for a skill with m learn classes and n guess
/// classes. Draw order is fixed: prior, learns, forgets (only when the
/// forgets variant is on), guesses, slips. Guess and slip start below 0.5
/// so restarts begin on the identifiable side of the guess/slip symmetry.
/// Multiprior runs start at prior = 0, which EM then preserves.
/// A fixed_init in cfg is returned unchanged after a shape check.
ModelParams init_params(const ModelConfig& cfg, std::size_t m, std::size_t n, Rng& rng);

/// All invariant violations in p; empty result means valid.
std::vector<ParamViolation> validate_params(const ModelParams& p);

/// Shorthand: true iff validate_params(p) is empty.
bool params_valid(const ModelParams& p);

TransitionSet build_transition_set(const ModelParams& p);

StatePrior state_prior(const ModelParams& p);

/// Class index -> label maps for one skill.
struct ClassLabels {
    std::vector<std::string> learn;
    std::vector<std::string> guess;

    bool operator==(const ClassLabels&) const = default;
};

/// One fitted skill as stored in a model document.
struct SkillModel {
    ModelParams params;
    ClassLabels labels;

    bool operator==(const SkillModel&) const = default;
};

/// A full model document: fitted skills in order plus the variant flags
/// they were fitted with (so later predict/evaluate runs can rebuild the
/// same class structure from raw logs).
struct ModelDocument {
    struct Variants {
        bool multigs = false;
        std::string multigs_column;
        bool multilearn = false;
        std::string multilearn_column;
        bool multiprior = false;
        bool multipair = false;
        std::string multipair_column;
        bool forgets = false;

        bool operator==(const Variants&) const = default;
    };

    Variants variants;
    std::vector<std::string> skill_names;
    std::vector<SkillModel> skills;

    const SkillModel* find(const std::string& name) const;

    bool operator==(const ModelDocument&) const = default;
};

ModelDocument::Variants variants_of(const ModelConfig& cfg);

/// Serialize one skill section / a whole document to JSON text, and parse
/// it back. Parsing is strict: unknown or missing fields, wrong types and
/// malformed text all raise SchemaError naming the offending field.
/// Round-trips are bit-exact on every float.
std::string serialize_model(const ModelParams& p, const ClassLabels& labels);
SkillModel deserialize_model(const std::string& text);

std::string serialize_document(const ModelDocument& doc);
ModelDocument deserialize_document(const std::string& text);

void save_document(const ModelDocument& doc, const std::string& path);
ModelDocument load_document(const std::string& path);

} // namespace bkt
