#include "bkt/em.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "bkt/errors.hpp"
#include "bkt/rng.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace bkt {

namespace {

inline State2 emission_likelihood(const ModelParams& p, std::uint8_t obs, std::int32_t j) {
    const double guess = p.guesses[static_cast<std::size_t>(j)];
    const double slip = p.slips[static_cast<std::size_t>(j)];
    if (obs)
        return {guess, 1.0 - slip};
    return {1.0 - guess, slip};
}

// Scaled forward pass shared by every caller. alpha holds the filtered
// posterior per step, c the per-step scaling constant. Returns the total
// log-likelihood; a zero scaling constant reports which step collapsed.
double forward_into(const ModelParams& p, const TransitionSet& A, const Sequence& seq,
                    State2* alpha, double* c, int* degenerate_step) {
    const std::size_t T = seq.length();
    double loglik = 0.0;
    State2 pred = state_prior(p);
    for (std::size_t t = 0; t < T; ++t) {
        if (t > 0) {
            const Mat2& M = A.matrices[static_cast<std::size_t>(seq.learn_classes[t])];
            const State2& prev = alpha[t - 1];
            pred = {M[0][0] * prev[0] + M[0][1] * prev[1],
                    M[1][0] * prev[0] + M[1][1] * prev[1]};
        }
        const State2 lik = emission_likelihood(p, seq.obs[t], seq.guess_classes[t]);
        const double w0 = pred[0] * lik[0];
        const double w1 = pred[1] * lik[1];
        const double norm = w0 + w1;
        if (!(norm > 0.0)) {
            if (degenerate_step) {
                *degenerate_step = static_cast<int>(t);
                return std::numeric_limits<double>::quiet_NaN();
            }
            throw DegeneracyError("observation at step " + std::to_string(t) +
                                  " of student \"" + seq.student +
                                  "\" has probability zero under the current parameters");
        }
        alpha[t] = {w0 / norm, w1 / norm};
        c[t] = norm;
        loglik += std::log(norm);
    }
    return loglik;
}

void check_sequence_bounds(const Sequence& seq, std::size_t m, std::size_t n) {
    if (seq.obs.empty())
        throw SchemaError("empty sequence for student \"" + seq.student + "\"");
    if (seq.learn_classes.size() != seq.obs.size() ||
        seq.guess_classes.size() != seq.obs.size())
        throw SchemaError("class index lists misaligned for student \"" + seq.student + "\"");
    for (std::int32_t v : seq.learn_classes)
        if (v < 0 || static_cast<std::size_t>(v) >= m)
            throw SchemaError("learn class " + std::to_string(v) + " out of range for student \"" +
                              seq.student + "\" (have " + std::to_string(m) + " classes)");
    for (std::int32_t v : seq.guess_classes)
        if (v < 0 || static_cast<std::size_t>(v) >= n)
            throw SchemaError("guess class " + std::to_string(v) + " out of range for student \"" +
                              seq.student + "\" (have " + std::to_string(n) + " classes)");
}

void check_params_for(const ModelParams& p, const Sequence& seq) {
    auto violations = validate_params(p);
    if (!violations.empty())
        throw ConfigError("invalid parameters: " + violations.front().field + ": " +
                          violations.front().message);
    check_sequence_bounds(seq, p.num_learn_classes(), p.num_guess_classes());
}

// Flat per-sequence accumulator slice used by the fitting loop:
//   [0..1] first-step posterior, [2] log-likelihood (NaN when degenerate),
//   [3] degenerate step, [4 .. 4+4m) transition counts [class][from][to],
//   [4+4m .. 4+4m+4n) emission counts [class][state][obs].
constexpr std::size_t kSliceHeader = 4;

std::size_t slice_stride(std::size_t m, std::size_t n) {
    return kSliceHeader + 4 * m + 4 * n;
}

// Backward pass with on-the-fly accumulation into a flat slice. alpha/c
// must come from forward_into on the same sequence.
void accumulate_into(const ModelParams& p, const TransitionSet& A, const Sequence& seq,
                     const State2* alpha, const double* c, double* slice) {
    const std::size_t T = seq.length();
    double* trans = slice + kSliceHeader;
    double* emis = slice + kSliceHeader + 4 * p.num_learn_classes();

    State2 beta = {1.0, 1.0};
    State2 gamma = alpha[T - 1];
    emis[4 * seq.guess_classes[T - 1] + 2 * kUnlearned + seq.obs[T - 1]] += gamma[0];
    emis[4 * seq.guess_classes[T - 1] + 2 * kLearned + seq.obs[T - 1]] += gamma[1];

    for (std::size_t t = T - 1; t-- > 0;) {
        const std::size_t arrow = t + 1; // transition t -> t+1 is classed by its target step
        const Mat2& M = A.matrices[static_cast<std::size_t>(seq.learn_classes[arrow])];
        const State2 lik = emission_likelihood(p, seq.obs[arrow], seq.guess_classes[arrow]);
        const double b0 = lik[0] * beta[0] / c[arrow];
        const double b1 = lik[1] * beta[1] / c[arrow];

        double* tc = trans + 4 * seq.learn_classes[arrow];
        tc[0] += alpha[t][0] * M[0][0] * b0; // stay unlearned
        tc[1] += alpha[t][0] * M[1][0] * b1; // learn
        tc[2] += alpha[t][1] * M[0][1] * b0; // forget
        tc[3] += alpha[t][1] * M[1][1] * b1; // stay learned

        beta = {M[0][0] * b0 + M[1][0] * b1, M[0][1] * b0 + M[1][1] * b1};
        gamma = {alpha[t][0] * beta[0], alpha[t][1] * beta[1]};
        emis[4 * seq.guess_classes[t] + 2 * kUnlearned + seq.obs[t]] += gamma[0];
        emis[4 * seq.guess_classes[t] + 2 * kLearned + seq.obs[t]] += gamma[1];
    }
    slice[0] += gamma[0];
    slice[1] += gamma[1];
}

struct Workspace {
    std::vector<State2> alpha;
    std::vector<double> c;

    void ensure(std::size_t T) {
        if (alpha.size() < T) {
            alpha.resize(T);
            c.resize(T);
        }
    }
};

} // namespace

void ExpectedCounts::resize(std::size_t m, std::size_t n) {
    first_step_mass = {0.0, 0.0};
    sequences = 0;
    transitions.assign(m, Mat2{State2{0.0, 0.0}, State2{0.0, 0.0}});
    emissions.assign(n, Mat2{State2{0.0, 0.0}, State2{0.0, 0.0}});
}

void ExpectedCounts::merge(const ExpectedCounts& other) {
    first_step_mass[0] += other.first_step_mass[0];
    first_step_mass[1] += other.first_step_mass[1];
    sequences += other.sequences;
    for (std::size_t i = 0; i < transitions.size(); ++i)
        for (int a = 0; a < 2; ++a)
            for (int b = 0; b < 2; ++b)
                transitions[i][a][b] += other.transitions[i][a][b];
    for (std::size_t j = 0; j < emissions.size(); ++j)
        for (int a = 0; a < 2; ++a)
            for (int b = 0; b < 2; ++b)
                emissions[j][a][b] += other.emissions[j][a][b];
}

ForwardResult forward(const ModelParams& p, const Sequence& seq) {
    check_params_for(p, seq);
    const TransitionSet A = build_transition_set(p);
    ForwardResult out;
    out.filtered.resize(seq.length());
    out.step_prob.resize(seq.length());
    out.log_likelihood =
        forward_into(p, A, seq, out.filtered.data(), out.step_prob.data(), nullptr);
    return out;
}

EStepResult e_step(const ModelParams& p, const Sequence& seq) {
    check_params_for(p, seq);
    const std::size_t m = p.num_learn_classes();
    const std::size_t n = p.num_guess_classes();
    const std::size_t T = seq.length();
    const TransitionSet A = build_transition_set(p);

    std::vector<State2> alpha(T);
    std::vector<double> c(T);
    EStepResult out;
    out.log_likelihood = forward_into(p, A, seq, alpha.data(), c.data(), nullptr);

    std::vector<double> slice(slice_stride(m, n), 0.0);
    accumulate_into(p, A, seq, alpha.data(), c.data(), slice.data());

    out.counts.resize(m, n);
    out.counts.sequences = 1;
    out.counts.first_step_mass = {slice[0], slice[1]};
    for (std::size_t i = 0; i < m; ++i)
        out.counts.transitions[i] = {State2{slice[kSliceHeader + 4 * i + 0],
                                            slice[kSliceHeader + 4 * i + 1]},
                                     State2{slice[kSliceHeader + 4 * i + 2],
                                            slice[kSliceHeader + 4 * i + 3]}};
    const std::size_t eoff = kSliceHeader + 4 * m;
    for (std::size_t j = 0; j < n; ++j)
        out.counts.emissions[j] = {
            State2{slice[eoff + 4 * j + 0], slice[eoff + 4 * j + 1]},
            State2{slice[eoff + 4 * j + 2], slice[eoff + 4 * j + 3]}};

    // Smoothed per-step and per-arrow tables, recomputed with the same
    // recursion so they agree bit for bit with the accumulators above.
    out.state_posterior.resize(T);
    out.pair_posterior.resize(T > 0 ? T - 1 : 0);
    State2 beta = {1.0, 1.0};
    out.state_posterior[T - 1] = alpha[T - 1];
    for (std::size_t t = T - 1; t-- > 0;) {
        const std::size_t arrow = t + 1;
        const Mat2& M = A.matrices[static_cast<std::size_t>(seq.learn_classes[arrow])];
        const State2 lik = emission_likelihood(p, seq.obs[arrow], seq.guess_classes[arrow]);
        const double b0 = lik[0] * beta[0] / c[arrow];
        const double b1 = lik[1] * beta[1] / c[arrow];
        out.pair_posterior[t] = {State2{alpha[t][0] * M[0][0] * b0, alpha[t][0] * M[1][0] * b1},
                                 State2{alpha[t][1] * M[0][1] * b0, alpha[t][1] * M[1][1] * b1}};
        beta = {M[0][0] * b0 + M[1][0] * b1, M[0][1] * b0 + M[1][1] * b1};
        out.state_posterior[t] = {alpha[t][0] * beta[0], alpha[t][1] * beta[1]};
    }
    return out;
}

MStepResult m_step(const ExpectedCounts& counts, const ModelParams& previous,
                   bool forgets_enabled) {
    if (counts.sequences == 0)
        throw ConfigError("m_step needs at least one accumulated sequence");
    const std::size_t m = counts.transitions.size();
    const std::size_t n = counts.emissions.size();
    if (previous.num_learn_classes() != m || previous.num_guess_classes() != n)
        throw ConfigError("previous parameters do not match accumulator shape");

    MStepResult out;
    ModelParams& p = out.params;
    p.prior = counts.first_step_mass[kLearned] / static_cast<double>(counts.sequences);
    p.learns.resize(m);
    p.forgets.assign(m, 0.0);
    p.guesses.resize(n);
    p.slips.resize(n);

    for (std::size_t i = 0; i < m; ++i) {
        const Mat2& tc = counts.transitions[i];
        const double from_unlearned = tc[kUnlearned][kUnlearned] + tc[kUnlearned][kLearned];
        if (from_unlearned > 0.0) {
            p.learns[i] = tc[kUnlearned][kLearned] / from_unlearned;
        } else {
            p.learns[i] = previous.learns[i];
            out.notes.push_back("learn class " + std::to_string(i) +
                                ": no expected visits, kept previous value");
        }
        if (forgets_enabled) {
            const double from_learned = tc[kLearned][kUnlearned] + tc[kLearned][kLearned];
            if (from_learned > 0.0) {
                p.forgets[i] = tc[kLearned][kUnlearned] / from_learned;
            } else {
                p.forgets[i] = previous.forgets[i];
                out.notes.push_back("forget class " + std::to_string(i) +
                                    ": no expected visits, kept previous value");
            }
        }
    }
    for (std::size_t j = 0; j < n; ++j) {
        const Mat2& ec = counts.emissions[j];
        const double unlearned = ec[kUnlearned][0] + ec[kUnlearned][1];
        if (unlearned > 0.0) {
            p.guesses[j] = ec[kUnlearned][1] / unlearned;
        } else {
            p.guesses[j] = previous.guesses[j];
            out.notes.push_back("guess class " + std::to_string(j) +
                                ": no expected visits, kept previous value");
        }
        const double learned = ec[kLearned][0] + ec[kLearned][1];
        if (learned > 0.0) {
            p.slips[j] = ec[kLearned][0] / learned;
        } else {
            p.slips[j] = previous.slips[j];
            out.notes.push_back("slip class " + std::to_string(j) +
                                ": no expected visits, kept previous value");
        }
    }
    return out;
}

namespace {

// One E-pass over all sequences. Per-sequence contributions land in
// disjoint slices of `staged` (parallel) and are then folded in sequence
// index order (serial), so the totals are bit-identical for any thread
// count. Throws DegeneracyError on the first collapsed sequence.
double e_pass(const ModelParams& p, const TransitionSet& A,
              const std::vector<Sequence>& sequences, std::size_t stride,
              std::vector<double>& staged, bool parallel, int threads) {
    const auto count = static_cast<std::ptrdiff_t>(sequences.size());
    std::fill(staged.begin(), staged.end(), 0.0);

#ifdef _OPENMP
    int nt = threads > 0 ? threads : omp_get_max_threads();
#pragma omp parallel if (parallel) num_threads(nt)
    {
        Workspace ws;
#pragma omp for schedule(static)
        for (std::ptrdiff_t s = 0; s < count; ++s) {
            const Sequence& seq = sequences[static_cast<std::size_t>(s)];
            double* slice = staged.data() + static_cast<std::size_t>(s) * stride;
            ws.ensure(seq.length());
            int bad_step = -1;
            const double ll =
                forward_into(p, A, seq, ws.alpha.data(), ws.c.data(), &bad_step);
            slice[2] = ll;
            slice[3] = bad_step;
            if (bad_step < 0)
                accumulate_into(p, A, seq, ws.alpha.data(), ws.c.data(), slice);
        }
    }
#else
    (void)parallel;
    (void)threads;
    Workspace ws;
    for (std::ptrdiff_t s = 0; s < count; ++s) {
        const Sequence& seq = sequences[static_cast<std::size_t>(s)];
        double* slice = staged.data() + static_cast<std::size_t>(s) * stride;
        ws.ensure(seq.length());
        int bad_step = -1;
        const double ll = forward_into(p, A, seq, ws.alpha.data(), ws.c.data(), &bad_step);
        slice[2] = ll;
        slice[3] = bad_step;
        if (bad_step < 0)
            accumulate_into(p, A, seq, ws.alpha.data(), ws.c.data(), slice);
    }
#endif

    double total = 0.0;
    for (std::ptrdiff_t s = 0; s < count; ++s) {
        const double* slice = staged.data() + static_cast<std::size_t>(s) * stride;
        if (std::isnan(slice[2]))
            throw DegeneracyError(
                "observation at step " + std::to_string(static_cast<int>(slice[3])) +
                " of student \"" + sequences[static_cast<std::size_t>(s)].student +
                "\" has probability zero under the current parameters");
        total += slice[2];
    }
    return total;
}

ExpectedCounts fold_staged(const std::vector<double>& staged, std::size_t stride,
                           std::size_t count, std::size_t m, std::size_t n) {
    ExpectedCounts total;
    total.resize(m, n);
    total.sequences = count;
    for (std::size_t s = 0; s < count; ++s) {
        const double* slice = staged.data() + s * stride;
        total.first_step_mass[0] += slice[0];
        total.first_step_mass[1] += slice[1];
        for (std::size_t i = 0; i < m; ++i) {
            total.transitions[i][0][0] += slice[kSliceHeader + 4 * i + 0];
            total.transitions[i][0][1] += slice[kSliceHeader + 4 * i + 1];
            total.transitions[i][1][0] += slice[kSliceHeader + 4 * i + 2];
            total.transitions[i][1][1] += slice[kSliceHeader + 4 * i + 3];
        }
        const std::size_t eoff = kSliceHeader + 4 * m;
        for (std::size_t j = 0; j < n; ++j) {
            total.emissions[j][0][0] += slice[eoff + 4 * j + 0];
            total.emissions[j][0][1] += slice[eoff + 4 * j + 1];
            total.emissions[j][1][0] += slice[eoff + 4 * j + 2];
            total.emissions[j][1][1] += slice[eoff + 4 * j + 3];
        }
    }
    return total;
}

} // namespace

const FitResult* FitOutcome::find(const std::string& skill) const {
    for (const SkillFit& f : skills)
        if (f.skill == skill)
            return &f.result;
    return nullptr;
}

FitResult fit_skill(const std::vector<Sequence>& sequences, std::size_t m, std::size_t n,
                    const ModelConfig& cfg, std::size_t skill_index) {
    validate_config(cfg);
    if (sequences.empty())
        throw ConfigError("cannot fit a skill with no sequences");
    for (const Sequence& seq : sequences)
        check_sequence_bounds(seq, m, n);

    const std::size_t stride = slice_stride(m, n);
    std::vector<double> staged(sequences.size() * stride);

    FitResult result;
    result.restarts.resize(static_cast<std::size_t>(cfg.num_restarts));
    double best_ll = -std::numeric_limits<double>::infinity();
    bool any_ok = false;

    for (int r = 0; r < cfg.num_restarts; ++r) {
        RestartStats& st = result.restarts[static_cast<std::size_t>(r)];
        Rng rng(mix_seed(cfg.seed, skill_index, static_cast<std::uint64_t>(r)));
        ModelParams params = init_params(cfg, m, n, rng);
        try {
            TransitionSet A = build_transition_set(params);
            double prev = -std::numeric_limits<double>::infinity();
            bool converged = false;
            for (int iter = 0; iter < cfg.max_iterations; ++iter) {
                const double ll = e_pass(params, A, sequences, stride, staged,
                                         cfg.parallel, cfg.threads);
                st.trace.push_back(ll);
                if (iter > 0 && ll - prev < cfg.convergence_tol) {
                    converged = true;
                    break;
                }
                prev = ll;
                MStepResult mres = m_step(fold_staged(staged, stride, sequences.size(), m, n),
                                          params, cfg.forgets);
                for (std::string& note : mres.notes) {
                    std::string tagged = "restart " + std::to_string(r) + ": " + note;
                    if (std::find(result.notes.begin(), result.notes.end(), tagged) ==
                        result.notes.end())
                        result.notes.push_back(std::move(tagged));
                }
                params = std::move(mres.params);
                A = build_transition_set(params);
                ++st.iterations;
            }
            if (!converged)
                st.trace.push_back(log_likelihood(params, sequences));
            st.converged = converged;
            st.final_log_likelihood = st.trace.back();
            if (!any_ok || st.final_log_likelihood > best_ll) {
                any_ok = true;
                best_ll = st.final_log_likelihood;
                result.best = params;
                result.best_restart = static_cast<std::size_t>(r);
            }
        } catch (const DegeneracyError& e) {
            st.failed = true;
            st.final_log_likelihood = -std::numeric_limits<double>::infinity();
            result.notes.push_back("restart " + std::to_string(r) +
                                   " abandoned: " + e.what());
        }
    }
    if (!any_ok)
        throw DegeneracyError("all " + std::to_string(cfg.num_restarts) +
                              " restarts degenerate");
    return result;
}

FitOutcome fit(const Dataset& ds, const ModelConfig& cfg) {
    validate_config(cfg);
    if (ds.skills.empty())
        throw EmptyDatasetError("dataset has no skills");
    FitOutcome outcome;
    for (std::size_t k = 0; k < ds.skills.size(); ++k) {
        const SkillData& skill = ds.skills[k];
        if (skill.sequences.empty()) {
            outcome.warnings.push_back("skill \"" + skill.name +
                                       "\" has no sequences; skipped");
            continue;
        }
        try {
            FitResult result = fit_skill(skill.sequences, skill.labels.learn.size(),
                                         skill.labels.guess.size(), cfg, k);
            outcome.skills.push_back({skill.name, std::move(result)});
        } catch (const DegeneracyError& e) {
            throw DegeneracyError("skill \"" + skill.name + "\": " + e.what());
        }
    }
    if (outcome.skills.empty())
        throw EmptyDatasetError("no skill in the dataset could be fitted");
    return outcome;
}

double log_likelihood(const ModelParams& p, const std::vector<Sequence>& sequences) {
    auto violations = validate_params(p);
    if (!violations.empty())
        throw ConfigError("invalid parameters: " + violations.front().field + ": " +
                          violations.front().message);
    const TransitionSet A = build_transition_set(p);
    Workspace ws;
    double total = 0.0;
    for (const Sequence& seq : sequences) {
        check_sequence_bounds(seq, p.num_learn_classes(), p.num_guess_classes());
        ws.ensure(seq.length());
        total += forward_into(p, A, seq, ws.alpha.data(), ws.c.data(), nullptr);
    }
    return total;
}

double log_likelihood(const ModelParams& p, const SkillData& skill) {
    return log_likelihood(p, skill.sequences);
}

double log_likelihood(const ModelParams& p, const Dataset& ds) {
    double total = 0.0;
    for (const SkillData& skill : ds.skills)
        total += log_likelihood(p, skill.sequences);
    return total;
}

ModelDocument make_document(const Dataset& ds, const FitOutcome& outcome,
                            const ModelConfig& cfg) {
    ModelDocument doc;
    doc.variants = variants_of(cfg);
    for (const SkillFit& f : outcome.skills) {
        const SkillData* skill = ds.find(f.skill);
        if (!skill)
            throw ConfigError("fit outcome references unknown skill \"" + f.skill + "\"");
        doc.skill_names.push_back(f.skill);
        doc.skills.push_back({f.result.best, skill->labels});
    }
    return doc;
}

} // namespace bkt
