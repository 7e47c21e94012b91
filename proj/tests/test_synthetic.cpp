#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>

#include "bkt/synthetic.hpp"
#include "bkt/errors.hpp"

using namespace bkt;

namespace {

ModelParams make_params(double prior, double learn, double guess, double slip,
                        double forget = 0.0) {
    ModelParams p;
    p.prior = prior;
    p.learns = {learn};
    p.forgets = {forget};
    p.guesses = {guess};
    p.slips = {slip};
    return p;
}

} // namespace

TEST_CASE("degenerate parameters produce degenerate data") {
    SyntheticSpec spec;
    spec.params = make_params(1.0, 0.3, 0.15, 0.0);
    spec.num_students = 50;
    spec.sequence_length = 8;
    const SyntheticResult sure = generate(spec);
    for (std::size_t s = 0; s < spec.num_students; ++s) {
        for (std::uint8_t obs : sure.dataset.skills[0].sequences[s].obs)
            CHECK(obs == 1);
        for (std::uint8_t state : sure.states[s])
            CHECK(state == 1);
    }

    spec.params = make_params(0.0, 0.0, 0.0, 0.05);
    const SyntheticResult hopeless = generate(spec);
    for (const Sequence& seq : hopeless.dataset.skills[0].sequences)
        for (std::uint8_t obs : seq.obs)
            CHECK(obs == 0);
}

TEST_CASE("first-step correctness frequency matches the analytic value") {
    SyntheticSpec spec;
    spec.params = make_params(0.08, 0.3, 0.15, 0.05);
    spec.num_students = 10000;
    spec.sequence_length = 1;
    spec.seed = 99;
    const SyntheticResult result = generate(spec);
    std::size_t correct = 0;
    for (const Sequence& seq : result.dataset.skills[0].sequences)
        correct += seq.obs[0];
    const double expected = 0.08 * 0.95 + 0.92 * 0.15; // 0.214
    const double se = std::sqrt(expected * (1.0 - expected) / 10000.0);
    CHECK(std::abs(static_cast<double>(correct) / 10000.0 - expected) <= 3.0 * se);
}

TEST_CASE("empirical transition and emission frequencies converge to the rates") {
    SyntheticSpec spec;
    spec.params = make_params(0.3, 0.25, 0.2, 0.1);
    spec.num_students = 50000;
    spec.sequence_length = 2;
    spec.seed = 7;
    const SyntheticResult result = generate(spec);

    std::size_t mastered0 = 0, unlearned0 = 0, learned_transitions = 0;
    std::size_t u_steps = 0, u_correct = 0, l_steps = 0, l_slip = 0;
    for (std::size_t s = 0; s < spec.num_students; ++s) {
        const auto& states = result.states[s];
        const auto& obs = result.dataset.skills[0].sequences[s].obs;
        mastered0 += states[0];
        if (states[0] == 0) {
            ++unlearned0;
            learned_transitions += states[1];
        }
        for (std::size_t t = 0; t < states.size(); ++t) {
            if (states[t] == 0) {
                ++u_steps;
                u_correct += obs[t];
            } else {
                ++l_steps;
                l_slip += obs[t] == 0;
            }
        }
    }
    auto within3se = [](std::size_t hits, std::size_t n, double p) {
        const double se = std::sqrt(p * (1.0 - p) / static_cast<double>(n));
        return std::abs(static_cast<double>(hits) / static_cast<double>(n) - p) <= 3.0 * se;
    };
    CHECK(within3se(mastered0, spec.num_students, 0.3));
    CHECK(within3se(learned_transitions, unlearned0, 0.25));
    CHECK(within3se(u_correct, u_steps, 0.2));
    CHECK(within3se(l_slip, l_steps, 0.1));
}

TEST_CASE("generation is deterministic and per-student streams are disjoint") {
    SyntheticSpec spec;
    spec.params = make_params(0.2, 0.3, 0.2, 0.1);
    spec.num_students = 10;
    spec.sequence_length = 6;
    spec.seed = 31;
    const SyntheticResult a = generate(spec);
    const SyntheticResult b = generate(spec);
    CHECK(a.dataset == b.dataset);
    CHECK(a.states == b.states);

    spec.num_students = 5;
    const SyntheticResult first_half = generate(spec);
    for (std::size_t s = 0; s < 5; ++s) {
        CHECK(first_half.dataset.skills[0].sequences[s] ==
              a.dataset.skills[0].sequences[s]);
        CHECK(first_half.states[s] == a.states[s]);
    }
}

TEST_CASE("per-step class schedules are recorded and validated") {
    SyntheticSpec spec;
    spec.params = make_params(0.2, 0.3, 0.2, 0.1);
    spec.params.guesses = {0.1, 0.4};
    spec.params.slips = {0.05, 0.2};
    spec.num_students = 3;
    spec.sequence_length = 4;
    spec.guess_schedule = {0, 1, 0, 1};
    const SyntheticResult result = generate(spec);
    for (const Sequence& seq : result.dataset.skills[0].sequences)
        CHECK(seq.guess_classes == std::vector<std::int32_t>{0, 1, 0, 1});
    CHECK(result.dataset.skills[0].labels.guess == std::vector<std::string>{"g0", "g1"});

    spec.guess_schedule = {0, 1};
    CHECK_THROWS_AS(generate(spec), ConfigError);
    spec.guess_schedule = {0, 1, 0, 7};
    CHECK_THROWS_AS(generate(spec), ConfigError);
}

TEST_CASE("generated data round-trips through export and ingest") {
    SyntheticSpec spec;
    spec.params = make_params(0.3, 0.2, 0.25, 0.1);
    spec.params.guesses = {0.1, 0.3, 0.4};
    spec.params.slips = {0.05, 0.1, 0.2};
    spec.num_students = 12;
    spec.sequence_length = 6;
    spec.guess_schedule = {0, 1, 2, 0, 1, 2}; // first-appearance ordered
    spec.seed = 4;
    const SyntheticResult result = generate(spec);

    const std::string path = "synthetic_roundtrip.csv";
    write_dataset_csv(result.dataset, path);
    ColumnMap map;
    map.student.name = "user_id";
    map.skill.name = "skill_name";
    map.correct.name = "correct";
    map.order.name = "order_id";
    map.guess_class.name = "template_id";
    CHECK(ingest(path, map).dataset == result.dataset);
    std::remove(path.c_str());
}

TEST_CASE("worst-case learn rate: boundary cases") {
    // prior already at the target: no learning needed
    CHECK(find_worst_case_learn_rate(make_params(0.5, 0, 0.1, 0.1), 1) == 0.0);
    // one step from zero prior reaches the target exactly at 0.5
    CHECK(find_worst_case_learn_rate(make_params(0.0, 0, 0.1, 0.1), 1) ==
          doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("worst-case learn rate agrees with a fine-grid search") {
    const ModelParams base = make_params(0.08, 0, 0.15, 0.05);
    for (std::size_t T : {2u, 5u, 15u, 30u}) {
        const double coarse = find_worst_case_learn_rate(base, T);
        // independent fine search at 1e-5 resolution
        double best_rate = 0.0, best_err = 1e9;
        for (long k = 0; k <= 100000; ++k) {
            const double rate = static_cast<double>(k) * 1e-5;
            const double expected =
                1.0 - (1.0 - base.prior) * std::pow(1.0 - rate, static_cast<double>(T));
            const double err = std::abs(expected - 0.5);
            if (err < best_err) {
                best_err = err;
                best_rate = rate;
            }
        }
        CHECK(std::abs(coarse - best_rate) <= 0.001 + 1e-12);
    }
}
