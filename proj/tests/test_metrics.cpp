#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "bkt/errors.hpp"
#include "bkt/metrics.hpp"
#include "bkt/synthetic.hpp"
#include "generators.hpp"

using namespace bkt;

TEST_CASE("rmse golden cases") {
    CHECK(rmse({0.3, 0.7}, {0.3, 0.7}) == 0.0);
    CHECK(std::abs(rmse({0.5, 0.5}, {0.0, 1.0}) - 0.5) <= 1e-12);
    const double expected = std::sqrt((0.04 + 0.01 + 0.36) / 3.0);
    CHECK(std::abs(rmse({0.2, 0.9, 0.4}, {0.0, 1.0, 1.0}) - expected) <= 1e-12);
    CHECK_THROWS_AS(rmse({}, {}), SchemaError);
}

TEST_CASE("accuracy golden cases, inclusive threshold") {
    CHECK(accuracy({0.6, 0.4}, {1.0, 0.0}) == 1.0);
    CHECK(accuracy({0.5}, {1.0}) == 1.0);
    CHECK(accuracy({0.5}, {0.0}) == 0.0);
    CHECK_THROWS_AS(accuracy({}, {}), SchemaError);
}

TEST_CASE("auc golden cases") {
    CHECK(auc({0.2, 0.8}, {0.0, 1.0}) == 1.0);
    CHECK(auc({0.4, 0.4, 0.4, 0.4}, {0.0, 1.0, 0.0, 1.0}) == 0.5);
    CHECK(std::abs(auc({0.1, 0.4, 0.35, 0.8}, {0.0, 0.0, 1.0, 1.0}) - 0.75) <= 1e-12);
    CHECK(std::isnan(auc({0.1, 0.9}, {1.0, 1.0})));
}

TEST_CASE("auc is invariant under strictly monotone transforms") {
    Rng rng(21);
    for (int trial = 0; trial < 30; ++trial) {
        std::vector<double> pred, truth;
        bool has_pos = false, has_neg = false;
        for (int i = 0; i < 40; ++i) {
            pred.push_back(std::round(rng.unit() * 10.0) / 10.0); // coarse grid forces ties
            const bool positive = rng.bernoulli(0.5);
            truth.push_back(positive ? 1.0 : 0.0);
            has_pos = has_pos || positive;
            has_neg = has_neg || !positive;
        }
        if (!has_pos || !has_neg)
            continue;
        std::vector<double> squashed;
        for (double v : pred)
            squashed.push_back(1.0 / (1.0 + std::exp(-5.0 * v)));
        CHECK(std::abs(auc(pred, truth) - auc(squashed, truth)) <= 1e-12);
    }
}

TEST_CASE("accuracy complements the thresholded Hamming error") {
    Rng rng(8);
    std::vector<double> pred, truth;
    for (int i = 0; i < 100; ++i) {
        pred.push_back(rng.unit());
        truth.push_back(rng.bernoulli(0.4) ? 1.0 : 0.0);
    }
    double hamming = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i)
        hamming += (pred[i] >= 0.5 ? 1.0 : 0.0) != truth[i] ? 1.0 : 0.0;
    CHECK(std::abs(accuracy(pred, truth) - (1.0 - hamming / 100.0)) <= 1e-12);
}

TEST_CASE("rmse is symmetric under complementing both arguments") {
    Rng rng(13);
    std::vector<double> pred, truth, cpred, ctruth;
    for (int i = 0; i < 50; ++i) {
        pred.push_back(rng.unit());
        truth.push_back(rng.bernoulli(0.5) ? 1.0 : 0.0);
        cpred.push_back(1.0 - pred.back());
        ctruth.push_back(1.0 - truth.back());
    }
    CHECK(std::abs(rmse(pred, truth) - rmse(cpred, ctruth)) <= 1e-12);
}

TEST_CASE("mape per family, zero-truth exclusion") {
    ModelParams truth;
    truth.prior = 0.08;
    truth.learns = {0.3};
    truth.forgets = {0.0};
    truth.guesses = {0.15};
    truth.slips = {0.05};

    MapeReport same = mape(truth, truth);
    CHECK(same.by_family.at("prior") == 0.0);
    CHECK(same.by_family.at("learns") == 0.0);
    CHECK_FALSE(same.by_family.count("forgets")); // true forget is 0
    CHECK_FALSE(same.warnings.empty());

    ModelParams fitted = truth;
    fitted.learns = {0.33};
    CHECK(std::abs(mape(fitted, truth).by_family.at("learns") - 10.0) <= 1e-9);

    ModelParams wrong_shape = truth;
    wrong_shape.guesses = {0.1, 0.2};
    wrong_shape.slips = {0.1, 0.2};
    CHECK_THROWS_AS(mape(wrong_shape, truth), ConfigError);
}

TEST_CASE("builtin metric lookup and the error listing") {
    CHECK(builtin_metric("rmse").name == "rmse");
    CHECK_THROWS_WITH_AS(builtin_metric("brier"), doctest::Contains("auc"), ConfigError);
}

TEST_CASE("evaluate: perfect model on noiseless data scores accuracy 1") {
    SyntheticSpec spec;
    spec.params.prior = 1.0;
    spec.params.learns = {0.3};
    spec.params.forgets = {0.0};
    spec.params.guesses = {0.0};
    spec.params.slips = {0.0};
    spec.num_students = 20;
    spec.sequence_length = 5;
    const SyntheticResult data = generate(spec);

    ModelDocument doc;
    doc.skill_names = {"synthetic"};
    doc.skills.push_back({spec.params, data.dataset.skills[0].labels});

    const MetricReport report = evaluate(doc, data.dataset, std::vector<std::string>{"accuracy", "rmse"});
    REQUIRE(report.rows.size() == 1);
    CHECK(report.metric_names == std::vector<std::string>{"accuracy", "rmse"});
    CHECK(report.rows[0].values[0] == 1.0);
    CHECK(report.rows[0].values[1] == 0.0);
}

TEST_CASE("evaluate passes pooled vectors through custom metrics") {
    SyntheticSpec spec;
    spec.params.prior = 0.3;
    spec.params.learns = {0.2};
    spec.params.forgets = {0.0};
    spec.params.guesses = {0.2};
    spec.params.slips = {0.1};
    spec.num_students = 5;
    spec.sequence_length = 4;
    const SyntheticResult data = generate(spec);

    ModelDocument doc;
    doc.skill_names = {"synthetic"};
    doc.skills.push_back({spec.params, data.dataset.skills[0].labels});

    Metric seven{"seven", [](const std::vector<double>&, const std::vector<double>&) {
                     return 7.0;
                 }};
    const MetricReport report = evaluate(doc, data.dataset, std::vector<Metric>{seven});
    CHECK(report.rows[0].values[0] == 7.0);
}

TEST_CASE("reports carry pooled and response-weighted overall rows") {
    std::vector<PredictionPool> pools(2);
    pools[0] = {"a", {1.0, 0.0}, {0.9, 0.1}};
    pools[1] = {"b", {1.0, 1.0, 0.0, 0.0, 1.0, 0.0}, {0.8, 0.7, 0.2, 0.4, 0.6, 0.3}};
    const MetricReport report = compute_metrics(resolve_metrics({"rmse", "accuracy"}), pools);
    REQUIRE(report.rows.size() == 2);

    // pooled row recomputes over the concatenation
    std::vector<double> all_pred = {0.9, 0.1, 0.8, 0.7, 0.2, 0.4, 0.6, 0.3};
    std::vector<double> all_truth = {1.0, 0.0, 1.0, 1.0, 0.0, 0.0, 1.0, 0.0};
    CHECK(std::abs(report.overall.values[0] - rmse(all_pred, all_truth)) <= 1e-12);

    // weighted row averages the per-skill values by response count
    const double weighted =
        (2.0 * report.rows[0].values[0] + 6.0 * report.rows[1].values[0]) / 8.0;
    CHECK(std::abs(report.overall_by_skill.values[0] - weighted) <= 1e-12);

    const std::string table = report.to_table();
    CHECK(table.find("skill") == 0);
    CHECK(table.find("overall") != std::string::npos);
    const std::string csv = report.to_csv();
    CHECK(csv.find("skill,rmse,accuracy\n") == 0);
}

TEST_CASE("undefined AUC is reported, not fatal") {
    std::vector<PredictionPool> pools(1);
    pools[0] = {"a", {1.0, 1.0}, {0.9, 0.8}};
    const MetricReport report = compute_metrics(resolve_metrics({"auc"}), pools);
    CHECK(std::isnan(report.rows[0].values[0]));
    REQUIRE_FALSE(report.notes.empty());
    CHECK(report.notes[0].find("auc") != std::string::npos);
}
