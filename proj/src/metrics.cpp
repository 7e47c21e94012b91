#include "bkt/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <sstream>

#include "bkt/errors.hpp"
#include "bkt/predict.hpp"

namespace bkt {

namespace {

void check_lengths(const std::vector<double>& pred, const std::vector<double>& truth) {
    if (pred.empty())
        throw SchemaError("metric input is empty");
    if (pred.size() != truth.size())
        throw ConfigError("prediction and truth lengths differ (" +
                          std::to_string(pred.size()) + " vs " +
                          std::to_string(truth.size()) + ")");
}

} // namespace

double rmse(const std::vector<double>& pred, const std::vector<double>& truth) {
    check_lengths(pred, truth);
    double sum = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const double d = pred[i] - truth[i];
        sum += d * d;
    }
    return std::sqrt(sum / static_cast<double>(pred.size()));
}

double accuracy(const std::vector<double>& pred, const std::vector<double>& truth,
                double threshold) {
    check_lengths(pred, truth);
    std::size_t hits = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const bool called = pred[i] >= threshold;
        const bool positive = truth[i] != 0.0;
        if (called == positive)
            ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(pred.size());
}

double auc(const std::vector<double>& pred, const std::vector<double>& truth) {
    check_lengths(pred, truth);
    const std::size_t n = pred.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return pred[a] < pred[b]; });

    // Average ranks over tie groups, then the rank-sum (Mann-Whitney) form;
    // ties between a positive and a negative earn half credit.
    std::vector<double> rank(n);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && pred[order[j + 1]] == pred[order[i]])
            ++j;
        const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t k = i; k <= j; ++k)
            rank[order[k]] = avg;
        i = j + 1;
    }
    double positives = 0.0, rank_sum = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        if (truth[k] != 0.0) {
            positives += 1.0;
            rank_sum += rank[k];
        }
    }
    const double negatives = static_cast<double>(n) - positives;
    if (positives == 0.0 || negatives == 0.0)
        return std::numeric_limits<double>::quiet_NaN();
    return (rank_sum - positives * (positives + 1.0) / 2.0) / (positives * negatives);
}

namespace {

void mape_family(MapeReport& out, const std::string& family,
                 const std::vector<double>& fitted, const std::vector<double>& truth) {
    double sum = 0.0;
    std::size_t used = 0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        if (truth[i] == 0.0) {
            out.warnings.push_back(family + "[" + std::to_string(i) +
                                   "]: true value is 0, excluded from MAPE");
            continue;
        }
        sum += std::abs(fitted[i] - truth[i]) / truth[i] * 100.0;
        ++used;
    }
    if (used > 0)
        out.by_family[family] = sum / static_cast<double>(used);
}

} // namespace

MapeReport mape(const ModelParams& fitted, const ModelParams& truth) {
    if (fitted.learns.size() != truth.learns.size() ||
        fitted.guesses.size() != truth.guesses.size())
        throw ConfigError("fitted and true parameters have different shapes");
    MapeReport out;
    mape_family(out, "prior", {fitted.prior}, {truth.prior});
    mape_family(out, "learns", fitted.learns, truth.learns);
    mape_family(out, "forgets", fitted.forgets, truth.forgets);
    mape_family(out, "guesses", fitted.guesses, truth.guesses);
    mape_family(out, "slips", fitted.slips, truth.slips);
    return out;
}

// ---------------------------------------------------------------------------
// Metric registry and reports
// ---------------------------------------------------------------------------

Metric builtin_metric(const std::string& name) {
    if (name == "rmse")
        return {"rmse", [](const std::vector<double>& truth, const std::vector<double>& pred) {
                    return rmse(pred, truth);
                }};
    if (name == "accuracy")
        return {"accuracy",
                [](const std::vector<double>& truth, const std::vector<double>& pred) {
                    return accuracy(pred, truth);
                }};
    if (name == "auc")
        return {"auc", [](const std::vector<double>& truth, const std::vector<double>& pred) {
                    return auc(pred, truth);
                }};
    if (name == "mae")
        return {"mae", [](const std::vector<double>& truth, const std::vector<double>& pred) {
                    double sum = 0.0;
                    for (std::size_t i = 0; i < pred.size(); ++i)
                        sum += std::abs(pred[i] - truth[i]);
                    return sum / static_cast<double>(pred.size());
                }};
    std::string available;
    for (const std::string& n : builtin_metric_names())
        available += (available.empty() ? "" : ", ") + n;
    throw ConfigError("unknown metric \"" + name + "\"; available: " + available);
}

std::vector<std::string> builtin_metric_names() {
    return {"accuracy", "auc", "mae", "rmse"};
}

std::vector<Metric> resolve_metrics(const std::vector<std::string>& names) {
    std::vector<Metric> out;
    out.reserve(names.size());
    for (const std::string& name : names)
        out.push_back(builtin_metric(name));
    return out;
}

MetricReport compute_metrics(const std::vector<Metric>& metrics,
                             const std::vector<PredictionPool>& pools,
                             std::vector<std::string> notes) {
    if (metrics.empty())
        throw ConfigError("no metrics requested");
    MetricReport report;
    report.notes = std::move(notes);
    for (const Metric& metric : metrics)
        report.metric_names.push_back(metric.name);

    PredictionPool all;
    all.skill = "overall";
    for (const PredictionPool& pool : pools) {
        if (pool.truth.empty())
            throw SchemaError("no scored responses for skill \"" + pool.skill + "\"");
        MetricReport::Row row;
        row.skill = pool.skill;
        row.responses = pool.truth.size();
        for (const Metric& metric : metrics) {
            const double value = metric.fn(pool.truth, pool.pred);
            if (std::isnan(value))
                report.notes.push_back("skill \"" + pool.skill + "\": " + metric.name +
                                       " undefined on this data");
            row.values.push_back(value);
        }
        report.rows.push_back(std::move(row));
        all.truth.insert(all.truth.end(), pool.truth.begin(), pool.truth.end());
        all.pred.insert(all.pred.end(), pool.pred.begin(), pool.pred.end());
    }

    if (!report.rows.empty()) {
        report.overall.skill = "overall";
        report.overall.responses = all.truth.size();
        for (const Metric& metric : metrics)
            report.overall.values.push_back(metric.fn(all.truth, all.pred));

        report.overall_by_skill.skill = "overall_by_skill";
        report.overall_by_skill.responses = all.truth.size();
        for (std::size_t j = 0; j < metrics.size(); ++j) {
            double weighted = 0.0, weight = 0.0;
            for (const MetricReport::Row& row : report.rows) {
                if (std::isnan(row.values[j]))
                    continue;
                weighted += static_cast<double>(row.responses) * row.values[j];
                weight += static_cast<double>(row.responses);
            }
            report.overall_by_skill.values.push_back(
                weight > 0.0 ? weighted / weight : std::numeric_limits<double>::quiet_NaN());
        }
    }
    return report;
}

namespace {

std::string format_value(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.5f", v);
    return buf;
}

void append_row(std::ostringstream& out, const MetricReport::Row& row,
                std::size_t skill_width, const std::vector<std::size_t>& widths) {
    out << row.skill << std::string(skill_width - row.skill.size(), ' ');
    for (std::size_t j = 0; j < row.values.size(); ++j) {
        const std::string v = format_value(row.values[j]);
        out << "  " << std::string(widths[j] > v.size() ? widths[j] - v.size() : 0, ' ') << v;
    }
    out << "\n";
}

} // namespace

std::string MetricReport::to_table() const {
    std::ostringstream out;
    std::size_t skill_width = 5; // "skill"
    for (const Row& row : rows)
        skill_width = std::max(skill_width, row.skill.size());
    const bool with_overall = rows.size() > 1;
    if (with_overall)
        skill_width = std::max(skill_width, overall_by_skill.skill.size());

    std::vector<std::size_t> widths;
    for (const std::string& name : metric_names)
        widths.push_back(std::max<std::size_t>(name.size(), 7));

    out << "skill" << std::string(skill_width - 5, ' ');
    for (std::size_t j = 0; j < metric_names.size(); ++j)
        out << "  " << std::string(widths[j] - metric_names[j].size(), ' ')
            << metric_names[j];
    out << "\n";
    for (const Row& row : rows)
        append_row(out, row, skill_width, widths);
    if (with_overall) {
        append_row(out, overall, skill_width, widths);
        append_row(out, overall_by_skill, skill_width, widths);
    }
    return out.str();
}

std::string MetricReport::to_csv() const {
    std::ostringstream out;
    out << "skill";
    for (const std::string& name : metric_names)
        out << ',' << name;
    out << "\n";
    auto emit = [&](const Row& row) {
        out << row.skill;
        for (double v : row.values)
            out << ',' << format_value(v);
        out << "\n";
    };
    for (const Row& row : rows)
        emit(row);
    if (rows.size() > 1) {
        emit(overall);
        emit(overall_by_skill);
    }
    return out.str();
}

MetricReport evaluate(const ModelDocument& doc, const Dataset& ds,
                      const std::vector<Metric>& metrics) {
    std::size_t fallback_steps = 0;
    const Dataset aligned = align_classes(ds, doc, &fallback_steps);
    std::vector<std::string> notes;
    if (fallback_steps > 0)
        notes.push_back(std::to_string(fallback_steps) +
                        " steps used class-0 parameters (labels unseen at fit time)");

    std::vector<PredictionPool> pools;
    pools.reserve(aligned.skills.size());
    for (const SkillData& skill : aligned.skills) {
        const SkillModel* model = doc.find(skill.name);
        PredictionPool pool;
        pool.skill = skill.name;
        for (const Sequence& seq : skill.sequences) {
            const PredictionTrace trace = predict(model->params, seq);
            for (std::size_t t = 0; t < seq.length(); ++t) {
                if (!trace.scored[t])
                    continue;
                pool.truth.push_back(static_cast<double>(seq.obs[t]));
                pool.pred.push_back(trace.p_correct[t]);
            }
        }
        pools.push_back(std::move(pool));
    }
    return compute_metrics(metrics, pools, std::move(notes));
}

MetricReport evaluate(const ModelDocument& doc, const Dataset& ds,
                      const std::vector<std::string>& metric_names) {
    return evaluate(doc, ds, resolve_metrics(metric_names));
}

} // namespace bkt
