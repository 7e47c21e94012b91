#pragma once

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "bkt/data.hpp"
#include "bkt/em.hpp"
#include "bkt/model.hpp"

namespace bkt {

/// Root mean squared error between predicted probabilities and 0/1 outcomes.
double rmse(const std::vector<double>& pred, const std::vector<double>& truth);

/// Fraction of predictions on the right side of the threshold; pred >=
/// threshold counts as a positive call.
double accuracy(const std::vector<double>& pred, const std::vector<double>& truth,
                double threshold = 0.5);

/// Mann-Whitney AUC with half credit for ties. Returns NaN when truth
/// contains a single class.
double auc(const std::vector<double>& pred, const std::vector<double>& truth);

/// Mean absolute percentage error per parameter family. Entries whose true
/// value is 0 are excluded (with a warning); a family with no usable entry
/// is omitted.
struct MapeReport {
    std::map<std::string, double> by_family;
    std::vector<std::string> warnings;
};
MapeReport mape(const ModelParams& fitted, const ModelParams& truth);

/// Metric contract shared by built-ins and user functions: (truth, pred)
/// in that order, both pooled over the unmasked steps of one skill.
using MetricFn =
    std::function<double(const std::vector<double>&, const std::vector<double>&)>;

struct Metric {
    std::string name;
    MetricFn fn;
};

/// Looks the name up among the built-ins (auc, rmse, accuracy, mae);
/// unknown names raise ConfigError listing what exists.
Metric builtin_metric(const std::string& name);
std::vector<std::string> builtin_metric_names();
std::vector<Metric> resolve_metrics(const std::vector<std::string>& names);

struct MetricReport {
    struct Row {
        std::string skill;
        std::size_t responses = 0;
        std::vector<double> values;
    };

    std::vector<std::string> metric_names;
    std::vector<Row> rows;
    Row overall;          // metrics over all skills' responses pooled
    Row overall_by_skill; // response-weighted mean of the per-skill values
    std::vector<std::string> notes;

    /// Aligned text table (the layout reports print to the terminal).
    std::string to_table() const;
    /// Wide CSV: skill column plus one column per metric.
    std::string to_csv() const;
};

/// Per-skill pooled predictions, the unit metrics are computed on.
struct PredictionPool {
    std::string skill;
    std::vector<double> truth;
    std::vector<double> pred;
};

MetricReport compute_metrics(const std::vector<Metric>& metrics,
                             const std::vector<PredictionPool>& pools,
                             std::vector<std::string> notes = {});

/// Predicts every sequence of ds with the document's parameters (classes
/// realigned to the model's labels first) and scores the unmasked steps.
MetricReport evaluate(const ModelDocument& doc, const Dataset& ds,
                      const std::vector<Metric>& metrics);
MetricReport evaluate(const ModelDocument& doc, const Dataset& ds,
                      const std::vector<std::string>& metric_names);

} // namespace bkt
