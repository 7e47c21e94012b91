#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "bkt/model.hpp"

namespace bkt {

/// One student's chronological responses to one skill. learn_classes[t]
/// indexes the transition arriving at step t (entry 0 is a placeholder,
/// nothing transitions into the first step); guess_classes[t] indexes the
/// emission at step t. scored[t] == 0 marks steps excluded from metrics
/// (the multiprior dummy step).
struct Sequence {
    std::string student;
    std::vector<std::uint8_t> obs;
    std::vector<std::int32_t> learn_classes;
    std::vector<std::int32_t> guess_classes;
    std::vector<std::uint8_t> scored;

    std::size_t length() const { return obs.size(); }

    bool operator==(const Sequence&) const = default;
};

/// All sequences of one skill plus its class dictionaries. Labels are in
/// dense-index order; indices in the sequences stay within them.
struct SkillData {
    std::string name;
    std::vector<Sequence> sequences;
    ClassLabels labels;

    bool operator==(const SkillData&) const = default;
};

struct Dataset {
    std::vector<SkillData> skills;

    const SkillData* find(const std::string& name) const;
    std::size_t total_responses() const;

    bool operator==(const Dataset&) const = default;
};

/// Column selector: by header name, or by zero-based position when no name
/// is set.
struct ColumnRef {
    std::string name;
    int position = -1;

    bool is_set() const { return !name.empty() || position >= 0; }

    bool operator==(const ColumnRef&) const = default;
};

struct ColumnMap {
    ColumnRef student;
    ColumnRef skill;
    ColumnRef correct;
    ColumnRef order;
    ColumnRef learn_class; // optional
    ColumnRef guess_class; // optional

    bool operator==(const ColumnMap&) const = default;
};

/// Known log dialects recognised by detect_columns.
enum class Dialect { Assistments, CognitiveTutor };

/// Matches the header against the known tutor-log dialects. Returns the
/// mapped columns on a match, std::nullopt when nothing matches, and throws
/// SchemaError when the header carries identifying columns of more than one
/// dialect.
std::optional<ColumnMap> detect_columns(const std::vector<std::string>& header);

/// The dialect default guess-class column ("template_id" for ASSISTments
/// style headers), when the header provides one.
std::optional<std::string> default_class_column(const std::vector<std::string>& header);

struct IngestReport {
    std::size_t rows_read = 0;            // data rows seen (header excluded)
    std::size_t rows_dropped_correct = 0; // correctness outside {0, 1}
    std::size_t rows_dropped_malformed = 0;
    std::size_t rows_filtered = 0;        // excluded by the skill filter
    std::size_t rows_used = 0;
    std::vector<std::string> skills;

    std::string to_text() const;
};

struct IngestResult {
    Dataset dataset;
    IngestReport report;
};

/// Reads a comma- or tab-separated response log (delimiter inferred from
/// the extension, falling back to the first line). Rows are grouped by
/// (skill, student) and stably sorted by the order column; class columns
/// are densified in first-appearance order.
IngestResult ingest(const std::string& path, const ColumnMap& map,
                    const std::vector<std::string>& skills_filter = {});

/// Same, reading from an in-memory text blob (used by tests).
IngestResult ingest_text(const std::string& text, char delimiter, const ColumnMap& map,
                         const std::vector<std::string>& skills_filter = {});

/// Prepends the dummy step of the prior-per-student construction to every
/// sequence: the dummy repeats the student's first response and is excluded
/// from scoring; the first real transition gets learn class 0 (correct
/// first response) or 1 (incorrect), all later transitions class 2.
Dataset apply_multiprior_transform(const Dataset& ds);

/// Rewrites learn classes as dense indices of consecutive item pairs:
/// the transition into step t gets the class of (item[t-1] -> item[t]).
/// Class 0 is reserved for the start of a sequence. items[k] must align
/// with skills[k].sequences, one label list per step of each sequence.
Dataset derive_multipair_classes(const Dataset& ds,
                                 const std::vector<std::vector<std::vector<std::string>>>& items);

/// Same, reading the item labels from the dataset's current learn classes
/// (as produced by ingesting with the item column mapped to learn_class).
Dataset derive_multipair_classes(const Dataset& ds);

/// Applies the variant transforms cfg asks for (multipair, then multiprior)
/// to an ingested dataset. multigs/multilearn need no transform; their
/// class columns are densified during ingestion.
Dataset prepare_dataset(Dataset ds, const ModelConfig& cfg);

/// Remaps a dataset's class indices onto a fitted model's label order so
/// predictions use the classes the model was trained with. Labels the model
/// has never seen fall back to class 0; the count of remapped steps is
/// returned through fallback_steps when non-null.
Dataset align_classes(const Dataset& ds, const ModelDocument& doc,
                      std::size_t* fallback_steps = nullptr);

/// Writes a dataset in the ASSISTments-style CSV layout ingest reads back
/// (user_id, skill_name, correct, order_id, plus class columns when any
/// skill has more than one class).
void write_dataset_csv(const Dataset& ds, const std::string& path);

} // namespace bkt
