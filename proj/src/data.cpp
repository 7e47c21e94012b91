#include "bkt/data.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <unordered_map>

#include "bkt/errors.hpp"

namespace bkt {

const SkillData* Dataset::find(const std::string& name) const {
    for (const SkillData& s : skills)
        if (s.name == name)
            return &s;
    return nullptr;
}

std::size_t Dataset::total_responses() const {
    std::size_t n = 0;
    for (const SkillData& s : skills)
        for (const Sequence& seq : s.sequences)
            n += seq.length();
    return n;
}

// ---------------------------------------------------------------------------
// Header dialects
// ---------------------------------------------------------------------------

namespace {

struct DialectSpec {
    const char* marker; // student column, identifies the dialect
    const char* skill;
    const char* correct;
    const char* order;
};

constexpr DialectSpec kAssistments{"user_id", "skill_name", "correct", "order_id"};
constexpr DialectSpec kCognitiveTutor{"Anon Student Id", "KC(Default)",
                                      "Correct First Attempt", "Row"};

bool contains(const std::vector<std::string>& header, const std::string& name) {
    return std::find(header.begin(), header.end(), name) != header.end();
}

bool dialect_complete(const std::vector<std::string>& header, const DialectSpec& d) {
    return contains(header, d.marker) && contains(header, d.skill) &&
           contains(header, d.correct) && contains(header, d.order);
}

ColumnMap dialect_map(const DialectSpec& d) {
    ColumnMap map;
    map.student.name = d.marker;
    map.skill.name = d.skill;
    map.correct.name = d.correct;
    map.order.name = d.order;
    return map;
}

} // namespace

std::optional<ColumnMap> detect_columns(const std::vector<std::string>& header) {
    if (header.empty())
        throw SchemaError("empty header");
    const bool a = contains(header, kAssistments.marker);
    const bool b = contains(header, kCognitiveTutor.marker);
    if (a && b)
        throw SchemaError(std::string("ambiguous header: contains both \"") +
                          kAssistments.marker + "\" and \"" + kCognitiveTutor.marker +
                          "\"; pass an explicit column mapping");
    if (a && dialect_complete(header, kAssistments)) {
        ColumnMap map = dialect_map(kAssistments);
        if (contains(header, "template_id"))
            map.guess_class.name = "template_id";
        return map;
    }
    if (b && dialect_complete(header, kCognitiveTutor))
        return dialect_map(kCognitiveTutor);
    return std::nullopt;
}

std::optional<std::string> default_class_column(const std::vector<std::string>& header) {
    if (contains(header, "template_id"))
        return std::string("template_id");
    return std::nullopt;
}

// ---------------------------------------------------------------------------
// Delimited parsing
// ---------------------------------------------------------------------------

namespace {

std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos)
        return "";
    std::size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

// Splits one line into fields. Double quotes protect delimiters and embed
// as "" pairs; unquoted fields are trimmed.
std::vector<std::string> split_line(const std::string& line, char delim) {
    std::vector<std::string> out;
    std::string field;
    bool quoted = false;
    bool was_quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    field += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                field += c;
            }
        } else if (c == '"' && field.empty() && !was_quoted) {
            quoted = true;
            was_quoted = true;
        } else if (c == delim) {
            out.push_back(was_quoted ? field : trim(field));
            field.clear();
            was_quoted = false;
        } else {
            field += c;
        }
    }
    out.push_back(was_quoted ? field : trim(field));
    return out;
}

bool parse_number(const std::string& s, double& out) {
    if (s.empty())
        return false;
    char* end = nullptr;
    out = std::strtod(s.c_str(), &end);
    return end == s.c_str() + s.size();
}

int resolve_column(const std::vector<std::string>& header, const ColumnRef& ref,
                   const char* what) {
    if (!ref.name.empty()) {
        for (std::size_t i = 0; i < header.size(); ++i)
            if (header[i] == ref.name)
                return static_cast<int>(i);
        throw SchemaError(std::string(what) + " column \"" + ref.name +
                          "\" not found in header");
    }
    if (ref.position >= 0) {
        if (ref.position >= static_cast<int>(header.size()))
            throw SchemaError(std::string(what) + " column position " +
                              std::to_string(ref.position) + " exceeds header width " +
                              std::to_string(header.size()));
        return ref.position;
    }
    throw SchemaError(std::string("no ") + what + " column mapped");
}

// Dense first-appearance label dictionary.
struct LabelIndex {
    std::vector<std::string> labels;
    std::unordered_map<std::string, std::int32_t> index;

    std::int32_t intern(const std::string& label) {
        auto it = index.find(label);
        if (it != index.end())
            return it->second;
        auto id = static_cast<std::int32_t>(labels.size());
        labels.push_back(label);
        index.emplace(label, id);
        return id;
    }
};

struct RawRow {
    double order;
    std::size_t file_pos;
    std::uint8_t obs;
    std::int32_t learn_class;
    std::int32_t guess_class;
};

} // namespace

std::string IngestReport::to_text() const {
    std::ostringstream out;
    out << "rows read:               " << rows_read << "\n"
        << "rows used:               " << rows_used << "\n"
        << "rows dropped (correct):  " << rows_dropped_correct << "\n"
        << "rows dropped (malformed): " << rows_dropped_malformed << "\n"
        << "rows filtered by skill:  " << rows_filtered << "\n"
        << "skills found:            " << skills.size() << "\n";
    for (const std::string& s : skills)
        out << "  " << s << "\n";
    return out.str();
}

IngestResult ingest_text(const std::string& text, char delimiter, const ColumnMap& map,
                         const std::vector<std::string>& skills_filter) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line))
        throw SchemaError("input has no header line");
    const std::vector<std::string> header = split_line(line, delimiter);

    const int col_student = resolve_column(header, map.student, "student");
    const int col_skill = resolve_column(header, map.skill, "skill");
    const int col_correct = resolve_column(header, map.correct, "correctness");
    const int col_order = resolve_column(header, map.order, "order");
    const int col_learn =
        map.learn_class.is_set() ? resolve_column(header, map.learn_class, "learn-class") : -1;
    const int col_guess =
        map.guess_class.is_set() ? resolve_column(header, map.guess_class, "guess-class") : -1;
    int max_col = std::max({col_student, col_skill, col_correct, col_order, col_learn, col_guess});

    std::vector<int> assigned = {col_student, col_skill, col_correct, col_order};
    if (col_learn >= 0)
        assigned.push_back(col_learn);
    if (col_guess >= 0)
        assigned.push_back(col_guess);
    std::sort(assigned.begin(), assigned.end());
    if (std::adjacent_find(assigned.begin(), assigned.end()) != assigned.end())
        throw SchemaError("column \"" +
                          header[static_cast<std::size_t>(
                              *std::adjacent_find(assigned.begin(), assigned.end()))] +
                          "\" is mapped to more than one role");

    struct SkillBuild {
        std::string name;
        std::vector<std::string> students;                        // first appearance
        std::unordered_map<std::string, std::size_t> student_idx;
        std::vector<std::vector<RawRow>> rows;                    // per student
        LabelIndex learn_labels;
        LabelIndex guess_labels;
    };
    std::vector<SkillBuild> builds;
    std::unordered_map<std::string, std::size_t> skill_idx;

    IngestResult result;
    IngestReport& report = result.report;
    std::size_t file_pos = 0;

    while (std::getline(in, line)) {
        if (line.empty() || line == "\r")
            continue;
        ++report.rows_read;
        const std::vector<std::string> cells = split_line(line, delimiter);
        if (static_cast<int>(cells.size()) <= max_col) {
            ++report.rows_dropped_malformed;
            continue;
        }
        const std::string& student = cells[col_student];
        const std::string& skill = cells[col_skill];
        if (student.empty() || skill.empty()) {
            ++report.rows_dropped_malformed;
            continue;
        }
        if (!skills_filter.empty() &&
            std::find(skills_filter.begin(), skills_filter.end(), skill) ==
                skills_filter.end()) {
            ++report.rows_filtered;
            continue;
        }
        double correct;
        if (!parse_number(cells[col_correct], correct) || (correct != 0.0 && correct != 1.0)) {
            ++report.rows_dropped_correct;
            continue;
        }
        double order;
        if (!parse_number(cells[col_order], order)) {
            ++report.rows_dropped_malformed;
            continue;
        }

        auto it = skill_idx.find(skill);
        if (it == skill_idx.end()) {
            it = skill_idx.emplace(skill, builds.size()).first;
            builds.push_back({});
            builds.back().name = skill;
        }
        SkillBuild& build = builds[it->second];

        RawRow row;
        row.order = order;
        row.file_pos = file_pos++;
        row.obs = correct == 1.0 ? 1 : 0;
        row.learn_class = col_learn >= 0 ? build.learn_labels.intern(cells[col_learn]) : 0;
        row.guess_class = col_guess >= 0 ? build.guess_labels.intern(cells[col_guess]) : 0;

        auto sit = build.student_idx.find(student);
        if (sit == build.student_idx.end()) {
            sit = build.student_idx.emplace(student, build.students.size()).first;
            build.students.push_back(student);
            build.rows.emplace_back();
        }
        build.rows[sit->second].push_back(row);
        ++report.rows_used;
    }

    if (report.rows_used == 0)
        throw EmptyDatasetError("no usable rows in input (" +
                                std::to_string(report.rows_read) + " read, " +
                                std::to_string(report.rows_dropped_correct +
                                               report.rows_dropped_malformed) +
                                " dropped)");

    for (SkillBuild& build : builds) {
        SkillData skill;
        skill.name = build.name;
        skill.labels.learn =
            build.learn_labels.labels.empty() ? std::vector<std::string>{"default"}
                                              : std::move(build.learn_labels.labels);
        skill.labels.guess =
            build.guess_labels.labels.empty() ? std::vector<std::string>{"default"}
                                              : std::move(build.guess_labels.labels);
        for (std::size_t s = 0; s < build.students.size(); ++s) {
            std::vector<RawRow>& rows = build.rows[s];
            std::stable_sort(rows.begin(), rows.end(), [](const RawRow& a, const RawRow& b) {
                return a.order < b.order;
            });
            Sequence seq;
            seq.student = build.students[s];
            seq.obs.reserve(rows.size());
            for (const RawRow& row : rows) {
                seq.obs.push_back(row.obs);
                seq.learn_classes.push_back(row.learn_class);
                seq.guess_classes.push_back(row.guess_class);
                seq.scored.push_back(1);
            }
            skill.sequences.push_back(std::move(seq));
        }
        report.skills.push_back(skill.name);
        result.dataset.skills.push_back(std::move(skill));
    }
    return result;
}

namespace {

char infer_delimiter(const std::string& path, const std::string& first_line) {
    auto ends_with = [&](const char* suffix) {
        std::string s = suffix;
        return path.size() >= s.size() &&
               path.compare(path.size() - s.size(), s.size(), s) == 0;
    };
    if (ends_with(".tsv") || ends_with(".tab"))
        return '\t';
    if (ends_with(".csv"))
        return ',';
    return first_line.find('\t') != std::string::npos ? '\t' : ',';
}

} // namespace

IngestResult ingest(const std::string& path, const ColumnMap& map,
                    const std::vector<std::string>& skills_filter) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw IoError("cannot open \"" + path + "\" for reading");
    std::ostringstream buf;
    buf << in.rdbuf();
    std::string text = buf.str();
    std::string first_line = text.substr(0, text.find('\n'));
    return ingest_text(text, infer_delimiter(path, first_line), map, skills_filter);
}

// ---------------------------------------------------------------------------
// Variant transforms
// ---------------------------------------------------------------------------

Dataset apply_multiprior_transform(const Dataset& ds) {
    Dataset out;
    out.skills.reserve(ds.skills.size());
    for (const SkillData& skill : ds.skills) {
        SkillData t;
        t.name = skill.name;
        t.labels.guess = skill.labels.guess;
        t.labels.learn = {"prior_correct", "prior_incorrect", "default"};
        t.sequences.reserve(skill.sequences.size());
        for (const Sequence& seq : skill.sequences) {
            Sequence r;
            r.student = seq.student;
            const std::size_t n = seq.length();
            r.obs.reserve(n + 1);
            r.learn_classes.reserve(n + 1);
            r.guess_classes.reserve(n + 1);
            r.scored.reserve(n + 1);

            // Dummy step repeating the first response; never scored.
            r.obs.push_back(seq.obs[0]);
            r.learn_classes.push_back(0);
            r.guess_classes.push_back(seq.guess_classes[0]);
            r.scored.push_back(0);

            for (std::size_t i = 0; i < n; ++i) {
                r.obs.push_back(seq.obs[i]);
                // Transition out of the dummy step routes through the
                // high- or low-prior class; everything later is standard.
                r.learn_classes.push_back(i == 0 ? (seq.obs[0] == 1 ? 0 : 1) : 2);
                r.guess_classes.push_back(seq.guess_classes[i]);
                r.scored.push_back(seq.scored[i]);
            }
            t.sequences.push_back(std::move(r));
        }
        out.skills.push_back(std::move(t));
    }
    return out;
}

Dataset derive_multipair_classes(
    const Dataset& ds, const std::vector<std::vector<std::vector<std::string>>>& items) {
    if (items.size() != ds.skills.size())
        throw SchemaError("item labels: got " + std::to_string(items.size()) +
                          " skills, dataset has " + std::to_string(ds.skills.size()));
    Dataset out;
    out.skills.reserve(ds.skills.size());
    for (std::size_t k = 0; k < ds.skills.size(); ++k) {
        const SkillData& skill = ds.skills[k];
        if (items[k].size() != skill.sequences.size())
            throw SchemaError("item labels for skill \"" + skill.name + "\": got " +
                              std::to_string(items[k].size()) + " sequences, expected " +
                              std::to_string(skill.sequences.size()));
        SkillData t;
        t.name = skill.name;
        t.labels.guess = skill.labels.guess;
        LabelIndex pairs;
        pairs.intern("start");
        t.sequences.reserve(skill.sequences.size());
        for (std::size_t s = 0; s < skill.sequences.size(); ++s) {
            const Sequence& seq = skill.sequences[s];
            const std::vector<std::string>& labels = items[k][s];
            if (labels.size() != seq.length())
                throw SchemaError("item labels for skill \"" + skill.name + "\", student \"" +
                                  seq.student + "\": got " + std::to_string(labels.size()) +
                                  " labels for " + std::to_string(seq.length()) + " steps");
            Sequence r = seq;
            for (std::size_t i = 0; i < seq.length(); ++i)
                r.learn_classes[i] =
                    i == 0 ? 0 : pairs.intern(labels[i - 1] + "->" + labels[i]);
            t.sequences.push_back(std::move(r));
        }
        t.labels.learn = std::move(pairs.labels);
        out.skills.push_back(std::move(t));
    }
    return out;
}

Dataset derive_multipair_classes(const Dataset& ds) {
    std::vector<std::vector<std::vector<std::string>>> items;
    items.reserve(ds.skills.size());
    for (const SkillData& skill : ds.skills) {
        auto& per_skill = items.emplace_back();
        per_skill.reserve(skill.sequences.size());
        for (const Sequence& seq : skill.sequences) {
            auto& labels = per_skill.emplace_back();
            labels.reserve(seq.length());
            for (std::int32_t cls : seq.learn_classes)
                labels.push_back(skill.labels.learn.at(static_cast<std::size_t>(cls)));
        }
    }
    return derive_multipair_classes(ds, items);
}

Dataset prepare_dataset(Dataset ds, const ModelConfig& cfg) {
    if (cfg.multipair)
        ds = derive_multipair_classes(ds);
    if (cfg.multiprior)
        ds = apply_multiprior_transform(ds);
    return ds;
}

Dataset align_classes(const Dataset& ds, const ModelDocument& doc,
                      std::size_t* fallback_steps) {
    std::size_t fallbacks = 0;
    Dataset out;
    out.skills.reserve(ds.skills.size());
    for (const SkillData& skill : ds.skills) {
        const SkillModel* model = doc.find(skill.name);
        if (!model)
            throw ConfigError("model document has no parameters for skill \"" +
                              skill.name + "\"");
        std::unordered_map<std::string, std::int32_t> learn_idx, guess_idx;
        for (std::size_t i = 0; i < model->labels.learn.size(); ++i)
            learn_idx.emplace(model->labels.learn[i], static_cast<std::int32_t>(i));
        for (std::size_t i = 0; i < model->labels.guess.size(); ++i)
            guess_idx.emplace(model->labels.guess[i], static_cast<std::int32_t>(i));

        SkillData t;
        t.name = skill.name;
        t.labels = model->labels;
        t.sequences.reserve(skill.sequences.size());
        for (const Sequence& seq : skill.sequences) {
            Sequence r = seq;
            for (std::size_t i = 0; i < seq.length(); ++i) {
                const std::string& learn_label =
                    skill.labels.learn.at(static_cast<std::size_t>(seq.learn_classes[i]));
                auto lit = learn_idx.find(learn_label);
                if (lit != learn_idx.end()) {
                    r.learn_classes[i] = lit->second;
                } else {
                    r.learn_classes[i] = 0;
                    if (i > 0) // entry 0 never feeds a transition
                        ++fallbacks;
                }
                const std::string& guess_label =
                    skill.labels.guess.at(static_cast<std::size_t>(seq.guess_classes[i]));
                auto git = guess_idx.find(guess_label);
                if (git != guess_idx.end()) {
                    r.guess_classes[i] = git->second;
                } else {
                    r.guess_classes[i] = 0;
                    ++fallbacks;
                }
            }
            t.sequences.push_back(std::move(r));
        }
        out.skills.push_back(std::move(t));
    }
    if (fallback_steps)
        *fallback_steps = fallbacks;
    return out;
}

// ---------------------------------------------------------------------------
// Export
// ---------------------------------------------------------------------------

namespace {

std::string csv_escape(const std::string& s) {
    if (s.find_first_of(",\"\n\r") == std::string::npos)
        return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"')
            out += '"';
        out += c;
    }
    out += '"';
    return out;
}

} // namespace

void write_dataset_csv(const Dataset& ds, const std::string& path) {
    bool any_learn = false, any_guess = false;
    for (const SkillData& skill : ds.skills) {
        any_learn = any_learn || skill.labels.learn.size() > 1;
        any_guess = any_guess || skill.labels.guess.size() > 1;
    }
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw IoError("cannot open \"" + path + "\" for writing");
    out << "user_id,skill_name,correct,order_id";
    if (any_learn)
        out << ",answer_type";
    if (any_guess)
        out << ",template_id";
    out << "\n";
    for (const SkillData& skill : ds.skills) {
        for (const Sequence& seq : skill.sequences) {
            for (std::size_t t = 0; t < seq.length(); ++t) {
                out << csv_escape(seq.student) << ',' << csv_escape(skill.name) << ','
                    << int(seq.obs[t]) << ',' << (t + 1);
                if (any_learn)
                    out << ','
                        << csv_escape(skill.labels.learn.at(
                               static_cast<std::size_t>(seq.learn_classes[t])));
                if (any_guess)
                    out << ','
                        << csv_escape(skill.labels.guess.at(
                               static_cast<std::size_t>(seq.guess_classes[t])));
                out << "\n";
            }
        }
    }
    if (!out)
        throw IoError("failed writing \"" + path + "\"");
}

} // namespace bkt
