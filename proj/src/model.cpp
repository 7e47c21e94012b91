#include "bkt/model.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "bkt/errors.hpp"

#include <json.hpp>

using nlohmann::json;

namespace bkt {

void validate_config(const ModelConfig& cfg) {
    if (cfg.num_restarts < 1)
        throw ConfigError("num_restarts must be >= 1");
    if (cfg.max_iterations < 1)
        throw ConfigError("max_iterations must be >= 1");
    if (!(cfg.convergence_tol > 0.0))
        throw ConfigError("convergence_tol must be positive");
    if (cfg.multiprior && cfg.fixed_init)
        throw ConfigError("multiprior fixes the prior itself and cannot be combined "
                          "with an explicit parameter initialization");
    if (cfg.multiprior && (cfg.multilearn || cfg.multipair))
        throw ConfigError("multiprior defines its own learn classes and cannot be "
                          "combined with multilearn or multipair");
    if (cfg.multilearn && cfg.multipair)
        throw ConfigError("multilearn and multipair both assign learn classes; "
                          "enable at most one");
    if (cfg.fixed_init) {
        auto violations = validate_params(*cfg.fixed_init);
        if (!violations.empty())
            throw ConfigError("fixed_init is not a valid parameter set: " +
                              violations.front().field + ": " + violations.front().message);
    }
}

ModelParams init_params(const ModelConfig& cfg, std::size_t m, std::size_t n, Rng& rng) {
    if (m < 1 || n < 1)
        throw ConfigError("a skill needs at least one learn class and one guess class");
    if (cfg.fixed_init) {
        const ModelParams& fixed = *cfg.fixed_init;
        if (fixed.learns.size() != m || fixed.guesses.size() != n)
            throw ConfigError("fixed_init has " + std::to_string(fixed.learns.size()) +
                              " learn and " + std::to_string(fixed.guesses.size()) +
                              " guess classes, dataset needs " + std::to_string(m) +
                              " and " + std::to_string(n));
        return fixed;
    }

    ModelParams p;
    p.prior = rng.unit();
    if (cfg.multiprior)
        p.prior = 0.0; // dummy-step construction owns the prior; EM keeps it at 0
    p.learns.resize(m);
    for (auto& v : p.learns) v = rng.unit();
    p.forgets.assign(m, 0.0);
    if (cfg.forgets)
        for (auto& v : p.forgets) v = 0.3 * rng.unit();
    p.guesses.resize(n);
    for (auto& v : p.guesses) v = 0.5 * rng.unit();
    p.slips.resize(n);
    for (auto& v : p.slips) v = 0.5 * rng.unit();
    return p;
}

namespace {

void check_prob(std::vector<ParamViolation>& out, const std::string& field, double v) {
    if (!std::isfinite(v) || v < 0.0 || v > 1.0) {
        std::ostringstream msg;
        msg << "value " << v << " outside [0, 1]";
        out.push_back({field, msg.str()});
    }
}

void check_prob_list(std::vector<ParamViolation>& out, const std::string& name,
                     const std::vector<double>& vs) {
    for (std::size_t i = 0; i < vs.size(); ++i)
        check_prob(out, name + "[" + std::to_string(i) + "]", vs[i]);
}

} // namespace

std::vector<ParamViolation> validate_params(const ModelParams& p) {
    std::vector<ParamViolation> out;
    check_prob(out, "prior", p.prior);
    if (p.learns.empty())
        out.push_back({"learns", "at least one learn class required"});
    if (p.guesses.empty())
        out.push_back({"guesses", "at least one guess class required"});
    if (p.learns.size() != p.forgets.size())
        out.push_back({"forgets", "length " + std::to_string(p.forgets.size()) +
                                      " does not match learns length " +
                                      std::to_string(p.learns.size())});
    if (p.guesses.size() != p.slips.size())
        out.push_back({"slips", "length " + std::to_string(p.slips.size()) +
                                    " does not match guesses length " +
                                    std::to_string(p.guesses.size())});
    check_prob_list(out, "learns", p.learns);
    check_prob_list(out, "forgets", p.forgets);
    check_prob_list(out, "guesses", p.guesses);
    check_prob_list(out, "slips", p.slips);
    return out;
}

bool params_valid(const ModelParams& p) {
    return validate_params(p).empty();
}

TransitionSet build_transition_set(const ModelParams& p) {
    TransitionSet set;
    set.matrices.resize(p.learns.size());
    for (std::size_t i = 0; i < p.learns.size(); ++i) {
        const double learn = p.learns[i];
        const double forget = p.forgets[i];
        set.matrices[i][kUnlearned] = {1.0 - learn, forget};
        set.matrices[i][kLearned] = {learn, 1.0 - forget};
    }
    return set;
}

StatePrior state_prior(const ModelParams& p) {
    return {1.0 - p.prior, p.prior};
}

const SkillModel* ModelDocument::find(const std::string& name) const {
    for (std::size_t i = 0; i < skill_names.size(); ++i)
        if (skill_names[i] == name)
            return &skills[i];
    return nullptr;
}

ModelDocument::Variants variants_of(const ModelConfig& cfg) {
    ModelDocument::Variants v;
    v.multigs = cfg.multigs;
    v.multigs_column = cfg.multigs_column;
    v.multilearn = cfg.multilearn;
    v.multilearn_column = cfg.multilearn_column;
    v.multiprior = cfg.multiprior;
    v.multipair = cfg.multipair;
    v.multipair_column = cfg.multipair_column;
    v.forgets = cfg.forgets;
    return v;
}

// ---------------------------------------------------------------------------
// Serialization. JSON with a strict schema: every field required, unknown
// fields rejected by name. nlohmann emits shortest round-trippable decimals,
// so parse(serialize(x)) reproduces every double bit-exactly.
// ---------------------------------------------------------------------------

namespace {

constexpr const char* kSchemaTag = "bkt-model-v1";

void reject_unknown(const json& obj, const char* where,
                    std::initializer_list<const char*> allowed) {
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        bool known = false;
        for (const char* name : allowed)
            if (it.key() == name) { known = true; break; }
        if (!known)
            throw SchemaError(std::string("unknown field \"") + it.key() + "\" in " + where);
    }
}

const json& require(const json& obj, const char* where, const char* field) {
    auto it = obj.find(field);
    if (it == obj.end())
        throw SchemaError(std::string("missing field \"") + field + "\" in " + where);
    return *it;
}

double get_number(const json& obj, const char* where, const char* field) {
    const json& v = require(obj, where, field);
    if (!v.is_number())
        throw SchemaError(std::string("field \"") + field + "\" in " + where +
                          " must be a number");
    return v.get<double>();
}

std::vector<double> get_numbers(const json& obj, const char* where, const char* field) {
    const json& v = require(obj, where, field);
    if (!v.is_array())
        throw SchemaError(std::string("field \"") + field + "\" in " + where +
                          " must be an array of numbers");
    std::vector<double> out;
    out.reserve(v.size());
    for (const json& e : v) {
        if (!e.is_number())
            throw SchemaError(std::string("field \"") + field + "\" in " + where +
                              " must be an array of numbers");
        out.push_back(e.get<double>());
    }
    return out;
}

std::vector<std::string> get_strings(const json& obj, const char* where, const char* field) {
    const json& v = require(obj, where, field);
    if (!v.is_array())
        throw SchemaError(std::string("field \"") + field + "\" in " + where +
                          " must be an array of strings");
    std::vector<std::string> out;
    out.reserve(v.size());
    for (const json& e : v) {
        if (!e.is_string())
            throw SchemaError(std::string("field \"") + field + "\" in " + where +
                              " must be an array of strings");
        out.push_back(e.get<std::string>());
    }
    return out;
}

bool get_bool(const json& obj, const char* where, const char* field) {
    const json& v = require(obj, where, field);
    if (!v.is_boolean())
        throw SchemaError(std::string("field \"") + field + "\" in " + where +
                          " must be a boolean");
    return v.get<bool>();
}

std::string get_string(const json& obj, const char* where, const char* field) {
    const json& v = require(obj, where, field);
    if (!v.is_string())
        throw SchemaError(std::string("field \"") + field + "\" in " + where +
                          " must be a string");
    return v.get<std::string>();
}

json skill_to_json(const SkillModel& skill) {
    json j;
    j["prior"] = skill.params.prior;
    j["learns"] = skill.params.learns;
    j["forgets"] = skill.params.forgets;
    j["guesses"] = skill.params.guesses;
    j["slips"] = skill.params.slips;
    j["learn_classes"] = skill.labels.learn;
    j["guess_classes"] = skill.labels.guess;
    return j;
}

SkillModel skill_from_json(const json& j, const std::string& where) {
    if (!j.is_object())
        throw SchemaError("skill section " + where + " must be an object");
    reject_unknown(j, where.c_str(),
                   {"prior", "learns", "forgets", "guesses", "slips",
                    "learn_classes", "guess_classes"});
    SkillModel skill;
    skill.params.prior = get_number(j, where.c_str(), "prior");
    skill.params.learns = get_numbers(j, where.c_str(), "learns");
    skill.params.forgets = get_numbers(j, where.c_str(), "forgets");
    skill.params.guesses = get_numbers(j, where.c_str(), "guesses");
    skill.params.slips = get_numbers(j, where.c_str(), "slips");
    skill.labels.learn = get_strings(j, where.c_str(), "learn_classes");
    skill.labels.guess = get_strings(j, where.c_str(), "guess_classes");
    if (skill.labels.learn.size() != skill.params.learns.size())
        throw SchemaError("learn_classes length does not match learns in " + where);
    if (skill.labels.guess.size() != skill.params.guesses.size())
        throw SchemaError("guess_classes length does not match guesses in " + where);
    auto violations = validate_params(skill.params);
    if (!violations.empty())
        throw SchemaError("invalid parameters in " + where + ": " +
                          violations.front().field + ": " + violations.front().message);
    return skill;
}

json parse_strict(const std::string& text) {
    if (text.find_first_not_of(" \t\r\n") == std::string::npos)
        throw SchemaError("empty model document");
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        throw SchemaError(std::string("malformed model document: ") + e.what());
    }
}

} // namespace

std::string serialize_model(const ModelParams& p, const ClassLabels& labels) {
    if (!params_valid(p))
        throw ConfigError("refusing to serialize invalid parameters");
    return skill_to_json(SkillModel{p, labels}).dump(2);
}

SkillModel deserialize_model(const std::string& text) {
    return skill_from_json(parse_strict(text), "skill section");
}

std::string serialize_document(const ModelDocument& doc) {
    json j;
    j["schema"] = kSchemaTag;
    json variants;
    variants["multigs"] = doc.variants.multigs;
    variants["multigs_column"] = doc.variants.multigs_column;
    variants["multilearn"] = doc.variants.multilearn;
    variants["multilearn_column"] = doc.variants.multilearn_column;
    variants["multiprior"] = doc.variants.multiprior;
    variants["multipair"] = doc.variants.multipair;
    variants["multipair_column"] = doc.variants.multipair_column;
    variants["forgets"] = doc.variants.forgets;
    j["variants"] = variants;
    json skills = json::array();
    for (std::size_t i = 0; i < doc.skills.size(); ++i) {
        json s = skill_to_json(doc.skills[i]);
        s["name"] = doc.skill_names[i];
        skills.push_back(std::move(s));
    }
    j["skills"] = skills;
    return j.dump(2) + "\n";
}

ModelDocument deserialize_document(const std::string& text) {
    json j = parse_strict(text);
    if (!j.is_object())
        throw SchemaError("model document must be a JSON object");
    reject_unknown(j, "document", {"schema", "variants", "skills"});
    if (get_string(j, "document", "schema") != kSchemaTag)
        throw SchemaError("unsupported schema tag \"" +
                          get_string(j, "document", "schema") + "\"");

    ModelDocument doc;
    const json& variants = require(j, "document", "variants");
    if (!variants.is_object())
        throw SchemaError("field \"variants\" must be an object");
    reject_unknown(variants, "variants",
                   {"multigs", "multigs_column", "multilearn", "multilearn_column",
                    "multiprior", "multipair", "multipair_column", "forgets"});
    doc.variants.multigs = get_bool(variants, "variants", "multigs");
    doc.variants.multigs_column = get_string(variants, "variants", "multigs_column");
    doc.variants.multilearn = get_bool(variants, "variants", "multilearn");
    doc.variants.multilearn_column = get_string(variants, "variants", "multilearn_column");
    doc.variants.multiprior = get_bool(variants, "variants", "multiprior");
    doc.variants.multipair = get_bool(variants, "variants", "multipair");
    doc.variants.multipair_column = get_string(variants, "variants", "multipair_column");
    doc.variants.forgets = get_bool(variants, "variants", "forgets");

    const json& skills = require(j, "document", "skills");
    if (!skills.is_array())
        throw SchemaError("field \"skills\" must be an array");
    for (std::size_t i = 0; i < skills.size(); ++i) {
        const json& s = skills[i];
        const std::string where = "skills[" + std::to_string(i) + "]";
        if (!s.is_object())
            throw SchemaError(where + " must be an object");
        json body = s;
        auto name_it = body.find("name");
        if (name_it == body.end())
            throw SchemaError("missing field \"name\" in " + where);
        if (!name_it->is_string())
            throw SchemaError("field \"name\" in " + where + " must be a string");
        doc.skill_names.push_back(name_it->get<std::string>());
        body.erase("name");
        doc.skills.push_back(skill_from_json(body, where));
    }
    return doc;
}

void save_document(const ModelDocument& doc, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw IoError("cannot open \"" + path + "\" for writing");
    out << serialize_document(doc);
    if (!out)
        throw IoError("failed writing \"" + path + "\"");
}

ModelDocument load_document(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw IoError("cannot open \"" + path + "\" for reading");
    std::ostringstream buf;
    buf << in.rdbuf();
    return deserialize_document(buf.str());
}

} // namespace bkt
