#include "cli.hpp"

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "bkt/crossval.hpp"
#include "bkt/data.hpp"
#include "bkt/em.hpp"
#include "bkt/errors.hpp"
#include "bkt/metrics.hpp"
#include "bkt/predict.hpp"
#include "bkt/synthetic.hpp"

namespace bkt {

namespace {

constexpr const char* kExitCodeHelp =
    "Exit codes: 0 success, 2 usage error, 3 I/O error, 4 data schema error, "
    "5 fit degeneracy.";

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::string item;
    std::istringstream in(s);
    while (std::getline(in, item, ','))
        if (!item.empty())
            out.push_back(item);
    return out;
}

std::vector<double> split_doubles(const std::string& s) {
    std::vector<double> out;
    for (const std::string& item : split_list(s)) {
        try {
            std::size_t pos = 0;
            out.push_back(std::stod(item, &pos));
            if (pos != item.size())
                throw std::invalid_argument(item);
        } catch (const std::exception&) {
            throw ConfigError("\"" + item + "\" is not a number");
        }
    }
    return out;
}

std::vector<std::int32_t> split_ints(const std::string& s) {
    std::vector<std::int32_t> out;
    for (const std::string& item : split_list(s)) {
        try {
            std::size_t pos = 0;
            out.push_back(std::stoi(item, &pos));
            if (pos != item.size())
                throw std::invalid_argument(item);
        } catch (const std::exception&) {
            throw ConfigError("\"" + item + "\" is not an integer");
        }
    }
    return out;
}

// "@3" selects a zero-based column position, anything else a header name.
ColumnRef parse_colref(const std::string& s) {
    ColumnRef ref;
    if (s.size() > 1 && s[0] == '@' &&
        s.find_first_not_of("0123456789", 1) == std::string::npos) {
        ref.position = std::stoi(s.substr(1));
    } else {
        ref.name = s;
    }
    return ref;
}

struct CommonArgs {
    std::string data_path;
    std::string col_student, col_skill, col_correct, col_order;
    std::string skills;
};

struct VariantArgs {
    CLI::Option* multigs = nullptr;
    CLI::Option* multilearn = nullptr;
    CLI::Option* multipair = nullptr;
    std::string multigs_col, multilearn_col, multipair_col;
    bool multiprior = false;
    bool forgets = false;
};

void add_data_options(CLI::App* cmd, CommonArgs& args) {
    cmd->add_option("--data", args.data_path, "input response log (.csv or .tsv)")
        ->required();
    cmd->add_option("--col-student", args.col_student,
                    "student column (name, or @N for position)");
    cmd->add_option("--col-skill", args.col_skill, "skill column");
    cmd->add_option("--col-correct", args.col_correct, "correctness column");
    cmd->add_option("--col-order", args.col_order, "chronological order column");
    cmd->add_option("--skills", args.skills, "comma-separated skill filter");
}

void add_variant_options(CLI::App* cmd, VariantArgs& args) {
    args.multigs = cmd->add_option("--multigs", args.multigs_col,
                                   "per-class guess/slip; value = class column "
                                   "(default: the dialect template column)")
                       ->expected(0, 1);
    args.multilearn = cmd->add_option("--multilearn", args.multilearn_col,
                                      "per-class learn rates; value = class column")
                          ->expected(0, 1);
    args.multipair = cmd->add_option("--multipair", args.multipair_col,
                                     "learn rate per consecutive item pair; value = "
                                     "item column")
                         ->expected(0, 1);
    cmd->add_flag("--multiprior", args.multiprior,
                  "prior-per-student dummy-step construction");
    cmd->add_flag("--forgets", args.forgets, "fit forget rates (otherwise pinned to 0)");
}

void add_fit_options(CLI::App* cmd, ModelConfig& cfg) {
    cmd->add_option("--seed", cfg.seed, "random seed (default 0)");
    cmd->add_option("--restarts", cfg.num_restarts, "EM restarts per skill (default 20)");
    cmd->add_option("--max-iter", cfg.max_iterations, "EM iteration cap (default 100)");
    cmd->add_option("--tol", cfg.convergence_tol,
                    "absolute log-likelihood gain treated as converged (default 1e-3)");
    cmd->add_flag("--parallel", cfg.parallel, "parallelise the EM passes");
    cmd->add_option("--threads", cfg.threads, "thread count for --parallel (default: all)");
}

void apply_variants(ModelConfig& cfg, const VariantArgs& args) {
    if (args.multigs->count()) {
        cfg.multigs = true;
        cfg.multigs_column = args.multigs_col;
    }
    if (args.multilearn->count()) {
        cfg.multilearn = true;
        cfg.multilearn_column = args.multilearn_col;
    }
    if (args.multipair->count()) {
        cfg.multipair = true;
        cfg.multipair_column = args.multipair_col;
    }
    cfg.multiprior = args.multiprior;
    cfg.forgets = args.forgets;
}

std::pair<std::vector<std::string>, char> read_header(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw IoError("cannot open \"" + path + "\" for reading");
    std::string line;
    if (!std::getline(in, line))
        throw SchemaError("input has no header line");
    const bool tab = (path.size() > 4 && (path.ends_with(".tsv") || path.ends_with(".tab"))) ||
                     (!path.ends_with(".csv") && line.find('\t') != std::string::npos);
    const char delim = tab ? '\t' : ',';
    std::vector<std::string> header;
    std::string cell;
    std::istringstream ls(line);
    while (std::getline(ls, cell, delim)) {
        while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' '))
            cell.pop_back();
        header.push_back(cell);
    }
    return {header, delim};
}

// Resolves the effective column map: auto-detection first, user overrides
// on top, then the variant class columns.
ColumnMap build_column_map(const std::string& path, const CommonArgs& args,
                           const ModelConfig& cfg) {
    auto [header, delim] = read_header(path);
    (void)delim;
    ColumnMap map;
    if (auto detected = detect_columns(header))
        map = *detected;
    if (!args.col_student.empty())
        map.student = parse_colref(args.col_student);
    if (!args.col_skill.empty())
        map.skill = parse_colref(args.col_skill);
    if (!args.col_correct.empty())
        map.correct = parse_colref(args.col_correct);
    if (!args.col_order.empty())
        map.order = parse_colref(args.col_order);
    if (!map.student.is_set() || !map.skill.is_set() || !map.correct.is_set() ||
        !map.order.is_set())
        throw SchemaError("header matches no known dialect; pass --col-student, "
                          "--col-skill, --col-correct and --col-order");

    auto class_column = [&](const std::string& chosen, const char* what) -> ColumnRef {
        if (!chosen.empty())
            return parse_colref(chosen);
        if (auto dflt = default_class_column(header))
            return parse_colref(*dflt);
        throw SchemaError(std::string("no class column for ") + what +
                          ": none given and the header has no template column");
    };
    map.guess_class = ColumnRef{};
    map.learn_class = ColumnRef{};
    if (cfg.multigs)
        map.guess_class = class_column(cfg.multigs_column, "--multigs");
    if (cfg.multilearn)
        map.learn_class = class_column(cfg.multilearn_column, "--multilearn");
    if (cfg.multipair)
        map.learn_class = class_column(cfg.multipair_column, "--multipair");
    return map;
}

Dataset load_dataset(const CommonArgs& args, const ModelConfig& cfg, bool verbose) {
    const ColumnMap map = build_column_map(args.data_path, args, cfg);
    IngestResult result = ingest(args.data_path, map, split_list(args.skills));
    if (verbose)
        std::cerr << result.report.to_text();
    return prepare_dataset(std::move(result.dataset), cfg);
}

ModelConfig config_from_document(const ModelDocument& doc) {
    ModelConfig cfg;
    cfg.multigs = doc.variants.multigs;
    cfg.multigs_column = doc.variants.multigs_column;
    cfg.multilearn = doc.variants.multilearn;
    cfg.multilearn_column = doc.variants.multilearn_column;
    cfg.multiprior = doc.variants.multiprior;
    cfg.multipair = doc.variants.multipair;
    cfg.multipair_column = doc.variants.multipair_column;
    cfg.forgets = doc.variants.forgets;
    return cfg;
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw IoError("cannot open \"" + path + "\" for writing");
    out << text;
    if (!out)
        throw IoError("failed writing \"" + path + "\"");
}

std::string param_table(const ModelDocument& doc) {
    struct Line {
        std::string skill, param, cls;
        double value;
    };
    std::vector<Line> lines;
    for (std::size_t k = 0; k < doc.skills.size(); ++k) {
        const SkillModel& skill = doc.skills[k];
        const std::string& name = doc.skill_names[k];
        lines.push_back({name, "prior", "default", skill.params.prior});
        for (std::size_t i = 0; i < skill.params.learns.size(); ++i)
            lines.push_back({name, "learns", skill.labels.learn[i], skill.params.learns[i]});
        for (std::size_t i = 0; i < skill.params.forgets.size(); ++i)
            lines.push_back({name, "forgets", skill.labels.learn[i], skill.params.forgets[i]});
        for (std::size_t j = 0; j < skill.params.guesses.size(); ++j)
            lines.push_back({name, "guesses", skill.labels.guess[j], skill.params.guesses[j]});
        for (std::size_t j = 0; j < skill.params.slips.size(); ++j)
            lines.push_back({name, "slips", skill.labels.guess[j], skill.params.slips[j]});
    }
    std::size_t w_skill = 5, w_param = 5, w_cls = 5;
    for (const Line& l : lines) {
        w_skill = std::max(w_skill, l.skill.size());
        w_param = std::max(w_param, l.param.size());
        w_cls = std::max(w_cls, l.cls.size());
    }
    std::ostringstream out;
    auto pad = [](const std::string& s, std::size_t w) {
        return s + std::string(w - s.size(), ' ');
    };
    out << pad("skill", w_skill) << ' ' << pad("param", w_param) << ' ' << pad("class", w_cls)
        << ' ' << "value\n";
    char buf[32];
    for (const Line& l : lines) {
        std::snprintf(buf, sizeof(buf), "%.5f", l.value);
        out << pad(l.skill, w_skill) << ' ' << pad(l.param, w_param) << ' '
            << pad(l.cls, w_cls) << ' ' << buf << "\n";
    }
    return out.str();
}

void print_report(const MetricReport& report, const std::string& out_path) {
    if (out_path.empty())
        std::cout << report.to_table();
    else
        write_text(out_path, report.to_csv());
    for (const std::string& note : report.notes)
        std::cerr << "note: " << note << "\n";
}

// ---------------------------------------------------------------------------
// Subcommands
// ---------------------------------------------------------------------------

int cmd_fit(const CommonArgs& common, const ModelConfig& cfg, const std::string& model_out,
            const std::string& params_out, bool verbose) {
    validate_config(cfg);
    const Dataset ds = load_dataset(common, cfg, verbose);
    const FitOutcome outcome = fit(ds, cfg);
    for (const std::string& warning : outcome.warnings)
        std::cerr << "warning: " << warning << "\n";
    if (verbose) {
        for (const SkillFit& f : outcome.skills) {
            const RestartStats& best = f.result.restarts[f.result.best_restart];
            std::cerr << f.skill << ": best restart " << f.result.best_restart
                      << ", log-likelihood " << best.final_log_likelihood << ", "
                      << best.iterations << " iterations"
                      << (best.converged ? "" : " (not converged)") << "\n";
        }
    }
    const ModelDocument doc = make_document(ds, outcome, cfg);
    save_document(doc, model_out);
    const std::string table = param_table(doc);
    if (params_out.empty())
        std::cout << table;
    else
        write_text(params_out, table);
    return 0;
}

int cmd_predict(const CommonArgs& common, const std::string& model_path,
                const std::string& out_path, bool verbose) {
    const ModelDocument doc = load_document(model_path);
    const ModelConfig cfg = config_from_document(doc);
    const Dataset ds = load_dataset(common, cfg, verbose);
    std::size_t fallback_steps = 0;
    const Dataset aligned = align_classes(ds, doc, &fallback_steps);
    if (fallback_steps > 0)
        std::cerr << "note: " << fallback_steps
                  << " steps used class-0 parameters (labels unseen at fit time)\n";

    std::ostringstream out;
    out << "skill,student,step,observed,predicted_correct,mastery,masked\n";
    char buf[64];
    for (const SkillData& skill : aligned.skills) {
        const SkillModel* model = doc.find(skill.name);
        for (const Sequence& seq : skill.sequences) {
            const PredictionTrace trace = predict(model->params, seq);
            for (std::size_t t = 0; t < seq.length(); ++t) {
                std::snprintf(buf, sizeof(buf), "%.5f,%.5f", trace.p_correct[t],
                              trace.mastery[t]);
                out << skill.name << ',' << seq.student << ',' << (t + 1) << ','
                    << int(seq.obs[t]) << ',' << buf << ',' << (trace.scored[t] ? 0 : 1)
                    << "\n";
            }
        }
    }
    write_text(out_path, out.str());
    return 0;
}

int cmd_evaluate(const CommonArgs& common, const std::string& model_path,
                 const std::string& metrics_arg, const std::string& out_path, bool verbose) {
    const ModelDocument doc = load_document(model_path);
    const ModelConfig cfg = config_from_document(doc);
    const Dataset ds = load_dataset(common, cfg, verbose);
    const MetricReport report = evaluate(doc, ds, split_list(metrics_arg));
    print_report(report, out_path);
    return 0;
}

int cmd_crossvalidate(const CommonArgs& common, const ModelConfig& cfg, int folds,
                      const std::string& metrics_arg, const std::string& out_path,
                      bool verbose) {
    validate_config(cfg);
    const Dataset ds = load_dataset(common, cfg, verbose);
    const MetricReport report = crossvalidate(ds, cfg, folds, split_list(metrics_arg));
    print_report(report, out_path);
    return 0;
}

struct GenerateArgs {
    std::string out_path;
    std::string states_path;
    std::size_t students = 100;
    std::size_t length = 10;
    std::string skill_name = "synthetic";
    std::uint64_t seed = 0;
    double prior = 0.08, learn = 0.3, guess = 0.15, slip = 0.05, forget = 0.0;
    std::string learns, guesses, slips, forgets;
    std::string learn_schedule, guess_schedule;
};

int cmd_generate(const GenerateArgs& args) {
    SyntheticSpec spec;
    spec.params.prior = args.prior;
    spec.params.learns = args.learns.empty() ? std::vector<double>{args.learn}
                                             : split_doubles(args.learns);
    spec.params.guesses = args.guesses.empty() ? std::vector<double>{args.guess}
                                               : split_doubles(args.guesses);
    spec.params.slips = args.slips.empty() ? std::vector<double>{args.slip}
                                           : split_doubles(args.slips);
    spec.params.forgets = args.forgets.empty()
                              ? std::vector<double>(spec.params.learns.size(), args.forget)
                              : split_doubles(args.forgets);
    spec.num_students = args.students;
    spec.sequence_length = args.length;
    spec.seed = args.seed;
    spec.skill_name = args.skill_name;
    spec.learn_schedule = split_ints(args.learn_schedule);
    spec.guess_schedule = split_ints(args.guess_schedule);

    const SyntheticResult result = generate(spec);
    write_dataset_csv(result.dataset, args.out_path);
    if (!args.states_path.empty())
        write_states_csv(result, args.states_path);
    return 0;
}

} // namespace

int run_cli(const std::vector<std::string>& args) {
    CLI::App app{std::string("Bayesian knowledge tracing toolkit.\n") + kExitCodeHelp};
    app.require_subcommand(1);
    bool verbose = false;
    app.add_flag("--verbose", verbose, "report ingestion and fit progress on stderr");

    CommonArgs fit_common, pred_common, eval_common, cv_common;
    ModelConfig fit_cfg, cv_cfg;
    VariantArgs fit_variants, cv_variants;
    std::string fit_model_out, fit_params_out;
    std::string pred_model, pred_out;
    std::string eval_model, eval_metrics = "rmse", eval_out;
    std::string cv_metrics = "rmse", cv_out;
    int cv_folds = 5;
    GenerateArgs gen;

    CLI::App* fit_cmd = app.add_subcommand("fit", "fit parameters per skill");
    add_data_options(fit_cmd, fit_common);
    add_variant_options(fit_cmd, fit_variants);
    add_fit_options(fit_cmd, fit_cfg);
    fit_cmd->add_option("--out", fit_model_out, "model document to write")->required();
    fit_cmd->add_option("--params-out", fit_params_out,
                        "parameter table file (default: stdout)");

    CLI::App* pred_cmd =
        app.add_subcommand("predict", "per-step predictions from a fitted model");
    add_data_options(pred_cmd, pred_common);
    pred_cmd->add_option("--model", pred_model, "model document from fit")->required();
    pred_cmd->add_option("--out", pred_out, "prediction CSV to write")->required();

    CLI::App* eval_cmd =
        app.add_subcommand("evaluate", "score a fitted model on a response log");
    add_data_options(eval_cmd, eval_common);
    eval_cmd->add_option("--model", eval_model, "model document from fit")->required();
    eval_cmd->add_option("--metrics", eval_metrics,
                         "comma-separated metrics (accuracy, auc, mae, rmse)");
    eval_cmd->add_option("--out", eval_out, "also write the report as CSV");

    CLI::App* cv_cmd = app.add_subcommand(
        "crossvalidate", "student-grouped k-fold cross-validation");
    add_data_options(cv_cmd, cv_common);
    add_variant_options(cv_cmd, cv_variants);
    add_fit_options(cv_cmd, cv_cfg);
    cv_cmd->add_option("--folds", cv_folds, "number of folds (default 5)");
    cv_cmd->add_option("--metrics", cv_metrics,
                       "comma-separated metrics (accuracy, auc, mae, rmse)");
    cv_cmd->add_option("--out", cv_out, "also write the report as CSV");

    CLI::App* gen_cmd =
        app.add_subcommand("generate", "sample a synthetic dataset from known parameters");
    gen_cmd->add_option("--out", gen.out_path, "dataset CSV to write")->required();
    gen_cmd->add_option("--states-out", gen.states_path, "latent mastery states CSV");
    gen_cmd->add_option("--students", gen.students, "number of students (default 100)");
    gen_cmd->add_option("--length", gen.length, "responses per student (default 10)");
    gen_cmd->add_option("--skill-name", gen.skill_name, "skill name in the output");
    gen_cmd->add_option("--seed", gen.seed, "random seed (default 0)");
    gen_cmd->add_option("--prior", gen.prior, "P(initially mastered), default 0.08");
    gen_cmd->add_option("--learn", gen.learn, "learn rate, default 0.3");
    gen_cmd->add_option("--guess", gen.guess, "guess rate, default 0.15");
    gen_cmd->add_option("--slip", gen.slip, "slip rate, default 0.05");
    gen_cmd->add_option("--forget", gen.forget, "forget rate, default 0");
    gen_cmd->add_option("--learns", gen.learns, "comma list of per-class learn rates");
    gen_cmd->add_option("--guesses", gen.guesses, "comma list of per-class guess rates");
    gen_cmd->add_option("--slips", gen.slips, "comma list of per-class slip rates");
    gen_cmd->add_option("--forgets", gen.forgets, "comma list of per-class forget rates");
    gen_cmd->add_option("--learn-schedule", gen.learn_schedule,
                        "comma list: learn class of the transition into each step");
    gen_cmd->add_option("--guess-schedule", gen.guess_schedule,
                        "comma list: guess class of each step");

    std::vector<const char*> argv;
    argv.push_back("bkt");
    for (const std::string& a : args)
        argv.push_back(a.c_str());

    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (fit_cmd->parsed()) {
            apply_variants(fit_cfg, fit_variants);
            return cmd_fit(fit_common, fit_cfg, fit_model_out, fit_params_out, verbose);
        }
        if (pred_cmd->parsed())
            return cmd_predict(pred_common, pred_model, pred_out, verbose);
        if (eval_cmd->parsed())
            return cmd_evaluate(eval_common, eval_model, eval_metrics, eval_out, verbose);
        if (cv_cmd->parsed()) {
            apply_variants(cv_cfg, cv_variants);
            return cmd_crossvalidate(cv_common, cv_cfg, cv_folds, cv_metrics, cv_out,
                                     verbose);
        }
        if (gen_cmd->parsed())
            return cmd_generate(gen);
        std::cerr << "error: no command given\n";
        return 2;
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const IoError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const SchemaError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 4;
    } catch (const DegeneracyError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 5;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}

} // namespace bkt
