#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "bkt/model.hpp"
#include "cli.hpp"

namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() / "bkt_cli_tests";
        fs::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path, ec);
    }
    std::string file(const std::string& name) const { return (path / name).string(); }
};

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void write_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    out << text;
}

} // namespace

TEST_CASE("generate then fit produces a model document and a parameter table") {
    TempDir tmp;
    const std::string data = tmp.file("d.csv");
    const std::string model = tmp.file("m.model");
    const std::string table = tmp.file("params.txt");

    CHECK(bkt::run_cli({"generate", "--out", data, "--students", "30", "--length", "8",
                        "--seed", "1"}) == 0);
    CHECK(bkt::run_cli({"fit", "--data", data, "--out", model, "--params-out", table,
                        "--restarts", "3", "--seed", "2"}) == 0);

    REQUIRE(fs::exists(model));
    const bkt::ModelDocument doc = bkt::load_document(model);
    CHECK(doc.skill_names == std::vector<std::string>{"synthetic"});

    const std::string text = slurp(table);
    CHECK(text.rfind("skill", 0) == 0);
    CHECK(text.find("param") != std::string::npos);
    CHECK(text.find("class") != std::string::npos);
    CHECK(text.find("value") != std::string::npos);
    CHECK(text.find("prior") != std::string::npos);
}

TEST_CASE("predict and evaluate run against a fitted model") {
    TempDir tmp;
    const std::string data = tmp.file("d.csv");
    const std::string model = tmp.file("m.model");
    const std::string preds = tmp.file("p.csv");
    const std::string report = tmp.file("r.csv");

    REQUIRE(bkt::run_cli({"generate", "--out", data, "--students", "25", "--length", "6",
                          "--seed", "3"}) == 0);
    REQUIRE(bkt::run_cli({"fit", "--data", data, "--out", model, "--params-out",
                          tmp.file("t.txt"), "--restarts", "2"}) == 0);

    CHECK(bkt::run_cli({"predict", "--data", data, "--model", model, "--out", preds}) == 0);
    const std::string pred_text = slurp(preds);
    CHECK(pred_text.rfind("skill,student,step,observed,predicted_correct,mastery,masked",
                          0) == 0);
    CHECK(std::count(pred_text.begin(), pred_text.end(), '\n') == 1 + 25 * 6);

    CHECK(bkt::run_cli({"evaluate", "--data", data, "--model", model, "--metrics",
                        "auc,rmse", "--out", report}) == 0);
    CHECK(slurp(report).rfind("skill,auc,rmse", 0) == 0);
}

TEST_CASE("crossvalidate emits the requested metric columns") {
    TempDir tmp;
    const std::string data = tmp.file("d.csv");
    const std::string report = tmp.file("cv.csv");
    REQUIRE(bkt::run_cli({"generate", "--out", data, "--students", "20", "--length", "5",
                          "--guesses", "0.1,0.3", "--slips", "0.05,0.2",
                          "--guess-schedule", "0,1,0,1,0", "--seed", "4"}) == 0);
    CHECK(bkt::run_cli({"crossvalidate", "--data", data, "--multigs", "--metrics",
                        "auc,rmse", "--seed", "42", "--folds", "4", "--restarts", "2",
                        "--out", report}) == 0);
    const std::string text = slurp(report);
    CHECK(text.rfind("skill,auc,rmse", 0) == 0);
    CHECK(text.find("synthetic") != std::string::npos);
}

TEST_CASE("exit codes distinguish usage, I/O and schema errors") {
    TempDir tmp;
    // unknown flag
    CHECK(bkt::run_cli({"fit", "--data", "x.csv", "--out", "m", "--no-such-flag"}) == 2);
    // missing command
    CHECK(bkt::run_cli({}) == 2);
    // unreadable file
    CHECK(bkt::run_cli({"fit", "--data", tmp.file("absent.csv"), "--out",
                        tmp.file("m.model")}) == 3);

    // no usable rows: correctness all outside {0,1}
    const std::string bad = tmp.file("bad.csv");
    write_file(bad, "user_id,skill_name,correct,order_id\nu1,s,2,1\nu1,s,3,2\n");
    CHECK(bkt::run_cli({"fit", "--data", bad, "--out", tmp.file("m.model")}) == 4);

    // header matches no dialect and no explicit map given
    const std::string odd = tmp.file("odd.csv");
    write_file(odd, "a,b,c,d\nu1,s,1,1\n");
    CHECK(bkt::run_cli({"fit", "--data", odd, "--out", tmp.file("m.model")}) == 4);

    // unknown metric
    const std::string data = tmp.file("d.csv");
    REQUIRE(bkt::run_cli({"generate", "--out", data, "--students", "12", "--length",
                          "4"}) == 0);
    CHECK(bkt::run_cli({"crossvalidate", "--data", data, "--folds", "3", "--restarts",
                        "1", "--metrics", "nope"}) == 2);
}

TEST_CASE("explicit column mappings override the dialect") {
    TempDir tmp;
    const std::string data = tmp.file("odd.csv");
    write_file(data,
               "who,what,score,when\n"
               "u1,s,1,1\nu1,s,0,2\nu2,s,1,1\nu2,s,1,2\nu3,s,0,1\nu3,s,1,2\n");
    const std::string model = tmp.file("m.model");
    CHECK(bkt::run_cli({"fit", "--data", data, "--col-student", "who", "--col-skill",
                        "what", "--col-correct", "score", "--col-order", "when", "--out",
                        model, "--params-out", tmp.file("t.txt"), "--restarts", "2"}) == 0);
    CHECK(fs::exists(model));
}

TEST_CASE("multiprior fit survives the predict/evaluate round trip") {
    TempDir tmp;
    const std::string data = tmp.file("d.csv");
    const std::string model = tmp.file("m.model");
    const std::string preds = tmp.file("p.csv");
    REQUIRE(bkt::run_cli({"generate", "--out", data, "--students", "16", "--length", "5",
                          "--prior", "0.4", "--seed", "8"}) == 0);
    REQUIRE(bkt::run_cli({"fit", "--data", data, "--multiprior", "--out", model,
                          "--params-out", tmp.file("t.txt"), "--restarts", "2"}) == 0);
    const bkt::ModelDocument doc = bkt::load_document(model);
    CHECK(doc.variants.multiprior);
    CHECK(doc.skills[0].labels.learn.size() == 3);

    CHECK(bkt::run_cli({"predict", "--data", data, "--model", model, "--out", preds}) == 0);
    const std::string text = slurp(preds);
    // dummy steps are exported and flagged as masked
    CHECK(text.find(",1\n") != std::string::npos);
    CHECK(std::count(text.begin(), text.end(), '\n') == 1 + 16 * 6);

    const std::string report = tmp.file("r.csv");
    CHECK(bkt::run_cli({"evaluate", "--data", data, "--model", model, "--metrics",
                        "rmse,accuracy", "--out", report}) == 0);
    CHECK(slurp(report).rfind("skill,rmse,accuracy", 0) == 0);
}
