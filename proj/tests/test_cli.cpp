#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct CliRun {
    int code = -1;
    std::string out;
    std::string err;
};

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

fs::path scratch() {
    static const fs::path dir = [] {
        const auto d = fs::temp_directory_path() / ("argmine-cli-" + std::to_string(::getpid()));
        fs::remove_all(d);
        fs::create_directories(d);
        return d;
    }();
    return dir;
}

CliRun argmine(const std::string& args) {
    const fs::path out = scratch() / "stdout.txt", err = scratch() / "stderr.txt";
    const std::string cmd = std::string("'") + ARGMINE_CLI + "' " + args + " >'" + out.string() + "' 2>'" + err.string() + "'";
    const int status = std::system(cmd.c_str());
    return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, slurp(out), slurp(err)};
}

std::string ws(const std::string& name) { return "-w '" + (scratch() / name).string() + "' "; }

json last_json_line(const std::string& s) {
    std::istringstream in(s);
    std::string line, last;
    while (std::getline(in, line)) {
        if (!line.empty()) last = line;
    }
    return json::parse(last);
}

// Synthetic workspace labelled with its planted grammar, split and trained
// once for the tests below.
const std::string& trained_workspace() {
    static const std::string w = [] {
        const std::string w = ws("synth");
        EXPECT_EQ(argmine(w + "--seed 3 synth --sentences 3000").code, 0);
        EXPECT_EQ(argmine(w + "label").code, 0);
        EXPECT_EQ(argmine(w + "--seed 3 split").code, 0);
        const CliRun r = argmine(w + "--seed 3 train --task claim+neutral --strategy two-stage --budget 2");
        EXPECT_EQ(r.code, 0) << r.err;
        return w;
    }();
    return w;
}

} // namespace

TEST(Cli, HelpListsSubcommands) {
    const CliRun r = argmine("--help");
    EXPECT_EQ(r.code, 0);
    for (const char* sub : {"ingest", "segment", "dedup", "label", "cluster", "split", "train", "evaluate", "predict",
                            "inspect-weights", "serve", "synth"}) {
        EXPECT_NE(r.out.find(sub), std::string::npos) << sub;
    }
}

TEST(Cli, UsageErrorsExitTwo) {
    CliRun r = argmine("segment --bogus");
    EXPECT_EQ(r.code, 2);
    EXPECT_EQ(last_json_line(r.err)["error"], "usage");
    EXPECT_EQ(argmine("").code, 2);
    EXPECT_EQ(argmine(ws("empty") + "inspect-weights").code, 2);
}

TEST(Cli, MissingInputExitsTwo) {
    CliRun r = argmine(ws("empty") + "segment");
    EXPECT_EQ(r.code, 2);
    const json e = last_json_line(r.err);
    EXPECT_EQ(e["error"], "missing_input");
    EXPECT_FALSE(e["message"].get<std::string>().empty());
    EXPECT_EQ(argmine(ws("empty") + "ingest --input /nonexistent/comments.jsonl").code, 2);
}

TEST(Cli, ValidationErrorsExitThree) {
    const std::string w = ws("dedup-bad");
    ASSERT_EQ(argmine(w + "ingest --input '" ARGMINE_TEST_DATA "/dup_comments.jsonl'").code, 0);
    ASSERT_EQ(argmine(w + "segment").code, 0);
    CliRun r = argmine(w + "dedup --threshold 1.5");
    EXPECT_EQ(r.code, 3);
    EXPECT_EQ(last_json_line(r.err)["error"], "validation");
    ASSERT_FALSE(trained_workspace().empty());
    const std::string split_before = slurp(scratch() / "synth" / "labels" / "split.json");
    EXPECT_EQ(argmine(trained_workspace() + "split --train 0.5 --dev 0.1 --test 0.1").code, 3);
    EXPECT_EQ(slurp(scratch() / "synth" / "labels" / "split.json"), split_before);
    EXPECT_EQ(argmine(trained_workspace() + "train --task stance --strategy hierarchical --budget 1").code, 3);
    EXPECT_EQ(argmine(trained_workspace() + "train --task nonsense").code, 3);
}

TEST(Cli, IngestSegmentDedupKeepsOneOfTwoNearDuplicates) {
    const std::string w = ws("dedup");
    CliRun r = argmine(w + "ingest --input '" ARGMINE_TEST_DATA "/dup_comments.jsonl'");
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(json::parse(r.out)["comments"], 2);
    r = argmine(w + "segment");
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(json::parse(r.out)["sentences"], 2);
    r = argmine(w + "dedup");
    ASSERT_EQ(r.code, 0) << r.err;
    const json j = json::parse(r.out);
    EXPECT_EQ(j["input"], 2);
    EXPECT_EQ(j["kept"], 1);
    EXPECT_EQ(argmine(w + "ingest --input '" ARGMINE_TEST_DATA "/dup_comments.jsonl' --min-comments 2").code, 0);
    EXPECT_EQ(argmine(w + "segment").out.find("\"sentences\":0") != std::string::npos, true);
}

TEST(Cli, EvaluateReportsSeventeenClasses) {
    const CliRun r = argmine(trained_workspace() + "evaluate --task claim+neutral --strategy two-stage");
    ASSERT_EQ(r.code, 0) << r.err;
    const json j = json::parse(r.out);
    EXPECT_EQ(j["test"]["classes"].size(), 17u);
    EXPECT_GE(j["test"]["macro"]["F1"].get<double>(), 0.9);
    EXPECT_EQ(argmine(trained_workspace() + "evaluate --model /nonexistent.json").code, 2);
}

TEST(Cli, InspectWeightsSurfacesPlantedCue) {
    const CliRun r = argmine(trained_workspace() + "inspect-weights --task claim+neutral --strategy two-stage --class LegalChallenge --k 10");
    ASSERT_EQ(r.code, 0) << r.err;
    const json j = json::parse(r.out);
    ASSERT_EQ(j["top"].size(), 10u);
    std::vector<std::string> top;
    for (const auto& row : j["top"]) top.push_back(row["ngram"]);
    EXPECT_TRUE(std::find(top.begin(), top.end(), "file lawsuit") != top.end() ||
                std::find(top.begin(), top.end(), "court litigation") != top.end());
    EXPECT_EQ(argmine(trained_workspace() + "inspect-weights --task claim+neutral --strategy two-stage --class Nope").code, 3);
}

TEST(Cli, PredictWritesOneLinePerSentence) {
    const fs::path out = scratch() / "pred.jsonl";
    const CliRun r = argmine(trained_workspace() + "predict --task claim+neutral --strategy two-stage --output '" + out.string() + "'");
    ASSERT_EQ(r.code, 0) << r.err;
    std::ifstream in(out);
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
        const json j = json::parse(line);
        EXPECT_TRUE(j.contains("claim"));
        ++n;
    }
    EXPECT_EQ(n, 3000u);
}

TEST(Cli, ClusterWritesReport) {
    const CliRun r = argmine(trained_workspace() + "cluster --k 4 --pool all");
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(json::parse(r.out)["pool_size"], 3000);
    const json report = json::parse(slurp(scratch() / "synth" / "reports" / "clusters.json"));
    ASSERT_EQ(report["clusters"].size(), 4u);
    std::size_t total = 0;
    for (const auto& c : report["clusters"]) total += c["size"].get<std::size_t>();
    EXPECT_EQ(total, 3000u);
    EXPECT_EQ(argmine(trained_workspace() + "cluster --k 4 --pool Bogus").code, 3);
}

TEST(Cli, RerunsAreByteIdentical) {
    auto pipeline = [](const std::string& name) {
        const std::string w = ws(name);
        EXPECT_EQ(argmine(w + "--seed 11 synth --sentences 1500").code, 0);
        EXPECT_EQ(argmine(w + "label").code, 0);
        EXPECT_EQ(argmine(w + "--seed 11 train --task stance --budget 2").code, 0);
        return scratch() / name;
    };
    const fs::path a = pipeline("rerun-a"), b = pipeline("rerun-b");
    for (const char* rel : {"labels/labels.jsonl", "labels/split.json", "models/stance.flat.logreg.json",
                            "reports/stance.flat.logreg.trials.jsonl"}) {
        const std::string x = slurp(a / rel), y = slurp(b / rel);
        EXPECT_FALSE(x.empty()) << rel;
        EXPECT_EQ(x, y) << rel;
    }
}
