#pragma once

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "argmine/cky.hpp"
#include "argmine/corpus.hpp"
#include "argmine/error.hpp"
#include "argmine/grammar.hpp"

namespace argmine {

namespace fs = std::filesystem;

// Replaces `path` by rename so readers see the old or the new file, never a
// partial one.
inline void write_file_atomic(const fs::path& path, const std::string& content) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    fs::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw MissingInputError("cannot write " + tmp.string());
        out << content;
        if (!out) throw Error("write failed for " + tmp.string());
    }
    fs::rename(tmp, path);
}

inline std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw MissingInputError("cannot read " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline std::string utc_timestamp() {
    const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

// One immutable grammar + lexicon version.
struct GrammarSnapshot {
    int version = 0;
    std::string note;
    std::string created_at;
    std::string grammar_text;
    LexiconSet lexicons;

    CompiledGrammar compile() const { return argmine::compile(RuleGrammar::parse(grammar_text), lexicons); }

    nlohmann::json to_json() const {
        nlohmann::json lex = nlohmann::json::object();
        for (const auto& [name, l] : lexicons) {
            nlohmann::json entries = nlohmann::json::array();
            for (const auto& e : l.entries()) entries.push_back(text::join(e, " "));
            lex[name] = entries;
        }
        return {{"version", version}, {"note", note}, {"created_at", created_at}, {"grammar", grammar_text}, {"lexicons", lex}};
    }
};

// Fixed directory layout shared by the CLI stages and the service:
//   corpus/   comments.jsonl, sentences.jsonl, dedup.jsonl
//   labels/   labels.jsonl, state.json, split.json
//   grammar/  v<N>/{grammar.txt, lexicons/*.lex, meta.json}
//   models/   <task>.<strategy>.<family>.json
//   reports/  experiment reports, trial logs, cluster summaries
class Workspace {
public:
    explicit Workspace(fs::path root) : root_(std::move(root)) {}

    const fs::path& root() const { return root_; }
    fs::path corpus_dir() const { return root_ / "corpus"; }
    fs::path labels_dir() const { return root_ / "labels"; }
    fs::path grammar_dir() const { return root_ / "grammar"; }
    fs::path models_dir() const { return root_ / "models"; }
    fs::path reports_dir() const { return root_ / "reports"; }

    fs::path comments_path() const { return corpus_dir() / "comments.jsonl"; }
    fs::path sentences_path() const { return corpus_dir() / "sentences.jsonl"; }
    fs::path dedup_path() const { return corpus_dir() / "dedup.jsonl"; }
    fs::path vectors_path() const { return corpus_dir() / "vectors.txt"; }
    fs::path labels_path() const { return labels_dir() / "labels.jsonl"; }
    fs::path label_state_path() const { return labels_dir() / "state.json"; }
    fs::path split_path() const { return labels_dir() / "split.json"; }

    static std::string experiment_name(std::string_view task, std::string_view strategy, std::string_view family) {
        return std::string(task) + "." + std::string(strategy) + "." + std::string(family);
    }
    fs::path bundle_path(const std::string& name) const { return models_dir() / (name + ".json"); }
    fs::path report_path(const std::string& name) const { return reports_dir() / (name + ".json"); }
    fs::path trials_path(const std::string& name) const { return reports_dir() / (name + ".trials.jsonl"); }

    void ensure() const {
        for (const auto& d : {corpus_dir(), labels_dir(), grammar_dir(), models_dir(), reports_dir()}) fs::create_directories(d);
    }

    // Deduplicated sentences when present, else the segmented ones.
    fs::path active_sentences_path() const {
        if (fs::exists(dedup_path())) return dedup_path();
        if (fs::exists(sentences_path())) return sentences_path();
        throw MissingInputError("workspace " + root_.string() + " has no sentences; run segment first");
    }

    // ----- grammar versions

    std::vector<int> versions() const {
        std::vector<int> out;
        if (!fs::exists(grammar_dir())) return out;
        for (const auto& e : fs::directory_iterator(grammar_dir())) {
            const std::string n = e.path().filename().string();
            if (!e.is_directory() || n.size() < 2 || n[0] != 'v') continue;
            if (n.find_first_not_of("0123456789", 1) != std::string::npos) continue;
            out.push_back(std::stoi(n.substr(1)));
        }
        std::sort(out.begin(), out.end());
        return out;
    }

    std::optional<int> latest_version() const {
        auto v = versions();
        if (v.empty()) return std::nullopt;
        return v.back();
    }

    fs::path version_dir(int v) const { return grammar_dir() / ("v" + std::to_string(v)); }

    bool has_version(int v) const { return fs::exists(version_dir(v) / "meta.json"); }

    GrammarSnapshot load_version(int v) const {
        const fs::path dir = version_dir(v);
        if (!has_version(v)) throw MissingInputError("grammar version " + std::to_string(v) + " not found");
        GrammarSnapshot s;
        const auto meta = nlohmann::json::parse(read_file(dir / "meta.json"));
        s.version = v;
        s.note = meta.value("note", "");
        s.created_at = meta.value("created_at", "");
        s.grammar_text = read_file(dir / "grammar.txt");
        s.lexicons = load_lexicon_dir(dir / "lexicons");
        return s;
    }

    // Validates by compiling, then publishes v<latest+1> with one rename.
    int create_version(const std::string& grammar_text, const LexiconSet& lexicons, const std::string& note) {
        argmine::compile(RuleGrammar::parse(grammar_text), lexicons);
        const int v = latest_version().value_or(0) + 1;
        const fs::path dir = version_dir(v);
        fs::path tmp = dir;
        tmp += ".tmp";
        fs::remove_all(tmp);
        fs::create_directories(tmp / "lexicons");
        {
            std::ofstream g(tmp / "grammar.txt", std::ios::binary);
            g << grammar_text;
        }
        write_lexicon_dir(tmp / "lexicons", lexicons);
        {
            std::ofstream m(tmp / "meta.json", std::ios::binary);
            m << nlohmann::json({{"version", v}, {"note", note}, {"created_at", utc_timestamp()}}).dump() << '\n';
        }
        fs::rename(tmp, dir);
        return v;
    }

    // Imports a grammar file and lexicon directory as a new version unless
    // the latest version already has identical content.
    int import_version(const fs::path& grammar_file, const fs::path& lexicon_dir, const std::string& note) {
        const std::string text = read_file(grammar_file);
        const LexiconSet lex = load_lexicon_dir(lexicon_dir);
        if (auto latest = latest_version()) {
            const auto cur = load_version(*latest);
            if (cur.grammar_text == text && same_lexicons(cur.lexicons, lex)) return *latest;
        }
        return create_version(text, lex, note);
    }

    // ----- labels

    void write_current_labels(const LabelMap& labels, int version) const {
        std::string body;
        for (const auto& [id, rec] : labels) body += label_to_json(id, rec).dump() + "\n";
        write_file_atomic(labels_path(), body);
        write_file_atomic(label_state_path(), nlohmann::json({{"version", version}}).dump() + "\n");
    }

    std::optional<int> current_label_version() const {
        if (!fs::exists(label_state_path())) return std::nullopt;
        return nlohmann::json::parse(read_file(label_state_path())).at("version").get<int>();
    }

private:
    static bool same_lexicons(const LexiconSet& a, const LexiconSet& b) {
        if (a.size() != b.size()) return false;
        for (const auto& [name, l] : a) {
            auto it = b.find(name);
            if (it == b.end() || it->second.serialize() != l.serialize()) return false;
        }
        return true;
    }

    fs::path root_;
};

} // namespace argmine
