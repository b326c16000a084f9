// argmine: command-line pipeline over a workspace directory.
//
// Exit codes: 0 ok, 1 other failure, 2 missing input or usage error,
// 3 validation failure. Failures print one JSON line on stderr:
//   {"error":"missing_input"|"validation"|"usage"|"failure","message":...}

#include <csignal>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "argmine/ingest.hpp"
#include "argmine/pipeline.hpp"
#include "argmine/service.hpp"
#include "argmine/synthetic.hpp"

namespace {

using namespace argmine;
using nlohmann::json;

struct Global {
    std::string workspace = "workspace";
    std::uint64_t seed = 0;
};

void log_line(const std::string& msg) { std::cerr << "argmine: " << msg << '\n'; }

void emit(const json& j) { std::cout << j.dump() << '\n'; }

std::unique_ptr<EmbeddingTable> load_vectors(const std::string& path) {
    if (path.empty()) return nullptr;
    if (!fs::exists(path)) throw MissingInputError("vectors file " + path + " not found");
    return std::make_unique<EmbeddingTable>(EmbeddingTable::load(path));
}

void require_file(const fs::path& p, const std::string& hint) {
    if (!fs::exists(p)) throw MissingInputError(p.string() + " not found; " + hint);
}

// ----- ingest

struct IngestOpts {
    std::string input;
    std::string api_url;
    std::vector<std::string> dockets;
    std::optional<std::size_t> min_comments, max_comments;
    double rps = 1.0;
};

void cmd_ingest(const Global& g, const IngestOpts& o) {
    Workspace ws(g.workspace);
    ws.ensure();
    DocketFilter filter{o.min_comments, o.max_comments};
    FetchResult r;
    if (!o.input.empty()) {
        require_file(o.input, "pass a JSON-lines comment file with --input");
        r = fetch_comments_from_file(o.input, filter);
    } else {
        if (o.api_url.empty() || o.dockets.empty()) throw ValidationError("ingest needs --input, or --api-url with --docket");
        ApiConfig cfg;
        cfg.base_url = o.api_url;
        cfg.requests_per_second = o.rps;
        ApiClient client(cfg);
        r = client.fetch(o.dockets, filter);
    }
    std::string body;
    for (const auto& c : r.comments) body += to_json(c).dump() + "\n";
    write_file_atomic(ws.comments_path(), body);
    emit({{"stage", "ingest"}, {"comments", r.comments.size()}, {"skipped", r.skipped.to_json()},
          {"output", ws.comments_path().string()}});
}

// ----- segment / dedup

void cmd_segment(const Global& g) {
    Workspace ws(g.workspace);
    require_file(ws.comments_path(), "run ingest first");
    std::vector<Comment> comments;
    for (const auto& j : read_jsonl(ws.comments_path().string())) comments.push_back(comment_from_json(j));
    const auto sentences = segment_corpus(comments);
    std::string body;
    for (const auto& s : sentences) body += to_json(s).dump() + "\n";
    write_file_atomic(ws.sentences_path(), body);
    // A dedup output from an earlier segmentation no longer applies.
    fs::remove(ws.dedup_path());
    emit({{"stage", "segment"}, {"comments", comments.size()}, {"sentences", sentences.size()},
          {"output", ws.sentences_path().string()}});
}

struct DedupOpts {
    double threshold = DedupConfig{}.similarity_threshold;
    std::string input, output;
};

void cmd_dedup(const Global& g, const DedupOpts& o) {
    Workspace ws(g.workspace);
    const fs::path in = o.input.empty() ? ws.sentences_path() : fs::path(o.input);
    const fs::path out = o.output.empty() ? ws.dedup_path() : fs::path(o.output);
    require_file(in, "run segment first");
    DedupConfig cfg;
    cfg.similarity_threshold = o.threshold;
    cfg.validate();
    const auto sentences = read_sentences(in.string());
    const auto kept = dedup(sentences, cfg);
    std::string body;
    for (const auto& s : kept) body += to_json(s).dump() + "\n";
    write_file_atomic(out, body);
    emit({{"stage", "dedup"}, {"input", sentences.size()}, {"kept", kept.size()}, {"threshold", o.threshold},
          {"output", out.string()}});
}

// ----- label

struct LabelOpts {
    std::string grammar, lexicons, note;
    std::optional<int> version;
};

void cmd_label(const Global& g, const LabelOpts& o) {
    Workspace ws(g.workspace);
    ws.ensure();
    int version = 0;
    if (!o.grammar.empty()) {
        if (o.version) throw ValidationError("--version and --grammar are exclusive");
        require_file(o.grammar, "pass a grammar file");
        const fs::path lex = o.lexicons.empty() ? fs::path(o.grammar).parent_path() / "lexicons" : fs::path(o.lexicons);
        require_file(lex, "pass a lexicon directory with --lexicons");
        version = ws.import_version(o.grammar, lex, o.note.empty() ? "imported from " + o.grammar : o.note);
    } else if (o.version) {
        version = *o.version;
    } else {
        const auto latest = ws.latest_version();
        if (!latest) throw MissingInputError("workspace has no grammar version; pass --grammar");
        version = *latest;
    }
    const auto compiled = ws.load_version(version).compile();
    const auto sentences = read_sentences(ws.active_sentences_path().string());
    const auto labels = label_corpus(sentences, compiled);
    ws.write_current_labels(labels, version);
    std::map<std::string, std::size_t> counts;
    for (const auto& [id, rec] : labels) ++counts[std::string(to_string(rec.claim))];
    emit({{"stage", "label"}, {"version", version}, {"sentences", labels.size()}, {"counts", counts},
          {"output", ws.labels_path().string()}});
}

// ----- cluster

struct ClusterOpts {
    std::size_t k = 8;
    std::string pool = "Neutral";
    std::size_t exemplars = 5;
    std::string vectors;
};

void cmd_cluster(const Global& g, const ClusterOpts& o) {
    Workspace ws(g.workspace);
    require_file(ws.labels_path(), "run label first");
    const auto vectors = load_vectors(o.vectors);
    const auto sentences = read_sentences(ws.active_sentences_path().string());
    const auto labels = read_labels(ws.labels_path().string());
    const json out = cluster_summary(sentences, labels, docket_index(ws), {o.k, o.pool, o.exemplars, g.seed}, vectors.get());
    const fs::path path = ws.reports_dir() / "clusters.json";
    write_file_atomic(path, out.dump(1) + "\n");
    emit({{"stage", "cluster"}, {"k", o.k}, {"pool", o.pool}, {"pool_size", out["pool_size"]}, {"output", path.string()}});
}

// ----- split

struct SplitOpts {
    double train = 0.70, dev = 0.15, test = 0.15;
};

void cmd_split(const Global& g, const SplitOpts& o) {
    Workspace ws(g.workspace);
    const auto corpus = load_labeled_corpus(ws);
    SplitConfig cfg{o.train, o.dev, o.test, g.seed};
    const Split s = make_split(ws, corpus, cfg);
    emit({{"stage", "split"}, {"train", s.train.size()}, {"dev", s.dev.size()}, {"test", s.test.size()},
          {"output", ws.split_path().string()}});
}

// ----- experiments

struct ModelOpts {
    std::string task = "claim+neutral";
    std::string strategy;
    std::string family = "logreg";
    std::string model;
    std::string vectors;
};

struct TrainOpts {
    int budget = SearchSpace{}.budget;
    std::size_t vocab_cap = NgramVocab::kDefaultCap;
    int folds = 5;
    std::size_t fasttext_dims = ClassifierConfig{}.fasttext_dims;
};

struct Resolved {
    Task task;
    Strategy strategy;
    ModelFamily family;
    std::string name;
};

Resolved resolve(const ModelOpts& o) {
    Resolved r;
    r.task = parse_task(o.task);
    r.strategy = o.strategy.empty() ? default_strategy(r.task) : parse_strategy(o.strategy);
    r.family = parse_family(o.family);
    check_task_strategy(r.task, r.strategy);
    r.name = Workspace::experiment_name(to_string(r.task), to_string(r.strategy), to_string(r.family));
    return r;
}

void cmd_train(const Global& g, const ModelOpts& m, const TrainOpts& t) {
    Workspace ws(g.workspace);
    const Resolved r = resolve(m);
    const auto vectors = load_vectors(m.vectors);
    ExperimentConfig cfg;
    cfg.task = r.task;
    cfg.strategy = r.strategy;
    cfg.classifier.family = r.family;
    cfg.classifier.fasttext_dims = t.fasttext_dims;
    cfg.search.budget = t.budget;
    cfg.split.seed = g.seed;
    cfg.vocab_cap = t.vocab_cap;
    cfg.vectors = vectors.get();
    cfg.ensemble_folds = t.folds;
    cfg.seed = g.seed;
    log_line("training " + r.name + " with " + std::to_string(t.budget) + " search trials");
    const auto res = train_in_workspace(ws, cfg);
    emit({{"stage", "train"}, {"model", ws.bundle_path(r.name).string()}, {"report", ws.report_path(r.name).string()},
          {"dev_macro_f1", res.search.best_score}, {"test_macro_f1", res.test.macro_f1}});
}

ModelBundle load_bundle(const Workspace& ws, const ModelOpts& m, const Resolved& r, const EmbeddingTable* vectors) {
    const fs::path path = m.model.empty() ? ws.bundle_path(r.name) : fs::path(m.model);
    require_file(path, "run train --task " + std::string(to_string(r.task)) + " first");
    return ModelBundle::load(path.string(), vectors);
}

void cmd_evaluate(const Global& g, const ModelOpts& m) {
    Workspace ws(g.workspace);
    const Resolved r = resolve(m);
    const auto vectors = load_vectors(m.vectors);
    const ModelBundle b = load_bundle(ws, m, r, vectors.get());
    const auto corpus = load_labeled_corpus(ws);
    require_file(ws.split_path(), "run split or train first");
    const Split split = split_from_json(json::parse(read_file(ws.split_path())), corpus.sentences);
    const MetricsReport rep = evaluate_bundle(b, r.task, corpus.tokens, corpus.labels, split.test);
    const json out = {{"task", to_string(r.task)},
                      {"strategy", to_string(r.strategy)},
                      {"family", to_string(r.family)},
                      {"split", "test"},
                      {"sentences", split.test.size()},
                      {"test", rep.to_json()}};
    const fs::path path = ws.reports_dir() / (r.name + ".eval.json");
    write_file_atomic(path, out.dump(1) + "\n");
    emit(out);
}

struct PredictOpts {
    std::string input, output;
};

void cmd_predict(const Global& g, const ModelOpts& m, const PredictOpts& p) {
    Workspace ws(g.workspace);
    const Resolved r = resolve(m);
    const auto vectors = load_vectors(m.vectors);
    const ModelBundle b = load_bundle(ws, m, r, vectors.get());
    const fs::path in = p.input.empty() ? ws.active_sentences_path() : fs::path(p.input);
    require_file(in, "pass sentences with --input");
    std::string body;
    for (const auto& s : read_sentences(in.string())) {
        const Prediction pr = b.predict(s.tokens);
        body += json({{"sentence_id", s.sentence_id}, {"claim", pr.label}, {"probabilities", pr.probabilities}}).dump() + "\n";
    }
    if (p.output.empty() || p.output == "-") {
        std::cout << body;
    } else {
        write_file_atomic(p.output, body);
    }
}

struct InspectOpts {
    std::string cls;
    std::size_t k = 10;
    std::string component;
};

void cmd_inspect(const Global& g, const ModelOpts& m, const InspectOpts& o) {
    Workspace ws(g.workspace);
    const Resolved r = resolve(m);
    const auto vectors = load_vectors(m.vectors);
    const ModelBundle b = load_bundle(ws, m, r, vectors.get());
    std::string name = o.component;
    if (name.empty()) {
        // First component, in name order, that predicts the class.
        for (const auto& [n, c] : b.components) {
            const auto& cls = c.classes();
            if (std::find(cls.begin(), cls.end(), o.cls) != cls.end()) {
                name = n;
                break;
            }
        }
        if (name.empty()) throw ValidationError("no component of the model predicts class " + o.cls);
    }
    const Classifier& c = b.get(name);
    if (c.family != ModelFamily::LogReg) throw ValidationError("weight inspection needs a logreg model");
    json rows = json::array();
    for (const auto& [ngram, w] : top_ngrams(c.linear, b.features.vocab(), o.cls, o.k)) rows.push_back({{"ngram", ngram}, {"weight", w}});
    emit({{"component", name}, {"class", o.cls}, {"top", rows}});
}

// ----- serve

struct ServeOpts {
    std::string host = "127.0.0.1";
    int port = 8080;
    std::string vectors;
    std::size_t page_size = 50;
    int budget = 4;
};

void cmd_serve(const Global& g, const ServeOpts& o) {
    ServiceOptions opt;
    if (!o.vectors.empty()) {
        require_file(o.vectors, "pass a word-vector file");
        opt.vectors_path = o.vectors;
    }
    opt.page_size = o.page_size;
    opt.seed = g.seed;
    opt.train_budget = o.budget;
    Service svc(Workspace(g.workspace), opt);
    log_line("serving " + g.workspace + " on http://" + o.host + ":" + std::to_string(o.port));
    svc.listen(o.host, o.port);
}

// ----- synth

struct SynthOpts {
    SyntheticConfig cfg;
};

void cmd_synth(const Global& g, SynthOpts o) {
    Workspace ws(g.workspace);
    ws.ensure();
    o.cfg.seed = g.seed;
    const auto syn = generate_synthetic(o.cfg);
    std::string comments, sentences, planted;
    for (const auto& c : syn.comments) comments += to_json(c).dump() + "\n";
    for (const auto& s : syn.sentences) sentences += to_json(s).dump() + "\n";
    for (std::size_t i = 0; i < syn.sentences.size(); ++i)
        planted += json({{"sentence_id", syn.sentences[i].sentence_id}, {"claim", to_string(syn.planted[i])}}).dump() + "\n";
    write_file_atomic(ws.comments_path(), comments);
    write_file_atomic(ws.sentences_path(), sentences);
    fs::remove(ws.dedup_path());
    write_file_atomic(ws.vectors_path(), syn.vectors_text());
    write_file_atomic(ws.corpus_dir() / "planted.jsonl", planted);
    const fs::path src = ws.root() / "synthetic-grammar";
    write_file_atomic(src / "grammar.txt", syn.grammar_text);
    fs::create_directories(src / "lexicons");
    write_lexicon_dir(src / "lexicons", syn.lexicons);
    const int v = ws.import_version(src / "grammar.txt", src / "lexicons", "synthetic planted-cue grammar");
    emit({{"stage", "synth"}, {"sentences", syn.sentences.size()}, {"comments", syn.comments.size()}, {"version", v},
          {"vectors", ws.vectors_path().string()}});
}

int fail(const char* code, const std::string& msg, int exit_code) {
    std::cerr << json({{"error", code}, {"message", msg}}).dump() << '\n';
    return exit_code;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"argmine: weakly supervised claim mining over public comments"};
    app.require_subcommand(1);
    Global g;
    app.add_option("-w,--workspace", g.workspace, "Workspace directory (corpus/, labels/, grammar/, models/, reports/)")
        ->capture_default_str();
    app.add_option("--seed", g.seed, "Seed for every random choice")->capture_default_str();

    std::function<void()> run;

    IngestOpts ingest;
    auto* c_ingest = app.add_subcommand("ingest", "Read comments into corpus/comments.jsonl");
    c_ingest->add_option("--input", ingest.input, "JSON-lines comment file");
    c_ingest->add_option("--api-url", ingest.api_url, "Comment API base URL (key from REGULATIONS_API_KEY)");
    c_ingest->add_option("--docket", ingest.dockets, "Docket id to fetch (repeatable)");
    c_ingest->add_option("--min-comments", ingest.min_comments, "Keep dockets with more than this many comments");
    c_ingest->add_option("--max-comments", ingest.max_comments, "Keep dockets with fewer than this many comments");
    c_ingest->add_option("--rps", ingest.rps, "API requests per second")->capture_default_str();
    c_ingest->callback([&] { run = [&] { cmd_ingest(g, ingest); }; });

    auto* c_segment = app.add_subcommand("segment", "Split comments into corpus/sentences.jsonl");
    c_segment->callback([&] { run = [&] { cmd_segment(g); }; });

    DedupOpts dd;
    auto* c_dedup = app.add_subcommand("dedup", "Drop near-duplicate sentences");
    c_dedup->add_option("--threshold", dd.threshold, "Drop a sentence whose similarity to a kept one exceeds this")
        ->capture_default_str();
    c_dedup->add_option("--input", dd.input, "Sentences file (default corpus/sentences.jsonl)");
    c_dedup->add_option("--output", dd.output, "Output file (default corpus/dedup.jsonl)");
    c_dedup->callback([&] { run = [&] { cmd_dedup(g, dd); }; });

    LabelOpts lb;
    auto* c_label = app.add_subcommand("label", "Weakly label every sentence with a grammar version");
    c_label->add_option("--grammar", lb.grammar, "Grammar file to import as a new version");
    c_label->add_option("--lexicons", lb.lexicons, "Lexicon directory (default: lexicons/ next to the grammar)");
    c_label->add_option("--note", lb.note, "Note stored with an imported version");
    c_label->add_option("--version", lb.version, "Existing grammar version (default: latest)");
    c_label->callback([&] { run = [&] { cmd_label(g, lb); }; });

    ClusterOpts cl;
    auto* c_cluster = app.add_subcommand("cluster", "Cluster a label pool into reports/clusters.json");
    c_cluster->add_option("--k", cl.k, "Number of clusters")->capture_default_str();
    c_cluster->add_option("--pool", cl.pool, "Label to cluster, or all")->capture_default_str();
    c_cluster->add_option("--exemplars", cl.exemplars, "Exemplars per cluster")->capture_default_str();
    c_cluster->add_option("--vectors", cl.vectors, "Word-vector file for SIF embeddings");
    c_cluster->callback([&] { run = [&] { cmd_cluster(g, cl); }; });

    SplitOpts sp;
    auto* c_split = app.add_subcommand("split", "Write a stratified split to labels/split.json");
    c_split->add_option("--train", sp.train, "Train fraction")->capture_default_str();
    c_split->add_option("--dev", sp.dev, "Dev fraction")->capture_default_str();
    c_split->add_option("--test", sp.test, "Test fraction")->capture_default_str();
    c_split->callback([&] { run = [&] { cmd_split(g, sp); }; });

    auto add_model_opts = [](CLI::App* c, ModelOpts& m) {
        c->add_option("--task", m.task,
                      "claim-id-balanced, claim-id-imbalanced, stance, claim-neutral, supp-v-opp, claim+neutral, claim+ensemble")
            ->capture_default_str();
        c->add_option("--strategy", m.strategy, "flat, two-stage, hierarchical or ensemble (default per task)");
        c->add_option("--family", m.family, "logreg or fasttext")->capture_default_str();
        c->add_option("--vectors", m.vectors, "Word-vector file for SIF features");
    };

    ModelOpts tr_m;
    TrainOpts tr;
    auto* c_train = app.add_subcommand("train", "Search hyperparameters, train and test one task setting");
    add_model_opts(c_train, tr_m);
    c_train->add_option("--budget", tr.budget, "Random-search trials")->capture_default_str();
    c_train->add_option("--vocab-cap", tr.vocab_cap, "N-gram vocabulary size")->capture_default_str();
    c_train->add_option("--folds", tr.folds, "Cross-fitting folds for the ensemble")->capture_default_str();
    c_train->add_option("--fasttext-dims", tr.fasttext_dims, "Embedding width of the fasttext family")->capture_default_str();
    c_train->callback([&] { run = [&] { cmd_train(g, tr_m, tr); }; });

    ModelOpts ev_m;
    auto* c_eval = app.add_subcommand("evaluate", "Score a trained model on the test split");
    add_model_opts(c_eval, ev_m);
    c_eval->add_option("--model", ev_m.model, "Model bundle (default models/<task>.<strategy>.<family>.json)");
    c_eval->callback([&] { run = [&] { cmd_evaluate(g, ev_m); }; });

    ModelOpts pr_m;
    PredictOpts pr;
    auto* c_predict = app.add_subcommand("predict", "Label sentences with a trained model");
    add_model_opts(c_predict, pr_m);
    c_predict->add_option("--model", pr_m.model, "Model bundle (default models/<task>.<strategy>.<family>.json)");
    c_predict->add_option("--input", pr.input, "Sentences file (default: workspace sentences)");
    c_predict->add_option("--output", pr.output, "Output JSON-lines file (default stdout)");
    c_predict->callback([&] { run = [&] { cmd_predict(g, pr_m, pr); }; });

    ModelOpts in_m;
    InspectOpts in;
    auto* c_inspect = app.add_subcommand("inspect-weights", "List the highest-weighted n-grams of a class");
    add_model_opts(c_inspect, in_m);
    c_inspect->add_option("--model", in_m.model, "Model bundle (default models/<task>.<strategy>.<family>.json)");
    c_inspect->add_option("--class", in.cls, "Class name")->required();
    c_inspect->add_option("--k", in.k, "How many n-grams")->capture_default_str();
    c_inspect->add_option("--component", in.component, "Bundle component (default: first predicting the class)");
    c_inspect->callback([&] { run = [&] { cmd_inspect(g, in_m, in); }; });

    ServeOpts sv;
    auto* c_serve = app.add_subcommand("serve", "Serve the workbench HTTP API");
    c_serve->add_option("--host", sv.host, "Bind address")->capture_default_str();
    c_serve->add_option("--port", sv.port, "Port")->capture_default_str();
    c_serve->add_option("--vectors", sv.vectors, "Word-vector file for clustering");
    c_serve->add_option("--page-size", sv.page_size, "Default page size")->capture_default_str();
    c_serve->add_option("--budget", sv.budget, "Search trials for POST /train")->capture_default_str();
    c_serve->callback([&] { run = [&] { cmd_serve(g, sv); }; });

    SynthOpts sy;
    auto* c_synth = app.add_subcommand("synth", "Write a planted-cue synthetic corpus, grammar and vectors");
    c_synth->add_option("--sentences", sy.cfg.sentences, "Sentence count")->capture_default_str();
    c_synth->add_option("--neutral-fraction", sy.cfg.neutral_fraction, "Share of Neutral sentences")->capture_default_str();
    c_synth->add_option("--leak-rate", sy.cfg.leak_rate, "Share of Neutral sentences with a lone cue word")
        ->capture_default_str();
    c_synth->callback([&] { run = [&] { cmd_synth(g, sy); }; });

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        return fail("usage", e.what(), 2);
    }
    try {
        run();
    } catch (const MissingInputError& e) {
        return fail("missing_input", e.what(), 2);
    } catch (const GrammarError& e) {
        return fail("validation", e.what(), 3);
    } catch (const ValidationError& e) {
        return fail("validation", e.what(), 3);
    } catch (const SourceError& e) {
        return fail("source", e.what(), 1);
    } catch (const std::exception& e) {
        return fail("failure", e.what(), 1);
    }
    return 0;
}
