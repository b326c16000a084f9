#pragma once

#include <atomic>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <thread>
#include <vector>

#include "httplib.h"
#include "json.hpp"

#include "argmine/cky.hpp"
#include "argmine/pipeline.hpp"
#include "argmine/workspace.hpp"

namespace argmine {

struct ServiceOptions {
    std::optional<std::string> vectors_path;
    std::size_t page_size = 50;
    std::size_t max_page_size = 500;
    std::uint64_t seed = 0;
    int train_budget = 4;
};

// Error mapped to an HTTP status and a JSON body {code, message}.
class HttpError : public Error {
public:
    HttpError(int status, std::string code, const std::string& message)
        : Error(message), status_(status), code_(std::move(code)) {}
    int status() const { return status_; }
    const std::string& code() const { return code_; }

private:
    int status_;
    std::string code_;
};

inline HttpError bad_request(const std::string& m) { return {400, "bad_request", m}; }
inline HttpError not_found(const std::string& m) { return {404, "not_found", m}; }
inline HttpError conflict(const std::string& m) { return {409, "conflict", m}; }

struct RelabelDiff {
    int version = 0;
    std::optional<int> previous_version;
    std::map<SentenceId, std::pair<ClaimType, ClaimType>> changes;  // id -> (old, new)
    std::map<ClaimType, long> deltas;                                // nonzero count changes

    nlohmann::json to_json() const {
        nlohmann::json ch = nlohmann::json::array();
        for (const auto& [id, p] : changes) ch.push_back({{"sentence_id", id}, {"old", to_string(p.first)}, {"new", to_string(p.second)}});
        nlohmann::json d = nlohmann::json::object();
        for (const auto& [c, n] : deltas) d[std::string(to_string(c))] = n;
        return {{"version", version},
                {"previous_version", previous_version ? nlohmann::json(*previous_version) : nlohmann::json(nullptr)},
                {"changed", changes.size()},
                {"changes", ch},
                {"deltas", d}};
    }
};

inline RelabelDiff diff_labels(const LabelMap& before, const LabelMap& after) {
    RelabelDiff d;
    std::map<ClaimType, long> delta;
    for (const auto& [id, rec] : after) {
        auto it = before.find(id);
        const ClaimType old = it == before.end() ? ClaimType::Neutral : it->second.claim;
        if (old != rec.claim) {
            d.changes[id] = {old, rec.claim};
            --delta[old];
            ++delta[rec.claim];
        }
    }
    for (const auto& [c, n] : delta) {
        if (n != 0) d.deltas[c] = n;
    }
    return d;
}

// HTTP facade over a workspace. Readers see one consistent label snapshot;
// relabel and train run one at a time behind a job slot, and grammar
// versions are created under a writer lock.
class Service {
public:
    Service(Workspace ws, ServiceOptions opt = {}) : ws_(std::move(ws)), opt_(std::move(opt)) {
        ws_.ensure();
        sentences_ = read_sentences(ws_.active_sentences_path().string());
        docket_of_comment_ = docket_index(ws_);
        if (opt_.vectors_path) vectors_ = std::make_shared<EmbeddingTable>(EmbeddingTable::load(*opt_.vectors_path));
        const auto latest = ws_.latest_version();
        if (!latest) throw MissingInputError("workspace has no grammar version; run label with --grammar first");
        const auto current = ws_.current_label_version();
        if (current && fs::exists(ws_.labels_path())) {
            labels_ = std::make_shared<const LabelMap>(read_labels(ws_.labels_path().string()));
            label_version_ = *current;
        } else {
            auto labels = std::make_shared<const LabelMap>(label_corpus(sentences_, ws_.load_version(*latest).compile()));
            ws_.write_current_labels(*labels, *latest);
            labels_ = std::move(labels);
            label_version_ = *latest;
        }
        routes();
    }

    ~Service() { stop(); }

    Service(const Service&) = delete;
    Service& operator=(const Service&) = delete;

    // Binds and serves on a background thread; port 0 picks a free port.
    int start(const std::string& host = "127.0.0.1", int port = 0) {
        int bound = port;
        if (port == 0) {
            bound = server_.bind_to_any_port(host);
        } else if (!server_.bind_to_port(host, port)) {
            bound = -1;
        }
        if (bound < 0) throw Error("cannot bind " + host + ":" + std::to_string(port));
        thread_ = std::thread([this] { server_.listen_after_bind(); });
        server_.wait_until_ready();
        return bound;
    }

    // Serves on the calling thread until stop().
    void listen(const std::string& host, int port) {
        if (!server_.listen(host, port)) throw Error("cannot listen on " + host + ":" + std::to_string(port));
    }

    void stop() {
        server_.stop();
        if (thread_.joinable()) thread_.join();
        std::vector<std::thread> workers;
        {
            std::lock_guard lk(jobs_mu_);
            workers.swap(workers_);
        }
        for (auto& w : workers) {
            if (w.joinable()) w.join();
        }
    }

    // ----- operations behind the endpoints (also used directly by tests)

    nlohmann::json list_sentences(const std::optional<std::string>& label, const std::optional<std::string>& docket,
                                  std::size_t page, std::size_t page_size) const {
        std::optional<ClaimType> want;
        if (label) {
            want = parse_claim_type(*label);
            if (!want) {
                std::string allowed;
                for (ClaimType c : all_claim_types()) allowed += (allowed.empty() ? "" : ", ") + std::string(to_string(c));
                throw bad_request("unknown label '" + *label + "'; allowed: " + allowed);
            }
        }
        if (page_size == 0 || page_size > opt_.max_page_size)
            throw bad_request("page_size must be in [1, " + std::to_string(opt_.max_page_size) + "]");
        const auto labels = snapshot();
        std::vector<const Sentence*> hits;
        for (const auto& s : sentences_) {
            if (want && label_of(*labels, s.sentence_id).claim != *want) continue;
            if (docket && docket_of(s) != *docket) continue;
            hits.push_back(&s);
        }
        std::sort(hits.begin(), hits.end(), [](auto* a, auto* b) { return a->sentence_id < b->sentence_id; });
        nlohmann::json items = nlohmann::json::array();
        for (std::size_t i = page * page_size; i < hits.size() && i < (page + 1) * page_size; ++i) {
            items.push_back(sentence_json(*hits[i], *labels));
        }
        return {{"page", page}, {"page_size", page_size}, {"total", hits.size()}, {"label_version", label_version()},
                {"items", items}};
    }

    nlohmann::json add_lexicon_entry(const std::string& name, const std::string& phrase, const std::string& note) {
        return edit_lexicon(name, phrase, note, true);
    }

    nlohmann::json remove_lexicon_entry(const std::string& name, const std::string& phrase, const std::string& note) {
        return edit_lexicon(name, phrase, note, false);
    }

    nlohmann::json replace_grammar(const std::string& grammar_text, const std::string& note) {
        std::lock_guard lk(version_mu_);
        const auto cur = ws_.load_version(*ws_.latest_version());
        try {
            const int v = ws_.create_version(grammar_text, cur.lexicons, note);
            return ws_.load_version(v).to_json();
        } catch (const GrammarError& e) {
            throw bad_request(std::string("grammar error: ") + e.what());
        }
    }

    RelabelDiff relabel(int version) {
        JobSlot slot(*this);
        return relabel_locked(version);
    }

    nlohmann::json clusters(std::size_t k, const std::string& pool, std::size_t exemplars) const {
        const auto labels = snapshot();
        try {
            return cluster_summary(sentences_, *labels, docket_of_comment_, {k, pool, exemplars, opt_.seed}, vectors_.get());
        } catch (const ValidationError& e) {
            throw bad_request(e.what());
        }
    }

    nlohmann::json metrics_latest() const {
        const auto labels = snapshot();
        nlohmann::json counts = nlohmann::json::object();
        for (ClaimType c : all_claim_types()) counts[std::string(to_string(c))] = 0;
        for (const auto& [id, rec] : *labels) counts[std::string(to_string(rec.claim))] = counts[std::string(to_string(rec.claim))].get<long>() + 1;
        nlohmann::json training = nullptr;
        const auto latest = ws_.reports_dir() / "latest.json";
        if (fs::exists(latest)) training = nlohmann::json::parse(read_file(latest));
        return {{"label_version", label_version()}, {"total", labels->size()}, {"label_counts", counts}, {"last_training", training}};
    }

    int label_version() const {
        std::shared_lock lk(mu_);
        return label_version_;
    }

    std::shared_ptr<const LabelMap> snapshot() const {
        std::shared_lock lk(mu_);
        return labels_;
    }

private:
    struct Job {
        std::string id;
        std::string kind;
        std::string status;  // running, succeeded, failed
        nlohmann::json result;
        std::string error;

        nlohmann::json to_json() const {
            nlohmann::json j = {{"id", id}, {"kind", kind}, {"status", status}};
            j["result"] = result.is_null() ? nlohmann::json(nullptr) : result;
            if (!error.empty()) j["error"] = error;
            return j;
        }
    };

    // Holds the single mutating-job slot; throws 409 when taken.
    class JobSlot {
    public:
        explicit JobSlot(Service& s) : s_(s) {
            bool expected = false;
            if (!s_.busy_.compare_exchange_strong(expected, true)) throw conflict("another relabel or training job is running");
        }
        ~JobSlot() {
            if (owned_) s_.busy_ = false;
        }
        void release_to_thread() { owned_ = false; }

    private:
        Service& s_;
        bool owned_ = true;
    };

    const LabelRecord& label_of(const LabelMap& labels, SentenceId id) const {
        static const LabelRecord neutral{};
        auto it = labels.find(id);
        return it == labels.end() ? neutral : it->second;
    }

    std::string docket_of(const Sentence& s) const {
        auto it = docket_of_comment_.find(s.comment_id);
        return it == docket_of_comment_.end() ? std::string() : it->second;
    }

    nlohmann::json sentence_json(const Sentence& s, const LabelMap& labels) const {
        return sentence_view(s, labels, docket_of_comment_);
    }

    nlohmann::json edit_lexicon(const std::string& name, const std::string& phrase, const std::string& note, bool add) {
        std::lock_guard lk(version_mu_);
        auto cur = ws_.load_version(*ws_.latest_version());
        auto it = cur.lexicons.find(name);
        if (it == cur.lexicons.end()) throw not_found("unknown lexicon " + name);
        Phrase p;
        try {
            p = tokenize_phrase(phrase);
        } catch (const ValidationError& e) {
            throw bad_request(e.what());
        }
        if (add) {
            if (!it->second.add(phrase)) throw conflict("lexicon " + name + " already contains '" + text::join(p, " ") + "'");
        } else {
            try {
                if (!it->second.remove(phrase)) throw not_found("lexicon " + name + " has no entry '" + text::join(p, " ") + "'");
            } catch (const ValidationError& e) {
                throw conflict(e.what());
            }
        }
        const std::string msg = note.empty() ? std::string(add ? "add" : "remove") + " '" + text::join(p, " ") + "' " +
                                                   (add ? "to " : "from ") + name
                                             : note;
        const int v = ws_.create_version(cur.grammar_text, cur.lexicons, msg);
        return {{"version", v}, {"lexicon", name}, {"phrase", text::join(p, " ")}, {"note", msg}};
    }

    RelabelDiff relabel_locked(int version) {
        if (!ws_.has_version(version)) throw not_found("grammar version " + std::to_string(version) + " not found");
        const auto compiled = ws_.load_version(version).compile();
        auto next = std::make_shared<const LabelMap>(label_corpus(sentences_, compiled));
        const auto before = snapshot();
        RelabelDiff d = diff_labels(*before, *next);
        d.version = version;
        d.previous_version = label_version();
        ws_.write_current_labels(*next, version);
        {
            std::unique_lock lk(mu_);
            labels_ = std::move(next);
            label_version_ = version;
        }
        return d;
    }

    std::string launch(const std::string& kind, std::function<nlohmann::json()> work) {
        JobSlot slot(*this);
        std::lock_guard lk(jobs_mu_);
        const std::string id = kind + "-" + std::to_string(++job_counter_);
        jobs_[id] = Job{id, kind, "running", nullptr, ""};
        slot.release_to_thread();
        workers_.emplace_back([this, id, work = std::move(work)] {
            Job result;
            try {
                result.result = work();
                result.status = "succeeded";
            } catch (const std::exception& e) {
                result.status = "failed";
                result.error = e.what();
            }
            {
                std::lock_guard lk2(jobs_mu_);
                auto& j = jobs_[id];
                j.status = result.status;
                j.result = result.result;
                j.error = result.error;
            }
            busy_ = false;
        });
        return id;
    }

    nlohmann::json job(const std::string& id) const {
        std::lock_guard lk(jobs_mu_);
        auto it = jobs_.find(id);
        if (it == jobs_.end()) throw not_found("unknown job " + id);
        return it->second.to_json();
    }

    static nlohmann::json parse_body(const httplib::Request& req) {
        if (req.body.empty()) return nlohmann::json::object();
        try {
            auto j = nlohmann::json::parse(req.body);
            if (!j.is_object()) throw bad_request("request body must be a JSON object");
            return j;
        } catch (const nlohmann::json::exception& e) {
            throw bad_request(std::string("invalid JSON body: ") + e.what());
        }
    }

    static std::size_t parse_size(const httplib::Request& req, const std::string& key, std::size_t dflt) {
        if (!req.has_param(key)) return dflt;
        const std::string v = req.get_param_value(key);
        if (v.empty() || v.find_first_not_of("0123456789") != std::string::npos || v.size() > 9)
            throw bad_request(key + " must be a non-negative integer");
        return static_cast<std::size_t>(std::stoul(v));
    }

    static std::string body_string(const nlohmann::json& j, const std::string& key, bool required) {
        if (!j.contains(key)) {
            if (required) throw bad_request("missing field '" + key + "'");
            return {};
        }
        if (!j[key].is_string()) throw bad_request("field '" + key + "' must be a string");
        return j[key].get<std::string>();
    }

    static void reply(httplib::Response& res, int status, const nlohmann::json& body) {
        res.status = status;
        res.set_content(body.dump(), "application/json");
    }

    template <typename F>
    httplib::Server::Handler wrap(F f) {
        return [f](const httplib::Request& req, httplib::Response& res) {
            try {
                f(req, res);
            } catch (const HttpError& e) {
                reply(res, e.status(), {{"code", e.code()}, {"message", e.what()}});
            } catch (const MissingInputError& e) {
                reply(res, 404, {{"code", "not_found"}, {"message", e.what()}});
            } catch (const ValidationError& e) {
                reply(res, 400, {{"code", "bad_request"}, {"message", e.what()}});
            } catch (const std::exception& e) {
                reply(res, 500, {{"code", "internal"}, {"message", e.what()}});
            }
        };
    }

    void routes() {
        server_.Get("/sentences", wrap([this](const httplib::Request& req, httplib::Response& res) {
            std::optional<std::string> label, docket;
            if (req.has_param("label") && !req.get_param_value("label").empty()) label = req.get_param_value("label");
            if (req.has_param("docket") && !req.get_param_value("docket").empty()) docket = req.get_param_value("docket");
            reply(res, 200, list_sentences(label, docket, parse_size(req, "page", 0), parse_size(req, "page_size", opt_.page_size)));
        }));
        server_.Get("/lexicons", wrap([this](const httplib::Request&, httplib::Response& res) {
            const auto v = ws_.load_version(*ws_.latest_version()).to_json();
            reply(res, 200, {{"version", v["version"]}, {"lexicons", v["lexicons"]}});
        }));
        server_.Post(R"(/lexicons/([^/]+)/entries)", wrap([this](const httplib::Request& req, httplib::Response& res) {
            const auto body = parse_body(req);
            reply(res, 201, add_lexicon_entry(req.matches[1], body_string(body, "phrase", true), body_string(body, "note", false)));
        }));
        server_.Delete(R"(/lexicons/([^/]+)/entries)", wrap([this](const httplib::Request& req, httplib::Response& res) {
            const auto body = parse_body(req);
            std::string phrase = req.has_param("phrase") ? req.get_param_value("phrase") : body_string(body, "phrase", true);
            reply(res, 201, remove_lexicon_entry(req.matches[1], phrase, body_string(body, "note", false)));
        }));
        server_.Get("/grammar", wrap([this](const httplib::Request&, httplib::Response& res) {
            const auto v = ws_.load_version(*ws_.latest_version());
            reply(res, 200, {{"version", v.version}, {"grammar", v.grammar_text}});
        }));
        server_.Post("/grammar", wrap([this](const httplib::Request& req, httplib::Response& res) {
            const auto body = parse_body(req);
            reply(res, 201, replace_grammar(body_string(body, "grammar", true), body_string(body, "note", false)));
        }));
        server_.Get("/versions", wrap([this](const httplib::Request&, httplib::Response& res) {
            nlohmann::json out = nlohmann::json::array();
            for (int v : ws_.versions()) {
                const auto s = ws_.load_version(v);
                out.push_back({{"version", v}, {"note", s.note}, {"created_at", s.created_at}});
            }
            reply(res, 200, {{"versions", out}, {"label_version", label_version()}});
        }));
        server_.Get(R"(/versions/(\d+))", wrap([this](const httplib::Request& req, httplib::Response& res) {
            const int v = std::stoi(req.matches[1]);
            if (!ws_.has_version(v)) throw not_found("grammar version " + std::to_string(v) + " not found");
            reply(res, 200, ws_.load_version(v).to_json());
        }));
        server_.Post("/relabel", wrap([this](const httplib::Request& req, httplib::Response& res) {
            const auto body = parse_body(req);
            if (!body.contains("version") || !body["version"].is_number_integer())
                throw bad_request("field 'version' must be an integer");
            const int v = body["version"].get<int>();
            if (body.value("async", false)) {
                if (!ws_.has_version(v)) throw not_found("grammar version " + std::to_string(v) + " not found");
                const auto id = launch("relabel", [this, v] { return relabel_locked(v).to_json(); });
                reply(res, 202, {{"job_id", id}});
            } else {
                reply(res, 200, relabel(v).to_json());
            }
        }));
        server_.Get(R"(/jobs/([^/]+))", wrap([this](const httplib::Request& req, httplib::Response& res) {
            reply(res, 200, job(req.matches[1]));
        }));
        server_.Get("/clusters", wrap([this](const httplib::Request& req, httplib::Response& res) {
            const std::string pool = req.has_param("pool") ? req.get_param_value("pool") : std::string("Neutral");
            reply(res, 200, clusters(parse_size(req, "k", 8), pool, parse_size(req, "exemplars", 5)));
        }));
        server_.Get("/metrics/latest", wrap([this](const httplib::Request&, httplib::Response& res) {
            reply(res, 200, metrics_latest());
        }));
        server_.Post("/train", wrap([this](const httplib::Request& req, httplib::Response& res) {
            const auto body = parse_body(req);
            ExperimentConfig cfg;
            try {
                cfg.task = parse_task(body.value("task", std::string("claim+neutral")));
                cfg.strategy = body.contains("strategy") ? parse_strategy(body_string(body, "strategy", true))
                                                         : default_strategy(cfg.task);
                cfg.classifier.family = parse_family(body.value("family", std::string("logreg")));
                check_task_strategy(cfg.task, cfg.strategy);
            } catch (const ValidationError& e) {
                throw bad_request(e.what());
            }
            cfg.search.budget = body.value("budget", opt_.train_budget);
            if (cfg.search.budget < 1) throw bad_request("budget must be >= 1");
            cfg.seed = opt_.seed;
            cfg.split.seed = opt_.seed;
            const auto id = launch("train", [this, cfg]() mutable {
                cfg.vectors = vectors_.get();
                return train_in_workspace(ws_, cfg).report;
            });
            reply(res, 202, {{"job_id", id}});
        }));
    }

    Workspace ws_;
    ServiceOptions opt_;
    std::vector<Sentence> sentences_;
    std::map<std::string, std::string> docket_of_comment_;
    std::shared_ptr<const EmbeddingTable> vectors_;

    mutable std::shared_mutex mu_;
    std::shared_ptr<const LabelMap> labels_;
    int label_version_ = 0;

    std::mutex version_mu_;
    std::atomic<bool> busy_{false};
    mutable std::mutex jobs_mu_;
    std::map<std::string, Job> jobs_;
    std::vector<std::thread> workers_;
    std::uint64_t job_counter_ = 0;

    httplib::Server server_;
    std::thread thread_;
};

} // namespace argmine
