#pragma once

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "httplib.h"
#include "json.hpp"

#include "argmine/corpus.hpp"

namespace argmine {

// Keeps dockets whose comment count c satisfies min_exclusive < c < max_exclusive.
// The collection used for the published study kept 50 < c < 1000.
struct DocketFilter {
    std::optional<std::size_t> min_exclusive;
    std::optional<std::size_t> max_exclusive;

    bool accepts(std::size_t count) const {
        if (min_exclusive && !(count > *min_exclusive)) return false;
        if (max_exclusive && !(count < *max_exclusive)) return false;
        return true;
    }

    static DocketFilter none() { return {}; }
    static DocketFilter between(std::size_t lo, std::size_t hi) { return {lo, hi}; }
};

struct SkipReport {
    std::size_t malformed = 0;
    std::size_t duplicate_id = 0;
    std::size_t attachment_only = 0;
    std::size_t filtered_dockets = 0;
    std::size_t filtered_comments = 0;

    std::size_t total() const { return malformed + duplicate_id + attachment_only; }

    nlohmann::json to_json() const {
        return {{"malformed", malformed},
                {"duplicate_id", duplicate_id},
                {"attachment_only", attachment_only},
                {"filtered_dockets", filtered_dockets},
                {"filtered_comments", filtered_comments}};
    }
};

struct FetchResult {
    std::vector<Comment> comments;
    SkipReport skipped;
};

namespace detail {

inline FetchResult apply_docket_filter(std::vector<Comment> comments, SkipReport report,
                                       const DocketFilter& filter) {
    std::map<std::string, std::size_t> counts;
    for (const auto& c : comments) ++counts[c.docket_id];
    FetchResult out;
    out.skipped = report;
    for (const auto& [docket, count] : counts) {
        if (!filter.accepts(count)) ++out.skipped.filtered_dockets;
    }
    for (auto& c : comments) {
        if (filter.accepts(counts[c.docket_id])) {
            out.comments.push_back(std::move(c));
        } else {
            ++out.skipped.filtered_comments;
        }
    }
    return out;
}

} // namespace detail

// Reads a JSON-lines comment file. Malformed lines, blank texts and repeated
// comment ids are skipped and counted rather than aborting the read.
inline FetchResult fetch_comments_from_file(const std::string& path,
                                            const DocketFilter& filter = DocketFilter::none()) {
    std::ifstream in(path);
    if (!in) throw SourceError(path, "cannot open file", true);
    std::vector<Comment> comments;
    SkipReport report;
    std::unordered_set<std::string> seen;
    std::string line;
    while (std::getline(in, line)) {
        if (text::is_blank(line)) continue;
        try {
            Comment c = comment_from_json(nlohmann::json::parse(line));
            if (!seen.insert(c.comment_id).second) {
                ++report.duplicate_id;
                continue;
            }
            comments.push_back(std::move(c));
        } catch (const nlohmann::json::exception&) {
            ++report.malformed;
        } catch (const ValidationError&) {
            ++report.malformed;
        }
    }
    if (in.bad()) throw SourceError(path, "read failure", true);
    return detail::apply_docket_filter(std::move(comments), report, filter);
}

// Connection settings for a regulations.gov v4 style API:
//   GET {base_path}/comments?filter[docketId]=D&page[number]=N&page[size]=S
// answering {"data":[{"id":..,"attributes":{"docketId","agencyId","comment",
// "postedDate"}}], "meta":{"hasNextPage":bool,"totalElements":int}}.
struct ApiConfig {
    std::string base_url;            // scheme://host[:port]
    std::string base_path = "/v4";
    std::string api_key_header = "X-Api-Key";
    std::string api_key_env = "REGULATIONS_API_KEY";
    double requests_per_second = 1.0;
    int page_size = 250;
    int max_attempts = 3;
};

class ApiClient {
public:
    explicit ApiClient(ApiConfig cfg) : cfg_(std::move(cfg)), client_(cfg_.base_url) {
        client_.set_connection_timeout(10, 0);
        client_.set_read_timeout(30, 0);
        if (const char* key = std::getenv(cfg_.api_key_env.c_str()); key && *key) {
            client_.set_default_headers({{cfg_.api_key_header, key}});
        }
    }

    // Comments of one docket, or nothing when the docket's total count is
    // rejected by `filter` (decided from the first page's totalElements).
    FetchResult fetch_docket(const std::string& docket_id, const DocketFilter& filter) {
        FetchResult out;
        std::unordered_set<std::string> seen;
        for (int page = 1;; ++page) {
            const nlohmann::json body = get_page(docket_id, page);
            if (page == 1) {
                const auto total = body.value("/meta/totalElements"_json_pointer, std::size_t{0});
                if (!filter.accepts(total)) {
                    ++out.skipped.filtered_dockets;
                    out.skipped.filtered_comments += total;
                    return out;
                }
            }
            const auto data = body.find("data");
            if (data == body.end() || !data->is_array()) {
                throw SourceError(source(docket_id, page), "response has no data array", false);
            }
            for (const auto& rec : *data) {
                try {
                    const auto& attrs = rec.at("attributes");
                    Comment c;
                    c.comment_id = rec.at("id").get<std::string>();
                    c.docket_id = attrs.value("docketId", docket_id);
                    c.agency = attrs.value("agencyId", std::string{});
                    const auto text_it = attrs.find("comment");
                    if (text_it == attrs.end() || text_it->is_null() ||
                        text::is_blank(text_it->get<std::string>())) {
                        ++out.skipped.attachment_only;
                        continue;
                    }
                    c.text = text_it->get<std::string>();
                    if (auto p = attrs.find("postedDate"); p != attrs.end() && p->is_string()) {
                        c.received_at = p->get<std::string>();
                    }
                    if (!seen.insert(c.comment_id).second) {
                        ++out.skipped.duplicate_id;
                        continue;
                    }
                    out.comments.push_back(std::move(c));
                } catch (const nlohmann::json::exception&) {
                    ++out.skipped.malformed;
                }
            }
            if (!body.value("/meta/hasNextPage"_json_pointer, false)) break;
        }
        return out;
    }

    FetchResult fetch(const std::vector<std::string>& dockets, const DocketFilter& filter) {
        FetchResult all;
        for (const auto& d : dockets) {
            FetchResult part = fetch_docket(d, filter);
            all.comments.insert(all.comments.end(), std::make_move_iterator(part.comments.begin()),
                                std::make_move_iterator(part.comments.end()));
            all.skipped.malformed += part.skipped.malformed;
            all.skipped.duplicate_id += part.skipped.duplicate_id;
            all.skipped.attachment_only += part.skipped.attachment_only;
            all.skipped.filtered_dockets += part.skipped.filtered_dockets;
            all.skipped.filtered_comments += part.skipped.filtered_comments;
        }
        return all;
    }

private:
    std::string source(const std::string& docket, int page) const {
        return cfg_.base_url + cfg_.base_path + "/comments[" + docket + " page " + std::to_string(page) + "]";
    }

    void throttle() {
        if (cfg_.requests_per_second <= 0) return;
        const auto gap = std::chrono::duration<double>(1.0 / cfg_.requests_per_second);
        const auto now = std::chrono::steady_clock::now();
        if (last_request_ && now - *last_request_ < gap) {
            std::this_thread::sleep_for(gap - (now - *last_request_));
        }
        last_request_ = std::chrono::steady_clock::now();
    }

    nlohmann::json get_page(const std::string& docket, int page) {
        httplib::Params params{{"filter[docketId]", docket},
                               {"page[number]", std::to_string(page)},
                               {"page[size]", std::to_string(cfg_.page_size)}};
        std::string last_error;
        for (int attempt = 0; attempt < std::max(1, cfg_.max_attempts); ++attempt) {
            throttle();
            auto res = client_.Get(cfg_.base_path + "/comments", params, httplib::Headers{});
            if (!res) {
                last_error = "request failed: " + httplib::to_string(res.error());
                continue;
            }
            if (res->status == 429 || res->status >= 500) {
                last_error = "HTTP " + std::to_string(res->status);
                continue;
            }
            if (res->status != 200) {
                throw SourceError(source(docket, page), "HTTP " + std::to_string(res->status), false);
            }
            try {
                return nlohmann::json::parse(res->body);
            } catch (const nlohmann::json::exception& e) {
                throw SourceError(source(docket, page), std::string("invalid JSON: ") + e.what(), false);
            }
        }
        throw SourceError(source(docket, page), last_error, true);
    }

    ApiConfig cfg_;
    httplib::Client client_;
    std::optional<std::chrono::steady_clock::time_point> last_request_;
};

} // namespace argmine
