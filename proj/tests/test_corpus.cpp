#include <gtest/gtest.h>

#include <atomic>
#include <filesystem>
#include <fstream>
#include <thread>

#include "argmine/corpus.hpp"
#include "argmine/ingest.hpp"
#include "argmine/rng.hpp"
#include "corpus_gen.hpp"
#include "oracles.hpp"

using namespace argmine;

namespace {

std::filesystem::path temp_file(const std::string& name, const std::string& content) {
    auto dir = std::filesystem::temp_directory_path() / "argmine_test_corpus";
    std::filesystem::create_directories(dir);
    auto p = dir / name;
    std::ofstream(p, std::ios::binary) << content;
    return p;
}

std::string comment_line(const std::string& id, const std::string& docket, const std::string& text) {
    return to_json(Comment{id, docket, "EPA", text, std::nullopt}).dump() + "\n";
}

Comment make_comment(std::string text) { return Comment{"c1", "d1", "EPA", std::move(text), std::nullopt}; }

using corpus_gen::ids_of;
using corpus_gen::make_sentences;
using corpus_gen::mutate;
using corpus_gen::random_corpus;
using corpus_gen::random_text;

} // namespace

// ---------------------------------------------------------------------------
// fetch_comments

TEST(FetchComments, ThreeWellFormedRecords) {
    auto p = temp_file("three.jsonl", comment_line("a", "D1", "One.") + comment_line("b", "D1", "Two.") +
                                          comment_line("c", "D2", "Three."));
    auto r = fetch_comments_from_file(p.string());
    EXPECT_EQ(r.comments.size(), 3u);
    EXPECT_EQ(r.skipped.total(), 0u);
}

TEST(FetchComments, MalformedRecordSkippedAndCounted) {
    auto p = temp_file("mixed.jsonl", comment_line("a", "D1", "Good one.") + "{\"comment_id\": \"x\", \"text\": \n" +
                                          comment_line("b", "D1", "Good two."));
    auto r = fetch_comments_from_file(p.string());
    ASSERT_EQ(r.comments.size(), 2u);
    EXPECT_EQ(r.comments[0].comment_id, "a");
    EXPECT_EQ(r.comments[1].comment_id, "b");
    EXPECT_EQ(r.skipped.malformed, 1u);
}

TEST(FetchComments, MissingFieldsBlankTextAndDuplicateIds) {
    auto p = temp_file("odd.jsonl", comment_line("a", "D1", "Fine.") + "{\"comment_id\":\"b\",\"docket_id\":\"D1\"}\n" +
                                        comment_line("c", "D1", "   \n ") + comment_line("a", "D1", "Again."));
    auto r = fetch_comments_from_file(p.string());
    EXPECT_EQ(r.comments.size(), 1u);
    EXPECT_EQ(r.skipped.malformed, 2u);
    EXPECT_EQ(r.skipped.duplicate_id, 1u);
}

TEST(FetchComments, DocketBelowLowerBoundIsDropped) {
    std::string small, mid;
    for (int i = 0; i < 40; ++i) small += comment_line("s" + std::to_string(i), "SMALL", "Text here.");
    for (int i = 0; i < 60; ++i) mid += comment_line("m" + std::to_string(i), "MID", "Text here.");
    auto p = temp_file("dockets.jsonl", small + mid);
    auto r = fetch_comments_from_file(p.string(), DocketFilter::between(50, 1000));
    EXPECT_EQ(r.comments.size(), 60u);
    for (const auto& c : r.comments) EXPECT_EQ(c.docket_id, "MID");
    EXPECT_EQ(r.skipped.filtered_dockets, 1u);
    EXPECT_EQ(r.skipped.filtered_comments, 40u);

    auto only_small = temp_file("small.jsonl", small);
    EXPECT_TRUE(fetch_comments_from_file(only_small.string(), DocketFilter::between(50, 1000)).comments.empty());
}

TEST(FetchComments, FilterBoundsAreExclusive) {
    auto f = DocketFilter::between(50, 1000);
    EXPECT_FALSE(f.accepts(50));
    EXPECT_TRUE(f.accepts(51));
    EXPECT_TRUE(f.accepts(999));
    EXPECT_FALSE(f.accepts(1000));
}

TEST(FetchComments, MissingFileIsRetryableSourceError) {
    try {
        fetch_comments_from_file("/nonexistent/path.jsonl");
        FAIL();
    } catch (const SourceError& e) {
        EXPECT_TRUE(e.retryable());
        EXPECT_NE(std::string(e.what()).find("/nonexistent/path.jsonl"), std::string::npos);
    }
}

// A local server speaking the paged comments API.
class FakeApi : public ::testing::Test {
protected:
    void SetUp() override {
        server_.Get("/v4/comments", [this](const httplib::Request& req, httplib::Response& res) {
            ++requests_;
            last_key_ = req.get_header_value("X-Api-Key");
            if (fail_first_ && requests_ == 1) {
                res.status = 503;
                return;
            }
            const std::string docket = req.get_param_value("filter[docketId]");
            const int page = std::stoi(req.get_param_value("page[number]"));
            const int size = std::stoi(req.get_param_value("page[size]"));
            const int total = docket == "BIG" ? 70 : 10;
            nlohmann::json data = nlohmann::json::array();
            for (int i = (page - 1) * size; i < std::min(total, page * size); ++i) {
                nlohmann::json attrs = {{"docketId", docket}, {"agencyId", "EPA"}, {"postedDate", "2018-01-02"}};
                attrs["comment"] = (i == 3) ? nlohmann::json(nullptr) : nlohmann::json("Comment " + std::to_string(i) + ".");
                data.push_back({{"id", docket + "-" + std::to_string(i)}, {"attributes", attrs}});
            }
            if (docket == "BIG" && page == 1) data.push_back({{"bogus", true}});
            nlohmann::json body = {{"data", data},
                                   {"meta", {{"hasNextPage", page * size < total}, {"totalElements", total}}}};
            res.set_content(body.dump(), "application/json");
        });
        port_ = server_.bind_to_any_port("127.0.0.1");
        thread_ = std::thread([this] { server_.listen_after_bind(); });
        server_.wait_until_ready();
    }

    void TearDown() override {
        server_.stop();
        thread_.join();
        unsetenv("ARGMINE_TEST_KEY");
    }

    ApiConfig config() const {
        ApiConfig cfg;
        cfg.base_url = "http://127.0.0.1:" + std::to_string(port_);
        cfg.api_key_env = "ARGMINE_TEST_KEY";
        cfg.requests_per_second = 0;
        cfg.page_size = 25;
        return cfg;
    }

    httplib::Server server_;
    std::thread thread_;
    int port_ = 0;
    std::atomic<int> requests_{0};
    bool fail_first_ = false;
    std::string last_key_;
};

TEST_F(FakeApi, PagesThroughDocketAndSkipsAttachmentOnly) {
    setenv("ARGMINE_TEST_KEY", "secret", 1);
    ApiClient client(config());
    auto r = client.fetch({"BIG", "TINY"}, DocketFilter::between(50, 1000));
    EXPECT_EQ(r.comments.size(), 69u);  // 70 minus one without direct text
    EXPECT_EQ(r.skipped.attachment_only, 1u);
    EXPECT_EQ(r.skipped.malformed, 1u);
    EXPECT_EQ(r.skipped.filtered_dockets, 1u);
    EXPECT_EQ(requests_.load(), 3 + 1);
    EXPECT_EQ(last_key_, "secret");
    EXPECT_EQ(r.comments.front().received_at.value(), "2018-01-02");
}

TEST_F(FakeApi, RetriesServerErrors) {
    fail_first_ = true;
    ApiClient client(config());
    auto r = client.fetch_docket("TINY", DocketFilter::none());
    EXPECT_EQ(r.comments.size(), 9u);
}

TEST(ApiClient, UnreachableHostIsRetryable) {
    ApiConfig cfg;
    cfg.base_url = "http://127.0.0.1:1";
    cfg.requests_per_second = 0;
    cfg.max_attempts = 2;
    ApiClient client(cfg);
    try {
        client.fetch_docket("X", DocketFilter::none());
        FAIL();
    } catch (const SourceError& e) {
        EXPECT_TRUE(e.retryable());
        EXPECT_NE(e.source().find("127.0.0.1:1"), std::string::npos);
    }
}

// ---------------------------------------------------------------------------
// segment_sentences

TEST(Segment, TwoSimpleSentences) {
    auto s = segment_sentences(make_comment("Hello. Goodbye."));
    ASSERT_EQ(s.size(), 2u);
    EXPECT_EQ(s[0].text, "Hello.");
    EXPECT_EQ(s[1].text, "Goodbye.");
    EXPECT_EQ(s[0].index_in_comment, 0);
    EXPECT_EQ(s[1].index_in_comment, 1);
}

TEST(Segment, CitationDoesNotSplit) {
    auto s = segment_sentences(make_comment("See 40 C.F.R. 205.203 for details."));
    ASSERT_EQ(s.size(), 1u);
    EXPECT_EQ(s[0].tokens, (std::vector<std::string>{"see", "40", "c.f.r", "205.203", "for", "details"}));
}

TEST(Segment, BlankTextYieldsNothing) {
    EXPECT_TRUE(segment_sentences(make_comment("")).empty());
    EXPECT_TRUE(segment_sentences(make_comment(" \n\t ")).empty());
}

TEST(Segment, AbbreviationsQuestionsAndParagraphs) {
    auto s = segment_sentences(make_comment(
        "Mr. Smith disagrees, e.g. with the cost. Why now?\"  He asked!\n\nNew paragraph without a stop\nstill same"));
    ASSERT_EQ(s.size(), 4u);
    EXPECT_EQ(s[0].text, "Mr. Smith disagrees, e.g. with the cost.");
    EXPECT_EQ(s[1].text, "Why now?\"");
    EXPECT_EQ(s[2].text, "He asked!");
    EXPECT_EQ(s[3].text, "New paragraph without a stop\nstill same");
}

TEST(Segment, NumberAtSentenceEndStillSplits) {
    auto s = segment_sentences(make_comment("The fee rises under section 205.203. The rule is bad."));
    EXPECT_EQ(s.size(), 2u);
}

TEST(Segment, LowercaseContinuationDoesNotSplit) {
    auto s = segment_sentences(make_comment("It costs approx. five dollars. it is fine."));
    EXPECT_EQ(s.size(), 1u);
}

TEST(Segment, CoverageOnRandomText) {
    Rng rng(7);
    const std::string_view alphabet = "ab cD.E!?\n\"'x.y 1 2";
    for (int trial = 0; trial < 300; ++trial) {
        const std::string t = random_text(rng, rng.index(80), alphabet);
        const auto sentences = segment_sentences(make_comment(t), 100);
        std::string strip_src, strip_out;
        for (char c : t) {
            if (!std::isspace(static_cast<unsigned char>(c))) strip_src.push_back(c);
        }
        for (std::size_t i = 0; i < sentences.size(); ++i) {
            EXPECT_FALSE(text::is_blank(sentences[i].text));
            EXPECT_EQ(sentences[i].index_in_comment, static_cast<int>(i));
            EXPECT_EQ(sentences[i].sentence_id, 100 + static_cast<SentenceId>(i));
            EXPECT_EQ(sentences[i].tokens, text::tokenize(sentences[i].text));
            for (char c : sentences[i].text) {
                if (!std::isspace(static_cast<unsigned char>(c))) strip_out.push_back(c);
            }
        }
        EXPECT_EQ(strip_src, strip_out) << "text: " << t;
    }
}

TEST(Tokenize, KeepsInternalConnectorsOnly) {
    EXPECT_EQ(text::tokenize("Cost-benefit isn't 3.5% -- (really)!"),
              (std::vector<std::string>{"cost-benefit", "isn't", "3.5", "really"}));
    EXPECT_EQ(text::tokenize("ÉTAT  über ALLES"), (std::vector<std::string>{"état", "über", "alles"}));
    EXPECT_TRUE(text::tokenize("... !!").empty());
}

// ---------------------------------------------------------------------------
// similarity

TEST(Similarity, Examples) {
    EXPECT_EQ(similarity("The same sentence.", "The same sentence."), 1.0);
    EXPECT_DOUBLE_EQ(similarity("abcd", "abce"), 0.75);
    EXPECT_EQ(similarity("aaaa", "bbbb"), 0.0);
    EXPECT_EQ(similarity("", ""), 1.0);
    EXPECT_EQ(similarity("ABC  def", "abc def"), 1.0);
}

TEST(Similarity, SymmetricAndReflexiveOnRandomPairs) {
    Rng rng(11);
    for (int t = 0; t < 500; ++t) {
        const std::string a = random_text(rng, rng.index(30), "abcAB c");
        const std::string b = mutate(rng, a, static_cast<int>(rng.index(6)), "abcAB c");
        EXPECT_EQ(similarity(a, b), similarity(b, a));
        EXPECT_EQ(similarity(a, a), 1.0);
        const double s = similarity(a, b);
        EXPECT_GE(s, 0.0);
        EXPECT_LE(s, 1.0);
    }
}

TEST(Similarity, BoundedDistanceAgreesWithFullMatrix) {
    Rng rng(5);
    for (int t = 0; t < 2000; ++t) {
        const auto a = text::decode_utf8(random_text(rng, rng.index(25), "abc"));
        const auto b = text::decode_utf8(random_text(rng, rng.index(25), "abc"));
        const std::size_t exact = oracle::edit_distance(a, b);
        EXPECT_EQ(levenshtein(a, b), exact);
        const std::size_t limit = rng.index(12);
        const std::size_t bounded = levenshtein_bounded(a, b, limit);
        if (exact <= limit) {
            EXPECT_EQ(bounded, exact);
        } else {
            EXPECT_GT(bounded, limit);
        }
    }
}

// ---------------------------------------------------------------------------
// dedup

TEST(Dedup, ByteIdenticalPairCollapses) {
    auto out = dedup(make_sentences({"We oppose the rule.", "We oppose the rule."}));
    ASSERT_EQ(out.size(), 1u);
    EXPECT_EQ(out[0].sentence_id, 0);
}

TEST(Dedup, ThreeEditsInHundredCharsCollapse) {
    const std::string a(100, 'x');
    std::string b = a;
    b[10] = 'y';
    b[50] = 'y';
    b[90] = 'y';
    EXPECT_DOUBLE_EQ(similarity(a, b), 0.97);
    EXPECT_EQ(dedup(make_sentences({a, b})).size(), 1u);
}

TEST(Dedup, ThresholdIsStrict) {
    // One substitution in twenty characters: similarity exactly 0.95.
    const std::string a = "abcdefghijklmnopqrst";
    const std::string b = "abcdefghijklmnopqrsX";
    ASSERT_EQ(similarity(a, b), 0.95);
    EXPECT_EQ(dedup(make_sentences({a, b}), {0.95}).size(), 2u);
    EXPECT_EQ(dedup(make_sentences({a, b}), {0.94}).size(), 1u);
}

TEST(Dedup, FirstIdRetainedAndInputOrderPreserved) {
    auto s = make_sentences({"alpha beta gamma", "zzz", "Alpha  beta gamma", "yyy"});
    std::swap(s[0], s[2]);  // input order: id2, id1, id0, id3
    auto out = dedup(s);
    ASSERT_EQ(out.size(), 3u);
    EXPECT_EQ(out[0].sentence_id, 1);
    EXPECT_EQ(out[1].sentence_id, 0);
    EXPECT_EQ(out[2].sentence_id, 3);
}

TEST(Dedup, ThresholdOneNeverRemoves) {
    EXPECT_EQ(dedup(make_sentences({"same", "same"}), {1.0}).size(), 2u);
}

TEST(Dedup, InvalidThresholdRejected) {
    EXPECT_THROW(dedup({}, {0.0}), ValidationError);
    EXPECT_THROW(dedup({}, {1.5}), ValidationError);
}

TEST(Dedup, MatchesGreedyOracleAndIsIdempotent) {
    Rng rng(2024);
    for (int trial = 0; trial < 60; ++trial) {
        const auto corpus = random_corpus(rng, 1 + rng.index(120));
        const double tau = trial % 3 == 0 ? 0.95 : 0.7 + 0.29 * rng.uniform();
        const auto once = dedup(corpus, {tau});
        EXPECT_EQ(ids_of(once), oracle::greedy_dedup(corpus, tau)) << "trial " << trial;
        EXPECT_EQ(ids_of(dedup(once, {tau})), ids_of(once));
        for (std::size_t i = 0; i < once.size(); ++i) {
            for (std::size_t j = i + 1; j < once.size(); ++j) EXPECT_LE(similarity(once[i], once[j]), tau);
        }
    }
}

TEST(Dedup, SentenceStoreRoundTrip) {
    auto s = make_sentences({"One sentence.", "Two, with \"quotes\" and ü."});
    auto dir = std::filesystem::temp_directory_path() / "argmine_test_corpus";
    std::filesystem::create_directories(dir);
    const auto path = (dir / "sentences.jsonl").string();
    write_sentences(path, s);
    auto back = read_sentences(path);
    ASSERT_EQ(back.size(), 2u);
    EXPECT_EQ(back[1].text, s[1].text);
    EXPECT_EQ(back[1].tokens, s[1].tokens);
}
