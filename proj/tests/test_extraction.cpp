#include <gtest/gtest.h>

#include <atomic>
#include <mutex>
#include <thread>

#include "fcmforge/extraction.hpp"
#include "support.hpp"

// after Eigen: httplib pulls in system headers that clash with its product kernels
#include <httplib.h>

using namespace fcmforge;
using nlohmann::json;
using fcmforge::testing::test_data;

namespace {

const std::string rain = "Rain causes wet streets. Wet streets cause accidents.";
const std::string dull = "The committee met on Tuesday. The minutes were circulated afterwards.";
const std::string bus = "Heavy traffic slows buses. Slow buses reduce ridership.";
const std::string drought = "Drought lowers harvests. The weather service issued a bulletin.";
const std::string never_valid = "Budgets shrink when revenue falls.";

FixtureBackend fixtures() { return FixtureBackend(test_data() / "llm"); }

json two_edge_reply() {
    return json::parse(R"({"nodes":[{"label":"A"},{"label":"B"},{"label":"C"}],
        "edges":[{"source":"A","target":"B","weight":0.5},{"source":"B","target":"C","weight":-1}]})");
}

// Minimal chat-completions endpoint on a free local port.
class MockChatServer {
public:
    explicit MockChatServer(std::string content) : content_(std::move(content)) {
        server_.Post("/v1/chat/completions", [this](const httplib::Request& req, httplib::Response& res) {
            {
                std::lock_guard lock(mutex_);
                bodies_.push_back(req.body);
                auth_ = req.get_header_value("Authorization");
            }
            if (status_ != 200) {
                res.status = status_;
                res.set_content("{\"error\":\"nope\"}", "application/json");
                return;
            }
            json reply = {{"choices", json::array({{{"message", {{"role", "assistant"}, {"content", content_}}}}})}};
            res.set_content(reply.dump(), "application/json");
        });
        port_ = server_.bind_to_any_port("127.0.0.1");
        thread_ = std::thread([this] { server_.listen_after_bind(); });
        server_.wait_until_ready();
    }
    ~MockChatServer() {
        server_.stop();
        thread_.join();
    }

    std::string endpoint() const { return "http://127.0.0.1:" + std::to_string(port_) + "/v1/chat/completions"; }
    void fail_with(int status) { status_ = status; }
    std::vector<std::string> bodies() {
        std::lock_guard lock(mutex_);
        return bodies_;
    }
    std::string auth() {
        std::lock_guard lock(mutex_);
        return auth_;
    }

private:
    std::string content_;
    std::atomic<int> status_{200};
    httplib::Server server_;
    int port_ = 0;
    std::thread thread_;
    std::mutex mutex_;
    std::vector<std::string> bodies_;
    std::string auth_;
};

}  // namespace

TEST(ParseLlmFcm, BuildsLocalFcm) {
    const auto parsed = parse_llm_fcm(two_edge_reply(), "local-x");
    EXPECT_EQ(parsed.fcm.name(), "local-x");
    EXPECT_EQ(parsed.fcm.size(), 3u);
    EXPECT_EQ(parsed.fcm.matrix().edge_count(), 2u);
    const auto a = *parsed.fcm.find_label("A"), b = *parsed.fcm.find_label("B"), c = *parsed.fcm.find_label("C");
    EXPECT_EQ(parsed.fcm.matrix().at(a, b), 0.5);
    EXPECT_EQ(parsed.fcm.matrix().at(b, c), -1.0);
    EXPECT_TRUE(parsed.report.dropped_dead_nodes.empty());
}

TEST(ParseLlmFcm, DropsDeadNodes) {
    auto doc = two_edge_reply();
    doc["nodes"].push_back({{"label", "Lonely"}});
    const auto parsed = parse_llm_fcm(doc, "x");
    EXPECT_EQ(parsed.fcm.size(), 3u);
    EXPECT_EQ(parsed.report.dropped_dead_nodes, std::vector<std::string>{"Lonely"});
}

TEST(ParseLlmFcm, RejectsOutOfRangeAndDangling) {
    auto wide = two_edge_reply();
    wide["edges"][0]["weight"] = 1.25;
    ValidationReport report;
    EXPECT_THROW(parse_llm_fcm(wide, "x", &report), ValidationError);
    EXPECT_EQ(report.out_of_range.size(), 1u);

    auto dangling = two_edge_reply();
    dangling["edges"][1]["target"] = "Nowhere";
    ValidationReport r2;
    EXPECT_THROW(parse_llm_fcm(dangling, "x", &r2), ValidationError);
    EXPECT_EQ(r2.unresolved.size(), 1u);

    auto dup = two_edge_reply();
    dup["nodes"].push_back({{"label", "  a "}});
    EXPECT_THROW(parse_llm_fcm(dup, "x"), ValidationError);
    EXPECT_THROW(parse_llm_fcm(json::parse(R"({"edges":[]})"), "x"), ValidationError);
}

TEST(ParseLlmFcm, NothingCausalIsDegenerate) {
    EXPECT_THROW(parse_llm_fcm(json::parse(R"({"nodes":[],"edges":[]})"), "x"), DegenerateError);
    EXPECT_THROW(parse_llm_fcm(json::parse(R"({"nodes":["A","B"],"edges":[]})"), "x"), DegenerateError);
    // a zero-weight edge is not causal
    EXPECT_THROW(parse_llm_fcm(json::parse(R"({"nodes":["A","B"],"edges":[{"source":"A","target":"B","weight":0}]})"), "x"),
                 DegenerateError);
}

TEST(ExtractJsonObject, ToleratesFencesAndChatter) {
    EXPECT_EQ(extract_json_object("{\"a\":1}")["a"], 1);
    EXPECT_EQ(extract_json_object("Sure!\n```json\n{\"a\": {\"b\": \"}\"}}\n```\nthanks")["a"]["b"], "}");
    EXPECT_THROW(extract_json_object("no object here"), ValidationError);
    EXPECT_THROW(extract_json_object("{\"a\": 1"), ValidationError);
}

TEST(FixtureBackend, KeyedBySha256) {
    EXPECT_EQ(FixtureBackend::fixture_key("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    EXPECT_THROW(FixtureBackend("/nonexistent/fixture/dir"), BackendError);
    ChatRequest r{"extract", "no such payload", {}, 0};
    EXPECT_THROW(fixtures().complete(r), BackendError);
}

TEST(ExtractFcm, CleanReply) {
    ExtractionOptions opt;
    opt.fcm_id = "local-rain";
    opt.chunk = {{"tag", "base-0-1"}};
    const auto rec = extract_fcm(rain, fixtures(), opt);
    ASSERT_TRUE(rec.ok) << rec.error;
    ASSERT_TRUE(rec.fcm.has_value());
    EXPECT_EQ(rec.attempts.size(), 1u);
    EXPECT_EQ(rec.fcm->size(), 3u);
    EXPECT_EQ(rec.fcm->provenance()["chunk"]["tag"], "base-0-1");
    EXPECT_EQ(rec.fcm->matrix().at(*rec.fcm->find_label("rain"), *rec.fcm->find_label("street wetness")), 0.8);
}

TEST(ExtractFcm, RepairsOutOfRangeReply) {
    const auto rec = extract_fcm(bus, fixtures());
    ASSERT_TRUE(rec.ok) << rec.error;
    ASSERT_EQ(rec.attempts.size(), 2u);
    EXPECT_FALSE(rec.attempts[0].error.empty());
    EXPECT_TRUE(rec.attempts[1].error.empty());
    EXPECT_EQ(rec.fcm->matrix().at(*rec.fcm->find_label("Heavy Traffic"), *rec.fcm->find_label("Bus Speed")), -0.9);
}

TEST(ExtractFcm, RetriesAreBounded) {
    ExtractionOptions opt;
    opt.max_retries = 0;
    const auto once = extract_fcm(bus, fixtures(), opt);
    EXPECT_FALSE(once.ok);
    EXPECT_EQ(once.attempts.size(), 1u);
    EXPECT_EQ(once.error_kind, ErrorKind::validation);

    const auto rec = extract_fcm(never_valid, fixtures());
    EXPECT_FALSE(rec.ok);
    EXPECT_EQ(rec.attempts.size(), 3u);
    EXPECT_EQ(rec.error_kind, ErrorKind::validation);
    EXPECT_NE(rec.error.find("after 2 repair attempts"), std::string::npos);
}

TEST(ExtractFcm, DeadNodeReportedNotFatal) {
    const auto rec = extract_fcm(drought, fixtures());
    ASSERT_TRUE(rec.ok);
    EXPECT_EQ(rec.fcm->size(), 2u);
    EXPECT_EQ(rec.report.dropped_dead_nodes, std::vector<std::string>{"Weather Service"});
    EXPECT_EQ(record_json(rec)["validation"]["dropped_dead_nodes"][0], "Weather Service");
}

TEST(ExtractFcm, EmptyReplyIsDegenerateWithoutRetry) {
    const auto rec = extract_fcm(dull, fixtures());
    EXPECT_FALSE(rec.ok);
    EXPECT_EQ(rec.error_kind, ErrorKind::degenerate);
    EXPECT_EQ(rec.attempts.size(), 1u);
}

TEST(ExtractFcm, MissingFixtureIsBackendFailure) {
    const auto rec = extract_fcm("Unseen text.", fixtures());
    EXPECT_FALSE(rec.ok);
    EXPECT_EQ(rec.error_kind, ErrorKind::backend);
    const auto blank = extract_fcm("   ", fixtures());
    EXPECT_EQ(blank.error_kind, ErrorKind::validation);
    EXPECT_TRUE(blank.attempts.empty());
}

TEST(ExtractAll, KeepsJobOrderUnderConcurrency) {
    std::vector<ExtractionJob> jobs;
    for (int rep = 0; rep < 6; ++rep) {
        for (const auto* t : {&rain, &bus, &drought, &dull}) {
            ExtractionJob j{*t, {}};
            j.options.fcm_id = "job-" + std::to_string(jobs.size());
            jobs.push_back(j);
        }
    }
    const auto serial = extract_all(jobs, fixtures(), 1);
    const auto parallel = extract_all(jobs, fixtures(), 8);
    ASSERT_EQ(parallel.size(), jobs.size());
    for (std::size_t i = 0; i < jobs.size(); ++i) {
        EXPECT_EQ(parallel[i].fcm_id, jobs[i].options.fcm_id);
        EXPECT_EQ(record_json(parallel[i]), record_json(serial[i]));
    }
}

TEST(LiveBackend, TalksChatCompletions) {
    MockChatServer server(two_edge_reply().dump());
    LiveConfig cfg;
    cfg.endpoint = server.endpoint();
    cfg.model = "test-model";
    cfg.api_key = "secret";
    LiveBackend live(cfg);
    const auto rec = extract_fcm("Any text at all.", live);
    ASSERT_TRUE(rec.ok) << rec.error;
    EXPECT_EQ(rec.fcm->size(), 3u);
    const auto bodies = server.bodies();
    ASSERT_EQ(bodies.size(), 1u);
    const auto sent = json::parse(bodies[0]);
    EXPECT_EQ(sent["model"], "test-model");
    EXPECT_EQ(sent["temperature"], 0.0);
    EXPECT_EQ(sent["messages"][0]["role"], "system");
    EXPECT_EQ(server.auth(), "Bearer secret");
    // the logged request must not carry the key
    EXPECT_EQ(rec.attempts[0].request_body.find("secret"), std::string::npos);
}

TEST(LiveBackend, HttpErrorsAreBackendFailures) {
    MockChatServer server("{}");
    server.fail_with(503);
    LiveConfig cfg;
    cfg.endpoint = server.endpoint();
    cfg.model = "m";
    const auto rec = extract_fcm("Text.", LiveBackend(cfg));
    EXPECT_EQ(rec.error_kind, ErrorKind::backend);
    EXPECT_NE(rec.error.find("503"), std::string::npos);
    LiveConfig none;
    EXPECT_THROW(LiveBackend{none}, BackendError);
    cfg.endpoint = "not a url";
    EXPECT_THROW(LiveBackend(cfg).complete({"extract", "x", {}, 0}), BackendError);
}
