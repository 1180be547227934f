#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#ifdef RELYEVAL_HTTPS
#define CPPHTTPLIB_OPENSSL_SUPPORT
#endif
#include <httplib.h>
#include <json.hpp>

#include <atomic>
#include <thread>

#include "relyeval/judge.hpp"
#include "test_util.hpp"

using namespace relyeval;
using nlohmann::json;

namespace {

// Plays back a fixed sequence of raw replies; used to drive the parse paths.
struct ReplayBackend : judge::JudgeBackend {
    std::vector<std::string> replies;
    size_t calls = 0;

    explicit ReplayBackend(std::vector<std::string> r) : replies(std::move(r)) {}

    std::string complete(const judge::JudgeRequest&) override {
        REQUIRE(calls < replies.size());
        return replies[calls++];
    }
};

std::string chat_reply(const std::string& content) {
    return json{{"choices", json::array({json{{"message", json{{"content", content}}}}})}}.dump();
}

// HTTP server on an ephemeral loopback port; register handlers, then start().
struct LoopbackServer {
    httplib::Server server;
    std::thread thread;
    int port = 0;

    void start() {
        port = server.bind_to_any_port("127.0.0.1");
        REQUIRE(port > 0);
        thread = std::thread([this] { server.listen_after_bind(); });
        server.wait_until_ready();
    }

    ~LoopbackServer() {
        server.stop();
        if (thread.joinable()) thread.join();
    }

    std::string url(const std::string& path = "/v1") const {
        return "http://127.0.0.1:" + std::to_string(port) + path;
    }
};

judge::RemoteConfig fast_remote(const std::string& base_url, int retries = 0) {
    judge::RemoteConfig cfg;
    cfg.base_url = base_url;
    cfg.model = "judge-model";
    cfg.api_key = "sk-test";
    cfg.retries = retries;
    cfg.timeout_seconds = 5;
    cfg.backoff_initial_ms = 1;
    return cfg;
}

}  // namespace

// ---------------------------------------------------------------------------
// templates and rendering
// ---------------------------------------------------------------------------

TEST_CASE("embedded prompt templates match the shipped data files byte for byte") {
    CHECK(std::string(judge::tool_relevance_template()) ==
          slurp(prompt_path("check_tool_relevance.txt")));
    CHECK(std::string(judge::content_hallucination_template()) ==
          slurp(prompt_path("check_content_hallucination.txt")));
    CHECK(std::string(judge::answer_relevance_template()) ==
          slurp(prompt_path("check_answer_relevance.txt")));
    CHECK(std::string(judge::missing_parameter_template()) ==
          slurp(prompt_path("missing_parameter_rewrite.txt")));
    CHECK(std::string(judge::agent_system_template()) == slurp(prompt_path("agent_system.txt")));
}

TEST_CASE("fill_template substitutes each slot once, verbatim") {
    CHECK(judge::fill_template("a {x} b {y} c", {{"x", "1"}, {"y", "2"}}) == "a 1 b 2 c");
    CHECK(judge::fill_template("{x}{x}", {{"x", "ab"}}) == "abab");
    // unknown slots and stray braces pass through untouched
    CHECK(judge::fill_template("keep {unknown} and { spaced }", {{"x", "1"}}) ==
          "keep {unknown} and { spaced }");
    // values are never re-scanned: a slot-shaped value cannot inject
    CHECK(judge::fill_template("{a} / {b}", {{"a", "{b}"}, {"b", "V"}}) == "{b} / V");
    CHECK(judge::fill_template("{q}", {{"q", "json {\"k\": 1}"}}) == "json {\"k\": 1}");
}

TEST_CASE("render_param_schema groups required before optional and drops empty groups") {
    ToolSet ts = translation_toolset();
    const ToolSpec& translate = ts.tools[0];
    json schema = json::parse(judge::render_param_schema(translate));
    REQUIRE(schema.contains("required"));
    REQUIRE(schema.contains("optional"));
    REQUIRE(schema["required"].size() == 1);
    CHECK(schema["required"][0] ==
          json({{"name", "text"}, {"type", "string"}, {"description", "source text"}}));
    CHECK(schema["optional"][0]["name"] == "max_len");
    CHECK(schema["optional"][0]["type"] == "integer");

    // paramless tool renders an empty object, not empty arrays
    CHECK(judge::render_param_schema(ts.tools[1]) == "{}");

    ToolSpec all_required = make_tool("t", "d", {make_param("a", ParamType::String, true)});
    CHECK(!json::parse(judge::render_param_schema(all_required)).contains("optional"));
}

TEST_CASE("render_relevance_prompt fills every slot of the relevance template") {
    ToolSet ts = translation_toolset();
    std::string prompt = judge::render_relevance_prompt("Say hi in French", ts.tools[0]);
    CHECK(prompt.find("Query:\nSay hi in French") != std::string::npos);
    CHECK(prompt.find("Tool Description:\nTranslate text between languages") != std::string::npos);
    CHECK(prompt.find(judge::render_param_schema(ts.tools[0])) != std::string::npos);
    CHECK(prompt.find("{query}") == std::string::npos);
    CHECK(prompt.find("{tool_description}") == std::string::npos);
    CHECK(prompt.find("{tool_parameter}") == std::string::npos);
}

TEST_CASE("render_truthfulness_prompt shows the call as name(raw_args)") {
    ToolSet ts = translation_toolset();
    Action call = Action::invoke("translate_text", R"({"text": "job_77"})", "resp");
    std::string prompt = judge::render_truthfulness_prompt("user: hi", ts.tools[0], call);
    CHECK(prompt.find("User History: user: hi") != std::string::npos);
    CHECK(prompt.find(R"(Specific Tool Calling: translate_text({"text": "job_77"}))") !=
          std::string::npos);
    CHECK(prompt.find("{tool_calling}") == std::string::npos);

    CHECK_THROWS_AS(
        judge::render_truthfulness_prompt("h", ts.tools[0], Action::finish("done")),
        ContractError);
    CHECK_THROWS_AS(judge::render_truthfulness_prompt("h", ts.tools[0],
                                                      Action::give_up(IndecisiveKind::Restart)),
                    ContractError);
}

TEST_CASE("render_answer_relevance_prompt lists call/result blocks in order") {
    std::vector<ToolInvocation> calls{{"a_tool", "{}", "first result"},
                                      {"b_tool", R"({"k":1})", "second result"}};
    std::string prompt = judge::render_answer_relevance_prompt(calls, "the answer");
    std::string expected_blocks =
        "Tool call: a_tool({})\nResult: first result\n\n"
        "Tool call: b_tool({\"k\":1})\nResult: second result";
    CHECK(prompt.find(expected_blocks) != std::string::npos);
    CHECK(prompt.find("Final Answer:\nthe answer") != std::string::npos);

    CHECK_THROWS_AS(judge::render_answer_relevance_prompt({}, "answer"), ContractError);
}

TEST_CASE("render_rewrite_prompt serializes the tool list as a JSON array") {
    ToolSet ts = translation_toolset();
    std::string prompt = judge::render_rewrite_prompt(ts, "Translate job_7731");
    CHECK(prompt.find("Query:\nTranslate job_7731") != std::string::npos);
    size_t begin = prompt.find("Tool List:\n");
    REQUIRE(begin != std::string::npos);
    size_t array_begin = begin + std::string("Tool List:\n").size();
    size_t array_end = prompt.find("\n", array_begin);
    json tools = json::parse(prompt.substr(array_begin, array_end - array_begin));
    REQUIRE(tools.is_array());
    REQUIRE(tools.size() == 2);
    CHECK(tools[0]["name"] == "translate_text");
    CHECK(tools[0]["parameters"]["required"][0]["name"] == "text");
    CHECK(tools[1]["name"] == "list_languages");
}

TEST_CASE("render_history replays the conversation role by role") {
    Trajectory t = make_trajectory(
        "t1", "Translate hi", translation_toolset(),
        {Action::invoke("translate_text", R"({"text":"hi"})", "bonjour", "use the tool"),
         Action::give_up(IndecisiveKind::TalkToUser), Action::finish("bonjour")});

    CHECK(judge::render_history(t, 0) == "user: Translate hi");
    CHECK(judge::render_history(t, 1) ==
          "user: Translate hi"
          "\nassistant thought: use the tool"
          "\nassistant action: translate_text"
          "\nassistant action input: {\"text\":\"hi\"}"
          "\ntool response: bonjour");
    std::string full = judge::render_history(t, 3);
    CHECK(full.find("\nassistant action: Finish->give_up_and_talkto_user") != std::string::npos);
    CHECK(full.find("\nassistant final answer: bonjour") != std::string::npos);
    CHECK(judge::render_history(t, 99) == full);  // clamps to the trajectory length
}

TEST_CASE("render_agent_system_prompt lists tools and a JSON api description") {
    std::string prompt = judge::render_agent_system_prompt(translation_toolset());
    CHECK(prompt.find("translate_text: Translate text between languages\n"
                      "list_languages: List supported language codes") != std::string::npos);
    CHECK(prompt.find("{tool_description}") == std::string::npos);
    const std::string marker = "Specifically, you have access to the following APIs:\n";
    size_t api_begin = prompt.find(marker);
    REQUIRE(api_begin != std::string::npos);
    api_begin += marker.size();
    size_t api_end = prompt.find('\n', api_begin);
    json apis = json::parse(prompt.substr(api_begin, api_end - api_begin));
    REQUIRE(apis.size() == 2);
    CHECK(apis[1] == json({{"name", "list_languages"},
                           {"description", "List supported language codes"},
                           {"parameters", json::object()}}));
}

// ---------------------------------------------------------------------------
// verdict parsing
// ---------------------------------------------------------------------------

TEST_CASE("verdict parsing accepts prose-wrapped JSON and trims/cases tokens") {
    ToolSpec tool = make_tool("t", "d");

    SUBCASE("plain JSON reply") {
        ReplayBackend backend({R"({"content":"fits","tool_relevance":"Relevant"})"});
        auto verdict = judge::assess_tool_relevance(backend, "q", tool);
        CHECK(verdict.value == judge::Relevance::Relevant);
        CHECK(verdict.reason == "fits");
        CHECK(backend.calls == 1);
    }

    SUBCASE("JSON wrapped in prose, with a nested brace inside a string") {
        ReplayBackend backend(
            {"Sure! Here is my verdict:\n"
             R"({"content":"looks { fine","tool_relevance":"Irrelevant"} Hope that helps.)"});
        auto verdict = judge::assess_tool_relevance(backend, "q", tool);
        CHECK(verdict.value == judge::Relevance::Irrelevant);
        CHECK(verdict.reason == "looks { fine");
    }

    SUBCASE("an unparseable brace blob before the real object is skipped") {
        ReplayBackend backend({R"(score {not json} then {"tool_relevance":"Unsure"})"});
        CHECK(judge::assess_tool_relevance(backend, "q", tool).value == judge::Relevance::Unsure);
    }

    SUBCASE("verdict tokens are case-insensitive and whitespace-tolerant") {
        ReplayBackend backend({R"({"tool_relevance":"  RELEVANT "})"});
        CHECK(judge::assess_tool_relevance(backend, "q", tool).value ==
              judge::Relevance::Relevant);
    }

    SUBCASE("missing reason defaults to empty") {
        ReplayBackend backend({R"({"tool_relevance":"Unsure"})"});
        CHECK(judge::assess_tool_relevance(backend, "q", tool).reason.empty());
    }
}

TEST_CASE("truthfulness accepts both the canonical and the legacy field spelling") {
    ToolSpec tool = make_tool("t", "d");
    Action call = Action::invoke("t", "{}", "r");

    ReplayBackend canonical({R"({"calling_truthfulness":"Untruthful","content":"made up"})"});
    auto v1 = judge::assess_param_truthfulness(canonical, "h", tool, call);
    CHECK(v1.value == judge::Truthfulness::Untruthful);
    CHECK(v1.reason == "made up");

    ReplayBackend legacy({R"({"calling_trufulness":"truthful"})"});
    CHECK(judge::assess_param_truthfulness(legacy, "h", tool, call).value ==
          judge::Truthfulness::Truthful);
}

TEST_CASE("answer relevance parses its own field") {
    std::vector<ToolInvocation> calls{{"t", "{}", "r"}};
    ReplayBackend backend({R"({"answer_relevance":"Relevant"})"});
    CHECK(judge::assess_answer_relevance(backend, calls, "ans").value ==
          judge::Relevance::Relevant);
}

TEST_CASE("one re-ask on an unusable reply, then a hard parse error") {
    ToolSpec tool = make_tool("t", "d");

    SUBCASE("recovers when the re-ask parses") {
        ReplayBackend backend({"no json here", R"({"tool_relevance":"Relevant"})"});
        CHECK(judge::assess_tool_relevance(backend, "q", tool).value ==
              judge::Relevance::Relevant);
        CHECK(backend.calls == 2);
    }

    SUBCASE("re-asks when the object lacks the verdict field") {
        ReplayBackend backend({R"({"content":"chatty"})", R"({"tool_relevance":"Unsure"})"});
        CHECK(judge::assess_tool_relevance(backend, "q", tool).value == judge::Relevance::Unsure);
        CHECK(backend.calls == 2);
    }

    SUBCASE("re-asks when the verdict token is not in the vocabulary") {
        ReplayBackend backend({R"({"tool_relevance":"Maybe"})", R"({"tool_relevance":"Unsure"})"});
        CHECK(judge::assess_tool_relevance(backend, "q", tool).value == judge::Relevance::Unsure);
        CHECK(backend.calls == 2);
    }

    SUBCASE("re-asks when the verdict field is not a string") {
        ReplayBackend backend({R"({"tool_relevance":1})", R"({"tool_relevance":"Unsure"})"});
        CHECK(judge::assess_tool_relevance(backend, "q", tool).value == judge::Relevance::Unsure);
    }

    SUBCASE("two unusable replies raise VerdictParseError") {
        ReplayBackend backend({"garbage", R"({"tool_relevance":"Still Maybe"})"});
        CHECK_THROWS_AS(judge::assess_tool_relevance(backend, "q", tool), VerdictParseError);
        CHECK(backend.calls == 2);
    }

    SUBCASE("the error names the field and quotes the last reply") {
        ReplayBackend backend({"nope", "still nope"});
        CHECK_THROWS_WITH_AS(judge::assess_tool_relevance(backend, "q", tool),
                             "no usable tool_relevance verdict after re-ask; last reply: "
                             "still nope",
                             VerdictParseError);
    }
}

// ---------------------------------------------------------------------------
// scripted mock
// ---------------------------------------------------------------------------

TEST_CASE("mock defaults: relevant tools, truthful params, irrelevant answers") {
    judge::MockJudgeBackend mock;
    ToolSpec tool = make_tool("t", "d");

    CHECK(judge::assess_tool_relevance(mock, "q", tool).value == judge::Relevance::Relevant);
    CHECK(judge::assess_param_truthfulness(mock, "h", tool, Action::invoke("t", "{}", "r")).value ==
          judge::Truthfulness::Truthful);
    CHECK(judge::assess_answer_relevance(mock, {{"t", "{}", "r"}}, "ans").value ==
          judge::Relevance::Irrelevant);

    CHECK(mock.call_count() == 3);
    CHECK(mock.call_count(judge::PromptKind::ToolRelevance) == 1);
    CHECK(mock.call_count(judge::PromptKind::CallingTruthfulness) == 1);
    CHECK(mock.call_count(judge::PromptKind::AnswerRelevance) == 1);
    CHECK(mock.call_count(judge::PromptKind::MissingParamRewrite) == 0);
    mock.reset_counts();
    CHECK(mock.call_count() == 0);
}

TEST_CASE("mock rules: first match wins, keyed on kind, tool name, query substring") {
    judge::MockJudgeBackend mock;
    mock.add_rule({judge::PromptKind::ToolRelevance, "get_quote", std::nullopt, "Irrelevant",
                   "off-topic tool"});
    mock.add_rule({judge::PromptKind::ToolRelevance, "get_quote", std::nullopt, "Unsure",
                   "shadowed by the earlier rule"});
    mock.add_rule({judge::PromptKind::AnswerRelevance, std::nullopt, "job_7731", "Relevant", ""});

    ToolSpec quote = make_tool("get_quote", "d");
    ToolSpec other = make_tool("other_tool", "d");

    auto verdict = judge::assess_tool_relevance(mock, "q", quote);
    CHECK(verdict.value == judge::Relevance::Irrelevant);
    CHECK(verdict.reason == "off-topic tool");
    CHECK(judge::assess_tool_relevance(mock, "q", other).value == judge::Relevance::Relevant);

    // answer-relevance requests carry the final answer in the query slot
    CHECK(judge::assess_answer_relevance(mock, {{"t", "{}", "r"}}, "created job_7731").value ==
          judge::Relevance::Relevant);
    CHECK(judge::assess_answer_relevance(mock, {{"t", "{}", "r"}}, "nothing").value ==
          judge::Relevance::Irrelevant);

    // tool_name matching is exact
    CHECK(judge::assess_tool_relevance(mock, "q", make_tool("get_quote2", "d")).value ==
          judge::Relevance::Relevant);
}

TEST_CASE("mock scripts load defaults and rules from JSON") {
    auto mock = judge::MockJudgeBackend::from_script(R"({
        "defaults": {"answer_relevance": "Relevant"},
        "rules": [
            {"kind": "calling_truthfulness", "tool_name": "get_job", "verdict": "Untruthful",
             "reason": "fabricated id"},
            {"kind": "missing_param_rewrite", "query_contains": "flight", "verdict": "Book it"}
        ]
    })");

    ToolSpec job = make_tool("get_job", "d");
    auto verdict =
        judge::assess_param_truthfulness(mock, "h", job, Action::invoke("get_job", "{}", "r"));
    CHECK(verdict.value == judge::Truthfulness::Untruthful);
    CHECK(verdict.reason == "fabricated id");
    CHECK(judge::assess_answer_relevance(mock, {{"t", "{}", "r"}}, "a").value ==
          judge::Relevance::Relevant);

    judge::JudgeRequest rewrite{judge::PromptKind::MissingParamRewrite, "p", "",
                                "book flight LH123"};
    CHECK(mock.complete(rewrite) == "Book it");

    CHECK_THROWS_AS(judge::MockJudgeBackend::from_script("{nope"), ParseError);
    CHECK_THROWS_AS(judge::MockJudgeBackend::from_script(R"({"defaults":{"bogus":"X"}})"),
                    ParseError);
    CHECK_THROWS_AS(
        judge::MockJudgeBackend::from_script(R"({"rules":[{"kind":"tool_relevance"}]})"),
        ParseError);
    CHECK_THROWS_AS(judge::MockJudgeBackend::from_script(R"({"rules":[{"verdict":"X"}]})"),
                    ParseError);
}

TEST_CASE("mock rewrite requests fall back to the offline token rewriter") {
    judge::MockJudgeBackend mock;
    judge::JudgeRequest rewrite{judge::PromptKind::MissingParamRewrite, "p", "",
                                "Translate job_7731 now"};
    CHECK(mock.complete(rewrite) == "Translate now");
    CHECK(mock.call_count(judge::PromptKind::MissingParamRewrite) == 1);
}

TEST_CASE("hide_param_tokens drops digit-bearing tokens and keeps punctuation") {
    using judge::hide_param_tokens;
    CHECK(hide_param_tokens("Translate job_7731 to French") == "Translate to French");
    CHECK(hide_param_tokens("Get the status of order 12345.") == "Get the status of order.");
    CHECK(hide_param_tokens("Check flight LH123 now") == "Check flight now");
    CHECK(hide_param_tokens("(ID 42)") == "(ID)");
    CHECK(hide_param_tokens("9to5 start") == "start");
    // nothing to hide: the query comes back byte-identical, spacing and all
    CHECK(hide_param_tokens("no  digits   here") == "no  digits   here");
    CHECK(hide_param_tokens("") == "");
    // an all-digit query collapses to empty
    CHECK(hide_param_tokens("12345") == "");
}

// ---------------------------------------------------------------------------
// remote backend over loopback HTTP
// ---------------------------------------------------------------------------

TEST_CASE("remote backend posts a chat completion and returns the reply content") {
    LoopbackServer server;
    std::string seen_auth, seen_path, seen_body;
    server.server.Post("/v1/chat/completions",
                       [&](const httplib::Request& req, httplib::Response& res) {
                           seen_auth = req.get_header_value("Authorization");
                           seen_path = req.path;
                           seen_body = req.body;
                           res.set_content(chat_reply("the verdict"), "application/json");
                       });
    server.start();

    judge::RemoteJudgeBackend backend(fast_remote(server.url("/v1")));
    judge::JudgeRequest request{judge::PromptKind::ToolRelevance, "PROMPT TEXT", "t", "q"};
    CHECK(backend.complete(request) == "the verdict");

    CHECK(seen_auth == "Bearer sk-test");
    CHECK(seen_path == "/v1/chat/completions");
    json body = json::parse(seen_body);
    CHECK(body["model"] == "judge-model");
    REQUIRE(body["messages"].size() == 1);
    CHECK(body["messages"][0]["role"] == "user");
    CHECK(body["messages"][0]["content"] == "PROMPT TEXT");
}

TEST_CASE("remote backend normalizes a trailing slash in the base url") {
    LoopbackServer server;
    std::atomic<int> hits{0};
    server.server.Post("/v1/chat/completions",
                       [&](const httplib::Request&, httplib::Response& res) {
                           ++hits;
                           res.set_content(chat_reply("ok"), "application/json");
                       });
    server.start();

    judge::RemoteJudgeBackend backend(fast_remote(server.url("/v1/")));
    CHECK(backend.complete({judge::PromptKind::ToolRelevance, "p", "", ""}) == "ok");
    CHECK(hits == 1);
}

TEST_CASE("remote backend retries 5xx and 429 with capped attempts") {
    LoopbackServer server;
    std::atomic<int> hits{0};
    server.server.Post("/v1/chat/completions",
                       [&](const httplib::Request&, httplib::Response& res) {
                           int n = ++hits;
                           if (n == 1) {
                               res.status = 500;
                           } else if (n == 2) {
                               res.status = 429;
                           } else {
                               res.set_content(chat_reply("recovered"), "application/json");
                           }
                       });
    server.start();

    SUBCASE("enough retries: succeeds on the third attempt") {
        judge::RemoteJudgeBackend backend(fast_remote(server.url("/v1"), 2));
        CHECK(backend.complete({judge::PromptKind::ToolRelevance, "p", "", ""}) == "recovered");
        CHECK(hits == 3);
    }

    SUBCASE("too few retries: BackendError reports the attempt count and last status") {
        judge::RemoteJudgeBackend backend(fast_remote(server.url("/v1"), 1));
        try {
            backend.complete({judge::PromptKind::ToolRelevance, "p", "", ""});
            FAIL("expected BackendError");
        } catch (const BackendError& e) {
            std::string what = e.what();
            CHECK(what.find("after 2 attempts") != std::string::npos);
            CHECK(what.find("429") != std::string::npos);
        }
        CHECK(hits == 2);
    }
}

TEST_CASE("remote backend fails fast on other 4xx with no retry") {
    LoopbackServer server;
    std::atomic<int> hits{0};
    server.server.Post("/v1/chat/completions",
                       [&](const httplib::Request&, httplib::Response& res) {
                           ++hits;
                           res.status = 400;
                           res.set_content("bad request", "text/plain");
                       });
    server.start();

    judge::RemoteJudgeBackend backend(fast_remote(server.url("/v1"), 5));
    try {
        backend.complete({judge::PromptKind::ToolRelevance, "p", "", ""});
        FAIL("expected BackendError");
    } catch (const BackendError& e) {
        CHECK(std::string(e.what()).find("status 400") != std::string::npos);
    }
    CHECK(hits == 1);
}

TEST_CASE("remote backend retries an unparseable 200 body") {
    LoopbackServer server;
    std::atomic<int> hits{0};
    server.server.Post("/v1/chat/completions",
                       [&](const httplib::Request&, httplib::Response& res) {
                           if (++hits == 1)
                               res.set_content("<html>oops</html>", "text/html");
                           else
                               res.set_content(chat_reply("fine"), "application/json");
                       });
    server.start();

    judge::RemoteJudgeBackend backend(fast_remote(server.url("/v1"), 1));
    CHECK(backend.complete({judge::PromptKind::ToolRelevance, "p", "", ""}) == "fine");
    CHECK(hits == 2);
}

TEST_CASE("remote backend reads tool-call arguments when content is absent") {
    LoopbackServer server;
    server.server.Post(
        "/v1/chat/completions", [&](const httplib::Request&, httplib::Response& res) {
            json reply = {
                {"choices",
                 json::array(
                     {json{{"message",
                            json{{"content", ""},
                                 {"tool_calls",
                                  json::array({json{{"function",
                                                     json{{"arguments",
                                                           R"({"tool_relevance":"Unsure"})"}}}}})}}}}})}};
            res.set_content(reply.dump(), "application/json");
        });
    server.start();

    judge::RemoteJudgeBackend backend(fast_remote(server.url("/v1")));
    CHECK(backend.complete({judge::PromptKind::ToolRelevance, "p", "", ""}) ==
          R"({"tool_relevance":"Unsure"})");
}

TEST_CASE("remote backend surfaces a missing-choices reply as BackendError") {
    LoopbackServer server;
    server.server.Post("/v1/chat/completions",
                       [&](const httplib::Request&, httplib::Response& res) {
                           res.set_content(R"({"object":"error-ish"})", "application/json");
                       });
    server.start();

    judge::RemoteJudgeBackend backend(fast_remote(server.url("/v1")));
    CHECK_THROWS_AS(backend.complete({judge::PromptKind::ToolRelevance, "p", "", ""}),
                    BackendError);
}

TEST_CASE("remote backend reports an unreachable endpoint after its retries") {
    // bind a port, then close it so nothing is listening there
    int dead_port;
    {
        LoopbackServer probe;
        probe.start();
        dead_port = probe.port;
    }

    auto cfg = fast_remote("http://127.0.0.1:" + std::to_string(dead_port) + "/v1", 1);
    cfg.timeout_seconds = 1;
    judge::RemoteJudgeBackend backend(cfg);
    try {
        backend.complete({judge::PromptKind::ToolRelevance, "p", "", ""});
        FAIL("expected BackendError");
    } catch (const BackendError& e) {
        std::string what = e.what();
        CHECK(what.find("after 2 attempts") != std::string::npos);
        CHECK(what.find("connection failed") != std::string::npos);
    }
}

TEST_CASE("remote backend rejects a base url without an http scheme") {
    CHECK_THROWS_AS(judge::RemoteJudgeBackend(fast_remote("ftp://example.com/v1")),
                    ValidationError);
    CHECK_THROWS_AS(judge::RemoteJudgeBackend(fast_remote("example.com/v1")), ValidationError);
}

TEST_CASE("remote backend caps concurrent in-flight requests") {
    LoopbackServer server;
    std::atomic<int> current{0}, peak{0};
    server.server.Post("/v1/chat/completions",
                       [&](const httplib::Request&, httplib::Response& res) {
                           int now = ++current;
                           int seen = peak.load();
                           while (now > seen && !peak.compare_exchange_weak(seen, now)) {
                           }
                           std::this_thread::sleep_for(std::chrono::milliseconds(30));
                           --current;
                           res.set_content(chat_reply("ok"), "application/json");
                       });
    server.start();

    auto cfg = fast_remote(server.url("/v1"));
    cfg.concurrency_cap = 1;
    judge::RemoteJudgeBackend backend(cfg);

    std::vector<std::thread> threads;
    for (int i = 0; i < 3; ++i)
        threads.emplace_back([&] {
            CHECK(backend.complete({judge::PromptKind::ToolRelevance, "p", "", ""}) == "ok");
        });
    for (auto& t : threads) t.join();
    CHECK(peak.load() == 1);
}
