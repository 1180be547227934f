#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <json.hpp>

#include "relyeval/model.hpp"
#include "test_util.hpp"

using namespace relyeval;
using nlohmann::json;

TEST_CASE("enum spellings round-trip") {
    for (ParamType type : {ParamType::String, ParamType::Integer, ParamType::Number,
                           ParamType::Boolean, ParamType::Array, ParamType::Object})
        CHECK(param_type_from_name(param_type_name(type)) == type);
    CHECK(!param_type_from_name("float").has_value());

    for (IndecisiveKind kind :
         {IndecisiveKind::Restart, IndecisiveKind::ChangeTools, IndecisiveKind::TalkToUser})
        CHECK(indecisive_kind_from_name(indecisive_kind_name(kind)) == kind);

    for (SubsetTag tag :
         {SubsetTag::Original, SubsetTag::MissingParameter, SubsetTag::UnmatchedTools})
        CHECK(subset_tag_from_name(subset_tag_name(tag)) == tag);
    CHECK(!subset_tag_from_name("Original").has_value());  // case-sensitive
}

TEST_CASE("give-up finish spellings") {
    CHECK(indecisive_finish_action(IndecisiveKind::Restart) == "Finish->give_up_and_restart");
    CHECK(indecisive_finish_action(IndecisiveKind::ChangeTools) ==
          "Finish->give_up_and_change_tools");
    CHECK(indecisive_finish_action(IndecisiveKind::TalkToUser) ==
          "Finish->give_up_and_talkto_user");
}

TEST_CASE("necessary-call defaults per subset") {
    CHECK(default_necessary_calls(SubsetTag::Original) == 1);
    CHECK(default_necessary_calls(SubsetTag::MissingParameter) == 0);
    CHECK(default_necessary_calls(SubsetTag::UnmatchedTools) == 0);
}

TEST_CASE("toolset lookup and validation") {
    ToolSet ts = translation_toolset();
    REQUIRE(ts.find_tool("translate_text") != nullptr);
    CHECK(ts.find_tool("translate_text")->find_param("text") != nullptr);
    CHECK(ts.find_tool("translate_text")->find_param("nope") == nullptr);
    CHECK(ts.find_tool("Translate_Text") == nullptr);  // exact match only

    CHECK_NOTHROW(validate_toolset(ts));

    ToolSet empty{"ts.empty", {}};
    CHECK_THROWS_AS(validate_toolset(empty), ValidationError);

    ToolSet dup = ts;
    dup.tools.push_back(dup.tools.front());
    CHECK_THROWS_AS(validate_toolset(dup), ValidationError);

    ToolSet dup_param = ts;
    dup_param.tools[0].params.push_back(dup_param.tools[0].params[0]);
    CHECK_THROWS_AS(validate_toolset(dup_param), ValidationError);
}

TEST_CASE("action helpers and equality") {
    Action call = Action::invoke("translate_text", R"({"text": "hi"})", "bonjour", "thinking");
    Action give = Action::give_up(IndecisiveKind::TalkToUser);
    Action done = Action::finish("done");

    CHECK(call.is_invocation());
    CHECK(give.is_indecisive());
    CHECK(done.is_final_answer());

    CHECK(actions_equal(call, call));
    CHECK(!actions_equal(call, give));
    Action call2 = call;
    call2.thought = "different";
    CHECK(!actions_equal(call, call2));
    Action call3 = call;
    call3.act = ToolInvocation{"translate_text", R"({"text": "hi"})", "different response"};
    CHECK(!actions_equal(call, call3));
}

TEST_CASE("trajectory accessors") {
    Trajectory t = make_trajectory(
        "t", "q", translation_toolset(),
        {Action::invoke("translate_text", "{}", "r"), Action::give_up(IndecisiveKind::Restart),
         Action::invoke("list_languages", "{}", "r2"), Action::finish("answer")});
    CHECK(t.tool_call_count() == 2);
    REQUIRE(t.final_answer() != nullptr);
    CHECK(t.final_answer()->text == "answer");

    Trajectory no_answer = make_trajectory("t", "q", translation_toolset(), {});
    CHECK(no_answer.final_answer() == nullptr);
    CHECK(no_answer.tool_call_count() == 0);
}

TEST_CASE("trajectory validation") {
    ToolSet ts = translation_toolset();

    Trajectory two_answers =
        make_trajectory("t", "q", ts, {Action::finish("a"), Action::finish("b")});
    CHECK_THROWS_AS(validate_trajectory(two_answers), ValidationError);

    Trajectory mid_answer = make_trajectory(
        "t", "q", ts, {Action::finish("a"), Action::invoke("list_languages", "{}", "r")});
    CHECK_THROWS_AS(validate_trajectory(mid_answer), ValidationError);

    Trajectory negative = make_trajectory("t", "q", ts, {});
    negative.necessary_calls = -1;
    CHECK_THROWS_AS(validate_trajectory(negative), ValidationError);

    // multiple indecisive steps anywhere are legal
    Trajectory wanderer = make_trajectory(
        "t", "q", ts,
        {Action::give_up(IndecisiveKind::Restart), Action::invoke("list_languages", "{}", "r"),
         Action::give_up(IndecisiveKind::ChangeTools), Action::finish("a")});
    CHECK_NOTHROW(validate_trajectory(wanderer));
}

TEST_CASE("trajectory record round-trip preserves everything") {
    Trajectory t = make_trajectory(
        "task-42", "Translate 'hello' to French", translation_toolset(),
        {Action::invoke("translate_text", R"({"text": "hello"})", R"({"out": "bonjour"})",
                        "the query names the text"),
         Action::give_up(IndecisiveKind::ChangeTools), Action::finish("bonjour", "wrap up")},
        true);
    t.subset_tag = SubsetTag::Original;
    t.necessary_calls = 2;

    Trajectory back = parse_trajectory(serialize_trajectory(t));
    CHECK(back.task_id == t.task_id);
    CHECK(back.subset_tag == t.subset_tag);
    CHECK(back.query == t.query);
    CHECK(back.toolset.id == t.toolset.id);
    REQUIRE(back.toolset.tools.size() == t.toolset.tools.size());
    CHECK(back.toolset.tools[0].params[0].description == "source text");
    CHECK(back.pass_verdict == t.pass_verdict);
    CHECK(back.necessary_calls == 2);
    REQUIRE(back.steps.size() == t.steps.size());
    for (size_t i = 0; i < t.steps.size(); ++i) CHECK(actions_equal(back.steps[i], t.steps[i]));

    // serialization is stable: parse(serialize(x)) serializes identically
    CHECK(serialize_trajectory(back) == serialize_trajectory(t));
}

TEST_CASE("trajectory parsing applies per-subset defaults") {
    std::string base = R"({"task_id":"t","query":"q","toolset":{"id":"ts","tools":[{"name":"a"}]},"steps":[]})";

    auto with_tag = [&](const char* tag) {
        json j = json::parse(base);
        j["subset_tag"] = tag;
        return parse_trajectory(j.dump());
    };

    CHECK(with_tag("original").necessary_calls == 1);
    CHECK(with_tag("missing_parameter").necessary_calls == 0);
    CHECK(with_tag("unmatched_tools").necessary_calls == 0);
    CHECK(with_tag("original").pass_verdict == false);

    json j = json::parse(base);
    j["subset_tag"] = "original";
    j["necessary_calls"] = 5;
    CHECK(parse_trajectory(j.dump()).necessary_calls == 5);
}

TEST_CASE("trajectory parse errors name the offending field") {
    auto message_of = [](const std::string& line) {
        try {
            parse_trajectory(line);
            return std::string("(no error)");
        } catch (const std::exception& e) {
            return std::string(e.what());
        }
    };

    CHECK(message_of("{nope").find("invalid JSON") != std::string::npos);
    CHECK(message_of(R"({"task_id":"t"})").find("subset_tag") != std::string::npos);
    CHECK(message_of(
              R"({"task_id":"t","subset_tag":"weird","query":"q","toolset":{"id":"x","tools":[{"name":"a"}]},"steps":[]})")
              .find("subset_tag") != std::string::npos);
    CHECK(message_of(
              R"({"task_id":"t","subset_tag":"original","query":"q","toolset":{"id":"x","tools":[{"name":"a"}]},"steps":[{"tool_invocation":{"tool_name":"a","args_raw":"{}"}}]})")
              .find("steps[0].tool_invocation.response") != std::string::npos);
    CHECK(message_of(
              R"({"task_id":"t","subset_tag":"original","query":"q","toolset":{"id":"x","tools":[{"name":"a"}]},"steps":[{"tool_invocation":{"tool_name":"a","args_raw":"{}","response":""},"indecisive":{"kind":"restart"}}]})")
              .find("exactly one of") != std::string::npos);
    CHECK(message_of(
              R"({"task_id":"t","subset_tag":"original","query":"q","toolset":{"id":"x","tools":[{"name":"a"}]},"steps":[{"indecisive":{"kind":"shrug"}}]})")
              .find("steps[0].indecisive.kind") != std::string::npos);
    CHECK(message_of(
              R"({"task_id":"t","subset_tag":"original","query":"q","toolset":{"id":"x","tools":[{"name":"a","params":[{"name":"p","type":"floaty"}]}]},"steps":[]})")
              .find("toolset.tools[0].params[0].type") != std::string::npos);
}

TEST_CASE("toolset document round-trip and validation on parse") {
    ToolSet ts = translation_toolset();
    ToolSet back = parse_toolset(serialize_toolset(ts));
    CHECK(back.id == ts.id);
    REQUIRE(back.tools.size() == 2);
    CHECK(back.tools[1].name == "list_languages");
    CHECK(back.tools[1].params.empty());
    CHECK(serialize_toolset(back) == serialize_toolset(ts));

    CHECK_THROWS_AS(parse_toolset(R"({"id":"x","tools":[]})"), ValidationError);
    CHECK_THROWS_AS(
        parse_toolset(R"({"id":"x","tools":[{"name":"a"},{"name":"a"}]})"), ValidationError);
}

TEST_CASE("args_raw survives byte-exactly even when not valid JSON") {
    Trajectory t = make_trajectory(
        "t", "q", translation_toolset(),
        {Action::invoke("translate_text", "{broken json", "resp")});
    t.subset_tag = SubsetTag::Original;
    Trajectory back = parse_trajectory(serialize_trajectory(t));
    CHECK(back.steps[0].invocation().args_raw == "{broken json");
}
