#include "relyeval/judge.hpp"

#ifdef RELYEVAL_HTTPS
#define CPPHTTPLIB_OPENSSL_SUPPORT
#endif
#include <httplib.h>
#include <json.hpp>

#include <chrono>
#include <condition_variable>
#include <mutex>
#include <thread>

using nlohmann::json;

namespace relyeval::judge {

namespace {

bool starts_with(const std::string& text, std::string_view prefix) {
    return text.size() >= prefix.size() && text.compare(0, prefix.size(), prefix) == 0;
}

std::string snippet(const std::string& text) {
    return text.size() <= 160 ? text : text.substr(0, 160) + "...";
}

// Pull the reply text out of a chat-completions response. Some providers put
// the verdict JSON in a tool call instead of message content.
std::string reply_text(const json& payload) {
    const json* message = nullptr;
    if (auto choices = payload.find("choices");
        choices != payload.end() && choices->is_array() && !choices->empty()) {
        if (auto m = choices->front().find("message"); m != choices->front().end()) message = &*m;
    }
    if (!message) throw BackendError("judge reply has no choices[0].message");
    if (auto content = message->find("content");
        content != message->end() && content->is_string() && !content->get<std::string>().empty())
        return content->get<std::string>();
    if (auto calls = message->find("tool_calls");
        calls != message->end() && calls->is_array() && !calls->empty()) {
        if (auto fn = calls->front().find("function"); fn != calls->front().end()) {
            if (auto args = fn->find("arguments"); args != fn->end()) {
                if (args->is_string()) return args->get<std::string>();
                return args->dump();
            }
        }
    }
    throw BackendError("judge reply has neither message content nor tool call arguments");
}

}  // namespace

struct RemoteJudgeBackend::Impl {
    RemoteConfig config;
    std::string origin;       // scheme://host[:port]
    std::string path_prefix;  // e.g. "/v1", possibly empty

    std::mutex gate_mutex;
    std::condition_variable gate_cv;
    int in_flight = 0;

    explicit Impl(RemoteConfig cfg) : config(std::move(cfg)) {
        if (config.concurrency_cap < 1) config.concurrency_cap = 1;
        if (config.retries < 0) config.retries = 0;
        if (!starts_with(config.base_url, "http://") && !starts_with(config.base_url, "https://"))
            throw ValidationError("judge base_url must start with http:// or https://: " +
                                  config.base_url);
#ifndef RELYEVAL_HTTPS
        if (starts_with(config.base_url, "https://"))
            throw ValidationError("this build lacks TLS support; use an http:// judge endpoint");
#endif
        size_t host_begin = config.base_url.find("://") + 3;
        size_t path_begin = config.base_url.find('/', host_begin);
        if (path_begin == std::string::npos) {
            origin = config.base_url;
        } else {
            origin = config.base_url.substr(0, path_begin);
            path_prefix = config.base_url.substr(path_begin);
            while (!path_prefix.empty() && path_prefix.back() == '/') path_prefix.pop_back();
        }
    }

    // Bounds in-flight requests at config.concurrency_cap across threads.
    struct GateGuard {
        Impl& impl;
        explicit GateGuard(Impl& owner) : impl(owner) {
            std::unique_lock lock(impl.gate_mutex);
            impl.gate_cv.wait(lock,
                              [&] { return impl.in_flight < impl.config.concurrency_cap; });
            ++impl.in_flight;
        }
        ~GateGuard() {
            {
                std::lock_guard lock(impl.gate_mutex);
                --impl.in_flight;
            }
            impl.gate_cv.notify_one();
        }
    };

    std::string post_completion(const std::string& prompt) {
        GateGuard gate(*this);

        std::string body = json{{"model", config.model},
                                {"messages", json::array({json{{"role", "user"},
                                                               {"content", prompt}}})}}
                               .dump();

        std::string last_error;
        int backoff_ms = config.backoff_initial_ms;
        for (int attempt = 0; attempt <= config.retries; ++attempt) {
            if (attempt > 0) {
                std::this_thread::sleep_for(std::chrono::milliseconds(backoff_ms));
                backoff_ms *= 2;
            }

            httplib::Client client(origin);
            client.set_connection_timeout(config.timeout_seconds);
            client.set_read_timeout(config.timeout_seconds);
            client.set_write_timeout(config.timeout_seconds);
            if (!config.api_key.empty()) client.set_bearer_token_auth(config.api_key);

            auto result =
                client.Post(path_prefix + "/chat/completions", body, "application/json");
            if (!result) {
                last_error = "connection failed: " + httplib::to_string(result.error());
                continue;
            }
            if (result->status == 429 || result->status >= 500) {
                last_error = "status " + std::to_string(result->status) + ": " +
                             snippet(result->body);
                continue;
            }
            if (result->status != 200)
                throw BackendError("judge endpoint rejected request with status " +
                                   std::to_string(result->status) + ": " + snippet(result->body));

            json payload = json::parse(result->body, nullptr, false);
            if (payload.is_discarded()) {
                last_error = "unparseable response body: " + snippet(result->body);
                continue;
            }
            return reply_text(payload);
        }
        throw BackendError("judge endpoint unreachable after " +
                           std::to_string(config.retries + 1) + " attempts; last error: " +
                           last_error);
    }
};

RemoteJudgeBackend::RemoteJudgeBackend(RemoteConfig config)
    : impl_(std::make_unique<Impl>(std::move(config))) {}

RemoteJudgeBackend::~RemoteJudgeBackend() = default;

std::string RemoteJudgeBackend::complete(const JudgeRequest& request) {
    return impl_->post_completion(request.prompt);
}

}  // namespace relyeval::judge
