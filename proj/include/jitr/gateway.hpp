#pragma once

#include <atomic>
#include <chrono>
#include <memory>
#include <stdexcept>
#include <string>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "jitr/engine.hpp"

namespace jitr {

// Forwards traffic to a real provider endpoint over HTTP.
class HttpUpstream : public Upstream {
public:
    explicit HttpUpstream(const UpstreamConfig& cfg) : cfg_(cfg), client_(cfg.url.c_str()) {
        client_.set_connection_timeout(10);
        client_.set_read_timeout(120);
    }

    UpstreamResult call(const ChatRequest& req) override {
        const auto t0 = std::chrono::steady_clock::now();
        httplib::Headers headers;
        if (!cfg_.api_key.empty()) headers.emplace("Authorization", "Bearer " + cfg_.api_key);
        const auto res = client_.Post("/v1/chat/completions", headers,
                                      chat_request_to_json(req).dump(), "application/json");
        UpstreamResult out;
        out.latency_ms = std::chrono::duration<double, std::milli>(
                             std::chrono::steady_clock::now() - t0).count();
        if (!res) {
            out.ok = false;
            out.error = "connection failed: " + httplib::to_string(res.error());
            return out;
        }
        if (res->status != 200) {
            out.ok = false;
            out.error = "upstream status " + std::to_string(res->status);
            return out;
        }
        const auto j = nlohmann::json::parse(res->body, nullptr, false);
        if (j.is_discarded() || !j.contains("choices") || j["choices"].empty()) {
            out.ok = false;
            out.error = "upstream returned an unexpected body";
            return out;
        }
        out.content = j["choices"][0]["message"].value("content", std::string{});
        return out;
    }

private:
    UpstreamConfig cfg_;
    httplib::Client client_;
};

// The HTTP front door: the chat-completions endpoint, health checks, task
// and offer inspection. One engine instance behind every route.
class HttpGateway {
public:
    explicit HttpGateway(Engine& engine) : engine_(engine) {
        server_.Post("/v1/chat/completions", [this](const httplib::Request& req, httplib::Response& res) {
            const auto body = nlohmann::json::parse(req.body, nullptr, false);
            if (body.is_discarded()) {
                res.status = 400;
                res.set_content(
                    R"({"error":{"message":"body is not valid JSON","type":"invalid_request_error"}})",
                    "application/json; charset=utf-8");
                return;
            }
            const auto reply = engine_.handle_http(body, now_ms());
            res.status = reply.status;
            res.set_content(reply.body.dump(), "application/json; charset=utf-8");
            engine_.pump();
        });

        server_.Get("/healthz", [this](const httplib::Request&, httplib::Response& res) {
            res.set_content(nlohmann::json{{"status", "ok"},
                                           {"events", engine_.state().total_events()}}
                                .dump(),
                            "application/json; charset=utf-8");
        });

        server_.Get("/offers", [this](const httplib::Request&, httplib::Response& res) {
            nlohmann::json out = nlohmann::json::array();
            for (const auto& o : engine_.offers()) out.push_back(to_json(o));
            res.set_content(out.dump(), "application/json; charset=utf-8");
        });

        server_.Post("/offers", [this](const httplib::Request& req, httplib::Response& res) {
            const auto body = nlohmann::json::parse(req.body, nullptr, false);
            if (body.is_discarded() || !body.contains("offer_id") || !body.contains("action")) {
                res.status = 400;
                res.set_content(
                    R"({"error":{"message":"expected {offer_id, action: accept|reject}","type":"invalid_request_error"}})",
                    "application/json; charset=utf-8");
                return;
            }
            const std::string action = body["action"].get<std::string>();
            if (action != "accept" && action != "reject") {
                res.status = 400;
                res.set_content(
                    R"({"error":{"message":"action must be accept or reject","type":"invalid_request_error"}})",
                    "application/json; charset=utf-8");
                return;
            }
            try {
                engine_.decide_offer(body["offer_id"].get<std::string>(), action == "accept");
                res.set_content(R"({"status":"ok"})", "application/json; charset=utf-8");
            } catch (const Engine::OfferDecisionError& e) {
                res.status = 404;
                res.set_content(nlohmann::json{{"error", {{"message", e.what()},
                                                          {"type", "invalid_request_error"}}}}
                                    .dump(),
                                "application/json; charset=utf-8");
            }
        });
    }

    // Binds and serves on a background thread. Returns the bound port.
    int start(const std::string& host, int port) {
        int bound = port;
        if (port == 0) {
            bound = server_.bind_to_any_port(host.c_str());
            if (bound < 0) throw std::runtime_error("cannot bind gateway to " + host);
        } else if (!server_.bind_to_port(host.c_str(), port)) {
            throw std::runtime_error("cannot bind gateway to " + host + ":" + std::to_string(port));
        }
        thread_ = std::thread([this] { server_.listen_after_bind(); });
        server_.wait_until_ready();
        return bound;
    }

    void stop() {
        server_.stop();
        if (thread_.joinable()) thread_.join();
        engine_.flush();
    }

    ~HttpGateway() {
        if (thread_.joinable()) stop();
    }

private:
    static int64_t now_ms() {
        return std::chrono::duration_cast<std::chrono::milliseconds>(
                   std::chrono::system_clock::now().time_since_epoch())
            .count();
    }

    Engine& engine_;
    httplib::Server server_;
    std::thread thread_;
};

} // namespace jitr
