#pragma once

#include <chrono>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>

#include <json.hpp>

#include "chainflow/runtime.hpp"

namespace chainflow {

struct ApiRequest {
    std::string method;
    std::string path;
    std::map<std::string, std::string> query;
    std::string body;
    std::string contentType;
    /// From the X-Account header; the admin account when absent.
    AccountId account;
};

struct ApiResponse {
    int status = 200;
    nlohmann::json body;
};

/// Transport-independent REST surface of the engine. The HTTP server is a
/// thin adapter over handle(); tests and the replayer call it directly.
///
/// Every route that reaches the ledger submits exactly one transaction,
/// except POST /interpreter/models with registration, which runs a plan.
/// Requests rejected up front (malformed body, unknown address) submit none.
class Api {
public:
    explicit Api(Runtime& runtime, std::optional<std::filesystem::path> snapshot = std::nullopt);

    ApiResponse handle(const ApiRequest& req);

    /// Longest wait a single GET /monitor may ask for.
    static constexpr std::chrono::milliseconds kMaxPoll{30000};

private:
    ApiResponse dispatch(const ApiRequest& req);
    ApiResponse monitor(const ApiRequest& req);
    void persist();

    nlohmann::json flowInfoJson(const Address& flow);
    nlohmann::json caseJson(const Address& node);
    /// Element id of (flow, eInd) when the flow belongs to a known model.
    std::optional<std::string> elementId(const Address& flow, ElementIndex e);

    Runtime& rt_;
    std::optional<std::filesystem::path> snapshot_;
    std::mutex mutex_;  // serializes everything except monitor polls
    std::map<Address, std::map<ElementIndex, std::string>> elementIds_;
};

/// Maps a ledger revert reason to an HTTP status.
int statusForReason(const std::string& reason);

/// HTTP adapter over an Api (cpp-httplib). Adds permissive CORS headers.
class HttpServer {
public:
    explicit HttpServer(Api& api);
    ~HttpServer();
    HttpServer(const HttpServer&) = delete;
    HttpServer& operator=(const HttpServer&) = delete;

    /// Binds (port 0 picks a free one) and serves on a background thread.
    /// Returns the bound port; throws std::runtime_error when binding fails.
    int start(const std::string& host, int port);
    /// Serves on the calling thread until stop().
    void run(const std::string& host, int port);
    void stop();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace chainflow
