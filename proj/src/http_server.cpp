#include <httplib.h>

#include <thread>

#include "chainflow/gateway.hpp"

namespace chainflow {

struct HttpServer::Impl {
    Api& api;
    httplib::Server server;
    std::thread thread;

    explicit Impl(Api& a) : api(a) {
        auto handler = [this](const httplib::Request& req, httplib::Response& res) {
            ApiRequest r;
            r.method = req.method;
            r.path = req.path;
            for (const auto& [k, v] : req.params) r.query[k] = v;
            r.body = req.body;
            r.contentType = req.get_header_value("Content-Type");
            r.account = req.get_header_value("X-Account");
            auto out = api.handle(r);
            res.status = out.status;
            res.set_content(out.body.dump(), "application/json");
        };
        server.Get(".*", handler);
        server.Post(".*", handler);
        server.Patch(".*", handler);
        server.Delete(".*", handler);
        server.Options(".*", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });
        server.set_default_headers({{"Access-Control-Allow-Origin", "*"},
                                    {"Access-Control-Allow-Methods", "GET, POST, PATCH, DELETE, OPTIONS"},
                                    {"Access-Control-Allow-Headers", "Content-Type, X-Account"}});
        // Long polls hold a worker for up to Api::kMaxPoll.
        server.set_read_timeout(std::chrono::seconds(5));
        server.set_write_timeout(std::chrono::seconds(5));
    }
};

HttpServer::HttpServer(Api& api) : impl_(std::make_unique<Impl>(api)) {}

HttpServer::~HttpServer() { stop(); }

int HttpServer::start(const std::string& host, int port) {
    int bound = port;
    if (port == 0) {
        bound = impl_->server.bind_to_any_port(host);
    } else if (!impl_->server.bind_to_port(host, port)) {
        bound = -1;
    }
    if (bound < 0) throw std::runtime_error("cannot bind " + host + ":" + std::to_string(port));
    impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
    impl_->server.wait_until_ready();
    return bound;
}

void HttpServer::run(const std::string& host, int port) {
    if (!impl_->server.listen(host, port)) throw std::runtime_error("cannot listen on " + host + ":" + std::to_string(port));
}

void HttpServer::stop() {
    if (!impl_) return;
    impl_->server.stop();
    if (impl_->thread.joinable()) impl_->thread.join();
}

}  // namespace chainflow
