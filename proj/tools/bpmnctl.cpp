#include <CLI11.hpp>

#include <csignal>
#include <fstream>
#include <iostream>
#include <sstream>

#include "chainflow/gateway.hpp"
#include "chainflow/replayer.hpp"

using namespace chainflow;

namespace {

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void loadIfPresent(Ledger& ledger, const std::string& path) {
    if (path.empty() || !std::filesystem::exists(path)) return;
    std::ifstream in(path, std::ios::binary);
    ledger.loadSnapshot(in);
}

HttpServer* g_server = nullptr;

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"bpmnctl: run, serve and replay interpreted BPMN models on a local ledger"};
    app.require_subcommand(1);

    std::string model, traces, out, ledgerPath, repoDir, host = "127.0.0.1";
    std::uint64_t seed = 0;
    int port = 8080;

    auto* rep = app.add_subcommand("replay", "register a model and replay JSONL traces, writing a cost report");
    rep->add_option("--model", model, "BPMN XML file")->required()->check(CLI::ExistingFile);
    rep->add_option("--traces", traces, "JSONL trace file")->required()->check(CLI::ExistingFile);
    rep->add_option("--out", out, "cost report JSON output")->required();
    rep->add_option("--ledger", ledgerPath, "ledger snapshot to start from and update");
    rep->add_option("--seed", seed, "address salt of a fresh ledger");

    auto* srv = app.add_subcommand("serve", "serve the REST API");
    srv->add_option("--port", port, "TCP port")->default_val(8080);
    srv->add_option("--host", host, "bind address")->default_val("127.0.0.1");
    srv->add_option("--ledger", ledgerPath, "ledger snapshot, saved after every transaction");
    srv->add_option("--repo", repoDir, "model repository directory (default: <ledger>.models)");

    CLI11_PARSE(app, argc, argv);

    try {
        Ledger ledger(CostModel{}, seed);
        registerEngineKinds(ledger);
        loadIfPresent(ledger, ledgerPath);

        if (*rep) {
            Runtime rt(ledger);
            Api api(rt);
            std::ifstream tin(traces);
            auto report = replay(api, rt, slurp(model), readTraces(tin));
            std::ofstream(out) << report.toJson().dump(2) << "\n";
            std::cout << report.toText();
            if (!ledgerPath.empty()) {
                std::ofstream snap(ledgerPath, std::ios::binary);
                ledger.saveSnapshot(snap);
            }
            return 0;
        }

        if (repoDir.empty() && !ledgerPath.empty()) repoDir = ledgerPath + ".models";
        Runtime rt(ledger, "admin", repoDir);
        Api api(rt, ledgerPath.empty() ? std::nullopt : std::optional<std::filesystem::path>(ledgerPath));
        HttpServer server(api);
        g_server = &server;
        std::signal(SIGINT, [](int) { if (g_server) g_server->stop(); });
        std::signal(SIGTERM, [](int) { if (g_server) g_server->stop(); });
        std::cout << "listening on " << host << ":" << port << std::endl;
        server.run(host, port);
    } catch (const std::exception& e) {
        std::cerr << "bpmnctl: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
