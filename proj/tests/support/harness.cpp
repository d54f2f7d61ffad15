#include "harness.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

namespace harness {

std::string readFile(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string fixture(const std::string& name) { return readFile(std::string(CHAINFLOW_FIXTURES) + "/" + name); }

namespace {

std::string join(const std::set<std::string>& s) {
    std::string out;
    for (const auto& x : s) out += (out.empty() ? "" : ",") + x;
    return "{" + out + "}";
}

}  // namespace

std::string describe(const Snapshot& s, int indent) {
    std::string pad(indent * 2, ' ');
    std::string out = pad + s.process + " tokens" + join(s.tokens) + " running" + join(s.running) + "\n";
    for (const auto& [id, kids] : s.children)
        for (std::size_t i = 0; i < kids.size(); ++i) {
            out += pad + "  [" + id + "#" + std::to_string(i) + "]\n";
            out += describe(kids[i], indent + 2);
        }
    return out;
}

std::string describe(const std::set<oracle::Task>& tasks) {
    std::string out = "{";
    for (const auto& t : tasks) {
        if (out.size() > 1) out += ", ";
        for (const auto& [id, ord] : t.path) out += id + "#" + std::to_string(ord) + "/";
        out += t.element;
    }
    return out + "}";
}

Snapshot fromOracle(const oracle::Case& c) {
    Snapshot s{c.process, c.tokens, c.running, {}};
    for (const auto& [id, kids] : c.children)
        for (const auto& k : kids) s.children[id].push_back(fromOracle(k));
    return s;
}

Deployed::Deployed(const std::string& xml, std::uint64_t salt)
    : ledger_(std::make_unique<Ledger>(CostModel{}, salt)), rt_(std::make_unique<Runtime>(*ledger_)) {
    entry_ = &rt_->addModel(xml);
    for (const auto& [proc, maps] : entry_->indexMaps.items()) {
        auto addr = entry_->deployment->refs.at("flow:" + proc);
        auto& p = ids_[addr];
        p.id = proc;
        for (const auto& [id, e] : maps.at("elements").items()) p.elements[e.get<ElementIndex>()] = id;
        for (const auto& [id, e] : maps.at("edges").items()) p.edges[e.get<unsigned>()] = id;
        p.edges[kInitEdge] = oracle::kInit;
    }
}

Address Deployed::startCase(const AccountId& actor) { return rt_->startCase(rootFlow(), actor); }

Snapshot Deployed::toSnapshot(const NodeView& v) const {
    const auto& p = ids_.at(v.flow);
    Snapshot s;
    s.process = p.id;
    for (auto e : v.state.tokens.indexes()) s.tokens.insert(p.edges.at(e));
    for (auto e : v.state.running.indexes()) s.running.insert(p.elements.at(e));
    for (const auto& c : v.children) s.children[p.elements.at(c.indexInParent)].push_back(toSnapshot(c));
    return s;
}

Snapshot Deployed::snapshot(const Address& root) { return toSnapshot(rt_->inspect(root)); }

void Deployed::collect(const NodeView& v, oracle::Path& path, std::set<oracle::Task>& out) const {
    const auto& p = ids_.at(v.flow);
    for (auto e : v.enabled) out.insert({path, p.elements.at(e)});
    std::map<std::string, std::size_t> ordinal;
    for (const auto& c : v.children) {
        const auto& id = p.elements.at(c.indexInParent);
        path.emplace_back(id, ordinal[id]++);
        collect(c, path, out);
        path.pop_back();
    }
}

std::set<oracle::Task> Deployed::enabled(const Address& root) {
    std::set<oracle::Task> out;
    oracle::Path path;
    collect(rt_->inspect(root), path, out);
    return out;
}

const NodeView* Deployed::locate(const NodeView& root, const oracle::Path& path) const {
    const NodeView* v = &root;
    for (const auto& [id, ord] : path) {
        const auto& p = ids_.at(v->flow);
        std::size_t seen = 0;
        const NodeView* next = nullptr;
        for (const auto& c : v->children)
            if (p.elements.at(c.indexInParent) == id && seen++ == ord) next = &c;
        if (!next) return nullptr;
        v = next;
    }
    return v;
}

void Deployed::fire(const Address& root, const oracle::Task& t, const nlohmann::json& payload, const AccountId& actor) {
    auto view = rt_->inspect(root);
    const NodeView* node = locate(view, t.path);
    if (!node) throw std::logic_error("no case at path");
    const auto& p = ids_.at(node->flow);
    ElementIndex e = kNoElement;
    for (const auto& [idx, id] : p.elements)
        if (id == t.element) e = idx;
    auto tmpl = rt_->templateOf(node->address);
    Payload values;
    if (auto it = tmpl.checkIns.find(e); it != tmpl.checkIns.end()) values = payloadFromJson(payload, it->second.imports);
    rt_->checkIn(node->address, e, values, actor);
}

ElementIndex Deployed::elementIndex(const std::string& process, const std::string& id) const {
    return entry_->indexMaps.at(process).at("elements").at(id).get<ElementIndex>();
}

unsigned Deployed::edgeIndex(const std::string& process, const std::string& id) const {
    return entry_->indexMaps.at(process).at("edges").at(id).get<unsigned>();
}

std::string diff(Deployed& d, const Address& root, const oracle::Simulator& sim) {
    auto engine = d.snapshot(root);
    auto expected = fromOracle(sim.root());
    auto engineTasks = d.enabled(root);
    auto expectedTasks = sim.enabled();
    if (engine == expected && engineTasks == expectedTasks) return {};
    return "engine:\n" + describe(engine) + "enabled " + describe(engineTasks) + "\noracle:\n" + describe(expected) +
           "enabled " + describe(expectedTasks) + "\n";
}

}  // namespace harness
