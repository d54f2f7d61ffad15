#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "chainflow/data_node.hpp"
#include "chainflow/flow_node.hpp"
#include "chainflow/ledger.hpp"
#include "chainflow/type_info.hpp"

namespace chainflow::bpmn {

/// `code` is one of UNSUPPORTED, TOO_LARGE, ANNOTATION, SCOPE, MALFORMED.
class ParseError : public std::runtime_error {
public:
    ParseError(std::string code, std::string elementId, const std::string& detail)
        : std::runtime_error(code + (elementId.empty() ? "" : " [" + elementId + "]") + ": " + detail),
          code_(std::move(code)),
          elementId_(std::move(elementId)) {}
    const std::string& code() const { return code_; }
    const std::string& elementId() const { return elementId_; }

private:
    std::string code_;
    std::string elementId_;
};

struct ParsedElement {
    std::string id;
    std::string name;
    std::string tag;  // BPMN tag without namespace prefix
    ElementIndex eInd = 0;
    ElementKind kind;
    TypeInfo typeInfo;
    EdgeSet preC;
    EdgeSet postC;
    std::string eventCode;  // empty for code-less events
    Hash32 evtCode{};
    ElementIndex attachedTo = kNoElement;
    std::uint32_t countInst = 1;
    int childProcess = -1;  // index into ParsedModel::processes
    std::string role;
};

struct ParsedEdge {
    std::string id;
    unsigned index = 0;
    std::string source;
    std::string target;
    std::string guard;
};

struct ParsedProcess {
    std::string id;    // element id of the process / sub-process
    std::string name;
    std::vector<script::VarDecl> variables;
    std::vector<ParsedElement> elements;  // ascending eInd
    std::vector<ParsedEdge> edges;        // ascending index
    std::map<std::string, ElementIndex> elementIndex;
    std::map<std::string, unsigned> edgeIndex;
    DataTemplateSource tmpl;

    const ParsedElement* element(const std::string& id) const;
    const ParsedElement* element(ElementIndex e) const;
};

struct ParsedModel {
    std::string modelHash;  // hex sha256 of the canonical XML
    std::string canonicalXml;
    std::vector<ParsedProcess> processes;  // [0] is the root
    std::vector<std::string> roles;

    const ParsedProcess& root() const { return processes.front(); }
    const ParsedProcess* process(const std::string& id) const;
    /// element id / edge id -> index, per process id.
    nlohmann::json indexMaps() const;
};

/// Parses and numbers a model: elements from 1 and edges from 1 in document
/// order per process; index 0 is the process itself (element) and the
/// instantiation token (edge).
ParsedModel parse(std::string_view xml);
std::string canonicalize(std::string_view xml);

nlohmann::json templateToJson(const DataTemplateSource& src);
DataTemplateSource templateFromJson(const nlohmann::json& j);

/// Ordered ledger operations with symbolic references ("flow:<id>",
/// "factory:<id>", "access-control", "interpreter").
struct RegistrationPlan {
    static constexpr int kVersion = 1;
    std::string modelHash;
    std::string rootRef;
    nlohmann::json steps = nlohmann::json::array();

    nlohmann::json toJson() const;
    static RegistrationPlan fromJson(const nlohmann::json& j);
    std::size_t count(std::string_view op) const;
};

RegistrationPlan emitRegistrationPlan(const ParsedModel& model);

struct StepReceipt {
    std::string op;
    std::string ref;
    CostUnits cost = 0;
    bool skipped = false;
};

struct Deployment {
    std::string modelHash;
    std::map<std::string, Address> refs;
    Address rootFlow;
    Address accessControl;
    std::vector<StepReceipt> receipts;

    CostUnits cost(std::string_view op) const;
    nlohmann::json toJson() const;
    static Deployment fromJson(const nlohmann::json& j);
};

/// Runs a plan as `admin`, one transaction per step. Deploy steps whose
/// reference is already bound in `existing` are skipped, so replaying a plan
/// over its own deployment only re-applies idempotent updates.
/// Throws Revert with the failing step's reason.
Deployment executePlan(Ledger& ledger, const AccountId& admin, const Address& interpreter, const RegistrationPlan& plan,
                       const std::map<std::string, Address>& existing = {});

/// Content-addressed store of models keyed by modelHash. Keeps the XML,
/// index maps and plan; with an empty root directory it stays in memory.
class ProcessRepository {
public:
    struct Entry {
        std::string modelHash;
        std::string name;
        std::string xml;
        nlohmann::json indexMaps;
        RegistrationPlan plan;
        std::optional<Deployment> deployment;
    };

    explicit ProcessRepository(std::filesystem::path root = {});

    /// Parses and stores; returns the existing entry for a known hash.
    const Entry& add(std::string_view xml);
    void setDeployment(const std::string& modelHash, const Deployment& d);
    const Entry* find(const std::string& modelHash) const;
    std::vector<std::string> hashes() const;

private:
    void persist(const Entry& e) const;
    void loadAll();

    std::filesystem::path root_;
    std::map<std::string, Entry> entries_;
};

}  // namespace chainflow::bpmn
