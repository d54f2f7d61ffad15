#pragma once

#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "chainflow/bpmn_io.hpp"
#include "chainflow/data_node.hpp"
#include "chainflow/flow_node.hpp"
#include "chainflow/interpreter.hpp"
#include "chainflow/ledger.hpp"

namespace chainflow {

/// One node of a case tree as seen from outside the ledger.
struct NodeView {
    Address address;
    Address flow;
    Address parent;
    ElementIndex indexInParent = kNoElement;
    std::string process;  // template name
    ProcessState state;
    std::vector<ElementIndex> enabled;  // external elements holding a token
    std::map<ElementIndex, std::uint32_t> instCount;
    std::vector<std::pair<std::string, script::Value>> variables;
    std::vector<NodeView> children;  // every child ever created, in creation order
};

struct EnabledTask {
    Address node;
    ElementIndex eInd = 0;
    std::string process;
    friend auto operator<=>(const EnabledTask&, const EnabledTask&) = default;
};

std::vector<EnabledTask> enabledTasks(const NodeView& root);
nlohmann::json toJson(const NodeView& v);
nlohmann::json valueToJson(const script::Value& v);
/// Converts a JSON object keyed by parameter name; throws std::invalid_argument.
Payload payloadFromJson(const nlohmann::json& j, const std::vector<script::VarDecl>& signature);
nlohmann::json payloadToJson(const Payload& p, const std::vector<script::VarDecl>& signature);

/// Off-ledger convenience layer shared by the HTTP gateway, the replayer and
/// tests: one interpreter per ledger, a model repository, and typed access
/// to cases. Every mutating method is exactly one ledger transaction, except
/// registerModel, which runs a whole plan.
class Runtime {
public:
    explicit Runtime(Ledger& ledger, AccountId admin = "admin", std::filesystem::path repoDir = {});

    Ledger& ledger() { return ledger_; }
    const AccountId& admin() const { return admin_; }

    /// Deploys the interpreter unless the ledger already holds one.
    Address ensureInterpreter(bool* created = nullptr);
    std::optional<Address> interpreter() const;

    bpmn::ProcessRepository& repository() { return repo_; }
    /// Parses, stores and (when `deploy`) registers a model.
    const bpmn::ProcessRepository::Entry& addModel(std::string_view xml, bool deploy = true);
    const bpmn::Deployment& registerModel(const std::string& modelHash);

    /// Root case creation as `actor`; throws Revert on failure.
    Address startCase(const Address& rootFlow, const AccountId& actor);
    Receipt lastReceipt() const { return last_; }
    void checkIn(const Address& node, ElementIndex eInd, const Payload& payload, const AccountId& actor);
    Payload checkOut(const Address& node, ElementIndex eInd, const AccountId& actor);
    void bindRole(const Address& rootCase, const std::string& role, const AccountId& actor, const AccountId& caller);
    void releaseRole(const Address& rootCase, const std::string& role, const AccountId& caller);

    NodeView inspect(const Address& node);
    /// Template of the node's process, as stored on the ledger.
    DataTemplateSource templateOf(const Address& node);
    /// Root cases of a root flow node, from CaseCreated log events.
    std::vector<Address> cases(const Address& rootFlow) const;

private:
    Ledger& ledger_;
    AccountId admin_;
    bpmn::ProcessRepository repo_;
    Receipt last_;
    std::mutex cacheMutex_;
    std::map<Address, DataTemplateSource> templates_;  // by factory
};

}  // namespace chainflow
