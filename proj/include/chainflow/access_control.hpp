#pragma once

#include <map>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "chainflow/flow_node.hpp"
#include "chainflow/invoker.hpp"
#include "chainflow/ledger.hpp"

namespace chainflow {

struct RoleRequirement {
    Address flow;
    ElementIndex eInd = 0;
    std::string role;
};

/// Per-model role table: declared roles, task requirements and per-case
/// actor bindings. At most one actor holds a role in a given case.
class AccessControl final : public Instance {
public:
    static constexpr std::string_view kKind = "access-control";
    static InstanceKind kindDescriptor();
    static Bytes initArgs(const std::vector<std::string>& roles, const std::vector<RoleRequirement>& requirements);

    explicit AccessControl(AccountId admin) : admin_(std::move(admin)) {}

    std::string_view kind() const override { return kKind; }
    std::unique_ptr<Instance> clone() const override { return std::make_unique<AccessControl>(*this); }
    Bytes invoke(CallContext& ctx, std::string_view op, Reader& args) override;
    void save(Writer& out) const override;
    static std::unique_ptr<Instance> load(Reader& in);

private:
    bool canPerform(CallContext& ctx, const Address& caseNode, ElementIndex eInd, const AccountId& actor);

    AccountId admin_;
    std::set<std::string, std::less<>> roles_;
    std::map<std::pair<Address, ElementIndex>, std::string> requirements_;
    std::map<std::pair<Address, std::string>, AccountId> bindings_;
};

class AccessControlRef {
public:
    AccessControlRef(Invoker& inv, Address addr) : inv_(inv), addr_(addr) {}

    void bind(const Address& rootCase, const std::string& role, const AccountId& actor);
    void release(const Address& rootCase, const std::string& role);
    bool canPerform(const Address& caseNode, ElementIndex eInd, const AccountId& actor);
    /// Empty when the task is unrestricted.
    std::string requiredRole(const Address& flow, ElementIndex eInd);
    /// Empty when unbound.
    AccountId holder(const Address& rootCase, const std::string& role);
    void setRequirement(const Address& flow, ElementIndex eInd, const std::string& role);

private:
    Bytes call(std::string_view op, const Bytes& args) { return inv_.invoke(addr_, op, args); }
    Invoker& inv_;
    Address addr_;
};

}  // namespace chainflow
