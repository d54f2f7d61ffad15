#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "chainflow/bits.hpp"
#include "chainflow/flow_node.hpp"
#include "chainflow/invoker.hpp"
#include "chainflow/ledger.hpp"
#include "chainflow/script.hpp"

namespace chainflow {

/// Token distribution on edges plus element indexes with live child cases.
struct ProcessState {
    EdgeSet tokens;
    Bits256 running;

    bool isCompleted() const { return tokens.none() && running.none(); }
    friend bool operator==(const ProcessState&, const ProcessState&) = default;
};

struct GatewayGuard {
    unsigned edge = 0;
    script::Expression guard;
};

/// Outgoing-edge selection for an exclusive or inclusive split.
struct GatewayProgram {
    bool inclusive = false;
    std::vector<GatewayGuard> guards;  // ascending edge index
    std::optional<unsigned> defaultEdge;
};

struct CheckInEntry {
    std::vector<script::VarDecl> imports;
    script::Program operations;
};

/// Source form of a data node kind: variable declarations plus the scripts,
/// gateway guards and check-in/check-out tables of one (sub-)process.
struct DataTemplateSource {
    struct Gateway {
        bool inclusive = false;
        std::vector<std::pair<unsigned, std::string>> guards;
        std::optional<unsigned> defaultEdge;
    };
    struct CheckIn {
        std::vector<script::VarDecl> imports;
        std::string operations;
    };

    std::string name;
    std::vector<script::VarDecl> variables;
    std::map<ElementIndex, std::string> scripts;
    std::map<ElementIndex, Gateway> gateways;
    std::map<ElementIndex, CheckIn> checkIns;
    std::map<ElementIndex, std::vector<script::VarDecl>> checkOuts;

    Bytes encode() const;
    static DataTemplateSource decode(Reader& r);
};

/// Compiled, immutable template shared by every node of one kind.
class DataTemplate {
public:
    /// Throws script::CompileError (with the element index prefixed) on bad scripts.
    static std::shared_ptr<const DataTemplate> compile(const DataTemplateSource& src);

    const DataTemplateSource& source() const { return source_; }
    const script::Scope& scope() const { return scope_; }
    const script::Program* script(ElementIndex e) const;
    const GatewayProgram* gateway(ElementIndex e) const;
    const CheckInEntry* checkIn(ElementIndex e) const;
    const std::vector<script::VarDecl>* checkOut(ElementIndex e) const;

private:
    DataTemplateSource source_;
    script::Scope scope_;
    std::map<ElementIndex, script::Program> scripts_;
    std::map<ElementIndex, GatewayProgram> gateways_;
    std::map<ElementIndex, CheckInEntry> checkIns_;
};

using Payload = std::vector<script::Value>;

void writePayload(Writer& w, const Payload& p);
Payload readPayload(Reader& r);
void writeState(Writer& w, const ProcessState& s);
ProcessState readState(Reader& r);

/// Snapshot of a data node, for off-chain inspection.
struct DataNodeInfo {
    Address flow;
    Address parent;
    ElementIndex indexInParent = kNoElement;
    Address root;
    Address interpreter;
    Address factory;
    Address accessControl;
    ProcessState state;
    std::map<ElementIndex, std::vector<Address>> children;
    std::map<ElementIndex, std::uint32_t> instCount;
    std::vector<std::pair<std::string, script::Value>> variables;
    std::string templateName;
};

/// Per-case node: variables, process state, hierarchy links and the
/// interpreted scripts of its process kind.
class DataNode final : public Instance {
public:
    static constexpr std::string_view kKind = "data-node";
    static InstanceKind kindDescriptor();

    DataNode(Address interpreter, Address factory, Address accessControl, Bytes templateBytes,
             std::shared_ptr<const DataTemplate> tmpl);

    std::string_view kind() const override { return kKind; }
    std::unique_ptr<Instance> clone() const override { return std::make_unique<DataNode>(*this); }
    Bytes invoke(CallContext& ctx, std::string_view op, Reader& args) override;
    void save(Writer& out) const override;
    static std::unique_ptr<Instance> load(Reader& in);

    static Bytes initArgs(const Address& interpreter, const Address& accessControl, const Bytes& templateBytes);

private:
    class VarEnv;

    EdgeSet execScript(CallContext& ctx, ElementIndex e);
    void checkIn(CallContext& ctx, ElementIndex e, const Payload& payload);
    Payload checkOut(CallContext& ctx, ElementIndex e);
    void requireAuthorized(CallContext& ctx, ElementIndex e);
    void requireMutator(const CallContext& ctx) const { ctx.requireSender({interpreter_, factory_}); }

    Address interpreter_;
    Address factory_;
    Address accessControl_;
    Bytes templateBytes_;
    std::shared_ptr<const DataTemplate> tmpl_;

    Address flow_;
    Address parent_;
    ElementIndex indexInParent_ = kNoElement;
    Address root_;
    ProcessState state_;
    std::map<ElementIndex, std::vector<Address>> children_;
    std::map<ElementIndex, std::uint32_t> instCount_;
    std::map<std::string, script::Value, std::less<>> vars_;
    bool closed_ = false;  // completion already reported to the parent
};

/// Deploys fresh data nodes of one kind.
class Factory final : public Instance {
public:
    static constexpr std::string_view kKind = "factory";
    static InstanceKind kindDescriptor();
    static Bytes initArgs(const Address& interpreter, const Address& accessControl, const DataTemplateSource& src);

    Factory(Address interpreter, Address accessControl, Bytes templateBytes)
        : interpreter_(interpreter), accessControl_(accessControl), templateBytes_(std::move(templateBytes)) {}

    std::string_view kind() const override { return kKind; }
    std::unique_ptr<Instance> clone() const override { return std::make_unique<Factory>(*this); }
    Bytes invoke(CallContext& ctx, std::string_view op, Reader& args) override;
    void save(Writer& out) const override;
    static std::unique_ptr<Instance> load(Reader& in);

private:
    Address interpreter_;
    Address accessControl_;
    Bytes templateBytes_;
};

class DataNodeRef {
public:
    DataNodeRef(Invoker& inv, Address addr) : inv_(inv), addr_(addr) {}
    const Address& address() const { return addr_; }

    Address getFlowNode();
    Address getParent();
    Address getRoot();
    ElementIndex getIndexInParent();
    ProcessState getSubProcessState();
    std::vector<Address> getChildren(ElementIndex e);
    std::uint32_t getCountInst(ElementIndex e);
    Address getAccessControl();
    DataNodeInfo info();

    void setParent(const Address& parent, const Address& flow, ElementIndex indexInParent);
    void updateProcessState(const ProcessState& s);
    void addChild(ElementIndex e, const Address& child);
    void decreaseInstCount(ElementIndex e);
    void setCountInst(ElementIndex e, std::uint32_t n);
    EdgeSet execScript(ElementIndex e);
    void checkIn(ElementIndex e, const Payload& payload);
    Payload checkOut(ElementIndex e);
    /// Marks completion as reported; false when it already was.
    bool close();

private:
    Bytes call(std::string_view op, const Bytes& args) { return inv_.invoke(addr_, op, args); }
    Invoker& inv_;
    Address addr_;
};

class FactoryRef {
public:
    FactoryRef(Invoker& inv, Address addr) : inv_(inv), addr_(addr) {}
    Address newInstance();
    DataTemplateSource templateSource();

private:
    Invoker& inv_;
    Address addr_;
};

}  // namespace chainflow
