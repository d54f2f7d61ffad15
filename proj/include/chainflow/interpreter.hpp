#pragma once

#include <vector>

#include "chainflow/data_node.hpp"
#include "chainflow/flow_node.hpp"
#include "chainflow/invoker.hpp"
#include "chainflow/ledger.hpp"

namespace chainflow {

/// Dequeue limit of one executeElements run.
inline constexpr unsigned kExecutionBudget = 10000;

// Token-game helpers over a ProcessState.

/// Token presence only. Parallel joins need every incoming edge, everything
/// else needs one; the inclusive-join reachability rule is applied by the
/// interpreter on top of this.
bool isEnabled(const EdgeSet& preC, TypeInfo t, const ProcessState& s);
/// Removes the tokens consumed by firing: all of preC for joins and splits,
/// the single lowest enabling token for other elements and exclusive joins.
void removeTokens(ProcessState& s, const EdgeSet& preC, TypeInfo t);
inline void addTokens(ProcessState& s, const EdgeSet& edges) { s.tokens = s.tokens | edges; }
inline void addSubProcess(ProcessState& s, ElementIndex e) { s.running.set(e); }
inline void removeSubProcess(ProcessState& s, ElementIndex e) { s.running.reset(e); }
inline bool isCompleted(const ProcessState& s) { return s.isCompleted(); }

/// The single BPMN-semantics engine shared by every model and case. Holds no
/// per-case data; everything lives in flow and data nodes.
class Interpreter final : public Instance {
public:
    static constexpr std::string_view kKind = "interpreter";
    static InstanceKind kindDescriptor();

    std::string_view kind() const override { return kKind; }
    std::unique_ptr<Instance> clone() const override { return std::make_unique<Interpreter>(*this); }
    Bytes invoke(CallContext& ctx, std::string_view op, Reader& args) override;
    void save(Writer&) const override {}
};

class InterpreterRef {
public:
    InterpreterRef(Invoker& inv, Address addr) : inv_(inv), addr_(addr) {}
    const Address& address() const { return addr_; }

    /// The one entry point open to external accounts.
    Address createRootInstance(const Address& rootFlow);

    void executeElements(const Address& node, ElementIndex e);
    void createInstance(const Address& node, ElementIndex e);
    void throwEvent(const Address& node, const Hash32& evtCode, TypeInfo t);
    void tryCatchEvent(const Address& node, const Hash32& evtCode, TypeInfo t);
    void killSubProcess(const Address& node);
    void broadcastSignal(const Address& node);

private:
    Invoker& inv_;
    Address addr_;
};

/// Registers every instance kind of the engine on a ledger.
void registerEngineKinds(Ledger& ledger);

}  // namespace chainflow
