#pragma once

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "chainflow/codec.hpp"

namespace chainflow {

using AccountId = std::string;
using CostUnits = std::uint64_t;

/// Local stand-in for EVM gas. Defaults follow EVM-like proportions; the
/// absolute values carry no meaning outside this ledger.
struct CostModel {
    CostUnits deployBase = 32000;
    CostUnits deployPerByte = 200;
    CostUnits storageWrite = 20000;
    CostUnits storageRead = 200;
    CostUnits callBase = 700;
    CostUnits eventEmit = 375;

    friend bool operator==(const CostModel&, const CostModel&) = default;
};

/// Raised by instance code to abort the enclosing transaction.
class Revert : public std::runtime_error {
public:
    explicit Revert(std::string reason) : std::runtime_error(reason), reason_(std::move(reason)) {}
    const std::string& reason() const { return reason_; }

private:
    std::string reason_;
};

struct LogEvent {
    Address emitter;
    std::string name;
    Bytes payload;
    std::uint64_t txSeq = 0;
    std::uint32_t indexInTx = 0;
    /// Position in the global log; readLog() filters on it.
    std::uint64_t logIndex = 0;
};

enum class TxStatus : std::uint8_t { Success = 0, Reverted = 1 };

struct Transaction {
    std::uint64_t seq = 0;
    AccountId from;
    Address to;  // the created address for deploys
    bool isDeploy = false;
    std::string operation;  // operation name, or instance kind for deploys
    Bytes args;
    CostUnits cost = 0;
    TxStatus status = TxStatus::Success;
    std::string revertReason;
    std::vector<LogEvent> events;
};

struct Receipt {
    std::uint64_t seq = 0;
    bool ok = false;
    std::string reason;
    CostUnits cost = 0;
    Bytes result;
    Address created;
};

class Ledger;
class Instance;

/// Execution context handed to instance code for one (possibly nested) call.
class CallContext {
public:
    const Address& self() const { return self_; }
    const Address& sender() const { return sender_; }
    const AccountId& origin() const { return origin_; }
    unsigned depth() const { return depth_; }

    Bytes call(const Address& to, std::string_view op, const Bytes& args);
    Address deploy(std::string_view kind, const Bytes& initArgs);
    void emit(std::string_view name, Bytes payload);
    void sload(unsigned slots = 1);
    void sstore(unsigned slots = 1);
    [[noreturn]] void revert(std::string reason) const { throw Revert(std::move(reason)); }
    /// Reverts "REJECTED" unless the sender is one of the given addresses.
    void requireSender(std::initializer_list<Address> allowed) const;

private:
    friend class Ledger;
    CallContext(Ledger& ledger, void* frame, Address self, Address sender, AccountId origin, unsigned depth)
        : ledger_(ledger), frame_(frame), self_(self), sender_(sender), origin_(std::move(origin)), depth_(depth) {}

    Ledger& ledger_;
    void* frame_;
    Address self_;
    Address sender_;
    AccountId origin_;
    unsigned depth_;
};

/// Contract-like object hosted by the ledger.
class Instance {
public:
    virtual ~Instance() = default;
    virtual std::string_view kind() const = 0;
    virtual std::unique_ptr<Instance> clone() const = 0;
    /// Runs one operation. Throws Revert to abort.
    virtual Bytes invoke(CallContext& ctx, std::string_view op, Reader& args) = 0;
    virtual void save(Writer& out) const = 0;
};

struct InstanceKind {
    std::function<std::unique_ptr<Instance>(CallContext& ctx, Reader& initArgs)> construct;
    std::function<std::unique_ptr<Instance>(Reader& state)> load;
};

/// Deterministic in-process ledger. Applies transactions in one total order;
/// every transaction commits or rolls back as a whole.
class Ledger {
public:
    static constexpr std::uint16_t kSnapshotVersion = 1;
    static constexpr unsigned kMaxDepth = 1024;

    explicit Ledger(CostModel costs = {}, std::uint64_t salt = 0);
    Ledger(const Ledger&) = delete;
    Ledger& operator=(const Ledger&) = delete;

    void registerKind(std::string name, InstanceKind kind);
    bool hasKind(std::string_view name) const;

    static Address accountAddress(std::string_view account);

    Receipt deploy(const AccountId& account, std::string_view kind, const Bytes& initArgs);
    Receipt call(const AccountId& account, const Address& to, std::string_view op, const Bytes& args);
    /// Executes without recording a transaction; all effects are discarded.
    Receipt view(const AccountId& account, const Address& to, std::string_view op, const Bytes& args);

    std::vector<LogEvent> readLog(std::uint64_t sinceIndex) const;
    std::uint64_t logSize() const;
    /// Blocks until the log grows past sinceIndex or the timeout elapses.
    bool waitForLog(std::uint64_t sinceIndex, std::chrono::milliseconds timeout) const;

    std::vector<Transaction> transactions() const;
    std::size_t transactionCount() const;
    const CostModel& costModel() const { return costs_; }
    std::uint64_t salt() const { return salt_; }

    bool exists(const Address& a) const;
    std::optional<std::string> kindOf(const Address& a) const;
    std::vector<Address> instancesOfKind(std::string_view kind) const;

    void saveSnapshot(std::ostream& out) const;
    /// Replaces all state. Kinds must already be registered.
    void loadSnapshot(std::istream& in);

private:
    friend class CallContext;
    struct Frame;

    Receipt execute(const AccountId& account, const Address& to, std::string_view op, const Bytes& args,
                    bool record, bool isDeploy);
    Bytes dispatch(Frame& frame, const Address& sender, const AccountId& origin, unsigned depth,
                   const Address& to, std::string_view op, const Bytes& args);
    Address deployFrom(Frame& frame, const Address& deployer, const AccountId& origin, unsigned depth,
                       std::string_view kind, const Bytes& initArgs);
    void touch(Frame& frame, const Address& a);
    void rollback(Frame& frame);

    CostModel costs_;
    std::uint64_t salt_;
    std::map<std::string, InstanceKind, std::less<>> kinds_;

    mutable std::mutex execMutex_;
    std::map<Address, std::unique_ptr<Instance>> instances_;
    std::map<Address, std::uint64_t> nonces_;
    std::vector<Transaction> txs_;

    mutable std::shared_mutex logMutex_;
    mutable std::condition_variable_any logCv_;
    std::vector<LogEvent> log_;
};

}  // namespace chainflow
