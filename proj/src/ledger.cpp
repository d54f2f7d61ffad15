#include "chainflow/ledger.hpp"

#include <istream>
#include <iterator>
#include <ostream>

namespace chainflow {

struct Ledger::Frame {
    std::uint64_t seq = 0;
    // Pre-transaction copies; a null entry marks an instance created in this frame.
    std::map<Address, std::unique_ptr<Instance>> backups;
    std::map<Address, std::optional<std::uint64_t>> nonceBackups;
    std::vector<LogEvent> events;
    CostUnits cost = 0;
};

namespace {

constexpr std::uint8_t kMagic[4] = {'C', 'T', 'P', 'L'};

void writeEvent(Writer& w, const LogEvent& e) {
    w.address(e.emitter).str(e.name).bytes(e.payload).u64(e.txSeq).u32(e.indexInTx).u64(e.logIndex);
}

LogEvent readEvent(Reader& r) {
    LogEvent e;
    e.emitter = r.address();
    e.name = r.str();
    e.payload = r.bytes();
    e.txSeq = r.u64();
    e.indexInTx = r.u32();
    e.logIndex = r.u64();
    return e;
}

}  // namespace

Bytes CallContext::call(const Address& to, std::string_view op, const Bytes& args) {
    auto& frame = *static_cast<Ledger::Frame*>(frame_);
    return ledger_.dispatch(frame, self_, origin_, depth_ + 1, to, op, args);
}

Address CallContext::deploy(std::string_view kind, const Bytes& initArgs) {
    auto& frame = *static_cast<Ledger::Frame*>(frame_);
    return ledger_.deployFrom(frame, self_, origin_, depth_ + 1, kind, initArgs);
}

void CallContext::emit(std::string_view name, Bytes payload) {
    auto& frame = *static_cast<Ledger::Frame*>(frame_);
    frame.cost += ledger_.costs_.eventEmit;
    LogEvent e;
    e.emitter = self_;
    e.name = std::string(name);
    e.payload = std::move(payload);
    e.txSeq = frame.seq;
    e.indexInTx = static_cast<std::uint32_t>(frame.events.size());
    frame.events.push_back(std::move(e));
}

void CallContext::sload(unsigned slots) {
    static_cast<Ledger::Frame*>(frame_)->cost += ledger_.costs_.storageRead * slots;
}

void CallContext::sstore(unsigned slots) {
    static_cast<Ledger::Frame*>(frame_)->cost += ledger_.costs_.storageWrite * slots;
}

void CallContext::requireSender(std::initializer_list<Address> allowed) const {
    for (const auto& a : allowed)
        if (!a.isZero() && a == sender_) return;
    revert("REJECTED");
}

Ledger::Ledger(CostModel costs, std::uint64_t salt) : costs_(costs), salt_(salt) {}

void Ledger::registerKind(std::string name, InstanceKind kind) {
    std::lock_guard lock(execMutex_);
    kinds_[std::move(name)] = std::move(kind);
}

bool Ledger::hasKind(std::string_view name) const {
    std::lock_guard lock(execMutex_);
    return kinds_.find(name) != kinds_.end();
}

Address Ledger::accountAddress(std::string_view account) {
    std::string key = "account:";
    key.append(account);
    return Address::fromHash(sha256(key));
}

Receipt Ledger::deploy(const AccountId& account, std::string_view kind, const Bytes& initArgs) {
    return execute(account, Address{}, kind, initArgs, true, true);
}

Receipt Ledger::call(const AccountId& account, const Address& to, std::string_view op, const Bytes& args) {
    return execute(account, to, op, args, true, false);
}

Receipt Ledger::view(const AccountId& account, const Address& to, std::string_view op, const Bytes& args) {
    return execute(account, to, op, args, false, false);
}

Receipt Ledger::execute(const AccountId& account, const Address& to, std::string_view op, const Bytes& args,
                        bool record, bool isDeploy) {
    std::lock_guard lock(execMutex_);
    Frame frame;
    frame.seq = txs_.size();
    Receipt receipt;
    receipt.seq = frame.seq;
    auto sender = accountAddress(account);
    try {
        if (isDeploy)
            receipt.created = deployFrom(frame, sender, account, 0, op, args);
        else
            receipt.result = dispatch(frame, sender, account, 0, to, op, args);
        receipt.ok = true;
    } catch (const Revert& r) {
        receipt.reason = r.reason();
    } catch (const DecodeError&) {
        receipt.reason = "BAD_ARGS";
    }
    receipt.cost = frame.cost;
    if (!receipt.ok || !record) rollback(frame);
    if (!record) return receipt;

    Transaction tx;
    tx.seq = frame.seq;
    tx.from = account;
    tx.to = isDeploy ? receipt.created : to;
    tx.isDeploy = isDeploy;
    tx.operation = std::string(op);
    tx.args = args;
    tx.cost = frame.cost;
    tx.status = receipt.ok ? TxStatus::Success : TxStatus::Reverted;
    tx.revertReason = receipt.reason;
    if (receipt.ok) {
        std::unique_lock logLock(logMutex_);
        for (auto& e : frame.events) {
            e.logIndex = log_.size();
            log_.push_back(e);
        }
        tx.events = std::move(frame.events);
    }
    txs_.push_back(std::move(tx));
    logCv_.notify_all();
    return receipt;
}

Bytes Ledger::dispatch(Frame& frame, const Address& sender, const AccountId& origin, unsigned depth,
                       const Address& to, std::string_view op, const Bytes& args) {
    if (depth > kMaxDepth) throw Revert("DEPTH");
    frame.cost += costs_.callBase;
    auto it = instances_.find(to);
    if (it == instances_.end()) throw Revert("NO_INSTANCE");
    touch(frame, to);
    CallContext ctx(*this, &frame, to, sender, origin, depth);
    Reader reader(args);
    return it->second->invoke(ctx, op, reader);
}

Address Ledger::deployFrom(Frame& frame, const Address& deployer, const AccountId& origin, unsigned depth,
                           std::string_view kind, const Bytes& initArgs) {
    if (depth > kMaxDepth) throw Revert("DEPTH");
    frame.cost += costs_.deployBase + costs_.deployPerByte * initArgs.size();
    auto k = kinds_.find(kind);
    if (k == kinds_.end()) throw Revert("UNKNOWN_KIND");

    if (!frame.nonceBackups.count(deployer)) {
        auto n = nonces_.find(deployer);
        frame.nonceBackups[deployer] = n == nonces_.end() ? std::nullopt : std::optional(n->second);
    }
    auto& nonce = nonces_[deployer];
    Address addr;
    do {
        Writer w;
        w.u64(salt_).address(deployer).u64(nonce++);
        addr = Address::fromHash(sha256(w.data()));
    } while (addr.isZero() || instances_.count(addr));

    CallContext ctx(*this, &frame, addr, deployer, origin, depth);
    Reader reader(initArgs);
    auto inst = k->second.construct(ctx, reader);
    frame.backups.emplace(addr, nullptr);
    instances_.emplace(addr, std::move(inst));
    return addr;
}

void Ledger::touch(Frame& frame, const Address& a) {
    if (frame.backups.count(a)) return;
    frame.backups.emplace(a, instances_.at(a)->clone());
}

void Ledger::rollback(Frame& frame) {
    for (auto& [addr, backup] : frame.backups) {
        if (backup)
            instances_[addr] = std::move(backup);
        else
            instances_.erase(addr);
    }
    for (auto& [deployer, old] : frame.nonceBackups) {
        if (old)
            nonces_[deployer] = *old;
        else
            nonces_.erase(deployer);
    }
    frame.backups.clear();
    frame.nonceBackups.clear();
    frame.events.clear();
}

std::vector<LogEvent> Ledger::readLog(std::uint64_t sinceIndex) const {
    std::shared_lock lock(logMutex_);
    if (sinceIndex >= log_.size()) return {};
    return {log_.begin() + static_cast<std::ptrdiff_t>(sinceIndex), log_.end()};
}

std::uint64_t Ledger::logSize() const {
    std::shared_lock lock(logMutex_);
    return log_.size();
}

bool Ledger::waitForLog(std::uint64_t sinceIndex, std::chrono::milliseconds timeout) const {
    std::shared_lock lock(logMutex_);
    return logCv_.wait_for(lock, timeout, [&] { return log_.size() > sinceIndex; });
}

std::vector<Transaction> Ledger::transactions() const {
    std::lock_guard lock(execMutex_);
    return txs_;
}

std::size_t Ledger::transactionCount() const {
    std::lock_guard lock(execMutex_);
    return txs_.size();
}

bool Ledger::exists(const Address& a) const {
    std::lock_guard lock(execMutex_);
    return instances_.count(a) > 0;
}

std::optional<std::string> Ledger::kindOf(const Address& a) const {
    std::lock_guard lock(execMutex_);
    auto it = instances_.find(a);
    if (it == instances_.end()) return std::nullopt;
    return std::string(it->second->kind());
}

std::vector<Address> Ledger::instancesOfKind(std::string_view kind) const {
    std::lock_guard lock(execMutex_);
    std::vector<Address> out;
    for (const auto& [addr, inst] : instances_)
        if (inst->kind() == kind) out.push_back(addr);
    return out;
}

void Ledger::saveSnapshot(std::ostream& out) const {
    std::lock_guard lock(execMutex_);
    std::shared_lock logLock(logMutex_);
    Writer w;
    w.raw(kMagic).u16(kSnapshotVersion);
    w.u64(costs_.deployBase).u64(costs_.deployPerByte).u64(costs_.storageWrite);
    w.u64(costs_.storageRead).u64(costs_.callBase).u64(costs_.eventEmit);
    w.u64(salt_);
    w.u32(static_cast<std::uint32_t>(nonces_.size()));
    for (const auto& [a, n] : nonces_) w.address(a).u64(n);
    w.u32(static_cast<std::uint32_t>(instances_.size()));
    for (const auto& [a, inst] : instances_) {
        Writer state;
        inst->save(state);
        w.address(a).str(inst->kind()).bytes(state.data());
    }
    w.u32(static_cast<std::uint32_t>(txs_.size()));
    for (const auto& tx : txs_) {
        w.u64(tx.seq).str(tx.from).address(tx.to).boolean(tx.isDeploy).str(tx.operation).bytes(tx.args);
        w.u64(tx.cost).u8(static_cast<std::uint8_t>(tx.status)).str(tx.revertReason);
        w.u32(static_cast<std::uint32_t>(tx.events.size()));
        for (const auto& e : tx.events) writeEvent(w, e);
    }
    const auto& bytes = w.data();
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

void Ledger::loadSnapshot(std::istream& in) {
    Bytes bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    Reader r(bytes);
    for (auto m : kMagic)
        if (r.u8() != m) throw DecodeError("not a ledger snapshot");
    if (auto v = r.u16(); v != kSnapshotVersion) throw DecodeError("unsupported snapshot version " + std::to_string(v));

    CostModel costs;
    costs.deployBase = r.u64();
    costs.deployPerByte = r.u64();
    costs.storageWrite = r.u64();
    costs.storageRead = r.u64();
    costs.callBase = r.u64();
    costs.eventEmit = r.u64();
    auto salt = r.u64();

    std::map<Address, std::uint64_t> nonces;
    for (auto n = r.u32(); n > 0; --n) {
        auto a = r.address();
        nonces[a] = r.u64();
    }

    std::lock_guard lock(execMutex_);
    std::map<Address, std::unique_ptr<Instance>> instances;
    for (auto n = r.u32(); n > 0; --n) {
        auto a = r.address();
        auto kind = r.str();
        auto state = r.bytes();
        auto k = kinds_.find(kind);
        if (k == kinds_.end()) throw DecodeError("snapshot references unregistered kind " + kind);
        Reader sr(state);
        instances[a] = k->second.load(sr);
        sr.expectEnd();
    }

    std::vector<Transaction> txs;
    std::vector<LogEvent> log;
    for (auto n = r.u32(); n > 0; --n) {
        Transaction tx;
        tx.seq = r.u64();
        tx.from = r.str();
        tx.to = r.address();
        tx.isDeploy = r.boolean();
        tx.operation = r.str();
        tx.args = r.bytes();
        tx.cost = r.u64();
        tx.status = static_cast<TxStatus>(r.u8());
        tx.revertReason = r.str();
        for (auto m = r.u32(); m > 0; --m) {
            tx.events.push_back(readEvent(r));
            log.push_back(tx.events.back());
        }
        txs.push_back(std::move(tx));
    }
    r.expectEnd();

    std::unique_lock logLock(logMutex_);
    costs_ = costs;
    salt_ = salt;
    nonces_ = std::move(nonces);
    instances_ = std::move(instances);
    txs_ = std::move(txs);
    log_ = std::move(log);
}

}  // namespace chainflow
