#include "chainflow/type_info.hpp"

#include <array>
#include <bit>

namespace chainflow {

namespace {

constexpr std::uint16_t bit(unsigned b) { return static_cast<std::uint16_t>(1u << b); }

constexpr std::uint16_t kSubtypeMask = 0xFC00;  // bits 10..15

std::uint16_t triggerBits(EventTrigger t) {
    switch (t) {
        case EventTrigger::None: return bit(tib::kNone);
        case EventTrigger::Terminate: return bit(tib::kUserOrTerminate);
        case EventTrigger::Error: return bit(tib::kScriptOrError);
        case EventTrigger::Message: return bit(tib::kServiceOrMessage);
        case EventTrigger::Escalation: return bit(tib::kExclusiveOrEscalation);
        case EventTrigger::Signal: return bit(tib::kParallelOrSignal);
    }
    return 0;
}

std::uint16_t positionBits(EventPosition p) {
    switch (p) {
        case EventPosition::Start: return bit(tib::kSequentialOrStart);
        case EventPosition::Intermediate: return bit(tib::kSubProcessOrIntermediate);
        case EventPosition::End: return bit(tib::kCallActivityOrEnd);
        case EventPosition::Boundary: return bit(tib::kBoundary);
        case EventPosition::EventSubProcessStart: return bit(tib::kEventSubProcess);
    }
    return 0;
}

}  // namespace

TypeInfo TypeInfo::encode(const ElementKind& k) {
    std::uint16_t b = 0;
    switch (k.category) {
        case Category::Activity:
            b |= bit(tib::kActivity);
            switch (k.activity) {
                case ActivityKind::NoneTask: b |= bit(tib::kTaskJoinThrow) | bit(tib::kNone); break;
                case ActivityKind::UserTask: b |= bit(tib::kTaskJoinThrow) | bit(tib::kUserOrTerminate); break;
                case ActivityKind::ScriptTask: b |= bit(tib::kTaskJoinThrow) | bit(tib::kScriptOrError); break;
                case ActivityKind::ServiceTask: b |= bit(tib::kTaskJoinThrow) | bit(tib::kServiceOrMessage); break;
                case ActivityKind::SubProcess: b |= bit(tib::kSubProcessOrIntermediate); break;
                case ActivityKind::CallActivity: b |= bit(tib::kCallActivityOrEnd); break;
                case ActivityKind::EventSubProcess:
                    b |= bit(tib::kSubProcessOrIntermediate) | bit(tib::kEventSubProcess);
                    break;
            }
            if (k.multi != MultiInstance::None) b |= bit(tib::kMultiOrInterrupting);
            if (k.multi == MultiInstance::Sequential) b |= bit(tib::kSequentialOrStart);
            break;
        case Category::Gateway:
            b |= bit(tib::kGateway);
            if (k.join) b |= bit(tib::kTaskJoinThrow);
            if (k.gateway != GatewayKind::Parallel) b |= bit(tib::kExclusiveOrEscalation);
            if (k.gateway != GatewayKind::Exclusive) b |= bit(tib::kParallelOrSignal);
            break;
        case Category::Event:
            b |= bit(tib::kEvent) | triggerBits(k.trigger) | positionBits(k.position);
            if (k.throwing) b |= bit(tib::kTaskJoinThrow);
            if (k.interrupting) b |= bit(tib::kMultiOrInterrupting);
            break;
    }
    return TypeInfo(b);
}

std::optional<ElementKind> TypeInfo::decode() const {
    const unsigned categories = std::popcount(static_cast<unsigned>(bits_ & 0x7));
    if (categories != 1) return std::nullopt;
    ElementKind k;
    const std::uint16_t subtype = bits_ & kSubtypeMask;

    if (isActivity()) {
        k.category = Category::Activity;
        if (bits_ & bit(tib::kBoundary)) return std::nullopt;
        const bool task = has(tib::kTaskJoinThrow);
        const bool sub = has(tib::kSubProcessOrIntermediate);
        const bool call = has(tib::kCallActivityOrEnd);
        const bool esp = has(tib::kEventSubProcess);
        if (task) {
            if (sub || call || esp || std::popcount(static_cast<unsigned>(subtype)) != 1) return std::nullopt;
            if (subtype == bit(tib::kNone)) k.activity = ActivityKind::NoneTask;
            else if (subtype == bit(tib::kUserOrTerminate)) k.activity = ActivityKind::UserTask;
            else if (subtype == bit(tib::kScriptOrError)) k.activity = ActivityKind::ScriptTask;
            else if (subtype == bit(tib::kServiceOrMessage)) k.activity = ActivityKind::ServiceTask;
            else return std::nullopt;
        } else {
            if (subtype) return std::nullopt;
            if (sub && !call && esp) k.activity = ActivityKind::EventSubProcess;
            else if (sub && !call && !esp) k.activity = ActivityKind::SubProcess;
            else if (call && !sub && !esp) k.activity = ActivityKind::CallActivity;
            else return std::nullopt;
        }
        if (has(tib::kMultiOrInterrupting)) {
            if (task || k.activity == ActivityKind::EventSubProcess) return std::nullopt;
            k.multi = has(tib::kSequentialOrStart) ? MultiInstance::Sequential : MultiInstance::Parallel;
        } else if (has(tib::kSequentialOrStart)) {
            return std::nullopt;
        }
        return k;
    }

    if (isGateway()) {
        k.category = Category::Gateway;
        constexpr std::uint16_t allowed = bit(tib::kGateway) | bit(tib::kTaskJoinThrow) |
                                          bit(tib::kExclusiveOrEscalation) | bit(tib::kParallelOrSignal);
        if (bits_ & ~allowed) return std::nullopt;
        k.join = has(tib::kTaskJoinThrow);
        const bool x = has(tib::kExclusiveOrEscalation), p = has(tib::kParallelOrSignal);
        if (x && p) k.gateway = GatewayKind::Inclusive;
        else if (x) k.gateway = GatewayKind::Exclusive;
        else if (p) k.gateway = GatewayKind::Parallel;
        else return std::nullopt;
        return k;
    }

    k.category = Category::Event;
    if (std::popcount(static_cast<unsigned>(subtype)) != 1) return std::nullopt;
    switch (std::countr_zero(static_cast<unsigned>(subtype))) {
        case tib::kNone: k.trigger = EventTrigger::None; break;
        case tib::kUserOrTerminate: k.trigger = EventTrigger::Terminate; break;
        case tib::kScriptOrError: k.trigger = EventTrigger::Error; break;
        case tib::kServiceOrMessage: k.trigger = EventTrigger::Message; break;
        case tib::kExclusiveOrEscalation: k.trigger = EventTrigger::Escalation; break;
        case tib::kParallelOrSignal: k.trigger = EventTrigger::Signal; break;
        default: return std::nullopt;
    }
    constexpr std::uint16_t positionMask = bit(tib::kSequentialOrStart) | bit(tib::kSubProcessOrIntermediate) |
                                           bit(tib::kCallActivityOrEnd) | bit(tib::kBoundary) |
                                           bit(tib::kEventSubProcess);
    const std::uint16_t position = bits_ & positionMask;
    if (std::popcount(static_cast<unsigned>(position)) != 1) return std::nullopt;
    switch (std::countr_zero(static_cast<unsigned>(position))) {
        case tib::kSequentialOrStart: k.position = EventPosition::Start; break;
        case tib::kSubProcessOrIntermediate: k.position = EventPosition::Intermediate; break;
        case tib::kCallActivityOrEnd: k.position = EventPosition::End; break;
        case tib::kBoundary: k.position = EventPosition::Boundary; break;
        default: k.position = EventPosition::EventSubProcessStart; break;
    }
    k.throwing = has(tib::kTaskJoinThrow);
    k.interrupting = has(tib::kMultiOrInterrupting);
    return k;
}

std::string_view toString(EventTrigger t) {
    switch (t) {
        case EventTrigger::None: return "none";
        case EventTrigger::Terminate: return "terminate";
        case EventTrigger::Error: return "error";
        case EventTrigger::Message: return "message";
        case EventTrigger::Escalation: return "escalation";
        case EventTrigger::Signal: return "signal";
    }
    return "?";
}

std::optional<EventTrigger> eventTriggerFromString(std::string_view s) {
    for (auto t : {EventTrigger::None, EventTrigger::Terminate, EventTrigger::Error, EventTrigger::Message,
                   EventTrigger::Escalation, EventTrigger::Signal})
        if (toString(t) == s) return t;
    return std::nullopt;
}

std::string TypeInfo::describe() const {
    auto k = decode();
    if (!k) return "malformed";
    std::string s;
    switch (k->category) {
        case Category::Activity: {
            static constexpr std::array<const char*, 7> names = {"task",       "user-task",     "script-task",
                                                                 "service-task", "sub-process", "call-activity",
                                                                 "event-sub-process"};
            s = names[static_cast<std::size_t>(k->activity)];
            if (k->multi == MultiInstance::Parallel) s += "|parallel-multi-instance";
            if (k->multi == MultiInstance::Sequential) s += "|sequential-multi-instance";
            break;
        }
        case Category::Gateway:
            s = k->gateway == GatewayKind::Exclusive ? "exclusive"
                : k->gateway == GatewayKind::Parallel ? "parallel"
                                                      : "inclusive";
            s += k->join ? "-join" : "-split";
            break;
        case Category::Event: {
            static constexpr std::array<const char*, 5> pos = {"start", "intermediate", "end", "boundary",
                                                               "event-sub-process-start"};
            s = std::string(toString(k->trigger)) + "-" + pos[static_cast<std::size_t>(k->position)] +
                (k->throwing ? "-throw" : "-catch");
            if (k->interrupting) s += "|interrupting";
            break;
        }
    }
    return s;
}

}  // namespace chainflow
