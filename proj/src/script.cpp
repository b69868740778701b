#include "bfsim/script.hpp"

#include <algorithm>
#include <array>
#include <sstream>
#include <utility>

#include "bfsim/errors.hpp"

namespace bfsim::script {

namespace {

struct NamedOp {
    std::string_view name;
    Opcode code;
};

constexpr std::array<NamedOp, 11> kNamedOps{{
    {"OP_DUP", Opcode::Dup},
    {"OP_OVER", Opcode::Over},
    {"OP_SWAP", Opcode::Swap},
    {"OP_EQUAL", Opcode::Equal},
    {"OP_EQUALVERIFY", Opcode::EqualVerify},
    {"OP_NOTIF", Opcode::NotIf},
    {"OP_ELSE", Opcode::Else},
    {"OP_ENDIF", Opcode::EndIf},
    {"OP_HASH160", Opcode::Hash160},
    {"OP_CHECKSIG", Opcode::CheckSig},
    {"OP_RETURN", Opcode::Return},
}};

std::optional<Opcode> lookup(std::string_view name) {
    // Misspelling carried by the published reward-contract listing.
    if (name == "OP_OPVER") return Opcode::Over;
    for (const auto& n : kNamedOps) {
        if (n.name == name) return n.code;
    }
    return std::nullopt;
}

bool is_known_tag(std::uint8_t tag) {
    if (tag == static_cast<std::uint8_t>(Opcode::Push)) return true;
    return std::any_of(kNamedOps.begin(), kNamedOps.end(),
                       [tag](const NamedOp& n) { return static_cast<std::uint8_t>(n.code) == tag; });
}

void check_branches(const Script& script) {
    std::size_t depth = 0;
    for (const auto& op : script) {
        switch (op.code) {
            case Opcode::NotIf:
                if (++depth > kMaxBranchDepth) {
                    throw ParseError(ParseErrorKind::UnbalancedBranch, "branch nesting too deep");
                }
                break;
            case Opcode::Else:
                if (depth == 0) throw ParseError(ParseErrorKind::UnbalancedBranch, "OP_ELSE without OP_NOTIF");
                break;
            case Opcode::EndIf:
                if (depth == 0) throw ParseError(ParseErrorKind::UnbalancedBranch, "OP_ENDIF without OP_NOTIF");
                --depth;
                break;
            default:
                break;
        }
    }
    if (depth != 0) throw ParseError(ParseErrorKind::UnbalancedBranch, "OP_NOTIF without OP_ENDIF");
}

const Bytes kTrue{0x01};
const Bytes kFalse{};

}  // namespace

std::string_view opcode_name(Opcode code) {
    if (code == Opcode::Push) return "PUSH";
    for (const auto& n : kNamedOps) {
        if (n.code == code) return n.name;
    }
    return "OP_UNKNOWN";
}

Script parse_script(std::string_view text) {
    Script script;
    std::istringstream in{std::string(text)};
    std::string token;
    while (in >> token) {
        if (auto code = lookup(token)) {
            script.push_back(Op{*code, {}});
            continue;
        }
        std::string_view hex = token;
        if (hex.size() >= 2 && hex.front() == '<' && hex.back() == '>') hex = hex.substr(1, hex.size() - 2);
        if (hex.rfind("OP_", 0) == 0 || (hex.empty() && token.size() != 2)) {
            throw ParseError(ParseErrorKind::UnknownOpcode, "unknown opcode '" + token + "'");
        }
        Bytes data;
        try {
            data = from_hex(hex);
        } catch (const std::invalid_argument&) {
            throw ParseError(ParseErrorKind::UnknownOpcode, "unknown token '" + token + "'");
        }
        if (data.size() > kMaxPushBytes) throw ParseError(ParseErrorKind::PushTooLarge, "push exceeds 2048 bytes");
        script.push_back(Op::push(std::move(data)));
    }
    check_branches(script);
    return script;
}

std::string print_script(const Script& script) {
    std::string out;
    for (const auto& op : script) {
        if (!out.empty()) out.push_back(' ');
        if (op.code == Opcode::Push) {
            out += op.data.empty() ? std::string("<>") : to_hex(op.data);
        } else {
            out += opcode_name(op.code);
        }
    }
    return out;
}

Bytes serialize_script(const Script& script) {
    ByteWriter w;
    for (const auto& op : script) {
        w.u8(static_cast<std::uint8_t>(op.code));
        if (op.code == Opcode::Push) {
            w.u16(static_cast<std::uint16_t>(op.data.size()));
            w.raw(op.data);
        }
    }
    return std::move(w).take();
}

Script deserialize_script(ByteView data) {
    ByteReader r(data);
    Script script;
    try {
        while (!r.empty()) {
            std::uint8_t tag = r.u8();
            if (!is_known_tag(tag)) {
                throw ParseError(ParseErrorKind::UnknownOpcode, "unknown opcode tag " + std::to_string(tag));
            }
            Op op{static_cast<Opcode>(tag), {}};
            if (op.code == Opcode::Push) {
                std::uint16_t len = r.u16();
                if (len > kMaxPushBytes) throw ParseError(ParseErrorKind::PushTooLarge, "push exceeds 2048 bytes");
                auto payload = r.raw(len);
                op.data.assign(payload.begin(), payload.end());
            }
            script.push_back(std::move(op));
        }
    } catch (const SerializationError& e) {
        throw ParseError(ParseErrorKind::Truncated, e.what());
    }
    check_branches(script);
    return script;
}

std::string_view to_string(ExecError e) {
    switch (e) {
        case ExecError::StackUnderflow: return "StackUnderflow";
        case ExecError::StackOverflow: return "StackOverflow";
        case ExecError::ReturnHit: return "ReturnHit";
        case ExecError::VerifyFailed: return "VerifyFailed";
        case ExecError::MalformedBranch: return "MalformedBranch";
        case ExecError::NonPushScriptSig: return "NonPushScriptSig";
        case ExecError::FalseResult: return "FalseResult";
    }
    return "Unknown";
}

bool truthy(ByteView v) {
    return std::any_of(v.begin(), v.end(), [](std::uint8_t b) { return b != 0; });
}

namespace {

class Machine {
public:
    explicit Machine(const ExecContext& ctx) : ctx_(ctx) {}

    std::vector<Bytes>& stack() { return stack_; }

    // Returns an error or nullopt; `executed` reports whether the op ran.
    std::optional<ExecError> step(const Op& op, bool& executed) {
        bool active = std::all_of(branches_.begin(), branches_.end(), [](bool b) { return b; });
        executed = active;
        switch (op.code) {
            case Opcode::NotIf: {
                bool take = false;
                if (active) {
                    if (stack_.empty()) return ExecError::StackUnderflow;
                    take = !truthy(stack_.back());
                    stack_.pop_back();
                }
                if (branches_.size() >= kMaxBranchDepth) return ExecError::MalformedBranch;
                branches_.push_back(take);
                return std::nullopt;
            }
            case Opcode::Else:
                if (branches_.empty()) return ExecError::MalformedBranch;
                branches_.back() = !branches_.back();
                executed = true;
                return std::nullopt;
            case Opcode::EndIf:
                if (branches_.empty()) return ExecError::MalformedBranch;
                branches_.pop_back();
                executed = true;
                return std::nullopt;
            default:
                break;
        }
        if (!active) return std::nullopt;

        switch (op.code) {
            case Opcode::Push:
                return push(op.data);
            case Opcode::Dup:
                if (stack_.empty()) return ExecError::StackUnderflow;
                return push(stack_.back());
            case Opcode::Over:
                if (stack_.size() < 2) return ExecError::StackUnderflow;
                return push(stack_[stack_.size() - 2]);
            case Opcode::Swap:
                if (stack_.size() < 2) return ExecError::StackUnderflow;
                std::swap(stack_[stack_.size() - 1], stack_[stack_.size() - 2]);
                return std::nullopt;
            case Opcode::Equal:
            case Opcode::EqualVerify: {
                if (stack_.size() < 2) return ExecError::StackUnderflow;
                bool eq = stack_[stack_.size() - 1] == stack_[stack_.size() - 2];
                stack_.pop_back();
                stack_.pop_back();
                if (op.code == Opcode::EqualVerify) return eq ? std::nullopt : std::optional(ExecError::VerifyFailed);
                return push(eq ? kTrue : kFalse);
            }
            case Opcode::Hash160: {
                if (stack_.empty()) return ExecError::StackUnderflow;
                auto h = crypto::address_hash(stack_.back(), ctx_.params);
                auto v = h.view();
                stack_.back().assign(v.begin(), v.end());
                return std::nullopt;
            }
            case Opcode::CheckSig: {
                if (stack_.size() < 2) return ExecError::StackUnderflow;
                crypto::PublicKey pk{std::move(stack_.back())};
                stack_.pop_back();
                crypto::Signature sig{std::move(stack_.back())};
                stack_.pop_back();
                bool ok = crypto::verify(pk, ctx_.sighash_msg, sig, ctx_.params);
                return push(ok ? kTrue : kFalse);
            }
            case Opcode::Return:
                return ExecError::ReturnHit;
            default:
                return std::nullopt;
        }
    }

    bool branches_open() const { return !branches_.empty(); }

private:
    std::optional<ExecError> push(Bytes v) {
        if (stack_.size() >= kMaxStackDepth) return ExecError::StackOverflow;
        stack_.push_back(std::move(v));
        return std::nullopt;
    }

    const ExecContext& ctx_;
    std::vector<Bytes> stack_;
    std::vector<bool> branches_;
};

}  // namespace

ExecResult execute(const Script& script_sig, const Script& script_pubkey, const ExecContext& ctx) {
    ExecResult result;
    Machine m(ctx);
    bool executed = true;
    for (const auto& op : script_sig) {
        if (op.code != Opcode::Push) {
            result.error = ExecError::NonPushScriptSig;
            return result;
        }
        if (auto err = m.step(op, executed)) {
            result.error = err;
            return result;
        }
    }
    result.stack_before = m.stack();
    for (const auto& op : script_pubkey) {
        auto err = m.step(op, executed);
        std::string name = op.code == Opcode::Push ? to_hex(op.data) : std::string(opcode_name(op.code));
        result.trace.push_back(TraceStep{std::move(name), executed, m.stack()});
        if (err) {
            result.error = err;
            return result;
        }
    }
    if (m.branches_open()) {
        result.error = ExecError::MalformedBranch;
        return result;
    }
    if (m.stack().empty() || !truthy(m.stack().back())) {
        result.error = ExecError::FalseResult;
        return result;
    }
    result.accepted = true;
    return result;
}

Script reward_script_template() {
    using O = Opcode;
    Script s;
    for (O code : {O::Over, O::Over, O::Equal, O::NotIf, O::Over, O::Hash160, O::Swap, O::Hash160, O::EqualVerify,
                   O::CheckSig, O::Else, O::Return, O::EndIf}) {
        s.push_back(Op{code, {}});
    }
    return s;
}

Script p2pkh_script_template(const crypto::AddressHash& addr, const ModelParams& params) {
    if (addr.bits != params.address_bits) throw ParamsError("address hash width does not match address_bits");
    auto v = addr.view();
    return Script{Op{Opcode::Dup, {}}, Op{Opcode::Hash160, {}}, Op::push(Bytes(v.begin(), v.end())),
                  Op{Opcode::EqualVerify, {}}, Op{Opcode::CheckSig, {}}};
}

Script push_only(const std::vector<Bytes>& items) {
    Script s;
    s.reserve(items.size());
    for (const auto& item : items) s.push_back(Op::push(item));
    return s;
}

}  // namespace bfsim::script
