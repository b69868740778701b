#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "bfsim/bytes.hpp"
#include "bfsim/crypto.hpp"
#include "bfsim/params.hpp"

// A small stack machine: enough for pay-to-pubkey-hash and the collision
// reward contract, nothing more. There are no loops, so every script halts.
namespace bfsim::script {

enum class Opcode : std::uint8_t {
    Push = 0x01,
    NotIf = 0x64,
    Else = 0x67,
    EndIf = 0x68,
    Return = 0x6a,
    Dup = 0x76,
    Over = 0x78,
    Swap = 0x7c,
    Equal = 0x87,
    EqualVerify = 0x88,
    Hash160 = 0xa9,
    CheckSig = 0xac,
};

inline constexpr std::size_t kMaxPushBytes = 2048;
inline constexpr std::size_t kMaxStackDepth = 1000;
inline constexpr std::size_t kMaxBranchDepth = 32;

struct Op {
    Opcode code = Opcode::Push;
    Bytes data;  // Push only

    static Op push(Bytes data) { return Op{Opcode::Push, std::move(data)}; }
    bool operator==(const Op&) const = default;
};

using Script = std::vector<Op>;

enum class ParseErrorKind { UnknownOpcode, UnbalancedBranch, PushTooLarge, Truncated };

class ParseError : public std::runtime_error {
public:
    ParseError(ParseErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    ParseErrorKind kind() const { return kind_; }

private:
    ParseErrorKind kind_;
};

std::string_view opcode_name(Opcode code);

/// Space-separated opcode names and hex pushes ("<hex>" or bare hex; "<>" is
/// the empty push). OP_OPVER is accepted as a spelling of OP_OVER.
Script parse_script(std::string_view text);
std::string print_script(const Script& script);

/// 1-byte opcode tags; Push is 0x01 + u16 little-endian length + payload.
Bytes serialize_script(const Script& script);
Script deserialize_script(ByteView data);

enum class ExecError {
    StackUnderflow,
    StackOverflow,
    ReturnHit,
    VerifyFailed,
    MalformedBranch,
    NonPushScriptSig,
    FalseResult,
};

std::string_view to_string(ExecError e);

struct TraceStep {
    std::string op;
    bool executed = true;
    std::vector<Bytes> stack_after;
};

struct ExecResult {
    bool accepted = false;
    std::optional<ExecError> error;
    std::vector<Bytes> stack_before;  // after the script_sig pushes
    std::vector<TraceStep> trace;     // one entry per script_pubkey op
};

struct ExecContext {
    Bytes sighash_msg;
    ModelParams params;
};

/// Empty and all-zero byte strings are false.
bool truthy(ByteView v);

/// Runs script_sig then script_pubkey on one stack; accepts iff no error
/// and a truthy top element remains.
ExecResult execute(const Script& script_sig, const Script& script_pubkey, const ExecContext& ctx);

/// OP_OVER OP_OVER OP_EQUAL OP_NOTIF OP_OVER OP_HASH160 OP_SWAP OP_HASH160
/// OP_EQUALVERIFY OP_CHECKSIG OP_ELSE OP_RETURN OP_ENDIF
Script reward_script_template();

/// OP_DUP OP_HASH160 <addr> OP_EQUALVERIFY OP_CHECKSIG. Throws ParamsError on width mismatch.
Script p2pkh_script_template(const crypto::AddressHash& addr, const ModelParams& params);

/// Witness pushes in stack order.
Script push_only(const std::vector<Bytes>& items);

}  // namespace bfsim::script
