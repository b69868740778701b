// The one-shot EVP helpers refetch the digest on every call, which costs
// several times more than the digest itself for the 16-35 byte inputs the
// key pipeline hashes. The context-based primitives are deprecated in
// OpenSSL 3 but still shipped, so use them.
#define OPENSSL_SUPPRESS_DEPRECATED

#include "bfsim/hash.hpp"

#include <openssl/ripemd.h>
#include <openssl/sha.h>

namespace bfsim::hash {

Hash256 sha256(ByteView data) {
    Hash256 out{};
    SHA256_CTX ctx;
    SHA256_Init(&ctx);
    SHA256_Update(&ctx, data.data(), data.size());
    SHA256_Final(out.data(), &ctx);
    return out;
}

Hash256 sha256d(ByteView data) {
    Hash256 first = sha256(data);
    return sha256(first);
}

Digest160 ripemd160(ByteView data) {
    Digest160 out{};
    RIPEMD160_CTX ctx;
    RIPEMD160_Init(&ctx);
    RIPEMD160_Update(&ctx, data.data(), data.size());
    RIPEMD160_Final(out.data(), &ctx);
    return out;
}

Digest160 hash160(ByteView data) {
    Hash256 inner = sha256(data);
    return ripemd160(inner);
}

}  // namespace bfsim::hash
