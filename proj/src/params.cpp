#include "bfsim/params.hpp"

#include "bfsim/errors.hpp"

namespace bfsim {

void ModelParams::validate() const {
    if (secret_bits < 8 || secret_bits > 256) {
        throw ParamsError("secret_bits must be in [8, 256], got " + std::to_string(secret_bits));
    }
    if (address_bits < 4 || address_bits > 160) {
        throw ParamsError("address_bits must be in [4, 160], got " + std::to_string(address_bits));
    }
    if (address_bits >= secret_bits) {
        throw ParamsError("address_bits must be smaller than secret_bits");
    }
    if (checksum_len < 1 || checksum_len > 32) {
        throw ParamsError("checksum_len must be in [1, 32]");
    }
    if (digest_bits < 1 || digest_bits > 256) {
        throw ParamsError("digest_bits must be in [1, 256]");
    }
}

std::string ModelParams::describe() const {
    return "secret_bits=" + std::to_string(secret_bits) + " address_bits=" + std::to_string(address_bits) +
           " digest_bits=" + std::to_string(digest_bits);
}

}  // namespace bfsim
