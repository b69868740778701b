#pragma once

#include <stdexcept>
#include <string>

namespace bfsim {

/// A ModelParams (or other configuration) invariant does not hold.
class ParamsError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Binary data could not be decoded.
class SerializationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace bfsim
