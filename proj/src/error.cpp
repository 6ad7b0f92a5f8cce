#include "psychkit/error.hpp"

namespace psychkit {

Error::Error(std::string module, const std::string& message)
    : std::runtime_error(module + ": " + message), module_(std::move(module)) {}

}  // namespace psychkit
