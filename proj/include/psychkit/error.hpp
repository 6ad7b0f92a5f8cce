#pragma once

#include <stdexcept>
#include <string>

namespace psychkit {

/// Raised by every analysis module. `module()` names the stage that failed so
/// pipeline drivers can report where a run broke down.
class Error : public std::runtime_error {
public:
    Error(std::string module, const std::string& message);

    const std::string& module() const noexcept { return module_; }

private:
    std::string module_;
};

}  // namespace psychkit
