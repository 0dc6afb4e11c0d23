#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace fedcd {

// Contract violations and malformed inputs. `stage` names the pipeline step
// that failed so the CLI can emit a machine-readable error line.
class Error : public std::runtime_error {
public:
    Error(std::string stage, const std::string& message)
        : std::runtime_error(message), stage_(std::move(stage)) {}
    explicit Error(const std::string& message) : Error("run", message) {}

    const std::string& stage() const { return stage_; }

private:
    std::string stage_;
};

}  // namespace fedcd
