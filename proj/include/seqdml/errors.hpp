#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace seqdml {

// All library failures carry a stable machine-readable code alongside the
// human-readable message; the CLI serializes both.
class Error : public std::runtime_error {
 public:
  Error(std::string code, const std::string& message)
      : std::runtime_error(message), code_(std::move(code)) {}

  const std::string& code() const noexcept { return code_; }

 private:
  std::string code_;
};

}  // namespace seqdml
