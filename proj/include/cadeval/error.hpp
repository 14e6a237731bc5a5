#pragma once
#include <stdexcept>
#include <string>

namespace cadeval {

// input_error maps to CLI exit code 2, everything else to 1.
class input_error : public std::runtime_error {
 public:
  explicit input_error(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace cadeval
