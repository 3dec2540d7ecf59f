#pragma once

#include <stdexcept>
#include <string>

namespace trialref {

inline constexpr const char* kToolVersion = "0.1.0";

// Malformed or missing user input. The CLI maps this to exit code 2.
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Inputs that are individually valid but were produced from different
// upstream files. The CLI maps this to exit code 3.
class ProvenanceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Label { kStrong, kWeak };
enum class Direction { kAHigher, kBHigher, kNone };

std::string to_string(Label label);
std::string to_string(Direction direction);
Label parse_label(const std::string& text);
Direction parse_direction(const std::string& text);

}  // namespace trialref
