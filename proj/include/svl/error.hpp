#pragma once

#include <stdexcept>
#include <string>

namespace svl {

// Every failure raised by the library carries a short machine-readable kind
// ("shape_mismatch", "format_error", ...) that the CLI prints verbatim.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& message)
      : std::runtime_error(message), kind_(std::move(kind)) {}

  const std::string& kind() const noexcept { return kind_; }

 private:
  std::string kind_;
};

namespace err {
inline constexpr const char* kShape = "shape_mismatch";
inline constexpr const char* kDim = "dim_mismatch";
inline constexpr const char* kDegenerate = "degenerate_input";
inline constexpr const char* kFormat = "format_error";
inline constexpr const char* kParse = "parse_error";
inline constexpr const char* kConfig = "config_error";
inline constexpr const char* kIo = "io_error";
inline constexpr const char* kRange = "out_of_range";
inline constexpr const char* kNumeric = "numeric_error";
}  // namespace err

}  // namespace svl
