#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace smoothout {

enum class ErrorKind {
  invalid_range,
  invalid_stddev,
  invalid_argument,
  shape_mismatch,
  length_mismatch,
  stale_record,
  invalid_geometry,
  dimension_too_high,
  bad_magic,
  truncated_file,
  count_mismatch,
  io,
  config,
  numeric,
};

std::string_view to_string(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

inline void require(bool condition, ErrorKind kind, const std::string& message) {
  if (!condition) throw Error(kind, message);
}

}  // namespace smoothout
