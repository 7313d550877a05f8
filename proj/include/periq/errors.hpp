#pragma once

#include <stdexcept>
#include <string>

namespace periq {

// Tensor/layer shape or precondition violation.
struct shape_error : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Bad user-supplied configuration (file contents or flag combinations).
struct config_error : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

enum class io_errc {
  bad_magic = 1,
  bad_header,
  version_mismatch,
  truncated_payload,
  count_mismatch,
  dim_mismatch,
  code_out_of_range,
};

inline const char* to_string(io_errc c) {
  switch (c) {
    case io_errc::bad_magic: return "bad_magic";
    case io_errc::bad_header: return "bad_header";
    case io_errc::version_mismatch: return "version_mismatch";
    case io_errc::truncated_payload: return "truncated_payload";
    case io_errc::count_mismatch: return "count_mismatch";
    case io_errc::dim_mismatch: return "dim_mismatch";
    case io_errc::code_out_of_range: return "code_out_of_range";
  }
  return "unknown";
}

class io_error : public std::runtime_error {
 public:
  io_error(io_errc code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  io_errc code() const noexcept { return code_; }

 private:
  io_errc code_;
};

}  // namespace periq
