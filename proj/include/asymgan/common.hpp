#ifndef ASYMGAN_COMMON_HPP
#define ASYMGAN_COMMON_HPP

#include <stdexcept>
#include <string>

namespace asymgan {

// Objective selector; baseline drops E/D_Z and F's z input entirely.
enum class Mode { baseline_cyclegan, asym_no_ext, asym_ext };

std::string to_string(Mode mode);
Mode mode_from_string(const std::string& s);

struct config_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct shape_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct io_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
// Corrupt/truncated checkpoint or manifest payloads.
struct format_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
// Non-finite loss during optimization; maps to CLI exit code 3.
struct numeric_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace asymgan

#endif
