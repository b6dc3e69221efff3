#pragma once

#include <stdexcept>
#include <string>

namespace tinytarget {

// Filesystem and stream failures. The CLI maps these to exit code 2,
// everything else derived from std::exception to exit code 1.
class io_error : public std::runtime_error {
 public:
  explicit io_error(const std::string &what) : std::runtime_error(what) {}
};

// Malformed input file. Messages carry the offending path and line number.
class parse_error : public io_error {
 public:
  explicit parse_error(const std::string &what) : io_error(what) {}
};

}  // namespace tinytarget
