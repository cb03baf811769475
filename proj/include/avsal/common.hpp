#ifndef AVSAL_COMMON_HPP
#define AVSAL_COMMON_HPP

#include <sstream>
#include <stdexcept>
#include <string>

namespace avsal {

// Error taxonomy. Everything user-facing derives from Error so the CLI can
// catch one type; the subclasses keep tests precise about failure modes.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Malformed tensor/feature dimensions.
struct ShapeError : Error {
  using Error::Error;
};

// Bad call arguments (values, not shapes).
struct ArgumentError : Error {
  using Error::Error;
};

// Invalid configuration or scene description; message names the field.
struct ConfigError : Error {
  using Error::Error;
};

// Dataset/checkpoint file problems; message carries the path.
struct IoError : Error {
  using Error::Error;
};

namespace detail {

inline void format_into(std::ostringstream&) {}

template <typename T, typename... Rest>
void format_into(std::ostringstream& os, const T& v, const Rest&... rest) {
  os << v;
  format_into(os, rest...);
}

}  // namespace detail

template <typename... Args>
std::string cat(const Args&... args) {
  std::ostringstream os;
  detail::format_into(os, args...);
  return os.str();
}

}  // namespace avsal

#endif  // AVSAL_COMMON_HPP
