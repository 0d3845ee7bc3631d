#ifndef PETNET_ERROR_HPP
#define PETNET_ERROR_HPP

#include <stdexcept>
#include <string>

namespace petnet {

enum class ErrorKind {
  Validation,
  Dimension,
  Config,
  Domain,
  Capability,
  Contract,
  Io,
  Runtime,
};

const char* to_string(ErrorKind kind) noexcept;

// Every failure raised by the library carries a kind so the C layer can map
// it onto a status code without string matching.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) {
  throw Error(kind, what);
}

inline void require(bool cond, ErrorKind kind, const std::string& what) {
  if (!cond) fail(kind, what);
}

}  // namespace petnet

#endif
