#include "petnet/error.hpp"

namespace petnet {

const char* to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::Validation: return "validation error";
    case ErrorKind::Dimension: return "dimension error";
    case ErrorKind::Config: return "configuration error";
    case ErrorKind::Domain: return "domain error";
    case ErrorKind::Capability: return "capability error";
    case ErrorKind::Contract: return "contract violation";
    case ErrorKind::Io: return "i/o error";
    case ErrorKind::Runtime: return "runtime error";
  }
  return "error";
}

}  // namespace petnet
