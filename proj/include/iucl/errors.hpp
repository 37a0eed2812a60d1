#pragma once

#include <stdexcept>
#include <string>

namespace iucl {

// Base for every error raised by the library. `kind()` is the stable name
// reported in the CLI's machine-readable error output.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& what)
      : std::runtime_error(what), kind_(std::move(kind)) {}
  const std::string& kind() const noexcept { return kind_; }

 private:
  std::string kind_;
};

#define IUCL_DEFINE_ERROR(Name)                                   \
  class Name : public Error {                                     \
   public:                                                        \
    explicit Name(const std::string& what) : Error(#Name, what) {} \
  };

IUCL_DEFINE_ERROR(ParseError)
IUCL_DEFINE_ERROR(ValidationError)
IUCL_DEFINE_ERROR(CapacityError)
IUCL_DEFINE_ERROR(ShapeError)
IUCL_DEFINE_ERROR(NonFiniteError)
IUCL_DEFINE_ERROR(NonScalarRootError)
IUCL_DEFINE_ERROR(TapeReusedError)
IUCL_DEFINE_ERROR(EmptyConstraintError)
IUCL_DEFINE_ERROR(UnspecifiedAttributeError)
IUCL_DEFINE_ERROR(EmptySetError)
IUCL_DEFINE_ERROR(GridTooSmallError)
IUCL_DEFINE_ERROR(EmptyLayoutError)
IUCL_DEFINE_ERROR(FormatError)
IUCL_DEFINE_ERROR(IoError)

#undef IUCL_DEFINE_ERROR

}  // namespace iucl
