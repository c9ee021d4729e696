#pragma once

#include <stdexcept>
#include <string>

namespace neurotrail {

// Base for every error raised by the library. The CLI maps `kind()` into its
// one-line machine-parsable error output.
class Error : public std::runtime_error {
public:
    Error(std::string kind, const std::string& what)
        : std::runtime_error(what), kind_(std::move(kind)) {}
    const std::string& kind() const noexcept { return kind_; }

private:
    std::string kind_;
};

#define NEUROTRAIL_ERROR(Name, tag)                                        \
    class Name : public Error {                                            \
    public:                                                                \
        explicit Name(const std::string& what) : Error(tag, what) {}       \
    }

NEUROTRAIL_ERROR(ShapeError, "shape");
NEUROTRAIL_ERROR(ValidationError, "validation");
NEUROTRAIL_ERROR(ParseError, "parse");
NEUROTRAIL_ERROR(UnsupportedVersionError, "unsupported-version");
NEUROTRAIL_ERROR(CompileError, "uncompilable-layer");
NEUROTRAIL_ERROR(CapacityError, "capacity");
NEUROTRAIL_ERROR(LoadError, "load");
NEUROTRAIL_ERROR(RangeError, "range");
NEUROTRAIL_ERROR(DataError, "data");
NEUROTRAIL_ERROR(IoError, "io");
NEUROTRAIL_ERROR(ConnectError, "connect");
NEUROTRAIL_ERROR(TimeoutError, "timeout");
NEUROTRAIL_ERROR(EndOfTrail, "end-of-trail");
NEUROTRAIL_ERROR(ProtocolError, "protocol");

#undef NEUROTRAIL_ERROR

}  // namespace neurotrail
