#ifndef STETH_ERROR_HPP_
#define STETH_ERROR_HPP_

#include <stdexcept>
#include <string>

namespace steth {

enum class ErrorCode {
    InvalidArgument,
    FilterDesign,
    Io,
    NotFound,
    UnsupportedFormat,
    UnsupportedChannels,
    UnsupportedBitDepth,
    MalformedFile,
    BadVersion,
    Truncated,
    LengthMismatch,
    BadCount,
    BadFlags,
    Encoding,
    InsufficientData,
    Network,
    Protocol,
    Rejected,
};

const char* to_string(ErrorCode code) noexcept;

/// Every failure raised by the library carries one of the codes above so
/// callers (and the C API) can dispatch without parsing messages.
class Error : public std::runtime_error
{
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(what)
        , m_code(code)
    {}

    ErrorCode code() const noexcept { return m_code; }

private:
    ErrorCode m_code;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what)
{
    throw Error(code, what);
}

} // namespace steth

#endif
