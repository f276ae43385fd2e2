#pragma once

#include <stdexcept>
#include <string>

namespace dkg {

enum class Errc {
    NotFound,
    Conflict,    // duplicate record id, state not ready
    Validation,  // malformed or out-of-order input
    BadRequest,  // bad query parameters
    Upstream,    // LLM endpoint failure
    Parse,       // file could not be parsed
};

class Error : public std::runtime_error {
public:
    Error(Errc code, const std::string& what) : std::runtime_error(what), code_(code) {}

    Errc code() const noexcept { return code_; }

private:
    Errc code_;
};

[[noreturn]] inline void fail(Errc code, const std::string& what) { throw Error(code, what); }

} // namespace dkg
