#pragma once

#include <stdexcept>
#include <string>

namespace helix {

// Error taxonomy shared by the library and the CLI exit-code mapping.
enum class errkind {
    bad_input,   // dimension mismatch, non-finite data, malformed flags/files
    numerical,   // factorization failure, degenerate data, non-convergence
    io,          // filesystem failures
    protocol,    // external backend handshake / wire errors
};

class error : public std::runtime_error {
  public:
    error(errkind k, const std::string & msg) : std::runtime_error(msg), kind_(k) {}
    errkind kind() const { return kind_; }

  private:
    errkind kind_;
};

inline error bad_input(const std::string & msg)  { return error(errkind::bad_input, msg); }
inline error numerical(const std::string & msg)  { return error(errkind::numerical, msg); }
inline error io_error(const std::string & msg)   { return error(errkind::io, msg); }
inline error protocol_error(const std::string & msg) { return error(errkind::protocol, msg); }

} // namespace helix
