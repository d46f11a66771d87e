#pragma once

#include <stdexcept>
#include <string>

namespace budcheck {

// Failure categories. Each distinct error condition promised by a module
// contract gets its own value so callers (and tests) can match on it.
enum class errc {
  io,                 // file unreadable or unwritable
  bad_format,         // malformed or unsupported file contents
  empty_audio,        // zero-length audio data
  bad_argument,       // violated parameter invariant
  rate_mismatch,      // sample rates differ or rate unsupported
  silent_input,       // RMS below the silence threshold
  unmeasurable,       // recording fails the measurability gate
  peak_not_found,     // no fundamental peak near the nominal frequency
  grid_mismatch,      // frequency grids differ
  zero_variance,      // constant vector, correlation undefined
  length_mismatch,    // recording lengths differ beyond tolerance
  rank_deficient,     // singular regression design
  insufficient_data,  // too few observations for a fit
  missing_value,      // required term or metric value absent
  unknown_key,        // unknown transducer, term, or column name
};

const char* to_string(errc code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(errc code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  errc code() const noexcept { return code_; }

 private:
  errc code_;
};

[[noreturn]] inline void fail(errc code, const std::string& message) {
  throw Error(code, message);
}

}  // namespace budcheck
