// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace mref {

/// Error type for every recoverable failure in the library. The CLI turns
/// these into a one-line `error: ...` message and a nonzero exit code.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

[[noreturn]] void fail(const std::string& msg);

inline void require(bool cond, const std::string& msg) {
  if (!cond) fail(msg);
}

/// Formats a double with 17 significant digits, enough to reparse the exact
/// same value. Used for every CSV number the project writes.
std::string fmt_g17(double v);

/// FNV-1a over the raw bit patterns of a double sequence.
std::uint64_t checksum_doubles(const double* data, std::size_t n);

}  // namespace mref
