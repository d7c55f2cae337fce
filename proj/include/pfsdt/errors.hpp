// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace pfsdt {

/// Raised when a field or ensemble carries zero detection weight where a
/// positive one is required (zero-power field, detector domain missed).
class DegenerateError : public std::runtime_error
{
  public:
    using std::runtime_error::runtime_error;
};

/// Configuration could not be parsed or resolved.
class ConfigError : public std::runtime_error
{
  public:
    using std::runtime_error::runtime_error;
};

namespace detail {

[[noreturn]] inline void invalid(std::string const& what)
{
    throw std::invalid_argument(what);
}

inline void require(bool cond, char const* what)
{
    if (!cond) [[unlikely]] {
        invalid(what);
    }
}

inline void require(bool cond, std::string const& what)
{
    if (!cond) [[unlikely]] {
        invalid(what);
    }
}

} // namespace detail
} // namespace pfsdt
