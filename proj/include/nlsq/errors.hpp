#ifndef NLSQ_ERRORS_HPP
#define NLSQ_ERRORS_HPP

#include <stdexcept>
#include <string>
#include <string_view>

namespace nlsq {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid user input: malformed configuration, out-of-range parameters,
/// unknown enumerators. The CLI maps it to exit code 2.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// A numerical-validity failure. The CLI maps it to exit code 3.
class NumericalError : public Error {
 public:
  enum class Kind {
    grid,
    extent,
    truncation,
    hermiticity,
    normalization,
    ill_conditioned,
    incomplete_moments,
    unsupported_order,
    sampling,
    data,
    domain,
    internal,
  };

  NumericalError(Kind kind, const std::string& what)
      : Error(std::string(kind_name(kind)) + " error: " + what), kind_(kind) {}

  Kind kind() const noexcept { return kind_; }

  static constexpr std::string_view kind_name(Kind k) {
    switch (k) {
      case Kind::grid: return "grid";
      case Kind::extent: return "extent";
      case Kind::truncation: return "truncation";
      case Kind::hermiticity: return "hermiticity";
      case Kind::normalization: return "normalization";
      case Kind::ill_conditioned: return "ill-conditioned-channel";
      case Kind::incomplete_moments: return "incomplete-moment";
      case Kind::unsupported_order: return "unsupported-order";
      case Kind::sampling: return "sampling";
      case Kind::data: return "data";
      case Kind::domain: return "domain";
      case Kind::internal: return "internal-consistency";
    }
    return "numerical";
  }

 private:
  Kind kind_;
};

}  // namespace nlsq

#endif
