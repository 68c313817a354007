#pragma once

#include <sstream>
#include <stdexcept>
#include <string>

namespace plstm {

// Error taxonomy. Throw sites name the offending operand, key, or file in the
// message; the CLI maps each type to a distinct exit code.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ShapeError : Error {      // tensor dimension mismatch
  using Error::Error;
};
struct ArgumentError : Error {   // bad scalar argument or out-of-range index
  using Error::Error;
};
struct StateError : Error {      // corrupted recurrent state (k > t, time not increasing)
  using Error::Error;
};
struct FormatError : Error {     // unparseable input file
  using Error::Error;
};
struct ConfigError : Error {     // unknown or invalid configuration key
  using Error::Error;
};
struct NumericError : Error {    // NaN/Inf encountered mid-run
  using Error::Error;
};
struct CheckpointError : Error { // checkpoint version or shape mismatch
  using Error::Error;
};

namespace detail {
template <class... Ts>
std::string cat(const Ts&... parts) {
  std::ostringstream os;
  (os << ... << parts);
  return os.str();
}
}  // namespace detail

}  // namespace plstm
