#include "plstm/rng.hpp"

#include <limits>
#include <sstream>

#include "plstm/errors.hpp"

namespace plstm {

namespace {
// splitmix64 finalizer; decorrelates child seeds from sequential ids.
std::uint64_t mix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}
}  // namespace

double SeededRng::uniform(double lo, double hi) {
  if (!(lo < hi))
    throw ArgumentError(detail::cat("uniform: lo=", lo, " must be < hi=", hi));
  return lo + (hi - lo) * uniform();
}

std::uint64_t SeededRng::integer(std::uint64_t n) {
  if (n == 0) throw ArgumentError("integer: n must be positive");
  const std::uint64_t limit =
      std::numeric_limits<std::uint64_t>::max() -
      std::numeric_limits<std::uint64_t>::max() % n;
  std::uint64_t x;
  do {
    x = next_u64();
  } while (x >= limit);
  return x % n;
}

std::vector<std::size_t> SeededRng::permutation(std::size_t n) {
  std::vector<std::size_t> p(n);
  for (std::size_t i = 0; i < n; ++i) p[i] = i;
  for (std::size_t i = n; i > 1; --i) {
    std::size_t j = static_cast<std::size_t>(integer(i));
    std::swap(p[i - 1], p[j]);
  }
  return p;
}

SeededRng SeededRng::child(std::uint64_t stream_id) const {
  return SeededRng(mix64(seed_ ^ mix64(stream_id)));
}

std::string SeededRng::state_string() const {
  std::ostringstream os;
  os << engine_;
  return os.str();
}

void SeededRng::set_state(const std::string& s) {
  std::istringstream is(s);
  is >> engine_;
  if (is.fail()) throw FormatError("SeededRng::set_state: unparseable engine state");
}

Vector sample_uniform(SeededRng& rng, double lo, double hi, std::size_t n) {
  if (!(lo < hi))
    throw ArgumentError(
        detail::cat("sample_uniform: lo=", lo, " must be < hi=", hi));
  Vector v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = lo + (hi - lo) * rng.uniform();
  return v;
}

}  // namespace plstm
