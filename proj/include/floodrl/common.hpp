#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace floodrl {

/// Error categories. The CLI maps them onto exit codes and the session
/// service onto HTTP status codes.
enum class ErrorKind {
  Validation,   // a value violates a documented invariant
  Parse,        // a file or payload does not follow its grammar
  Completeness, // a required record is missing
  Domain,       // an argument lies outside the supported domain
  Feasibility,  // a masked action was requested
  Protocol,     // an operation was called out of order
  Config,       // configuration references something that does not exist
  Numerical,    // non-finite intermediate value
  Contract,     // caller broke a precondition that cannot happen in normal use
  NotFound,
};

const char* to_string(ErrorKind kind);

class Error : public std::runtime_error {
public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

private:
  ErrorKind kind_;
};

[[noreturn]] void fail(ErrorKind kind, const std::string& what);

inline void require(bool cond, ErrorKind kind, const std::string& what) {
  if (!cond) fail(kind, what);
}

/// Seedable 64-bit stream. Uniform draws are built from raw engine output so
/// sequences are identical across standard library implementations.
class Rng {
public:
  explicit Rng(std::uint64_t seed = 0) { reseed(seed); }

  void reseed(std::uint64_t seed);
  std::uint64_t next();
  /// Uniform on [0, 1).
  double uniform();
  /// Uniform integer on [0, n).
  std::size_t below(std::size_t n);
  double normal();

  std::array<std::uint64_t, 4> state() const { return {s_[0], s_[1], s_[2], s_[3]}; }
  void set_state(const std::array<std::uint64_t, 4>& s) {
    for (int i = 0; i < 4; ++i) s_[i] = s[i];
  }

private:
  std::uint64_t s_[4]{};
};

/// splitmix64 finalizer; used to derive independent child seeds.
std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b = 0x9e3779b97f4a7c15ULL);

/// Piecewise-linear interpolation on ascending knots, clamped at both ends.
double interp_clamped(const std::vector<double>& xs, const std::vector<double>& ys, double x);

/// 64-bit FNV-1a as 16 lowercase hex digits.
std::string fnv1a_hex(std::string_view bytes);

/// Whole-file IO; failures are NotFound (missing file) or Validation.
std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);

} // namespace floodrl
