#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>

namespace skit {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Array = Eigen::ArrayXd;

/// One (x, y) draw from the paired stream.
struct PairedObservation {
  Vector x;
  Vector y;

  PairedObservation() = default;
  PairedObservation(Vector x_, Vector y_) : x(std::move(x_)), y(std::move(y_)) {}
  static PairedObservation scalar(double x, double y) {
    Vector vx(1), vy(1);
    vx << x;
    vy << y;
    return {vx, vy};
  }

  bool finite() const { return x.allFinite() && y.allFinite(); }
};

struct InputError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct StateError : std::logic_error {
  using std::logic_error::logic_error;
};

struct DegenerateDataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct FormatError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Signals a violated mathematical invariant (a bug, not bad input).
struct InternalInvariantError : std::logic_error {
  using std::logic_error::logic_error;
};

/// Derives decorrelated sub-seeds from a master seed (splitmix64 step).
inline std::uint64_t split_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace skit
