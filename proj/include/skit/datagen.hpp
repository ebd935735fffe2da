#pragma once

#include <cmath>
#include <fstream>
#include <functional>
#include <memory>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "skit/common.hpp"

namespace skit {

/// A seeded observation source. Streams are single-consumer; distinct seeds
/// give independent, reproducible streams.
using ObservationStream = std::function<PairedObservation()>;

/// Linear Gaussian model: Y = beta X + eps with X, eps ~ N(0,1).
inline ObservationStream gaussian_stream(double beta, std::uint64_t seed) {
  auto rng = std::make_shared<std::mt19937_64>(seed);
  return [rng, beta]() {
    std::normal_distribution<double> normal(0.0, 1.0);
    const double x = normal(*rng);
    const double eps = normal(*rng);
    return PairedObservation::scalar(x, beta * x + eps);
  };
}

/// First two coordinates of a uniform draw on the unit sphere S^d in R^{d+1}:
/// dependent but linearly uncorrelated.
inline ObservationStream spherical_stream(int d, std::uint64_t seed) {
  if (d < 2) throw InputError("spherical_stream: d must be >= 2");
  auto rng = std::make_shared<std::mt19937_64>(seed);
  return [rng, d]() {
    std::normal_distribution<double> normal(0.0, 1.0);
    Vector u(d + 1);
    double norm2;
    do {
      for (int i = 0; i <= d; ++i) u(i) = normal(*rng);
      norm2 = u.squaredNorm();
    } while (norm2 <= 0.0);
    u /= std::sqrt(norm2);
    return PairedObservation::scalar(u(0), u(1));
  };
}

/// Density (1/4pi^2)(1 + sin(wx) sin(wy)) on [-pi,pi]^2 via rejection
/// sampling with a uniform proposal; acceptance probability is exactly 1/2.
inline ObservationStream hard_to_detect_stream(double w, std::uint64_t seed) {
  if (w < 0.0) throw InputError("hard_to_detect_stream: w must be >= 0");
  auto rng = std::make_shared<std::mt19937_64>(seed);
  return [rng, w]() {
    std::uniform_real_distribution<double> box(-M_PI, M_PI);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    for (;;) {
      const double x = box(*rng);
      const double y = box(*rng);
      const double accept = 0.5 * (1.0 + std::sin(w * x) * std::sin(w * y));
      if (unif(*rng) < accept) return PairedObservation::scalar(x, y);
    }
  };
}

/// Drifting-mean pairs: both observations of pair t share offsets
/// (2c sin t, 3c sin t); the noise (W, V) is jointly Gaussian with
/// correlation rho and drawn fresh per observation. rho = 0 is the
/// instantaneous-independence null despite the visible common drift.
inline ObservationStream drift_sin_stream(double rho, double c, std::uint64_t seed) {
  if (!(rho >= -1.0 && rho <= 1.0)) throw InputError("drift_sin_stream: rho must be in [-1,1]");
  auto rng = std::make_shared<std::mt19937_64>(seed);
  auto index = std::make_shared<long>(0);
  return [rng, index, rho, c]() {
    std::normal_distribution<double> normal(0.0, 1.0);
    const long i = (*index)++;
    const double t = static_cast<double>(i / 2 + 1);
    const double w = normal(*rng);
    const double v = rho * w + std::sqrt(1.0 - rho * rho) * normal(*rng);
    return PairedObservation::scalar(2.0 * c * std::sin(t) + w,
                                     3.0 * c * std::sin(t) + v);
  };
}

/// Gaussian model whose beta ramps from 0 to 0.1 in 0.02 increments over
/// blocks of `block_size` observations, then holds at 0.1.
inline ObservationStream drift_beta_stream(long block_size, std::uint64_t seed) {
  if (block_size < 1) throw InputError("drift_beta_stream: block_size must be >= 1");
  auto rng = std::make_shared<std::mt19937_64>(seed);
  auto index = std::make_shared<long>(0);
  return [rng, index, block_size]() {
    std::normal_distribution<double> normal(0.0, 1.0);
    const long i = (*index)++;
    const double beta = 0.02 * static_cast<double>(std::min<long>(i / block_size, 5));
    const double x = normal(*rng);
    const double eps = normal(*rng);
    return PairedObservation::scalar(x, beta * x + eps);
  };
}

/// Reads paired observations from a CSV file with a header row. The x and y
/// coordinates are taken from the named columns, in the given order.
class CsvStream {
 public:
  CsvStream(const std::string& path, std::vector<std::string> x_cols,
            std::vector<std::string> y_cols)
      : in_(path), path_(path) {
    if (!in_) throw FormatError("cannot open CSV file: " + path);
    std::string header;
    if (!std::getline(in_, header)) throw FormatError(path + ": empty file");
    const auto names = split(header);
    x_idx_ = resolve(names, x_cols);
    y_idx_ = resolve(names, y_cols);
  }

  /// Returns false at EOF; throws FormatError with the row index on bad rows.
  bool next(PairedObservation& out) {
    std::string line;
    while (std::getline(in_, line)) {
      ++row_;
      if (line.empty()) continue;
      const auto cells = split(line);
      out.x = pick(cells, x_idx_);
      out.y = pick(cells, y_idx_);
      return true;
    }
    return false;
  }

  std::vector<PairedObservation> read_all() {
    std::vector<PairedObservation> all;
    PairedObservation z;
    while (next(z)) all.push_back(z);
    return all;
  }

 private:
  static std::vector<std::string> split(const std::string& line) {
    std::vector<std::string> out;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) out.push_back(cell);
    return out;
  }

  std::vector<std::size_t> resolve(const std::vector<std::string>& names,
                                   const std::vector<std::string>& wanted) const {
    std::vector<std::size_t> idx;
    for (const auto& w : wanted) {
      bool found = false;
      for (std::size_t i = 0; i < names.size(); ++i) {
        if (names[i] == w) {
          idx.push_back(i);
          found = true;
          break;
        }
      }
      if (!found) throw FormatError(path_ + ": no column named '" + w + "'");
    }
    return idx;
  }

  Vector pick(const std::vector<std::string>& cells,
              const std::vector<std::size_t>& idx) const {
    Vector v(static_cast<Eigen::Index>(idx.size()));
    for (std::size_t i = 0; i < idx.size(); ++i) {
      if (idx[i] >= cells.size()) {
        throw FormatError(path_ + ": row " + std::to_string(row_) + " is too short");
      }
      try {
        std::size_t pos = 0;
        v(static_cast<Eigen::Index>(i)) = std::stod(cells[idx[i]], &pos);
      } catch (const std::exception&) {
        throw FormatError(path_ + ": row " + std::to_string(row_) +
                          ": cannot parse '" + cells[idx[i]] + "'");
      }
    }
    return v;
  }

  std::ifstream in_;
  std::string path_;
  long row_{0};
  std::vector<std::size_t> x_idx_, y_idx_;
};

}  // namespace skit
