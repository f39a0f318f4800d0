// Independent reference implementations used by the unit and acceptance
// tests. Deliberately naive: plain loops, double precision, no shared helpers
// from the library beyond its data types.
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <numeric>
#include <set>
#include <string>
#include <vector>

#include "coverid/chroma.hpp"
#include "coverid/nn/tensor.hpp"
#include "coverid/random.hpp"

namespace oracle {

using coverid::ChromaSequence;
using coverid::Rng;

// Random chroma with unit (or, with probability `zero_prob`, zero) columns.
inline ChromaSequence random_chroma(Rng& rng, Eigen::Index length, double zero_prob = 0.05, std::string id = {}) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  ChromaSequence c;
  c.song_id = std::move(id);
  c.frames.setZero(12, length);
  for (Eigen::Index l = 0; l < length; ++l) {
    if (u(rng) < zero_prob) continue;
    double norm = 0.0;
    std::array<double, 12> v{};
    for (int p = 0; p < 12; ++p) {
      v[p] = u(rng) * u(rng);
      norm += v[p] * v[p];
    }
    norm = std::sqrt(norm);
    for (int p = 0; p < 12; ++p) c.frames(p, l) = static_cast<float>(v[p] / norm);
  }
  return c;
}

inline std::array<double, 12> profile(const ChromaSequence& c) {
  std::array<double, 12> g{};
  for (Eigen::Index l = 0; l < c.length(); ++l) {
    for (int p = 0; p < 12; ++p) g[p] += c.frames(p, l);
  }
  double norm = 0.0;
  for (auto& x : g) {
    x /= static_cast<double>(c.length());
    norm += x * x;
  }
  norm = std::sqrt(norm);
  if (norm > 0) {
    for (auto& x : g) x /= norm;
  }
  return g;
}

// Exhaustive search: build every rotation explicitly and take the dot.
template <typename V>
int oti(const V& a, const V& b) {
  int best = 0;
  double best_score = -1.0;
  for (int k = 0; k < 12; ++k) {
    double rotated[12];
    for (int c = 0; c < 12; ++c) rotated[(c + k) % 12] = double(b[c]);
    double s = 0.0;
    for (int j = 0; j < 12; ++j) s += double(a[j]) * rotated[j];
    if (k == 0 || s > best_score) {
      best_score = s;
      best = k;
    }
  }
  return best;
}

// S for a raw pair, written out loop by loop: OTI, rotation, first 180
// frames (zero-padded), Euclidean distances, then the normalized similarity.
inline std::vector<std::vector<double>> similarity(const ChromaSequence& a, const ChromaSequence& b, int frames = 180,
                                                   double* peak_out = nullptr) {
  std::array<float, 12> ga{}, gb{};
  const auto pa = profile(a), pb = profile(b);
  for (int p = 0; p < 12; ++p) {
    ga[p] = static_cast<float>(pa[p]);
    gb[p] = static_cast<float>(pb[p]);
  }
  const int k = oti(ga, gb);
  const auto frame = [&](const ChromaSequence& c, int l, int p, int shift) -> double {
    if (l >= c.length()) return 0.0;
    return c.frames((p - shift + 12) % 12, l);
  };
  std::vector<std::vector<double>> d(frames, std::vector<double>(frames, 0.0));
  double peak = 0.0;
  for (int l = 0; l < frames; ++l) {
    for (int m = 0; m < frames; ++m) {
      double s = 0.0;
      for (int p = 0; p < 12; ++p) {
        const double diff = frame(a, l, p, 0) - frame(b, m, p, k);
        s += diff * diff;
      }
      d[l][m] = std::sqrt(s);
      peak = std::max(peak, d[l][m]);
    }
  }
  for (auto& row : d) {
    for (auto& x : row) x = peak > 0 ? (peak - x) / peak : 1.0;
  }
  if (peak_out) *peak_out = peak;
  return d;
}

// Trainable parameter count of the standard stack from layer arithmetic alone.
inline long long standard_parameter_count() {
  const auto conv = [](long long in, long long out, long long k) { return out * (in * k * k + 1); };
  const auto bn = [](long long c) { return 2 * c; };
  const auto dense = [](long long in, long long out) { return out * (in + 1); };
  long long total = conv(1, 32, 5) + conv(32, 32, 5) + bn(32);
  long long channels = 32;
  long long side = 180 / 2;
  for (int block = 0; block < 4; ++block) {
    total += conv(channels, 32, 3) + conv(32, 16, 3) + bn(16);
    channels = 16;
    side /= 2;
  }
  total += dense(channels * side * side, 256) + dense(256, 2);
  return total;
}

// --- retrieval metrics over a ranked id list -------------------------------

inline double hits_top10(const std::vector<std::string>& ranked, const std::set<std::string>& rel) {
  double h = 0;
  for (std::size_t i = 0; i < ranked.size() && i < 10; ++i) h += rel.count(ranked[i]) ? 1 : 0;
  return h;
}

// Precision recomputed from scratch at every relevant position.
inline double average_precision(const std::vector<std::string>& ranked, const std::set<std::string>& rel) {
  double sum = 0.0;
  for (std::size_t i = 0; i < ranked.size(); ++i) {
    if (!rel.count(ranked[i])) continue;
    double relevant_so_far = 0;
    for (std::size_t j = 0; j <= i; ++j) relevant_so_far += rel.count(ranked[j]) ? 1 : 0;
    sum += relevant_so_far / double(i + 1);
  }
  return sum / double(rel.size());
}

inline double first_rank(const std::vector<std::string>& ranked, const std::set<std::string>& rel) {
  for (std::size_t i = 0; i < ranked.size(); ++i) {
    if (rel.count(ranked[i])) return double(i + 1);
  }
  return NAN;
}

// --- finite differences -------------------------------------------------------

// Central differences of f with respect to every element of `x` (restored
// afterwards).
inline Eigen::VectorXd numeric_gradient(Eigen::VectorXd& x, const std::function<double()>& f, double h = 1e-5) {
  Eigen::VectorXd g(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double saved = x[i];
    x[i] = saved + h;
    const double up = f();
    x[i] = saved - h;
    const double down = f();
    x[i] = saved;
    g[i] = (up - down) / (2 * h);
  }
  return g;
}

// ||a - n|| / max(||a||, ||n||); zero when both vanish.
inline double relative_error(const Eigen::VectorXd& analytic, const Eigen::VectorXd& numeric) {
  const double scale = std::max(analytic.norm(), numeric.norm());
  if (scale < 1e-12) return 0.0;
  return (analytic - numeric).norm() / scale;
}

}  // namespace oracle
