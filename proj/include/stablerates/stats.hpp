#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

namespace stable::stats {

// Kahan-compensated sum.
inline double csum(std::span<const double> xs) {
  double s = 0.0, c = 0.0;
  for (double x : xs) {
    double y = x - c;
    double t = s + y;
    c = (t - s) - y;
    s = t;
  }
  return s;
}

inline double mean(std::span<const double> xs) {
  if (xs.empty()) throw std::invalid_argument("mean: empty sample");
  return csum(xs) / static_cast<double>(xs.size());
}

struct MeanSe {
  double mean = 0.0;
  double se = 0.0;
  std::size_t count = 0;
};

inline MeanSe mean_se(std::span<const double> xs) {
  MeanSe r;
  r.count = xs.size();
  if (r.count == 0) throw std::invalid_argument("mean_se: empty sample");
  r.mean = mean(xs);
  if (r.count == 1) return r;
  double s = 0.0, c = 0.0;
  for (double x : xs) {
    double d = (x - r.mean) * (x - r.mean) - c;
    double t = s + d;
    c = (t - s) - d;
    s = t;
  }
  r.se = std::sqrt(s / (static_cast<double>(r.count) - 1.0) / static_cast<double>(r.count));
  return r;
}

inline double variance(std::span<const double> xs) {
  const MeanSe r = mean_se(xs);
  return r.se * r.se * static_cast<double>(r.count);
}

// One-pass mean/M2 accumulator with associative merge (Chan et al.).
class Accumulator {
 public:
  void add(double x) {
    ++n_;
    const double d = x - mean_;
    mean_ += d / static_cast<double>(n_);
    m2_ += d * (x - mean_);
  }
  void merge(const Accumulator& o) {
    if (o.n_ == 0) return;
    if (n_ == 0) { *this = o; return; }
    const double d = o.mean_ - mean_;
    const std::size_t n = n_ + o.n_;
    m2_ += o.m2_ + d * d * static_cast<double>(n_) * static_cast<double>(o.n_) / static_cast<double>(n);
    mean_ += d * static_cast<double>(o.n_) / static_cast<double>(n);
    n_ = n;
  }
  std::size_t count() const { return n_; }
  double mean() const { return mean_; }
  double variance() const { return n_ > 1 ? m2_ / static_cast<double>(n_ - 1) : 0.0; }
  double se() const { return n_ > 1 ? std::sqrt(variance() / static_cast<double>(n_)) : 0.0; }

 private:
  std::size_t n_ = 0;
  double mean_ = 0.0;
  double m2_ = 0.0;
};

}  // namespace stable::stats
