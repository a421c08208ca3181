#include "fedmm/core.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace fedmm {

void require_same_size(const Vector& a, const Vector& b, const char* what) {
  if (a.size() != b.size()) {
    throw std::invalid_argument(std::string(what) + ": dimension mismatch (" +
                                std::to_string(a.size()) + " vs " +
                                std::to_string(b.size()) + ")");
  }
}

Vector& Vector::operator+=(const Vector& other) {
  require_same_size(*this, other, "Vector::operator+=");
  for (std::size_t i = 0; i < coords_.size(); ++i) coords_[i] += other[i];
  return *this;
}

Vector& Vector::operator-=(const Vector& other) {
  require_same_size(*this, other, "Vector::operator-=");
  for (std::size_t i = 0; i < coords_.size(); ++i) coords_[i] -= other[i];
  return *this;
}

Vector& Vector::operator*=(double s) {
  for (double& c : coords_) c *= s;
  return *this;
}

bool Vector::all_finite() const {
  return std::all_of(coords_.begin(), coords_.end(),
                     [](double c) { return std::isfinite(c); });
}

Vector operator+(Vector a, const Vector& b) { return a += b; }
Vector operator-(Vector a, const Vector& b) { return a -= b; }
Vector operator*(double s, Vector v) { return v *= s; }
Vector operator*(Vector v, double s) { return v *= s; }

double dot(const Vector& a, const Vector& b) {
  require_same_size(a, b, "dot");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

double norm_sq(const Vector& v) { return dot(v, v); }

double norm(const Vector& v) { return std::sqrt(norm_sq(v)); }

double dist_sq(const Vector& a, const Vector& b) {
  require_same_size(a, b, "dist_sq");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    acc += d * d;
  }
  return acc;
}

Vector axpy(const Vector& a, double s, const Vector& b) {
  require_same_size(a, b, "axpy");
  Vector out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] + s * b[i];
  return out;
}

Vector hadamard(const Vector& a, const Vector& b) {
  require_same_size(a, b, "hadamard");
  Vector out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] * b[i];
  return out;
}

Vector concat(const Vector& a, const Vector& b) {
  std::vector<double> out(a.begin(), a.end());
  out.insert(out.end(), b.begin(), b.end());
  return Vector(std::move(out));
}

Vector vec_mean(std::span<const Vector> vs) {
  if (vs.empty()) throw std::invalid_argument("vec_mean: empty list");
  // Mean of offsets from the first vector, so identical inputs come back
  // bit-exact (a plain sum of K copies divided by K can miss by an ulp).
  const Vector& anchor = vs.front();
  Vector acc(anchor.size());
  for (const Vector& v : vs) {
    require_same_size(acc, v, "vec_mean");
    for (std::size_t i = 0; i < v.size(); ++i) acc[i] += v[i] - anchor[i];
  }
  const double inv = 1.0 / static_cast<double>(vs.size());
  for (std::size_t i = 0; i < acc.size(); ++i) acc[i] = anchor[i] + acc[i] * inv;
  return acc;
}

DiagMatrix::DiagMatrix(Vector diag) : diag_(std::move(diag)) {
  for (std::size_t i = 0; i < diag_.size(); ++i) {
    if (!(diag_[i] > 0.0) || !std::isfinite(diag_[i])) {
      throw std::invalid_argument(
          "DiagMatrix: entry " + std::to_string(i) +
          " is not strictly positive and finite");
    }
  }
}

DiagMatrix DiagMatrix::identity(std::size_t n) { return DiagMatrix(Vector(n, 1.0)); }

double DiagMatrix::min_entry() const {
  return *std::min_element(diag_.begin(), diag_.end());
}

double DiagMatrix::max_entry() const {
  return *std::max_element(diag_.begin(), diag_.end());
}

Vector precondition(const DiagMatrix& a, const Vector& g) {
  require_same_size(a.diag(), g, "precondition");
  Vector out(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double d = a.diag()[i];
    if (!(d > 0.0)) throw std::invalid_argument("precondition: non-positive diagonal");
    out[i] = g[i] / d;
  }
  return out;
}

}  // namespace fedmm
