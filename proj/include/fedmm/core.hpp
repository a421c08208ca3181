#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <stdexcept>
#include <vector>

namespace fedmm {

/// Dense real vector. Holds iterates, gradients, estimator states and
/// preconditioner diagonals. Elementwise operations require equal sizes.
class Vector {
 public:
  Vector() = default;
  explicit Vector(std::size_t n, double fill = 0.0) : coords_(n, fill) {}
  Vector(std::initializer_list<double> init) : coords_(init) {}
  explicit Vector(std::vector<double> coords) : coords_(std::move(coords)) {}

  std::size_t size() const { return coords_.size(); }
  bool empty() const { return coords_.empty(); }

  double& operator[](std::size_t i) { return coords_[i]; }
  double operator[](std::size_t i) const { return coords_[i]; }

  std::span<double> span() { return coords_; }
  std::span<const double> span() const { return coords_; }
  const std::vector<double>& coords() const { return coords_; }

  auto begin() { return coords_.begin(); }
  auto end() { return coords_.end(); }
  auto begin() const { return coords_.begin(); }
  auto end() const { return coords_.end(); }

  Vector& operator+=(const Vector& other);
  Vector& operator-=(const Vector& other);
  Vector& operator*=(double s);

  bool all_finite() const;

  friend bool operator==(const Vector&, const Vector&) = default;

 private:
  std::vector<double> coords_;
};

Vector operator+(Vector a, const Vector& b);
Vector operator-(Vector a, const Vector& b);
Vector operator*(double s, Vector v);
Vector operator*(Vector v, double s);

double dot(const Vector& a, const Vector& b);
double norm(const Vector& v);
double norm_sq(const Vector& v);
double dist_sq(const Vector& a, const Vector& b);

/// a + s * b
Vector axpy(const Vector& a, double s, const Vector& b);
/// Elementwise product.
Vector hadamard(const Vector& a, const Vector& b);
/// Concatenation [a; b].
Vector concat(const Vector& a, const Vector& b);

/// Throws std::invalid_argument when sizes differ.
void require_same_size(const Vector& a, const Vector& b, const char* what);

/// Coordinatewise mean, summed in list order (index 0 first). The fixed
/// order makes the result bit-reproducible for a given input order.
Vector vec_mean(std::span<const Vector> vs);

/// Diagonal positive-definite matrix, stored by its diagonal.
class DiagMatrix {
 public:
  /// Throws std::invalid_argument if any entry is not strictly positive
  /// or not finite.
  explicit DiagMatrix(Vector diag);

  static DiagMatrix identity(std::size_t n);

  std::size_t size() const { return diag_.size(); }
  const Vector& diag() const { return diag_; }
  double min_entry() const;
  double max_entry() const;

  friend bool operator==(const DiagMatrix&, const DiagMatrix&) = default;

 private:
  Vector diag_;
};

/// A^{-1} g for diagonal A, i.e. g_i / a_i.
Vector precondition(const DiagMatrix& a, const Vector& g);

/// Per-run oracle and communication bookkeeping. All fields only grow.
struct Counters {
  std::uint64_t sfo_per_client = 0;
  std::uint64_t comm_rounds = 0;
  std::uint64_t local_steps = 0;

  friend bool operator==(const Counters&, const Counters&) = default;
};

}  // namespace fedmm
