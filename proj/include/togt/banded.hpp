#pragma once

// Band LU factorization with partial pivoting restricted to the band
// (the dgbtrf/dgbtrs scheme). Pivoting widens the upper band from q to p + q.

#include "togt/common.hpp"

#include <cmath>
#include <utility>
#include <vector>

namespace togt {

class BandedLU {
 public:
  BandedLU() = default;

  /// n x n matrix with lower bandwidth p and upper bandwidth q.
  BandedLU(int n, int p, int q) { reset(n, p, q); }

  void reset(int n, int p, int q) {
    n_ = n;
    p_ = p;
    q_ = q;
    width_ = 2 * p + q + 1;
    data_.assign(static_cast<std::size_t>(n) * static_cast<std::size_t>(width_), 0.0);
    pivots_.assign(static_cast<std::size_t>(n), 0);
    factored_ = false;
  }

  int size() const { return n_; }
  int lower() const { return p_; }
  int upper() const { return q_; }

  /// Entry (i, j) with -p <= j - i <= q before factorization.
  double &operator()(int i, int j) { return data_[index(i, j)]; }
  double operator()(int i, int j) const { return data_[index(i, j)]; }

  bool in_band(int i, int j) const { return j - i >= -p_ && j - i <= p_ + q_; }

  void factorize() {
    for (int k = 0; k < n_; ++k) {
      const int last_row = std::min(n_ - 1, k + p_);
      int piv = k;
      double best = std::abs((*this)(k, k));
      for (int i = k + 1; i <= last_row; ++i) {
        const double v = std::abs((*this)(i, k));
        if (v > best) {
          best = v;
          piv = i;
        }
      }
      if (best == 0.0) throw Error(ErrorCode::SingularSystem, "banded matrix is singular");
      pivots_[static_cast<std::size_t>(k)] = piv;
      const int last_col = std::min(n_ - 1, k + p_ + q_);
      if (piv != k) {
        for (int j = k; j <= last_col; ++j) std::swap((*this)(k, j), (*this)(piv, j));
      }
      const double inv = 1.0 / (*this)(k, k);
      for (int i = k + 1; i <= last_row; ++i) {
        double &lik = (*this)(i, k);
        if (lik == 0.0) continue;
        lik *= inv;
        for (int j = k + 1; j <= last_col; ++j) (*this)(i, j) -= lik * (*this)(k, j);
      }
    }
    factored_ = true;
  }

  /// Solves A X = B in place (B is n x m).
  void solve(MatX &B) const {
    check(B);
    for (int k = 0; k < n_; ++k) {
      const int piv = pivots_[static_cast<std::size_t>(k)];
      if (piv != k) B.row(k).swap(B.row(piv));
      const int last_row = std::min(n_ - 1, k + p_);
      for (int i = k + 1; i <= last_row; ++i) B.row(i) -= (*this)(i, k) * B.row(k);
    }
    for (int k = n_ - 1; k >= 0; --k) {
      const int last_col = std::min(n_ - 1, k + p_ + q_);
      for (int j = k + 1; j <= last_col; ++j) B.row(k) -= (*this)(k, j) * B.row(j);
      B.row(k) /= (*this)(k, k);
    }
  }

  /// Solves A^T X = B in place.
  void solve_transpose(MatX &B) const {
    check(B);
    for (int k = 0; k < n_; ++k) {
      const int first_row = std::max(0, k - p_ - q_);
      for (int i = first_row; i < k; ++i) B.row(k) -= (*this)(i, k) * B.row(i);
      B.row(k) /= (*this)(k, k);
    }
    for (int k = n_ - 2; k >= 0; --k) {
      const int last_row = std::min(n_ - 1, k + p_);
      for (int i = k + 1; i <= last_row; ++i) B.row(k) -= (*this)(i, k) * B.row(i);
      const int piv = pivots_[static_cast<std::size_t>(k)];
      if (piv != k) B.row(k).swap(B.row(piv));
    }
  }

 private:
  std::size_t index(int i, int j) const {
    // row-major band: column offset j - i + p in [0, 2p + q]
    return static_cast<std::size_t>(i) * static_cast<std::size_t>(width_) +
           static_cast<std::size_t>(j - i + p_);
  }

  void check(const MatX &B) const {
    if (!factored_) throw Error(ErrorCode::InvalidArgument, "BandedLU not factorized");
    if (B.rows() != n_) throw Error(ErrorCode::DimensionMismatch, "right-hand side rows");
  }

  int n_ = 0, p_ = 0, q_ = 0, width_ = 1;
  std::vector<double> data_;
  std::vector<int> pivots_;
  bool factored_ = false;
};

}  // namespace togt
