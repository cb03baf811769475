#ifndef AVSAL_GEMM_HPP
#define AVSAL_GEMM_HPP

#include <cstdint>

#include <Eigen/Core>

namespace avsal {

namespace detail {

template <typename S>
using MatMap = Eigen::Map<Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
template <typename S>
using ConstMatMap = Eigen::Map<const Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

}  // namespace detail

// C[m,n] = A[m,k] B[k,n]   (+= when accumulate)
template <typename S>
void gemm_nn(std::int64_t m, std::int64_t n, std::int64_t k, const S* A, const S* B, S* C, bool accumulate) {
  detail::ConstMatMap<S> a(A, m, k), b(B, k, n);
  detail::MatMap<S> c(C, m, n);
  if (accumulate)
    c.noalias() += a * b;
  else
    c.noalias() = a * b;
}

// C[m,n] = A[m,k] B[n,k]^T
template <typename S>
void gemm_nt(std::int64_t m, std::int64_t n, std::int64_t k, const S* A, const S* B, S* C, bool accumulate) {
  detail::ConstMatMap<S> a(A, m, k), b(B, n, k);
  detail::MatMap<S> c(C, m, n);
  if (accumulate)
    c.noalias() += a * b.transpose();
  else
    c.noalias() = a * b.transpose();
}

// C[m,n] = A[k,m]^T B[k,n]
template <typename S>
void gemm_tn(std::int64_t m, std::int64_t n, std::int64_t k, const S* A, const S* B, S* C, bool accumulate) {
  detail::ConstMatMap<S> a(A, k, m), b(B, k, n);
  detail::MatMap<S> c(C, m, n);
  if (accumulate)
    c.noalias() += a.transpose() * b;
  else
    c.noalias() = a.transpose() * b;
}

}  // namespace avsal

#endif  // AVSAL_GEMM_HPP
