#pragma once

#include <span>

#include "emgnn/sparse.hpp"
#include "emgnn/tensor.hpp"

// Dense and sparse compute kernels.
//
// Every kernel exists twice: a serial reference in `serial` and an OpenMP
// version in `omp`. Both accumulate each output element over the same index
// sequence, so their results are bit-identical for any thread count. The
// unqualified functions dispatch on the configured thread count.
namespace emgnn::kernels {

void set_num_threads(int threads);
int num_threads();

namespace serial {
/// out = a * b
void matmul(const Tensor& a, const Tensor& b, Tensor& out);
/// out = a * b^T
void matmul_nt(const Tensor& a, const Tensor& b, Tensor& out);
/// out = a^T * b
void matmul_tn(const Tensor& a, const Tensor& b, Tensor& out);
/// out[r] = sum_k w[k] * h[col(k)] over the entries of row r.
void spmm(const SparseStructure& s, std::span<const double> w, const Tensor& h, Tensor& out);
/// dh[c] = sum_k w[k] * g[row(k)] over entries k reading column c.
void spmm_grad_h(const SparseStructure& s, std::span<const double> w, const Tensor& g, Tensor& dh);
/// dw[k] = <g[row(k)], h[col(k)]>
void spmm_grad_w(const SparseStructure& s, const Tensor& g, const Tensor& h, std::span<double> dw);
}  // namespace serial

namespace omp {
void matmul(const Tensor& a, const Tensor& b, Tensor& out);
void matmul_nt(const Tensor& a, const Tensor& b, Tensor& out);
void matmul_tn(const Tensor& a, const Tensor& b, Tensor& out);
void spmm(const SparseStructure& s, std::span<const double> w, const Tensor& h, Tensor& out);
void spmm_grad_h(const SparseStructure& s, std::span<const double> w, const Tensor& g, Tensor& dh);
void spmm_grad_w(const SparseStructure& s, const Tensor& g, const Tensor& h, std::span<double> dw);
}  // namespace omp

void matmul(const Tensor& a, const Tensor& b, Tensor& out);
void matmul_nt(const Tensor& a, const Tensor& b, Tensor& out);
void matmul_tn(const Tensor& a, const Tensor& b, Tensor& out);
void spmm(const SparseStructure& s, std::span<const double> w, const Tensor& h, Tensor& out);
void spmm_grad_h(const SparseStructure& s, std::span<const double> w, const Tensor& g, Tensor& dh);
void spmm_grad_w(const SparseStructure& s, const Tensor& g, const Tensor& h, std::span<double> dw);

}  // namespace emgnn::kernels
