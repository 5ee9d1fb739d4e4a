#include "emgnn/kernels.hpp"

#include <algorithm>
#include <atomic>
#include <cstddef>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace emgnn::kernels {

namespace {

std::atomic<int> g_threads{1};

// Work below this many multiply-adds stays on the calling thread.
constexpr std::size_t kParallelThreshold = 1u << 15;

void check_matmul(const Tensor& a, const Tensor& b, std::size_t a_inner, std::size_t b_inner,
                  const char* name) {
    if (a_inner != b_inner) {
        throw ConfigError(std::string(name) + ": shape mismatch " + a.shape_string() + " vs " +
                          b.shape_string());
    }
}

void check_spmm(const SparseStructure& s, std::span<const double> w, const Tensor& h) {
    if (w.size() != s.nnz()) throw ConfigError("spmm: weight count does not match structure");
    if (h.rows() != s.cols()) {
        throw ConfigError("spmm: structure has " + std::to_string(s.cols()) +
                          " columns but input has " + std::to_string(h.rows()) + " rows");
    }
}

// Row kernels shared by both variants so the per-element arithmetic is identical.
inline void matmul_row(const Tensor& a, const Tensor& b, Tensor& out, std::size_t i) {
    const std::size_t n = b.cols();
    double* o = out.data() + i * n;
    const double* ar = a.data() + i * a.cols();
    for (std::size_t k = 0; k < a.cols(); ++k) {
        const double aik = ar[k];
        if (aik == 0.0) continue;
        const double* br = b.data() + k * n;
        for (std::size_t j = 0; j < n; ++j) o[j] += aik * br[j];
    }
}

inline void matmul_nt_row(const Tensor& a, const Tensor& b, Tensor& out, std::size_t i) {
    const std::size_t inner = a.cols();
    const double* ar = a.data() + i * inner;
    double* o = out.data() + i * out.cols();
    for (std::size_t j = 0; j < b.rows(); ++j) {
        const double* br = b.data() + j * inner;
        double acc = 0.0;
        for (std::size_t k = 0; k < inner; ++k) acc += ar[k] * br[k];
        o[j] = acc;
    }
}

inline void matmul_tn_row(const Tensor& a, const Tensor& b, Tensor& out, std::size_t i) {
    const std::size_t n = b.cols();
    double* o = out.data() + i * n;
    for (std::size_t r = 0; r < a.rows(); ++r) {
        const double ari = a(r, i);
        if (ari == 0.0) continue;
        const double* br = b.data() + r * n;
        for (std::size_t j = 0; j < n; ++j) o[j] += ari * br[j];
    }
}

inline void spmm_row(const SparseStructure& s, std::span<const double> w, const Tensor& h,
                     Tensor& out, std::size_t r) {
    const std::size_t n = h.cols();
    double* o = out.data() + r * n;
    for (std::size_t k = s.row_begin(r); k < s.row_end(r); ++k) {
        const double wk = w[k];
        const double* hr = h.data() + s.col(k) * n;
        for (std::size_t j = 0; j < n; ++j) o[j] += wk * hr[j];
    }
}

inline void spmm_grad_h_col(const SparseStructure& s, std::span<const double> w, const Tensor& g,
                            Tensor& dh, std::size_t c) {
    const std::size_t n = g.cols();
    double* o = dh.data() + c * n;
    for (std::size_t i = s.col_begin(c); i < s.col_end(c); ++i) {
        const std::size_t k = s.col_entry(i);
        const double wk = w[k];
        const double* gr = g.data() + s.row_of(k) * n;
        for (std::size_t j = 0; j < n; ++j) o[j] += wk * gr[j];
    }
}

inline double spmm_grad_w_entry(const SparseStructure& s, const Tensor& g, const Tensor& h,
                                std::size_t k) {
    const std::size_t n = g.cols();
    const double* gr = g.data() + s.row_of(k) * n;
    const double* hr = h.data() + s.col(k) * n;
    double acc = 0.0;
    for (std::size_t j = 0; j < n; ++j) acc += gr[j] * hr[j];
    return acc;
}

}  // namespace

void set_num_threads(int threads) { g_threads.store(std::max(1, threads)); }

int num_threads() { return g_threads.load(); }

namespace serial {

void matmul(const Tensor& a, const Tensor& b, Tensor& out) {
    check_matmul(a, b, a.cols(), b.rows(), "matmul");
    out = Tensor(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i) matmul_row(a, b, out, i);
}

void matmul_nt(const Tensor& a, const Tensor& b, Tensor& out) {
    check_matmul(a, b, a.cols(), b.cols(), "matmul_nt");
    out = Tensor(a.rows(), b.rows());
    for (std::size_t i = 0; i < a.rows(); ++i) matmul_nt_row(a, b, out, i);
}

void matmul_tn(const Tensor& a, const Tensor& b, Tensor& out) {
    check_matmul(a, b, a.rows(), b.rows(), "matmul_tn");
    out = Tensor(a.cols(), b.cols());
    // Rank-1 updates in ascending r give the same per-element order as the row kernel.
    const std::size_t n = b.cols();
    for (std::size_t r = 0; r < a.rows(); ++r) {
        const double* br = b.data() + r * n;
        for (std::size_t i = 0; i < a.cols(); ++i) {
            const double ari = a(r, i);
            if (ari == 0.0) continue;
            double* o = out.data() + i * n;
            for (std::size_t j = 0; j < n; ++j) o[j] += ari * br[j];
        }
    }
}

void spmm(const SparseStructure& s, std::span<const double> w, const Tensor& h, Tensor& out) {
    check_spmm(s, w, h);
    out = Tensor(s.rows(), h.cols());
    for (std::size_t r = 0; r < s.rows(); ++r) spmm_row(s, w, h, out, r);
}

void spmm_grad_h(const SparseStructure& s, std::span<const double> w, const Tensor& g, Tensor& dh) {
    if (g.rows() != s.rows()) throw ConfigError("spmm_grad_h: gradient rows mismatch");
    dh = Tensor(s.cols(), g.cols());
    const std::size_t n = g.cols();
    // Scatter in ascending entry order; matches the per-column gather of the parallel variant.
    for (std::size_t k = 0; k < s.nnz(); ++k) {
        const double wk = w[k];
        const double* gr = g.data() + s.row_of(k) * n;
        double* o = dh.data() + s.col(k) * n;
        for (std::size_t j = 0; j < n; ++j) o[j] += wk * gr[j];
    }
}

void spmm_grad_w(const SparseStructure& s, const Tensor& g, const Tensor& h, std::span<double> dw) {
    for (std::size_t k = 0; k < s.nnz(); ++k) dw[k] = spmm_grad_w_entry(s, g, h, k);
}

}  // namespace serial

namespace omp {

void matmul(const Tensor& a, const Tensor& b, Tensor& out) {
    check_matmul(a, b, a.cols(), b.rows(), "matmul");
    out = Tensor(a.rows(), b.cols());
    const auto rows = static_cast<std::ptrdiff_t>(a.rows());
#pragma omp parallel for schedule(static) num_threads(num_threads())
    for (std::ptrdiff_t i = 0; i < rows; ++i) matmul_row(a, b, out, static_cast<std::size_t>(i));
}

void matmul_nt(const Tensor& a, const Tensor& b, Tensor& out) {
    check_matmul(a, b, a.cols(), b.cols(), "matmul_nt");
    out = Tensor(a.rows(), b.rows());
    const auto rows = static_cast<std::ptrdiff_t>(a.rows());
#pragma omp parallel for schedule(static) num_threads(num_threads())
    for (std::ptrdiff_t i = 0; i < rows; ++i) matmul_nt_row(a, b, out, static_cast<std::size_t>(i));
}

void matmul_tn(const Tensor& a, const Tensor& b, Tensor& out) {
    check_matmul(a, b, a.rows(), b.rows(), "matmul_tn");
    out = Tensor(a.cols(), b.cols());
    const auto rows = static_cast<std::ptrdiff_t>(a.cols());
#pragma omp parallel for schedule(static) num_threads(num_threads())
    for (std::ptrdiff_t i = 0; i < rows; ++i) matmul_tn_row(a, b, out, static_cast<std::size_t>(i));
}

void spmm(const SparseStructure& s, std::span<const double> w, const Tensor& h, Tensor& out) {
    check_spmm(s, w, h);
    out = Tensor(s.rows(), h.cols());
    const auto rows = static_cast<std::ptrdiff_t>(s.rows());
#pragma omp parallel for schedule(static) num_threads(num_threads())
    for (std::ptrdiff_t r = 0; r < rows; ++r) spmm_row(s, w, h, out, static_cast<std::size_t>(r));
}

void spmm_grad_h(const SparseStructure& s, std::span<const double> w, const Tensor& g, Tensor& dh) {
    if (g.rows() != s.rows()) throw ConfigError("spmm_grad_h: gradient rows mismatch");
    dh = Tensor(s.cols(), g.cols());
    const auto cols = static_cast<std::ptrdiff_t>(s.cols());
#pragma omp parallel for schedule(static) num_threads(num_threads())
    for (std::ptrdiff_t c = 0; c < cols; ++c) spmm_grad_h_col(s, w, g, dh, static_cast<std::size_t>(c));
}

void spmm_grad_w(const SparseStructure& s, const Tensor& g, const Tensor& h, std::span<double> dw) {
    const auto nnz = static_cast<std::ptrdiff_t>(s.nnz());
#pragma omp parallel for schedule(static) num_threads(num_threads())
    for (std::ptrdiff_t k = 0; k < nnz; ++k) {
        dw[static_cast<std::size_t>(k)] = spmm_grad_w_entry(s, g, h, static_cast<std::size_t>(k));
    }
}

}  // namespace omp

namespace {
bool go_parallel(std::size_t work) { return num_threads() > 1 && work >= kParallelThreshold; }
}  // namespace

void matmul(const Tensor& a, const Tensor& b, Tensor& out) {
    if (go_parallel(a.rows() * a.cols() * b.cols())) return omp::matmul(a, b, out);
    serial::matmul(a, b, out);
}

void matmul_nt(const Tensor& a, const Tensor& b, Tensor& out) {
    if (go_parallel(a.rows() * a.cols() * b.rows())) return omp::matmul_nt(a, b, out);
    serial::matmul_nt(a, b, out);
}

void matmul_tn(const Tensor& a, const Tensor& b, Tensor& out) {
    if (go_parallel(a.rows() * a.cols() * b.cols())) return omp::matmul_tn(a, b, out);
    serial::matmul_tn(a, b, out);
}

void spmm(const SparseStructure& s, std::span<const double> w, const Tensor& h, Tensor& out) {
    if (go_parallel(s.nnz() * h.cols())) return omp::spmm(s, w, h, out);
    serial::spmm(s, w, h, out);
}

void spmm_grad_h(const SparseStructure& s, std::span<const double> w, const Tensor& g, Tensor& dh) {
    if (go_parallel(s.nnz() * g.cols())) return omp::spmm_grad_h(s, w, g, dh);
    serial::spmm_grad_h(s, w, g, dh);
}

void spmm_grad_w(const SparseStructure& s, const Tensor& g, const Tensor& h, std::span<double> dw) {
    if (go_parallel(s.nnz() * g.cols())) return omp::spmm_grad_w(s, g, h, dw);
    serial::spmm_grad_w(s, g, h, dw);
}

}  // namespace emgnn::kernels
