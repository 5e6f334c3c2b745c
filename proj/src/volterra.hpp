#pragma once

// Exact online causal convolution for Volterra recursions.
//
// For each step i the recursion needs c_i = sum_{j<i} k[i-j] z_j before it
// can produce z_i. Direct summation costs O(N^2) per path. Here the step
// range is split recursively: once the left half [l, mid) of a block is
// final, its contribution to the right half [mid, r) is one real FFT
// convolution of size r - l, and the recursion bottoms out in small blocks
// that are summed directly. The result equals direct summation up to
// floating-point rounding; total cost is O(N log^2 N).
//
// Paths are processed in chunks, stored step-major ([step][path]) so that
// every transform is a strided batch over the chunk.

#include <fftw3.h>

#include <algorithm>
#include <complex>
#include <cstddef>
#include <map>
#include <memory>
#include <mutex>
#include <vector>

#include "zlab/error.hpp"

namespace zlab::detail {

inline std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

struct FftwFree {
  void operator()(void* p) const { fftw_free(p); }
};

template <class T>
using FftwBuffer = std::unique_ptr<T[], FftwFree>;

template <class T>
FftwBuffer<T> fftw_alloc(std::size_t n) {
  void* p = fftw_malloc(sizeof(T) * std::max<std::size_t>(n, 1));
  if (!p) throw ResourceError("out of memory allocating convolution buffers");
  return FftwBuffer<T>(static_cast<T*>(p));
}

class CausalConvolver {
 public:
  static constexpr std::size_t kBlock = 128;

  // kernel[d] weights lag d >= 1; kernel[0] is ignored.
  CausalConvolver(std::vector<double> kernel, std::size_t n_steps)
      : kernel_(std::move(kernel)), n_(n_steps) {
    kernel_.resize(std::max(kernel_.size(), n_ + 1), 0.0);
    kernel_[0] = 0.0;
    padded_ = 1;
    while (padded_ < n_) padded_ *= 2;
    block_ = std::min(kBlock, padded_);
    zero_ = std::all_of(kernel_.begin(), kernel_.end(), [](double w) { return w == 0.0; });
    if (!zero_) build_spectra();
  }

  ~CausalConvolver() {
    std::lock_guard<std::mutex> lock(fftw_planner_mutex());
    for (auto& [key, plans] : plans_) {
      for (auto& pl : plans) {
        fftw_destroy_plan(pl.forward);
        fftw_destroy_plan(pl.backward);
      }
    }
  }

  CausalConvolver(const CausalConvolver&) = delete;
  CausalConvolver& operator=(const CausalConvolver&) = delete;

  std::size_t steps() const { return n_; }
  std::size_t padded_steps() const { return padded_; }

  // Creates the FFTW plans for chunks of `paths` paths. Must be called
  // before run() is used concurrently with that chunk size.
  void prepare(std::size_t paths) {
    if (zero_ || padded_ <= block_) return;
    std::lock_guard<std::mutex> lock(fftw_planner_mutex());
    if (plans_.count(paths)) return;
    std::vector<LevelPlans> levels;
    auto in = fftw_alloc<double>(padded_ * paths);
    auto spec = fftw_alloc<fftw_complex>((padded_ / 2 + 1) * paths);
    for (std::size_t S = 2 * block_; S <= padded_; S *= 2) {
      const int n = static_cast<int>(S);
      const int howmany = static_cast<int>(paths);
      const int stride = static_cast<int>(paths);
      LevelPlans pl;
      pl.size = S;
      pl.forward = fftw_plan_many_dft_r2c(1, &n, howmany, in.get(), nullptr, stride, 1, spec.get(), nullptr, stride,
                                          1, FFTW_ESTIMATE | FFTW_UNALIGNED);
      pl.backward = fftw_plan_many_dft_c2r(1, &n, howmany, spec.get(), nullptr, stride, 1, in.get(), nullptr, stride,
                                           1, FFTW_ESTIMATE | FFTW_UNALIGNED);
      if (!pl.forward || !pl.backward) throw NumericalError("FFTW planning failed");
      levels.push_back(pl);
    }
    plans_.emplace(paths, std::move(levels));
  }

  // Per-thread scratch, reusable across chunks.
  struct Workspace {
    std::size_t paths = 0;
    FftwBuffer<double> z, conv, tmp;
    FftwBuffer<fftw_complex> spec;
  };

  Workspace make_workspace(std::size_t paths) const {
    Workspace ws;
    ws.paths = paths;
    ws.z = fftw_alloc<double>(padded_ * paths);
    ws.conv = fftw_alloc<double>(padded_ * paths);
    if (!zero_ && padded_ > block_) {
      ws.tmp = fftw_alloc<double>(padded_ * paths);
      ws.spec = fftw_alloc<fftw_complex>((padded_ / 2 + 1) * paths);
    }
    return ws;
  }

  // Runs the recursion for one chunk. step(i, conv_row, z_row) receives the
  // P convolution values for step i and must write the P values z_i.
  template <class Step>
  void run(Workspace& ws, std::size_t paths, Step&& step) const {
    if (paths > ws.paths) throw DomainError("workspace too small for chunk");
    std::fill_n(ws.z.get(), padded_ * paths, 0.0);
    std::fill_n(ws.conv.get(), padded_ * paths, 0.0);
    const std::vector<LevelPlans>* levels = nullptr;
    if (!zero_ && padded_ > block_) {
      auto it = plans_.find(paths);
      if (it == plans_.end()) throw DomainError("convolution plans not prepared for this chunk size");
      levels = &it->second;
    }
    solve(ws, paths, levels, 0, padded_, step);
  }

 private:
  struct LevelPlans {
    std::size_t size = 0;
    fftw_plan forward = nullptr;
    fftw_plan backward = nullptr;
  };

  void build_spectra() {
    for (std::size_t S = 2 * block_; S <= padded_; S *= 2) {
      auto buf = fftw_alloc<double>(S);
      auto out = fftw_alloc<fftw_complex>(S / 2 + 1);
      for (std::size_t p = 0; p < S; ++p) buf[p] = p < kernel_.size() ? kernel_[p] : 0.0;
      {
        std::lock_guard<std::mutex> lock(fftw_planner_mutex());
        fftw_plan pl = fftw_plan_dft_r2c_1d(static_cast<int>(S), buf.get(), out.get(), FFTW_ESTIMATE);
        fftw_execute(pl);
        fftw_destroy_plan(pl);
      }
      std::vector<std::complex<double>> spec(S / 2 + 1);
      const double scale = 1.0 / static_cast<double>(S);
      for (std::size_t f = 0; f <= S / 2; ++f) spec[f] = {out[f][0] * scale, out[f][1] * scale};
      spectra_.emplace(S, std::move(spec));
    }
  }

  template <class Step>
  void solve(Workspace& ws, std::size_t P, const std::vector<LevelPlans>* levels, std::size_t l, std::size_t r,
             Step& step) const {
    if (l >= n_) return;
    if (r - l <= block_) {
      direct(ws, P, l, std::min(r, n_), step);
      return;
    }
    const std::size_t mid = l + (r - l) / 2;
    solve(ws, P, levels, l, mid, step);
    if (mid < n_ && !zero_) spread(ws, P, *levels, l, mid, r);
    solve(ws, P, levels, mid, r, step);
  }

  template <class Step>
  void direct(Workspace& ws, std::size_t P, std::size_t l, std::size_t e, Step& step) const {
    double* z = ws.z.get();
    double* conv = ws.conv.get();
    for (std::size_t i = l; i < e; ++i) {
      double* ci = conv + i * P;
      if (!zero_) {
        for (std::size_t j = l; j < i; ++j) {
          const double w = kernel_[i - j];
          const double* zj = z + j * P;
          for (std::size_t p = 0; p < P; ++p) ci[p] += w * zj[p];
        }
      }
      step(i, static_cast<const double*>(ci), z + i * P);
    }
  }

  // Adds the contribution of z[l, mid) to conv[mid, r). Rows >= mid of z
  // are still zero, so z[l, r) is already the zero-padded input.
  void spread(Workspace& ws, std::size_t P, const std::vector<LevelPlans>& levels, std::size_t l, std::size_t mid,
              std::size_t r) const {
    const std::size_t S = r - l;
    const LevelPlans* pl = nullptr;
    for (const auto& lv : levels)
      if (lv.size == S) pl = &lv;
    const auto& K = spectra_.at(S);
    fftw_execute_dft_r2c(pl->forward, ws.z.get() + l * P, ws.spec.get());
    fftw_complex* spec = ws.spec.get();
    for (std::size_t f = 0; f <= S / 2; ++f) {
      const double kr = K[f].real(), ki = K[f].imag();
      fftw_complex* row = spec + f * P;
      for (std::size_t p = 0; p < P; ++p) {
        const double xr = row[p][0], xi = row[p][1];
        row[p][0] = xr * kr - xi * ki;
        row[p][1] = xr * ki + xi * kr;
      }
    }
    fftw_execute_dft_c2r(pl->backward, spec, ws.tmp.get());
    const std::size_t end = std::min(r, n_);
    for (std::size_t i = mid; i < end; ++i) {
      double* ci = ws.conv.get() + i * P;
      const double* ti = ws.tmp.get() + (i - l) * P;
      for (std::size_t p = 0; p < P; ++p) ci[p] += ti[p];
    }
  }

  std::vector<double> kernel_;
  std::size_t n_;
  std::size_t padded_ = 1;
  std::size_t block_ = kBlock;
  bool zero_ = false;
  std::map<std::size_t, std::vector<std::complex<double>>> spectra_;
  std::map<std::size_t, std::vector<LevelPlans>> plans_;
};

}  // namespace zlab::detail
