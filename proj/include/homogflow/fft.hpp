#pragma once

#include <fftw3.h>

#include <array>
#include <complex>
#include <map>
#include <mutex>
#include <stdexcept>
#include <vector>

namespace homogflow {

/// Thin wrapper over FFTW. Plans are cached per (transform, size) and
/// created under a mutex (FFTW planning is not thread safe, execution on
/// distinct arrays is). All plans use FFTW_ESTIMATE | FFTW_UNALIGNED so that
/// results are run-to-run deterministic and new-array execution is legal.
class FftEngine {
 public:
  static FftEngine& instance() {
    static FftEngine e;
    return e;
  }

  /// In-place 2D complex DFT, sign -1 (forward) or +1 (backward, unnormalized).
  void dft2(int n0, int n1, std::complex<double>* data, int sign) {
    fftw_plan p = plan_dft(n0, n1, sign);
    fftw_execute_dft(p, reinterpret_cast<fftw_complex*>(data),
                     reinterpret_cast<fftw_complex*>(data));
  }

  /// In-place 2D DST-I (RODFT00) on an m0 x m1 array. Applying it twice
  /// multiplies the input by 4 (m0+1)(m1+1).
  void dst1_2d(int m0, int m1, double* data) {
    fftw_plan p = plan_r2r(m0, m1, FFTW_RODFT00);
    fftw_execute_r2r(p, data, data);
  }

  /// In-place 2D DCT-I (REDFT00) on an m0 x m1 array (m >= 2). Applying it
  /// twice multiplies the input by 4 (m0-1)(m1-1).
  void dct1_2d(int m0, int m1, double* data) {
    fftw_plan p = plan_r2r(m0, m1, FFTW_REDFT00);
    fftw_execute_r2r(p, data, data);
  }

  FftEngine(const FftEngine&) = delete;
  FftEngine& operator=(const FftEngine&) = delete;

 private:
  FftEngine() = default;
  ~FftEngine() {
    for (auto& [k, p] : plans_) fftw_destroy_plan(p);
  }

  fftw_plan plan_dft(int n0, int n1, int sign) {
    std::scoped_lock lk(mu_);
    Key key{0, n0, n1, sign};
    auto it = plans_.find(key);
    if (it != plans_.end()) return it->second;
    std::vector<std::complex<double>> buf(static_cast<size_t>(n0) * n1);
    fftw_plan p = fftw_plan_dft_2d(
        n0, n1, reinterpret_cast<fftw_complex*>(buf.data()),
        reinterpret_cast<fftw_complex*>(buf.data()),
        sign < 0 ? FFTW_FORWARD : FFTW_BACKWARD,
        FFTW_ESTIMATE | FFTW_UNALIGNED);
    plans_.emplace(key, p);
    return p;
  }

  fftw_plan plan_r2r(int m0, int m1, fftw_r2r_kind kind) {
    std::scoped_lock lk(mu_);
    Key key{1 + static_cast<int>(kind), m0, m1, 0};
    auto it = plans_.find(key);
    if (it != plans_.end()) return it->second;
    std::vector<double> buf(static_cast<size_t>(m0) * m1);
    fftw_plan p = fftw_plan_r2r_2d(m0, m1, buf.data(), buf.data(), kind, kind,
                                   FFTW_ESTIMATE | FFTW_UNALIGNED);
    plans_.emplace(key, p);
    return p;
  }

  using Key = std::array<int, 4>;
  std::mutex mu_;
  std::map<Key, fftw_plan> plans_;
};

inline bool is_power_of_two(int n) { return n > 0 && (n & (n - 1)) == 0; }

/// Integer frequency for index i on an n-periodic grid (standard DFT order).
inline int dft_freq(int i, int n) { return i <= n / 2 ? i : i - n; }

}  // namespace homogflow
