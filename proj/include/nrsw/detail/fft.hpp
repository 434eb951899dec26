#pragma once

#include <fftw3.h>

#include <complex>
#include <map>
#include <mutex>
#include <stdexcept>
#include <tuple>
#include <vector>

namespace nrsw::detail {

// FFTW's planner is not thread-safe; executing distinct plans is.
inline std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

class FftPlanCache {
public:
  ~FftPlanCache() {
    std::lock_guard<std::mutex> lock(fftw_planner_mutex());
    for (auto& [key, plan] : plans_) fftw_destroy_plan(plan);
  }

  // Plans are created with FFTW_ESTIMATE so the chosen algorithm depends
  // only on the transform size, never on runtime measurement: repeated
  // runs produce bit-identical output. FFTW_UNALIGNED lets one cached
  // plan serve any caller-owned buffer via the new-array interface.
  fftw_plan get(int n0, int n1, int sign) {
    const auto key = std::make_tuple(n0, n1, sign);
    auto it = plans_.find(key);
    if (it != plans_.end()) return it->second;
    std::vector<std::complex<double>> scratch(
        static_cast<std::size_t>(n0) * static_cast<std::size_t>(n1));
    fftw_complex* p = reinterpret_cast<fftw_complex*>(scratch.data());
    fftw_plan plan;
    {
      std::lock_guard<std::mutex> lock(fftw_planner_mutex());
      plan = fftw_plan_dft_2d(n0, n1, p, p, sign,
                              FFTW_ESTIMATE | FFTW_UNALIGNED);
    }
    if (!plan) throw std::runtime_error("FFT plan creation failed");
    plans_.emplace(key, plan);
    return plan;
  }

private:
  std::map<std::tuple<int, int, int>, fftw_plan> plans_;
};

// In-place 2-D complex transform, unnormalized, single-threaded.
// sign: FFTW_FORWARD (-1) or FFTW_BACKWARD (+1).
inline void fft2_inplace(std::complex<double>* data, int n0, int n1,
                         int sign) {
  thread_local FftPlanCache cache;
  fftw_plan plan = cache.get(n0, n1, sign);
  fftw_complex* p = reinterpret_cast<fftw_complex*>(data);
  fftw_execute_dft(plan, p, p);
}

inline void fft2_inplace(std::vector<std::complex<double>>& data, int n0,
                         int n1, int sign) {
  if (data.size() != static_cast<std::size_t>(n0) * static_cast<std::size_t>(n1))
    throw std::invalid_argument("fft2_inplace: size mismatch");
  fft2_inplace(data.data(), n0, n1, sign);
}

// Smallest even integer >= n whose prime factors are all <= 7; FFTW has
// fast codelets for these sizes.
inline int next_fast_even(int n) {
  if (n < 2) n = 2;
  if (n % 2) ++n;
  for (;; n += 2) {
    int m = n;
    for (int p : {2, 3, 5, 7})
      while (m % p == 0) m /= p;
    if (m == 1) return n;
  }
}

}  // namespace nrsw::detail
