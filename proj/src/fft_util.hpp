// FFTW planning helpers shared by the restriction sources.
#pragma once

#include <algorithm>
#include <mutex>

namespace polylab::detail {

// Plan creation and destruction in FFTW are not thread-safe; execution is.
inline std::mutex& fftw_mutex() {
  static std::mutex m;
  return m;
}

// Smallest size >= n with prime factors 2, 3, 5, 7.
inline int nice_size(int n) {
  for (int m = std::max(n, 1);; ++m) {
    int r = m;
    for (int p : {2, 3, 5, 7})
      while (r % p == 0) r /= p;
    if (r == 1) return m;
  }
}

}  // namespace polylab::detail
