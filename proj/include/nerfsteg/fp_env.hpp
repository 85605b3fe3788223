#pragma once

#if defined(__SSE2__)
#include <xmmintrin.h>
#endif

namespace nerfsteg {

/// Flushes subnormal floats to zero for the current thread while alive.
class FlushDenormalsGuard {
 public:
#if defined(__SSE2__)
  FlushDenormalsGuard() : saved_(_mm_getcsr()) { _mm_setcsr(saved_ | 0x8040u); }
  ~FlushDenormalsGuard() { _mm_setcsr(saved_); }
#else
  FlushDenormalsGuard() = default;
#endif
  FlushDenormalsGuard(const FlushDenormalsGuard&) = delete;
  FlushDenormalsGuard& operator=(const FlushDenormalsGuard&) = delete;

 private:
#if defined(__SSE2__)
  unsigned int saved_;
#endif
};

}  // namespace nerfsteg
