#pragma once

#include <fftw3.h>

#include <mutex>

namespace sdp::detail {

// Eigen's FFTW backend plans lazily on first use; FFTW planning is only
// reentrant after this call.
inline void enable_threaded_planning() {
  static std::once_flag flag;
  std::call_once(flag, [] { fftw_make_planner_thread_safe(); });
}

}  // namespace sdp::detail
