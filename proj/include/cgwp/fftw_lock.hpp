#pragma once

#include <mutex>

namespace cgwp {

/// FFTW's planner is not thread-safe; every plan creation and destruction
/// in the library goes through this lock. Plan execution does not.
inline std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

}  // namespace cgwp
