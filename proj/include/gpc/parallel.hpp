// Copyright 2026 The GPC Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstddef>
#include <exception>
#include <mutex>

#ifdef GPC_HAS_OPENMP
#include <omp.h>
#endif

namespace gpc {

/// Selects between the OpenMP path and the serial reference path. Both paths
/// produce bit-identical results; the serial one is kept for testing and
/// benchmarking.
enum class Execution { serial, parallel };

/// Runs fn(i) for i in [0, n). Work items must write to disjoint outputs.
/// The first exception thrown by any item is rethrown on the calling thread.
template <class Fn>
void for_each_index(Execution exec, std::size_t n, Fn&& fn) {
  if (exec == Execution::serial || n < 2) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::exception_ptr failure;
  std::mutex failure_mutex;
  const auto count = static_cast<std::ptrdiff_t>(n);
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t i = 0; i < count; ++i) {
    try {
      fn(static_cast<std::size_t>(i));
    } catch (...) {
      std::lock_guard lock(failure_mutex);
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
}

inline int max_threads() {
#ifdef GPC_HAS_OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

}  // namespace gpc
