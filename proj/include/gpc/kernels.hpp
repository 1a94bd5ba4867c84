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
#include <span>

// Dense row-major kernels. Every kernel has a serial reference and an OpenMP
// variant; the dispatching overload picks the parallel one above a work
// threshold. Each output element is accumulated in the same order on both
// paths, so results are bit-identical.
namespace gpc::kernels {

/// Work (m * k * n multiply-adds) above which matmul goes parallel.
inline constexpr std::size_t kParallelMatmulWork = 1u << 15;

namespace serial {
// c[m x n] = a[m x k] * b[k x n]
void matmul(std::span<const double> a, std::span<const double> b, std::span<double> c,
            std::size_t m, std::size_t k, std::size_t n);
}  // namespace serial

namespace parallel {
void matmul(std::span<const double> a, std::span<const double> b, std::span<double> c,
            std::size_t m, std::size_t k, std::size_t n);
}  // namespace parallel

void matmul(std::span<const double> a, std::span<const double> b, std::span<double> c,
            std::size_t m, std::size_t k, std::size_t n);

}  // namespace gpc::kernels
