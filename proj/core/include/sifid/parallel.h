// Copyright 2026 The SI-FID Authors
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef SIFID_PARALLEL_H_
#define SIFID_PARALLEL_H_

#include <cstddef>
#include <functional>

namespace sifid {

// Runs fn(i) for i in [0, n) on up to `jobs` threads. Work items must write
// to disjoint outputs; callers reduce in index order afterwards. The first
// exception thrown by any item is rethrown on the calling thread.
void ParallelFor(std::size_t n, int jobs,
                 const std::function<void(std::size_t)>& fn);

}  // namespace sifid

#endif  // SIFID_PARALLEL_H_
