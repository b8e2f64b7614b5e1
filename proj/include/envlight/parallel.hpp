// Copyright 2026 The envlight Authors
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

#include <functional>

namespace envlight {

/// Worker threads for pixel loops: ENVLIGHT_THREADS when set to a positive
/// value, otherwise the hardware concurrency (0 means auto).
int worker_count();

/// Runs fn(i) for i in [0, n) across worker_count() threads. Each index is
/// handled exactly once; callers write only to index-owned output.
void parallel_for(int n, const std::function<void(int)>& fn);

}  // namespace envlight
