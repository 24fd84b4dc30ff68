/*
 * Copyright 2026 The pmaf Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

// Byte accounting for the buffers owned by DenseMatrix / DenseVector /
// DenseTensor. Counters are thread-local, so concurrent workers measure
// their own math paths only.

#include <cstddef>
#include <memory>
#include <new>

namespace pmaf::memtrack
{

struct Counters
{
    std::size_t live = 0;
    std::size_t peak = 0;
};

Counters& counters() noexcept;

void on_allocate(std::size_t bytes) noexcept;
void on_deallocate(std::size_t bytes) noexcept;

// Measures the peak number of bytes allocated on this thread while the scope
// is alive, relative to what was live when it was opened.
class PeakScope
{
   public:
    PeakScope() noexcept;
    ~PeakScope();

    PeakScope(const PeakScope&) = delete;
    PeakScope& operator=(const PeakScope&) = delete;

    std::size_t peak_bytes() const noexcept;

   private:
    std::size_t base_live_;
    std::size_t saved_peak_;
};

template <typename T>
struct TrackingAllocator
{
    using value_type = T;

    TrackingAllocator() noexcept = default;
    template <typename U>
    TrackingAllocator(const TrackingAllocator<U>&) noexcept
    {
    }

    T* allocate(std::size_t n)
    {
        T* p = std::allocator<T>{}.allocate(n);
        on_allocate(n * sizeof(T));
        return p;
    }

    void deallocate(T* p, std::size_t n) noexcept
    {
        on_deallocate(n * sizeof(T));
        std::allocator<T>{}.deallocate(p, n);
    }

    template <typename U>
    bool operator==(const TrackingAllocator<U>&) const noexcept
    {
        return true;
    }
};

}  // namespace pmaf::memtrack
