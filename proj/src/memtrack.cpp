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

#include "pmaf/memtrack.hpp"

#include <algorithm>

namespace pmaf::memtrack
{

Counters& counters() noexcept
{
    thread_local Counters c;
    return c;
}

void on_allocate(std::size_t bytes) noexcept
{
    auto& c = counters();
    c.live += bytes;
    c.peak = std::max(c.peak, c.live);
}

void on_deallocate(std::size_t bytes) noexcept
{
    auto& c = counters();
    c.live = bytes > c.live ? 0 : c.live - bytes;
}

PeakScope::PeakScope() noexcept
{
    auto& c = counters();
    base_live_ = c.live;
    saved_peak_ = c.peak;
    c.peak = c.live;
}

PeakScope::~PeakScope()
{
    auto& c = counters();
    c.peak = std::max(c.peak, saved_peak_);
}

std::size_t PeakScope::peak_bytes() const noexcept
{
    const auto& c = counters();
    return c.peak > base_live_ ? c.peak - base_live_ : 0;
}

}  // namespace pmaf::memtrack
