#pragma once

#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

namespace rwre {

/// Runs body(i) for i in [0, count). Each index is processed exactly once and
/// callers write results into slot i, so any reduction done afterwards in
/// index order is independent of the thread count.
template <class Body>
void parallel_for(std::size_t count, int threads, Body&& body) {
  const auto workers = threads < 1 ? std::size_t{1} : static_cast<std::size_t>(threads);
  if (workers == 1 || count < 2) {
    for (std::size_t i = 0; i < count; ++i) body(i);
    return;
  }
  const auto used = workers < count ? workers : count;
  std::vector<std::exception_ptr> errors(used);
  {
    std::vector<std::jthread> pool;
    pool.reserve(used);
    for (std::size_t t = 0; t < used; ++t) {
      pool.emplace_back([&, t] {
        try {
          for (std::size_t i = t; i < count; i += used) body(i);
        } catch (...) {
          errors[t] = std::current_exception();
        }
      });
    }
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace rwre
