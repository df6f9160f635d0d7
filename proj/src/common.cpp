#include "lumisplat/common.h"
#include "lumisplat/parallel.h"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <iostream>
#include <mutex>
#include <thread>
#include <vector>

namespace lumisplat {

namespace {
std::atomic<bool> gWarningsEnabled{true};
std::atomic<std::size_t> gWarningCount{0};
std::mutex gWarnMutex;
}  // namespace

void warn(const std::string& message) {
  ++gWarningCount;
  if (!gWarningsEnabled) {
    return;
  }
  std::lock_guard<std::mutex> lock(gWarnMutex);
  std::cerr << "warning: " << message << "\n";
}

void setWarningsEnabled(bool enabled) {
  gWarningsEnabled = enabled;
}

std::size_t warningCount() {
  return gWarningCount;
}

std::size_t threadCount() {
  std::size_t n = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("LUMISPLAT_THREADS")) {
    const long cap = std::strtol(env, nullptr, 10);
    if (cap >= 1) {
      n = std::min<std::size_t>(n, static_cast<std::size_t>(cap));
    }
  }
  return n;
}

void parallelFor(std::size_t begin, std::size_t end, const std::function<void(std::size_t)>& body) {
  if (end <= begin) {
    return;
  }
  const std::size_t count = end - begin;
  const std::size_t workers = std::min(threadCount(), count);
  if (workers <= 1) {
    for (std::size_t i = begin; i < end; ++i) {
      body(i);
    }
    return;
  }
  std::atomic<std::size_t> next{begin};
  std::exception_ptr failure;
  std::mutex failureMutex;
  auto run = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= end) {
        return;
      }
      try {
        body(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(failureMutex);
        if (!failure) {
          failure = std::current_exception();
        }
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(workers - 1);
  for (std::size_t w = 1; w < workers; ++w) {
    pool.emplace_back(run);
  }
  run();
  for (auto& t : pool) {
    t.join();
  }
  if (failure) {
    std::rethrow_exception(failure);
  }
}

}  // namespace lumisplat
