#include "hoidet/util.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>

namespace hoidet {

std::string fnv1a64_hex(const void* data, std::size_t n) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(fnv1a64(data, n)));
  return std::string(buf);
}

std::string hash_file_hex(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  check(bool(f), "cannot open " + path.string() + " for hashing");
  std::uint64_t h = 0xcbf29ce484222325ULL;
  char buf[65536];
  while (f) {
    f.read(buf, sizeof(buf));
    h = fnv1a64(buf, std::size_t(f.gcount()), h);
  }
  char out[17];
  std::snprintf(out, sizeof(out), "%016llx", static_cast<unsigned long long>(h));
  return std::string(out);
}

void parallel_for(int n, int threads, const std::function<void(int)>& fn) {
  if (n <= 0) return;
  const int workers = std::max(1, std::min(threads, n));
  if (workers == 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::exception_ptr error;
  std::vector<std::thread> pool;
  const int chunk = (n + workers - 1) / workers;
  for (int t = 0; t < workers; ++t) {
    const int lo = t * chunk, hi = std::min(n, lo + chunk);
    pool.emplace_back([&, lo, hi]() {
      try {
        for (int i = lo; i < hi; ++i) fn(i);
      } catch (...) {
        if (!error) error = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace hoidet
