#include "localsgd/parallel.hpp"

namespace localsgd {

namespace {
std::atomic<unsigned> g_workers{0};
}

void set_default_workers(unsigned workers) { g_workers.store(workers); }

unsigned default_workers() {
  const unsigned w = g_workers.load();
  if (w) return w;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw ? hw : 1;
}

}  // namespace localsgd
