#include "lfo/parallel.hpp"

#include <atomic>
#include <cstdlib>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace lfo::par {

namespace {
std::atomic<bool> g_reference{false};
std::atomic<int> g_threads{0};

int hardware_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

int env_cap() {
  const char* v = std::getenv("LFO_THREADS");
  if (v == nullptr) return 0;
  const int n = std::atoi(v);
  return n > 0 ? n : 0;
}
}  // namespace

void set_reference(bool on) { g_reference.store(on); }
bool reference() { return g_reference.load(); }

void set_threads(int n) { g_threads.store(n < 0 ? 0 : n); }

int threads() {
  if (reference()) return 1;
  int n = g_threads.load();
  if (n == 0) n = env_cap();
  if (n == 0) n = hardware_threads();
  return n < 1 ? 1 : n;
}

}  // namespace lfo::par
