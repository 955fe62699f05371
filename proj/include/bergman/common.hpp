#pragma once

#include <atomic>
#include <cmath>
#include <complex>
#include <cstdlib>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace bergman {

using cplx = std::complex<double>;

inline constexpr double kPi = 3.14159265358979323846264338327950288;

// Error taxonomy used across the library.  The CLI maps ConfigError to
// exit status 2 and everything else to exit status 3.
enum class ErrorKind {
  Config,      // bad key, bad value, violated precondition from user input
  Domain,      // point outside the chart of the model
  Accuracy,    // quadrature/truncation failed to meet its tolerance
  Resource,    // request exceeds memory/size budget
  Numeric,     // internal numerical failure (non-finite value, failed solve)
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& msg)
      : std::runtime_error(msg), kind_(kind) {}
  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind k, const std::string& msg) {
  throw Error(k, msg);
}

// Neumaier compensated accumulator.  Summation order is fixed by the
// caller; grams at large tensor powers mix magnitudes across ~15 decades.
class NeumaierSum {
 public:
  void add(double x) {
    double t = s_ + x;
    if (std::abs(s_) >= std::abs(x))
      c_ += (s_ - t) + x;
    else
      c_ += (x - t) + s_;
    s_ = t;
  }
  double value() const { return s_ + c_; }

 private:
  double s_ = 0.0;
  double c_ = 0.0;
};

class NeumaierSumC {
 public:
  void add(cplx z) {
    re_.add(z.real());
    im_.add(z.imag());
  }
  cplx value() const { return {re_.value(), im_.value()}; }

 private:
  NeumaierSum re_, im_;
};

// Thread cap: BERGMAN_THREADS, else hardware concurrency.
inline unsigned max_threads() {
  if (const char* env = std::getenv("BERGMAN_THREADS")) {
    long v = std::strtol(env, nullptr, 10);
    if (v >= 1) return static_cast<unsigned>(v);
  }
  unsigned hw = std::thread::hardware_concurrency();
  return hw ? hw : 1;
}

// Deterministic parallel map-reduce: the work is split into a chunk grid
// that depends only on n, never on the thread count, and chunk results are
// combined in chunk-index order.  Results are bit-stable for any thread
// count.
template <typename Body>
void parallel_chunks(std::size_t n, std::size_t n_chunks, Body&& body) {
  if (n == 0) return;
  if (n_chunks == 0) n_chunks = 1;
  if (n_chunks > n) n_chunks = n;
  std::size_t per = (n + n_chunks - 1) / n_chunks;
  unsigned nt = std::min<unsigned>(max_threads(), static_cast<unsigned>(n_chunks));
  if (nt <= 1) {
    for (std::size_t c = 0; c < n_chunks; ++c) {
      std::size_t lo = c * per, hi = std::min(n, lo + per);
      if (lo < hi) body(c, lo, hi);
    }
    return;
  }
  std::vector<std::thread> pool;
  std::atomic<std::size_t> next{0};
  for (unsigned t = 0; t < nt; ++t) {
    pool.emplace_back([&]() {
      for (;;) {
        std::size_t c = next.fetch_add(1);
        if (c >= n_chunks) break;
        std::size_t lo = c * per, hi = std::min(n, lo + per);
        if (lo < hi) body(c, lo, hi);
      }
    });
  }
  for (auto& th : pool) th.join();
}

}  // namespace bergman
