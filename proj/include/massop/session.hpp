#pragma once

#include <atomic>
#include <stdexcept>

namespace massop {

/// Session-global configuration: the momentum-space dimension d and the
/// species count N. Both are set once up front (CLI flags, test fixtures);
/// expressions themselves stay dimension-generic through multi-indices.
class Session {
 public:
  static int dimension() { return dim_().load(std::memory_order_relaxed); }
  static int species() { return species_().load(std::memory_order_relaxed); }

  static void set_dimension(int d) {
    if (d < 1 || d > 3) throw std::invalid_argument("dimension must be 1, 2 or 3");
    dim_().store(d, std::memory_order_relaxed);
  }
  static void set_species(int n) {
    if (n < 1) throw std::invalid_argument("species count must be >= 1");
    species_().store(n, std::memory_order_relaxed);
  }

 private:
  static std::atomic<int>& dim_() {
    static std::atomic<int> d{3};
    return d;
  }
  static std::atomic<int>& species_() {
    static std::atomic<int> n{3};
    return n;
  }
};

/// RAII scope guard for tests that need a non-default configuration.
class SessionScope {
 public:
  SessionScope(int dimension, int species)
      : prev_dim_(Session::dimension()), prev_species_(Session::species()) {
    Session::set_dimension(dimension);
    Session::set_species(species);
  }
  ~SessionScope() {
    Session::set_dimension(prev_dim_);
    Session::set_species(prev_species_);
  }
  SessionScope(const SessionScope&) = delete;
  SessionScope& operator=(const SessionScope&) = delete;

 private:
  int prev_dim_;
  int prev_species_;
};

}  // namespace massop
