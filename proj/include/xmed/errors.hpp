#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace xmed {

// Bad user-supplied configuration (regions, plans, file schemas). CLI maps
// this to exit code 2.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A caller violated a documented precondition.
class ContractError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Numerical failure (divergence, no convergence). CLI maps this to exit 3.
class NumericsError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Time integration produced a non-finite value.
class DivergenceError : public NumericsError {
 public:
  DivergenceError(std::uint64_t step, std::int64_t node)
      : NumericsError("integration diverged at step " + std::to_string(step) +
                      ", node " + std::to_string(node)),
        step(step),
        node(node) {}

  std::uint64_t step;
  std::int64_t node;
};

// Analysis stage rejected its input (e.g. tension fit on non-shrinking data).
// CLI maps this to exit 4.
class AnalysisError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace xmed
