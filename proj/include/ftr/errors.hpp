#pragma once

#include <stdexcept>
#include <string>

namespace ftr {

/// Base class for all library errors.
class FtrError : public std::runtime_error {
public:
  explicit FtrError(const std::string& msg) : std::runtime_error(msg) {}
};

// Scenario ingestion
class SchemaError : public FtrError {
public:
  using FtrError::FtrError;
};
class TopologyError : public FtrError {
public:
  using FtrError::FtrError;
};
class IoError : public FtrError {
public:
  using FtrError::FtrError;
};

// Network / dispatch
class SingularNetworkError : public FtrError {
public:
  using FtrError::FtrError;
};
class InfeasibleDispatchError : public FtrError {
public:
  using FtrError::FtrError;
};
class UnboundedError : public FtrError {
public:
  using FtrError::FtrError;
};
class ZeroDispatchError : public FtrError {
public:
  using FtrError::FtrError;
};

// Risk / contribution metrics
class DegenerateWeightsError : public FtrError {
public:
  using FtrError::FtrError;
};
class DegenerateChanceError : public FtrError {
public:
  using FtrError::FtrError;
};
class ZeroPerturbationError : public FtrError {
public:
  using FtrError::FtrError;
};

// Auction / equilibrium
class InfeasibleInstanceError : public FtrError {
public:
  using FtrError::FtrError;
};
class InconsistentBoundsError : public FtrError {
public:
  using FtrError::FtrError;
};
class SolverError : public FtrError {
public:
  using FtrError::FtrError;
};
class NonconvergenceError : public FtrError {
public:
  using FtrError::FtrError;
};

}  // namespace ftr
