#ifndef SPINWG_ERRORS_HPP
#define SPINWG_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace spinwg {

// Exit codes used by the CLI. Exceptions map onto them 1:1.
enum class ExitCode : int {
    ok = 0,
    config = 2,
    solver = 3,
    contract = 4,
    io = 5,
};

// Bad configuration: invalid parameter values, parse failures, cross-field
// constraint violations.
class ConfigError : public std::runtime_error {
  public:
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// Linear-solve failure or per-step residual above the contract tolerance.
class SolverError : public std::runtime_error {
  public:
    explicit SolverError(const std::string& what) : std::runtime_error(what) {}
};

// Violated operation contract: shape mismatches, invalid centers,
// class violations, parity violations, mask violations.
class ContractError : public std::runtime_error {
  public:
    explicit ContractError(const std::string& what) : std::runtime_error(what) {}
};

class IoError : public std::runtime_error {
  public:
    explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

} // namespace spinwg

#endif
