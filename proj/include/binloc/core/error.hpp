#pragma once

#include <stdexcept>
#include <string>

namespace binloc {

// Violated precondition or shape contract.
struct contract_error : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// NaN/Inf surfaced by a numeric kernel.
struct numeric_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Bad or missing files, manifests, configs.
struct data_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw contract_error(msg);
}

inline void require_data(bool cond, const std::string& msg) {
  if (!cond) throw data_error(msg);
}

}  // namespace binloc
