#pragma once

#include <stdexcept>
#include <string>

namespace crbsde {

// Error families map onto CLI exit codes: config 2, precondition 3,
// numerical 4, cap 5.
struct error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct config_error : error {
  using error::error;
};

struct precondition_error : error {
  using error::error;
};

struct numerical_error : error {
  using error::error;
};

struct cap_error : error {
  using error::error;
};

}  // namespace crbsde
