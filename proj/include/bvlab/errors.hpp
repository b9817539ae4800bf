#ifndef BVLAB_ERRORS_HPP
#define BVLAB_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace bvlab {

/** \brief Bad input or configuration; the CLI maps these to exit code 2. */
struct ValidationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ConfigError : ValidationError {
  using ValidationError::ValidationError;
};

struct InputError : ValidationError {
  using ValidationError::ValidationError;
};

struct DomainError : ValidationError {
  using ValidationError::ValidationError;
};

struct NonIsolatedCriticalLocus : ValidationError {
  using ValidationError::ValidationError;
};

struct NotInIdeal : ValidationError {
  using ValidationError::ValidationError;
};

/** \brief A configured bound was exceeded; exit code 3. */
struct ResourceError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace bvlab

#endif  // BVLAB_ERRORS_HPP
