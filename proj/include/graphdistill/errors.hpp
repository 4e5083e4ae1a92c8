#ifndef GRAPHDISTILL_ERRORS_HPP
#define GRAPHDISTILL_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace gd {

// Malformed or inconsistent input data (dataset files, checkpoints).
struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Numeric failure: eigensolver non-convergence, divergent training,
// non-finite intermediates.
struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

} // namespace gd

#endif
