#pragma once

#include <stdexcept>
#include <string>

namespace mgarch {

/// Bad shapes, out-of-range settings, malformed parameter bundles.
class invalid_input : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Malformed or incomplete input files.
class data_error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Singular matrices, failed optimizations, ill-conditioned information matrices.
class numerical_error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace mgarch
