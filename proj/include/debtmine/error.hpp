#pragma once

#include <stdexcept>
#include <string>

namespace debtmine {

/// Bad input: malformed files, unknown names, violated preconditions.
class ValidationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A numerical routine could not produce a usable result.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A pipeline stage needs a file an earlier stage should have written.
class MissingArtifactError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace debtmine
