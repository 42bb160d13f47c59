#pragma once

#include <stdexcept>
#include <string>

namespace panosplat {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class InvalidParameterError : public Error {
public:
    using Error::Error;
};

/// Gaussian center coincides with the camera center; the Gaussian is culled for that view.
class GaussianAtCameraError : public Error {
public:
    using Error::Error;
};

/// Point lies on or behind the tangent plane's supporting hemisphere.
class BehindTangentPlaneError : public Error {
public:
    using Error::Error;
};

class InvalidBoundaryError : public Error {
public:
    using Error::Error;
};

class ShapeMismatchError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

class ParseError : public Error {
public:
    using Error::Error;
};

class ValidationError : public Error {
public:
    using Error::Error;
};

/// Data is structurally damaged (truncated body, checksum mismatch).
class IntegrityError : public Error {
public:
    using Error::Error;
};

/// Stored format version cannot be read by this build.
class VersionError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

class TrainingError : public Error {
public:
    using Error::Error;
};

} // namespace panosplat
