#pragma once

#include <stdexcept>
#include <string>

namespace dan {

/// Base class for every error the library raises on purpose. Catching
/// dan::Error separates contract violations from genuine std:: failures.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// -- shape / input contract violations --------------------------------------

class DimensionMismatch : public Error {
public:
    using Error::Error;
};

class EmptyInput : public Error {
public:
    using Error::Error;
};

class ClassIndexOutOfRange : public Error {
public:
    using Error::Error;
};

class NonPositiveLambda : public Error {
public:
    using Error::Error;
};

class NegativeInput : public Error {
public:
    using Error::Error;
};

class ImageTooSmall : public Error {
public:
    using Error::Error;
};

class BlockTooLarge : public Error {
public:
    using Error::Error;
};

class GridTooFine : public Error {
public:
    using Error::Error;
};

class LayerWidthOverflow : public Error {
public:
    using Error::Error;
};

// -- numerical failures ------------------------------------------------------

class NotPositiveDefinite : public Error {
public:
    using Error::Error;
};

class NoConvergence : public Error {
public:
    using Error::Error;
};

class DegenerateData : public Error {
public:
    using Error::Error;
};

// -- persistence / file format ------------------------------------------------

class IoError : public Error {
public:
    using Error::Error;
};

class BadMagic : public IoError {
public:
    using IoError::IoError;
};

class TruncatedFile : public IoError {
public:
    using IoError::IoError;
};

class CountMismatch : public IoError {
public:
    using IoError::IoError;
};

class BadRecordSize : public IoError {
public:
    using IoError::IoError;
};

class VersionUnsupported : public IoError {
public:
    using IoError::IoError;
};

class ChecksumMismatch : public IoError {
public:
    using IoError::IoError;
};

// -- CLI / configuration -------------------------------------------------------

class ConfigError : public Error {
public:
    using Error::Error;
};

}  // namespace dan
