#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace akash {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct EmptyFileError : Error {
    EmptyFileError() : Error("empty file: feature operations require at least one byte") {}
};

struct NumericsError : Error {
    explicit NumericsError(const std::string& where)
        : Error("non-finite value encountered in " + where) {}
};

struct ShapeError : Error {
    explicit ShapeError(const std::string& what) : Error("shape mismatch: " + what) {}
};

struct BatchTooSmallError : Error {
    BatchTooSmallError() : Error("training forward pass needs a batch of at least 2 rows") {}
};

struct CacheMismatchError : Error {
    CacheMismatchError() : Error("forward cache does not match this backward call") {}
};

struct IncompatibleDigestsError : Error {
    IncompatibleDigestsError() : Error("sahash digests have different moduli") {}
};

struct ModelMismatchError : Error {
    ModelMismatchError() : Error("digests were produced by different models") {}
};

struct FormatError : Error {
    std::size_t offset;
    FormatError(const std::string& what, std::size_t off)
        : Error("format error at offset " + std::to_string(off) + ": " + what), offset(off) {}
};

struct NoMutableBytesError : Error {
    NoMutableBytesError() : Error("not enough mutable bits outside protected regions") {}
};

struct RangeError : Error {
    explicit RangeError(const std::string& what) : Error("range error: " + what) {}
};

struct InsufficientDataError : Error {
    explicit InsufficientDataError(const std::string& what)
        : Error("insufficient data: " + what) {}
};

struct AdapterError : Error {
    std::string captured_output;
    AdapterError(const std::string& what, std::string output)
        : Error("external tool adapter: " + what), captured_output(std::move(output)) {}
};

}  // namespace akash
