#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace hypercloud {

// Base for all toolkit errors. code() is the stable machine-parsable
// identifier printed by the CLI; exit_code() feeds the process status
// (3 = data error, 4 = numeric failure).
class Error : public std::runtime_error {
public:
    Error(std::string code, const std::string& msg, int exit_code)
        : std::runtime_error(code + ": " + msg), code_(std::move(code)), exit_(exit_code) {}

    const std::string& code() const noexcept { return code_; }
    int exit_code() const noexcept { return exit_; }

private:
    std::string code_;
    int exit_;
};

struct DataError : Error {
    DataError(std::string code, const std::string& msg) : Error(std::move(code), msg, 3) {}
};

struct NumericError : Error {
    NumericError(std::string code, const std::string& msg) : Error(std::move(code), msg, 4) {}
};

#define HYPERCLOUD_DATA_ERROR(Name) \
    struct Name : DataError {       \
        explicit Name(const std::string& msg) : DataError(#Name, msg) {} \
    }
#define HYPERCLOUD_NUMERIC_ERROR(Name) \
    struct Name : NumericError {       \
        explicit Name(const std::string& msg) : NumericError(#Name, msg) {} \
    }

// hypercube
HYPERCLOUD_DATA_ERROR(BadMagic);
HYPERCLOUD_DATA_ERROR(DimMismatch);
HYPERCLOUD_DATA_ERROR(NonFinite);
HYPERCLOUD_DATA_ERROR(IoFailure);
HYPERCLOUD_DATA_ERROR(EmptyCube);
HYPERCLOUD_DATA_ERROR(TileTooLarge);
HYPERCLOUD_DATA_ERROR(BandOutOfRange);
HYPERCLOUD_DATA_ERROR(EmptyInput);
HYPERCLOUD_DATA_ERROR(BadLabel);

// bandselect
HYPERCLOUD_DATA_ERROR(TooFewSamples);
HYPERCLOUD_NUMERIC_ERROR(NonConvergence);

// nn_core
HYPERCLOUD_DATA_ERROR(InputTooShort);
HYPERCLOUD_DATA_ERROR(ExtentTooSmall);
HYPERCLOUD_DATA_ERROR(ShapeMismatch);
HYPERCLOUD_DATA_ERROR(TapeMissing);

// pipeline
HYPERCLOUD_DATA_ERROR(TooFewTiles);
HYPERCLOUD_DATA_ERROR(ChannelMissing);
HYPERCLOUD_NUMERIC_ERROR(NonFiniteLoss);

// metrics
HYPERCLOUD_DATA_ERROR(LengthMismatch);
HYPERCLOUD_DATA_ERROR(EmptyReport);

#undef HYPERCLOUD_DATA_ERROR
#undef HYPERCLOUD_NUMERIC_ERROR

}  // namespace hypercloud
