#pragma once

#include <stdexcept>
#include <string>

namespace tmpose {

/// Base class for every error the library throws.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

#define TMPOSE_DEFINE_ERROR(Name)                  \
    class Name : public Error {                    \
    public:                                        \
        using Error::Error;                        \
    }

TMPOSE_DEFINE_ERROR(DegenerateInput);
TMPOSE_DEFINE_ERROR(EmptyCloud);
TMPOSE_DEFINE_ERROR(EmptyMask);
TMPOSE_DEFINE_ERROR(TooFewFeatures);
TMPOSE_DEFINE_ERROR(DegenerateCluster);
TMPOSE_DEFINE_ERROR(EmptySegment);
TMPOSE_DEFINE_ERROR(VersionMismatch);
TMPOSE_DEFINE_ERROR(CorruptFile);
TMPOSE_DEFINE_ERROR(IoError);
TMPOSE_DEFINE_ERROR(ConfigError);

#undef TMPOSE_DEFINE_ERROR

}  // namespace tmpose
