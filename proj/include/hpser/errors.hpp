#pragma once

#include <stdexcept>

namespace hpser {

// Base type for every recoverable failure raised by this library.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// WAV container / codec problems.
struct MalformedHeader : Error { using Error::Error; };
struct UnsupportedEncoding : Error { using Error::Error; };
struct TruncatedData : Error { using Error::Error; };

// Windowing / STFT.
struct DegenerateWindow : Error { using Error::Error; };
struct EmptySignal : Error { using Error::Error; };
struct GeometryMismatch : Error { using Error::Error; };

// Mel filterbank / MFCC.
struct EmptyBand : Error { using Error::Error; };
struct AlreadyLogScaled : Error { using Error::Error; };
struct NotLogScaled : Error { using Error::Error; };
struct TooManyCoefficients : Error { using Error::Error; };

// Harmonic/percussive decomposition.
struct EvenKernel : Error { using Error::Error; };
struct LogScaledInput : Error { using Error::Error; };

// Dataset handling and training.
struct MissingClass : Error { using Error::Error; };
struct EmptyPartition : Error { using Error::Error; };
struct NoFilesFound : Error { using Error::Error; };
struct UnknownLabelCode : Error { using Error::Error; };

// Serialized artifacts.
struct CorruptFile : Error { using Error::Error; };
struct VersionMismatch : Error { using Error::Error; };
struct WrongDimension : Error { using Error::Error; };

} // namespace hpser
