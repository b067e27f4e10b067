#pragma once

#include <stdexcept>
#include <string>

namespace mbcal {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// geometry
struct DegenerateCameras : Error { using Error::Error; };
struct DegenerateLine : Error { using Error::Error; };
struct IllConditioned : Error { using Error::Error; };
struct NotConcurrent : Error { using Error::Error; };
struct DegeneratePencil : Error { using Error::Error; };

// silhouette
struct FormatError : Error { using Error::Error; };
struct EmptyMask : Error { using Error::Error; };
struct DegenerateHull : Error { using Error::Error; };

// barcode
struct DimensionMismatch : Error { using Error::Error; };
struct LengthMismatch : Error { using Error::Error; };

// matcher / estimator
struct NotEnoughFrames : Error { using Error::Error; };
struct NotEnoughCandidates : Error { using Error::Error; };
struct AllDegenerate : Error { using Error::Error; };
struct InsufficientPoints : Error { using Error::Error; };

// synth / bench
struct InvalidSpec : Error { using Error::Error; };
struct NoFrontierPoints : Error { using Error::Error; };
struct NoData : Error { using Error::Error; };

}  // namespace mbcal
