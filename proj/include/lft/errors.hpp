#pragma once

#include <stdexcept>
#include <string>

namespace lft {

// Base class for everything this library throws on purpose.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct InvalidInputError : Error { using Error::Error; };     // bad values (non-finite fields, geometry mismatch)
struct ShapeError : Error { using Error::Error; };            // tensor shape incompatibility
struct ConfigError : Error { using Error::Error; };           // bad configuration / unknown selector / schema violation
struct NumericRangeError : Error { using Error::Error; };     // overflow-prone arguments (e.g. |s2| > 700)
struct DegenerateBatchError : Error { using Error::Error; };  // batchnorm with <2 rows, all-(-inf) importance weights
struct TrainingDivergenceError : Error { using Error::Error; };
struct TrajectoryDivergenceError : Error { using Error::Error; };
struct TuningError : Error { using Error::Error; };           // HMC acceptance collapsed
struct InvalidProposalError : Error { using Error::Error; };  // flow-MH proposal without log_q
struct DegenerateSeriesError : Error { using Error::Error; }; // zero-variance observable series
struct UndefinedLengthError : Error { using Error::Error; };  // every arcosh term out of domain
struct FitDomainError : Error { using Error::Error; };        // no positive correlator values in the fit window
struct InsufficientDataError : Error { using Error::Error; };
struct IoError : Error { using Error::Error; };               // file format / version problems

} // namespace lft
