// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace mapgate {

// Base class for everything this library throws.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct InvalidValue : Error { using Error::Error; };
struct DegenerateTrajectory : Error { using Error::Error; };
struct WindowMismatch : Error { using Error::Error; };
struct ShapeMismatch : Error { using Error::Error; };
struct NonFiniteLoss : Error { using Error::Error; };
struct InvalidTemperature : Error { using Error::Error; };
struct GraphCycle : Error { using Error::Error; };
struct EmptyMap : Error { using Error::Error; };
struct HorizonMismatch : Error { using Error::Error; };
struct EmptyInput : Error { using Error::Error; };
struct InvalidSpec : Error { using Error::Error; };
struct IoFailure : Error { using Error::Error; };

// Missing artifacts map to a dedicated CLI exit code.
struct MissingArtifact : Error { using Error::Error; };
struct MissingCheckpoint : MissingArtifact { using MissingArtifact::MissingArtifact; };
struct MissingUpstream : MissingArtifact { using MissingArtifact::MissingArtifact; };

struct ConfigError : Error { using Error::Error; };

}  // namespace mapgate
