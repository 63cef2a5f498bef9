#pragma once

namespace heatrec {

inline constexpr const char* kVersion = "0.1.0";
inline constexpr int kCheckpointFormatVersion = 1;
inline constexpr int kManifestFormatVersion = 1;

}  // namespace heatrec
