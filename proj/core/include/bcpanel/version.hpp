#pragma once

namespace bcpanel {

inline constexpr const char* kVersion = "0.1.0";

// Bumped whenever the on-disk layout of a fit artifact changes.
// Readers refuse artifacts written with a different format version.
inline constexpr int kArtifactFormatVersion = 1;

} // namespace bcpanel
