#pragma once

#include "avatar/body/rig.h"

#include <filesystem>

namespace avatar::body {

// Versioned "rig/1" JSON schema. Values survive a write/read round trip to
// better than 1e-9 (doubles are serialized losslessly).
void saveRig(const RiggedTemplate& rig, const std::filesystem::path& path);
RiggedTemplate loadRig(const std::filesystem::path& path);

}  // namespace avatar::body
