#pragma once

#include "avatar/core/mesh.h"

#include <string>

namespace avatar::core {

// Wavefront OBJ with per-corner texture coordinates (f v/vt triplets).
void saveOBJ(const std::string& path, const TriMesh& mesh);
TriMesh loadOBJ(const std::string& path);

}  // namespace avatar::core
