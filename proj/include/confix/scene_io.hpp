#pragma once

#include <filesystem>
#include <vector>

#include "confix/camera.hpp"
#include "confix/gaussian.hpp"

namespace confix {

/// Reads a binary little-endian PLY with the usual 3DGS vertex layout
/// (x y z, f_dc_0..2 as RGB, opacity as logit, scale_0..2 as log-scale,
/// rot_0..3 as w x y z). Properties may appear in any order; unknown scalar
/// properties are skipped.
GaussianScene load_scene(const std::filesystem::path& path);

/// Writes the scene as float32 properties in the layout load_scene expects.
void save_scene(const GaussianScene& scene, const std::filesystem::path& path);

/// JSON array of {view_id, is_support, width, height, K[9], R[9], t[3]};
/// matrices row-major. Every camera is validated.
std::vector<Camera> load_cameras(const std::filesystem::path& path);
void save_cameras(const std::vector<Camera>& cams, const std::filesystem::path& path);

}  // namespace confix
