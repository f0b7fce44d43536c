#pragma once

#include <filesystem>
#include <string>

#include "upliftlab/twin_model.hpp"

namespace upliftlab {

inline constexpr int kModelFormatVersion = 1;

// JSON document: format tag, version, arch, dimensions and flat split arrays.
std::string model_to_json(const TwinParams& params);
// Throws std::runtime_error on malformed documents or a version mismatch.
TwinParams model_from_json(const std::string& text);

void save_model(const TwinParams& params, const std::filesystem::path& path);
TwinParams load_model(const std::filesystem::path& path);

}  // namespace upliftlab
