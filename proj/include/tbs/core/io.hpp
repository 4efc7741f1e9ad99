#pragma once

#include <string>

#include "json.hpp"

namespace tbs {

// Writes to a sibling temporary file, then renames it over `path`.
// Parent directories are created as needed.
void write_file_atomic(const std::string& path, const std::string& content);
std::string read_file(const std::string& path);

void write_json_atomic(const std::string& path, const nlohmann::json& j);
nlohmann::json read_json(const std::string& path);

}  // namespace tbs
