#pragma once

#include "json.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace llmeval {

using json = nlohmann::json;

/// One JSON value per line. Blank lines are skipped; a malformed line throws SchemaError.
std::vector<json> read_jsonl(const std::filesystem::path& path);

/// Writes via a sibling temp file then renames, so readers never see a partial file.
void write_jsonl(const std::filesystem::path& path, const std::vector<json>& rows);

std::string to_jsonl(const std::vector<json>& rows);

}  // namespace llmeval
