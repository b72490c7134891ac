#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

namespace frontpage::jsonl {

using nlohmann::json;

// Reads one JSON value per non-blank line. Throws Error(malformed_document)
// naming the offending line.
std::vector<json> read(const std::filesystem::path& path);

std::vector<json> parse(std::string_view text, std::string_view origin = "<memory>");

// Writes one compact record per line, '\n'-terminated. Key order is the
// library's sorted order, so output is byte-stable for equal inputs.
void write(const std::filesystem::path& path, const std::vector<json>& records);

std::string dump(const std::vector<json>& records);

json read_document(const std::filesystem::path& path);

void write_document(const std::filesystem::path& path, const json& doc);

void write_text(const std::filesystem::path& path, std::string_view text);

std::string read_text(const std::filesystem::path& path);

}  // namespace frontpage::jsonl
