#include "frontpage/jsonl.hpp"

#include <fstream>
#include <sstream>

#include "frontpage/error.hpp"

namespace frontpage::jsonl {

std::string read_text(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(Errc::io_error, "cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text(const std::filesystem::path& path, std::string_view text) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(Errc::io_error, "cannot write " + path.string());
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!out) throw Error(Errc::io_error, "write failed for " + path.string());
}

std::vector<json> parse(std::string_view text, std::string_view origin) {
    std::vector<json> out;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        std::size_t nl = text.find('\n', pos);
        if (nl == std::string_view::npos) nl = text.size();
        std::string_view line = text.substr(pos, nl - pos);
        ++line_no;
        pos = nl + 1;
        if (line.find_first_not_of(" \t\r") == std::string_view::npos) {
            if (nl == text.size()) break;
            continue;
        }
        try {
            out.push_back(json::parse(line));
        } catch (const json::parse_error& e) {
            throw Error(Errc::malformed_document,
                        std::string(origin) + ":" + std::to_string(line_no) + ": " + e.what());
        }
        if (nl == text.size()) break;
    }
    return out;
}

std::vector<json> read(const std::filesystem::path& path) {
    return parse(read_text(path), path.string());
}

std::string dump(const std::vector<json>& records) {
    std::string out;
    for (const auto& r : records) {
        out += r.dump(-1, ' ', false, json::error_handler_t::replace);
        out += '\n';
    }
    return out;
}

void write(const std::filesystem::path& path, const std::vector<json>& records) {
    write_text(path, dump(records));
}

json read_document(const std::filesystem::path& path) {
    const std::string text = read_text(path);
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        throw Error(Errc::malformed_document, path.string() + ": " + e.what());
    }
}

void write_document(const std::filesystem::path& path, const json& doc) {
    write_text(path, doc.dump(2, ' ', false, json::error_handler_t::replace) + "\n");
}

}  // namespace frontpage::jsonl
